#include <gtest/gtest.h>

#include <numeric>

#include "test_support.hpp"

using namespace retail;
using retail::testing::data_path;
using retail::testing::ieee33;
using retail::testing::two_bus_data;

namespace {

const Scenario& default_scenario() {
  static const Scenario s = load_scenario(data_path("default.scenario"));
  return s;
}

NetworkCase gas_ice_feeder() { return with_technology(ieee33(), builtin_catalog().at("Gas ICE-power only")); }

HourInputs nominal_hour(double spot = 0.072, double beta = -0.2) { return {{1.0, 1.0, 1.0}, spot, {beta, beta, beta}}; }

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(SolveHour, SingleClassNoDgMatchesClosedForm) {
  const NetworkCase c(two_bus_data(0.01, 0.01, 400.0, 100.0));
  const EquilibriumConfig cfg;
  const HourInputs in{{1.0}, 0.06, {-0.2}};
  const auto eq = solve_hour(c, in, cfg);
  ASSERT_TRUE(eq.converged);
  EXPECT_LE(eq.iterations, 3);
  const auto expected = solve_class("A", {400.0, cfg.markup * 0.06, -0.2}, {0.06, {}});
  EXPECT_NEAR(eq.class_prices[0], expected.price, 1e-12);
  EXPECT_NEAR(eq.decisions[0].profit, expected.profit, 1e-9);
  EXPECT_TRUE(eq.dispatch.p_dg.empty());
  EXPECT_NEAR(eq.dispatch.p_wholesale, eq.phase1_loads[0] + eq.dispatch.total_loss, 1e-9);
}

TEST(SolveHour, InelasticGuardConvergesAtCap) {
  const auto c = gas_ice_feeder();
  EquilibriumConfig cfg;
  const auto eq = solve_hour(c, nominal_hour(0.072, -0.001), cfg);
  ASSERT_TRUE(eq.converged);
  for (std::size_t k = 0; k < eq.decisions.size(); ++k)
    EXPECT_NEAR(eq.class_prices[k], cfg.pricing.price_cap_factor * eq.nominal_prices[k], 1e-12);
}

TEST(SolveHour, RestartFromPerturbedPricesIsStable) {
  const auto c = gas_ice_feeder();
  const EquilibriumConfig cfg;
  const auto eq = solve_hour(c, nominal_hour(), cfg);
  ASSERT_TRUE(eq.converged);
  auto start = eq.state();
  for (auto& p : start.prices) p *= 1.05;
  for (auto& p : start.nominal_prices) p *= 1.05;
  const auto again = solve_hour(c, nominal_hour(), cfg, 0, start);
  ASSERT_TRUE(again.converged);
  for (std::size_t k = 0; k < eq.class_prices.size(); ++k)
    EXPECT_LE(std::abs(again.class_prices[k] - eq.class_prices[k]) / eq.class_prices[k], cfg.price_tol);
}

TEST(SolveHour, ExtraRoundIsFixedPoint) {
  const auto c = with_technology(ieee33(), builtin_catalog().at("Fuel cell-CHP"));
  const EquilibriumConfig cfg;
  for (double spot : {0.05, 0.072, 0.09}) {
    const auto eq = solve_hour(c, nominal_hour(spot), cfg);
    ASSERT_TRUE(eq.converged) << spot;
    const auto round = run_round(c, nominal_hour(spot), eq.state(), cfg);
    const auto prices = round.prices();
    for (std::size_t k = 0; k < prices.size(); ++k)
      EXPECT_LE(std::abs(prices[k] - eq.class_prices[k]) / eq.class_prices[k], cfg.price_tol) << spot;
  }
}

TEST(SolveHour, DispatchAndDecisionsConsistent) {
  const auto c = with_technology(ieee33(), builtin_catalog().at("Gas ICE-CHP"));
  const EquilibriumConfig cfg;
  const auto eq = solve_hour(c, nominal_hour(0.08), cfg);
  ASSERT_TRUE(eq.converged);
  // Availabilities partition the Phase-1 dispatch.
  for (std::size_t i = 0; i < c.dg_units().size(); ++i) {
    double offered = 0.0, bought = 0.0;
    for (const auto& d : eq.decisions) {
      offered += d.availability[i];
      bought += d.p_dg[i];
      EXPECT_LE(d.p_dg[i], d.availability[i] + 1e-9);
    }
    EXPECT_NEAR(offered, eq.dispatch.p_dg[i], 1e-9);
    EXPECT_LE(bought, eq.dispatch.p_dg[i] + 1e-9);
  }
  // Retail loads match the Phase-1 loads up to the price tolerance.
  double total = 0.0;
  for (const auto& d : eq.decisions) total += d.load;
  const double slack = 2.0 * 0.2 * cfg.price_tol * sum(eq.nominal_loads) *
                       (*std::max_element(eq.class_prices.begin(), eq.class_prices.end()) /
                        *std::min_element(eq.nominal_prices.begin(), eq.nominal_prices.end()));
  EXPECT_NEAR(total, sum(eq.phase1_loads), slack);
  // Phase-1 balance and per-class balance.
  EXPECT_NEAR(eq.dispatch.p_wholesale + sum(eq.dispatch.p_dg) - eq.dispatch.total_loss - sum(eq.phase1_loads), 0.0, 1e-2);
  for (const auto& d : eq.decisions) EXPECT_NEAR(d.load, d.p_wholesale + sum(d.p_dg), 1e-6);
}

TEST(SolveHour, DeterministicTrace) {
  const auto c = with_technology(ieee33(), builtin_catalog().at("Microturbine-CHP"));
  const auto a = solve_hour(c, nominal_hour(0.08), {});
  const auto b = solve_hour(c, nominal_hour(0.08), {});
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    EXPECT_EQ(a.trace[k].prices, b.trace[k].prices);
    EXPECT_EQ(a.trace[k].targets, b.trace[k].targets);
  }
}

TEST(SolveHour, UnconvergedIsFlaggedNotHidden) {
  EquilibriumConfig cfg;
  cfg.max_iters = 1;
  const auto eq = solve_hour(gas_ice_feeder(), nominal_hour(), cfg);
  EXPECT_FALSE(eq.converged);
  EXPECT_EQ(eq.iterations, 1);
  EXPECT_EQ(eq.trace.size(), 1u);
  EXPECT_EQ(eq.decisions.size(), 3u);
}

TEST(SolveHour, PhaseFailureCarriesContext) {
  const NetworkCase c(two_bus_data(0.05, 0.0, 1000.0, 0.0));
  try {
    solve_hour(c, {{8.0}, 0.06, {-0.2}}, {}, 5);
    FAIL() << "expected a solver error";
  } catch (const SolverError& e) {
    EXPECT_NE(std::string(e.what()).find("hour 5, iteration 1"), std::string::npos) << e.what();
  }
}

TEST(SolveHour, ConfigValidated) {
  EquilibriumConfig cfg;
  cfg.price_tol = 0.0;
  EXPECT_THROW(solve_hour(gas_ice_feeder(), nominal_hour(), cfg), ValidationError);
  cfg = {};
  cfg.max_iters = 0;
  EXPECT_THROW(solve_hour(gas_ice_feeder(), nominal_hour(), cfg), ValidationError);
  cfg = {};
  cfg.damping = 1.5;
  EXPECT_THROW(solve_hour(gas_ice_feeder(), nominal_hour(), cfg), ValidationError);
}

TEST(SolveDay, FlatScenarioIdenticalHours) {
  const auto s = load_scenario(data_path("flat.scenario"));
  const auto c = prepare_case(ieee33(), s);
  const auto day = solve_day(c, hour_inputs(s, c), s.config);
  ASSERT_EQ(day.hours.size(), 24u);
  EXPECT_FALSE(day.partial);
  for (const auto& h : day.hours) {
    ASSERT_TRUE(h.converged());
    EXPECT_EQ(h.equilibrium->class_prices, day.hours[0].equilibrium->class_prices);
    EXPECT_EQ(h.equilibrium->dispatch.p_dg, day.hours[0].equilibrium->dispatch.p_dg);
  }
}

TEST(SolveDay, ThreadCountDoesNotChangeResults) {
  const auto& s = default_scenario();
  const auto c = prepare_case(ieee33(), s);
  const auto one = solve_day(c, hour_inputs(s, c), s.config, 1);
  const auto three = solve_day(c, hour_inputs(s, c), s.config, 3);
  EXPECT_EQ(one.daily_profit, three.daily_profit);
  EXPECT_EQ(one.mean_price, three.mean_price);
}

TEST(SolveDay, FailingHourRecordedOthersContinue) {
  const NetworkCase c(two_bus_data(0.05, 0.0, 1000.0, 0.0));
  std::vector<HourInputs> hours(24, HourInputs{{0.5}, 0.06, {-0.2}});
  hours[7].load_multipliers = {8.0};
  const auto day = solve_day(c, hours, {});
  EXPECT_TRUE(day.partial);
  EXPECT_FALSE(day.hours[7].ok());
  EXPECT_FALSE(day.hours[7].error.empty());
  for (std::size_t h = 0; h < 24; ++h) {
    if (h != 7) {
      EXPECT_TRUE(day.hours[h].converged()) << h;
    }
  }
  // Aggregates cover the 23 hours that solved.
  EXPECT_NEAR(day.daily_profit[0], 23.0 * day.hours[0].equilibrium->decisions[0].profit, 1e-9);
}

TEST(SolveDay, AggregatesRecomputable) {
  const auto& s = default_scenario();
  const auto c = prepare_case(ieee33(), s);
  auto day = solve_day(c, hour_inputs(s, c), s.config);
  const auto profit = day.daily_profit;
  const auto price = day.mean_price;
  aggregate(day);
  EXPECT_EQ(day.daily_profit, profit);
  EXPECT_EQ(day.mean_price, price);
  EXPECT_EQ(day.technology, "Gas ICE-power only");
}

TEST(SolveDay, ShippedScenarioConvergesUndamped) {
  for (const auto& t : builtin_catalog().rows()) {
    Scenario s = default_scenario();
    s.config.damping = 1.0;
    s.config.auto_damping = false;
    const auto c = with_technology(ieee33(), t);
    const auto day = solve_day(c, hour_inputs(s, c), s.config);
    EXPECT_FALSE(day.partial) << t.name;
  }
}

TEST(SolveDay, OptionVariantsRun) {
  for (int variant = 0; variant < 3; ++variant) {
    Scenario s = default_scenario();
    s.config.wholesale_at_spot = variant == 0;
    s.config.flat_mc = variant == 1;
    s.config.pooled = variant == 2;
    const auto c = with_technology(ieee33(), builtin_catalog().at("Fuel cell-CHP"));
    const auto day = solve_day(c, hour_inputs(s, c), s.config);
    for (const auto& h : day.hours) {
      ASSERT_TRUE(h.ok()) << variant << ": " << h.error;
      for (const auto& d : h.equilibrium->decisions) EXPECT_NEAR(d.load, d.p_wholesale + sum(d.p_dg), 1e-6);
    }
  }
}

TEST(SolveHour, OscillationHalvesDamping) {
  // Highly elastic demand with undamped updates makes the sale price flip
  // around the fixed point.
  const auto c = with_technology(ieee33(), builtin_catalog().at("Gas ICE-CHP"));
  EquilibriumConfig cfg;
  cfg.damping = 1.0;
  const HourInputs in{{1.0, 1.0, 1.0}, 0.09, {-1.0, -1.0, -1.0}};
  const auto eq = solve_hour(c, in, cfg);
  EXPECT_TRUE(eq.converged);
  EXPECT_TRUE(eq.damping_reduced);
  EXPECT_LT(eq.damping, 1.0);
  EXPECT_EQ(eq.trace.front().damping, 1.0);
  EXPECT_EQ(eq.trace.back().damping, eq.damping);
}
