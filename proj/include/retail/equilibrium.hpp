#pragma once

// Alternates distribution-cost dispatch and retailer pricing until the class
// sale prices stop moving.
//
// One round, from class prices p and nominal prices p_N:
//   1. class loads  L_c = demand(p_c)
//   2. dispatch     solve_phase1 at those loads and prices
//   3. DG offers    each unit's dispatch split over classes by load share
//   4. p_N          markup * least-cost unit supply cost at nominal load
//   5. pricing      solve_class per class -> new prices
// The first round starts from p = spot, p_N = markup * spot. Rounds repeat
// until successive sale prices agree to price_tol.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "retail/dispatch.hpp"
#include "retail/error.hpp"
#include "retail/network.hpp"
#include "retail/pricing.hpp"

namespace retail {

struct EquilibriumConfig {
  double price_tol = 1e-4;  // max relative price change
  int max_iters = 50;
  double damping = 0.5;
  bool auto_damping = true;  // halve damping when a price oscillates
  double markup = 1.1;
  bool demand_floor = true;
  bool wholesale_at_spot = false;  // price P_W at spot in dispatch
  bool flat_mc = false;            // DG sold at its marginal cost at dispatch
  bool pooled = false;             // classes share DG capacity first-come
  PricingOptions pricing;
  DispatchOptions dispatch;
};

inline void validate_config(const EquilibriumConfig& c) {
  if (!(c.price_tol > 0.0)) throw ValidationError("price_tol must be > 0");
  if (c.max_iters < 1) throw ValidationError("max_iters must be >= 1");
  if (!(c.damping > 0.0 && c.damping <= 1.0)) throw ValidationError("damping must lie in (0, 1]");
  if (!(c.markup > 0.0)) throw ValidationError("markup must be > 0");
  if (!(c.pricing.price_cap_factor > 1.0)) throw ValidationError("price cap factor must be > 1");
}

struct HourInputs {
  std::vector<double> load_multipliers;  // per class
  double spot_price = 0.0;               // $/kWh
  std::vector<double> betas;             // per class
};

/// Loop state: what the next round takes as input.
struct PriceState {
  std::vector<double> prices;
  std::vector<double> nominal_prices;
};

struct RoundResult {
  std::vector<double> phase1_loads;
  DispatchResult dispatch;
  std::vector<SupplyTerms> supply;
  std::vector<double> nominal_prices;
  std::vector<RetailerDecision> decisions;

  std::vector<double> prices() const {
    std::vector<double> p;
    for (const auto& d : decisions) p.push_back(d.price);
    return p;
  }
};

struct IterationRecord {
  int iteration = 0;
  std::vector<double> prices;   // input to the round
  std::vector<double> targets;  // pricing output of the round
  double residual = 0.0;        // relative change of targets vs. previous round
  double input_gap = 0.0;       // relative difference between prices and targets
  double damping = 0.0;
  double p_dg_total = 0.0;
  double p_wholesale = 0.0;
  double loss = 0.0;
};

struct HourlyEquilibrium {
  int hour = 0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> class_prices;
  std::vector<double> nominal_prices;
  std::vector<double> nominal_loads;
  std::vector<double> phase1_loads;
  DispatchResult dispatch;
  std::vector<SupplyTerms> supply;
  std::vector<RetailerDecision> decisions;
  std::vector<IterationRecord> trace;
  double damping = 0.0;
  bool damping_reduced = false;
  double spot_price = 0.0;

  PriceState state() const { return {class_prices, nominal_prices}; }
};

namespace detail {

inline void check_hour_inputs(const NetworkCase& c, const HourInputs& in) {
  const auto n = c.classes().size();
  if (in.load_multipliers.size() != n) throw ValidationError("hour inputs need one load multiplier per class");
  if (in.betas.size() != n) throw ValidationError("hour inputs need one elasticity per class");
  if (!(in.spot_price > 0.0)) throw ValidationError("spot price must be > 0");
}

inline DemandModel demand_model(double load_nominal, double price_nominal, double beta, const EquilibriumConfig& cfg) {
  return {load_nominal, price_nominal, beta, cfg.demand_floor};
}

}  // namespace detail

/// One dispatch + pricing round from `state`.
inline RoundResult run_round(const NetworkCase& c, const HourInputs& in, const PriceState& state,
                             const EquilibriumConfig& cfg) {
  detail::check_hour_inputs(c, in);
  const auto n = c.classes().size();
  const auto& units = c.dg_units();
  const auto nominal = class_nominal_loads(c, in.load_multipliers);

  RoundResult r;
  r.phase1_loads.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    r.phase1_loads[k] = demand(detail::demand_model(nominal[k], state.nominal_prices[k], in.betas[k], cfg), state.prices[k]);

  std::vector<double> dispatch_prices = cfg.wholesale_at_spot ? std::vector<double>(n, in.spot_price) : state.prices;
  r.dispatch = solve_phase1({c, r.phase1_loads, dispatch_prices}, cfg.dispatch);

  const double total = std::accumulate(r.phase1_loads.begin(), r.phase1_loads.end(), 0.0);
  r.supply.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double share = total > 0.0 ? r.phase1_loads[k] / total : 1.0 / static_cast<double>(n);
    r.supply[k].spot_price = in.spot_price;
    for (std::size_t i = 0; i < units.size(); ++i) {
      const double avail = r.dispatch.p_dg[i] * share;
      r.supply[k].offers.push_back(cfg.flat_mc ? flat_offer(units[i], avail, r.dispatch.p_dg[i])
                                               : curve_offer(units[i], avail));
    }
  }

  r.nominal_prices.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    r.nominal_prices[k] = nominal_price(unit_supply_cost(nominal[k], r.supply[k]), cfg.markup);

  if (cfg.pooled) {
    std::vector<PooledClass> classes;
    for (std::size_t k = 0; k < n; ++k)
      classes.push_back({c.classes()[k], detail::demand_model(nominal[k], r.nominal_prices[k], in.betas[k], cfg)});
    std::vector<DgOffer> capacity;
    for (std::size_t i = 0; i < units.size(); ++i)
      capacity.push_back(cfg.flat_mc ? flat_offer(units[i], r.dispatch.p_dg[i], r.dispatch.p_dg[i])
                                     : curve_offer(units[i], r.dispatch.p_dg[i]));
    r.decisions = solve_classes_pooled(classes, in.spot_price, capacity, cfg.pricing);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < units.size(); ++i) r.supply[k].offers[i].availability = r.decisions[k].availability[i];
  } else {
    for (std::size_t k = 0; k < n; ++k)
      r.decisions.push_back(solve_class(c.classes()[k],
                                        detail::demand_model(nominal[k], r.nominal_prices[k], in.betas[k], cfg),
                                        r.supply[k], cfg.pricing));
  }
  return r;
}

/// Largest relative change between two price states (sale and nominal).
inline double relative_change(const PriceState& from, const std::vector<double>& prices,
                              const std::vector<double>& nominal) {
  double worst = 0.0;
  for (std::size_t k = 0; k < prices.size(); ++k) {
    worst = std::max(worst, std::abs(prices[k] - from.prices[k]) / from.prices[k]);
    worst = std::max(worst, std::abs(nominal[k] - from.nominal_prices[k]) / from.nominal_prices[k]);
  }
  return worst;
}

/// Iterates rounds until the sale and nominal prices produced by two
/// successive rounds differ by at most price_tol (relative) and the round's
/// own input prices agree with its output to the same tolerance, i.e. the
/// reported dispatch and decisions come from a fixed point. Phase-1 prices
/// move toward each round's output by the damping factor; once the outputs
/// have settled, the inputs are snapped onto them. `initial` replaces the
/// spot-price start.
inline HourlyEquilibrium solve_hour(const NetworkCase& c, const HourInputs& in, const EquilibriumConfig& cfg,
                                    int hour = 0, const std::optional<PriceState>& initial = std::nullopt) {
  validate_config(cfg);
  detail::check_hour_inputs(c, in);
  const auto n = c.classes().size();

  HourlyEquilibrium eq;
  eq.hour = hour;
  eq.spot_price = in.spot_price;
  eq.damping = cfg.damping;
  eq.nominal_loads = class_nominal_loads(c, in.load_multipliers);

  PriceState state{std::vector<double>(n, in.spot_price), std::vector<double>(n, cfg.markup * in.spot_price)};
  if (initial) {
    if (initial->prices.size() != n || initial->nominal_prices.size() != n)
      throw ValidationError("initial price state needs one entry per class");
    state = *initial;
  }
  PriceState previous = state;
  std::vector<int> flips(n, 0);
  std::vector<double> last_delta(n, 0.0);

  RoundResult round;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    try {
      round = run_round(c, in, state, cfg);
    } catch (const Error& e) {
      throw SolverError("hour " + std::to_string(hour) + ", iteration " + std::to_string(it) + ": " + e.what());
    }
    const auto targets = round.prices();
    const double residual = relative_change(previous, targets, round.nominal_prices);

    IterationRecord rec;
    rec.iteration = it;
    rec.prices = state.prices;
    rec.targets = targets;
    rec.residual = residual;
    rec.damping = eq.damping;
    rec.p_dg_total = std::accumulate(round.dispatch.p_dg.begin(), round.dispatch.p_dg.end(), 0.0);
    rec.p_wholesale = round.dispatch.p_wholesale;
    rec.loss = round.dispatch.total_loss;
    eq.trace.push_back(rec);
    eq.iterations = it;

    const double gap = relative_change(state, targets, round.nominal_prices);
    eq.trace.back().input_gap = gap;
    if (it > 1 && residual <= cfg.price_tol) {
      if (gap <= cfg.price_tol) {
        eq.converged = true;
        break;
      }
      // Outputs have settled but the damped inputs still lag: jump onto them.
      previous = {targets, round.nominal_prices};
      state = previous;
      continue;
    }

    bool oscillating = false;
    for (std::size_t k = 0; k < n; ++k) {
      const double delta = targets[k] - previous.prices[k];
      flips[k] = (delta * last_delta[k] < 0.0) ? flips[k] + 1 : 0;
      last_delta[k] = delta;
      if (flips[k] >= 3) oscillating = true;
    }
    if (oscillating && cfg.auto_damping) {
      eq.damping *= 0.5;
      eq.damping_reduced = true;
      std::fill(flips.begin(), flips.end(), 0);
    }
    previous = {targets, round.nominal_prices};

    const double d = eq.damping;
    for (std::size_t k = 0; k < n; ++k) {
      state.prices[k] = (1.0 - d) * state.prices[k] + d * targets[k];
      state.nominal_prices[k] = (1.0 - d) * state.nominal_prices[k] + d * round.nominal_prices[k];
    }
  }

  eq.class_prices = round.prices();
  eq.nominal_prices = round.nominal_prices;
  eq.phase1_loads = round.phase1_loads;
  eq.dispatch = std::move(round.dispatch);
  eq.supply = std::move(round.supply);
  eq.decisions = std::move(round.decisions);
  return eq;
}

struct HourOutcome {
  int hour = 0;
  std::optional<HourlyEquilibrium> equilibrium;
  std::string error;  // set when the hour failed outright

  bool ok() const { return equilibrium.has_value(); }
  bool converged() const { return equilibrium && equilibrium->converged; }
};

struct DailyResults {
  std::vector<std::string> classes;
  std::vector<std::string> unit_ids;
  std::string technology;
  std::vector<HourOutcome> hours;
  std::vector<double> daily_profit;  // $ per retailer
  std::vector<double> mean_price;    // $/kWh per retailer
  bool partial = false;              // some hour failed or did not converge

  double total_profit() const { return std::accumulate(daily_profit.begin(), daily_profit.end(), 0.0); }
};

/// Recomputes the per-retailer aggregates from the hourly records.
inline void aggregate(DailyResults& r) {
  const auto n = r.classes.size();
  r.daily_profit.assign(n, 0.0);
  r.mean_price.assign(n, 0.0);
  r.partial = false;
  std::size_t counted = 0;
  for (const auto& h : r.hours) {
    if (!h.converged()) r.partial = true;
    if (!h.ok()) continue;
    ++counted;
    for (std::size_t k = 0; k < n; ++k) {
      r.daily_profit[k] += h.equilibrium->decisions[k].profit;
      r.mean_price[k] += h.equilibrium->decisions[k].price;
    }
  }
  if (counted > 0)
    for (auto& p : r.mean_price) p /= static_cast<double>(counted);
}

/// Label for the DG fleet: the shared technology, "mixed", or "none".
inline std::string fleet_technology(const NetworkCase& c) {
  if (c.dg_units().empty()) return "none";
  const auto& first = c.dg_units().front().technology;
  for (const auto& u : c.dg_units())
    if (u.technology != first) return "mixed";
  return first;
}

/// Solves every hour independently. Hours may run on `threads` workers;
/// results do not depend on the thread count. A failing hour is recorded and
/// the rest still run.
inline DailyResults solve_day(const NetworkCase& c, const std::vector<HourInputs>& hours, const EquilibriumConfig& cfg,
                              unsigned threads = 1) {
  validate_config(cfg);
  DailyResults r;
  r.classes = c.classes();
  for (const auto& u : c.dg_units()) r.unit_ids.push_back(u.id);
  r.technology = fleet_technology(c);
  r.hours.resize(hours.size());

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t h = next++; h < hours.size(); h = next++) {
      r.hours[h].hour = static_cast<int>(h);
      try {
        r.hours[h].equilibrium = solve_hour(c, hours[h], cfg, static_cast<int>(h));
      } catch (const Error& e) {
        r.hours[h].error = e.what();
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(hours.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  aggregate(r);
  return r;
}

}  // namespace retail
