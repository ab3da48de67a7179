// Command-line driver for the retail market simulator.
//
//   retail_sim validate   <case>
//   retail_sim run        <case> <scenario> [--out DIR] [--trace]
//   retail_sim no-dg      <case> <scenario> [--out DIR] [--trace]
//   retail_sim sweep-tech <case> <scenario> [--out DIR]
//   retail_sim sweep-beta <case> <scenario> --range START:STOP:STEPS [--out DIR]
//
// Exit codes: 0 success, 1 usage, 2 invalid input, 3 solver failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "retail/retail.hpp"

namespace {

using namespace retail;

constexpr int kUsage = 1;
constexpr int kInvalid = 2;
constexpr int kSolver = 3;

struct Overrides {
  bool wholesale_at_spot = false;
  bool flat_mc = false;
  bool pooled = false;
  double damping = -1.0;
  double price_tol = -1.0;
  int max_iters = -1;
};

TechnologyCatalog catalog_from(const std::string& flag) {
  if (!flag.empty()) return load_catalog(flag);
  if (const char* env = std::getenv("RETAIL_DG_CATALOG"); env && *env) return load_catalog(env);
  return builtin_catalog();
}

void apply(Scenario& s, const Overrides& o) {
  if (o.wholesale_at_spot) s.config.wholesale_at_spot = true;
  if (o.flat_mc) s.config.flat_mc = true;
  if (o.pooled) s.config.pooled = true;
  if (o.damping > 0.0) s.config.damping = o.damping;
  if (o.price_tol > 0.0) s.config.price_tol = o.price_tol;
  if (o.max_iters > 0) s.config.max_iters = o.max_iters;
  validate_config(s.config);
}

/// Prints failed or unconverged hours to stderr; true when the day is clean.
bool report_hours(const DailyResults& r, const std::string& label = "") {
  bool clean = true;
  for (const auto& h : r.hours) {
    if (!h.ok()) {
      std::cerr << label << "hour " << h.hour << ": failed: " << h.error << "\n";
      clean = false;
    } else if (!h.converged()) {
      std::cerr << label << "hour " << h.hour << ": not converged after " << h.equilibrium->iterations
                << " iterations (residual " << h.equilibrium->trace.back().residual << ")\n";
      clean = false;
    }
  }
  return clean;
}

void print_summary(const DailyResults& r) {
  std::printf("%-10s %-26s %14s %12s\n", "retailer", "technology", "daily_profit", "mean_price");
  for (std::size_t k = 0; k < r.classes.size(); ++k)
    std::printf("%-10s %-26s %14.6f %12.6f\n", r.classes[k].c_str(), r.technology.c_str(), r.daily_profit[k],
                r.mean_price[k]);
}

struct BetaRange {
  double start = 0.0;
  double stop = 0.0;
  int steps = 0;
};

BetaRange parse_range(std::string text) {
  // Accept the typographic minus sign as well as '-'.
  for (std::size_t pos; (pos = text.find("\xE2\x88\x92")) != std::string::npos;) text.replace(pos, 3, "-");
  BetaRange r;
  const auto a = text.find(':'), b = text.rfind(':');
  if (a == std::string::npos || a == b) throw ValidationError("--range must look like START:STOP:STEPS");
  try {
    r.start = std::stod(text.substr(0, a));
    r.stop = std::stod(text.substr(a + 1, b - a - 1));
    r.steps = std::stoi(text.substr(b + 1));
  } catch (const std::exception&) {
    throw ValidationError("--range must look like START:STOP:STEPS");
  }
  if (r.steps < 1) throw ValidationError("--range needs at least one step");
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-level retail electricity market simulator"};
  app.require_subcommand(1);

  std::string case_path, scenario_path, out_dir = ".", catalog_path, range_text;
  bool trace = false;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  Overrides ov;
  app.add_option("--catalog", catalog_path, "DG technology catalog (default: built-in, or $RETAIL_DG_CATALOG)");

  auto add_run_options = [&](CLI::App* sub, bool with_trace) {
    sub->add_option("case", case_path, "case file")->required();
    sub->add_option("scenario", scenario_path, "scenario file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "hours solved in parallel");
    sub->add_flag("--wholesale-at-spot", ov.wholesale_at_spot, "price wholesale injection at spot in dispatch");
    sub->add_flag("--flat-mc", ov.flat_mc, "retailers pay DG marginal cost at the dispatch point");
    sub->add_flag("--pooled", ov.pooled, "classes share DG capacity first-come");
    sub->add_option("--damping", ov.damping, "price update damping in (0, 1]");
    sub->add_option("--price-tol", ov.price_tol, "relative price convergence tolerance");
    sub->add_option("--max-iters", ov.max_iters, "iteration limit per hour");
    if (with_trace) sub->add_flag("--trace", trace, "also write trace.csv");
  };

  auto* validate = app.add_subcommand("validate", "check a case file");
  validate->add_option("case", case_path, "case file")->required();
  auto* run = app.add_subcommand("run", "simulate one day");
  add_run_options(run, true);
  auto* no_dg = app.add_subcommand("no-dg", "simulate one day with every DG unit removed");
  add_run_options(no_dg, true);
  auto* sweep_tech = app.add_subcommand("sweep-tech", "simulate one day per catalog technology");
  add_run_options(sweep_tech, false);
  auto* sweep_beta = app.add_subcommand("sweep-beta", "simulate one day per elasticity value");
  add_run_options(sweep_beta, false);
  sweep_beta->add_option("--range", range_text, "START:STOP:STEPS, e.g. -0.25:-0.01:13")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  // A malformed range is a usage error; a well-formed but invalid elasticity
  // is caught later with the other validation errors.
  BetaRange range;
  if (*sweep_beta) {
    try {
      range = parse_range(range_text);
    } catch (const ValidationError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kUsage;
    }
  }

  try {
    const auto catalog = catalog_from(catalog_path);
    const auto network = load_case(case_path, catalog);

    if (*validate) {
      std::printf("%s: %zu buses, %zu branches, %zu loads, %zu DG units, classes:", case_path.c_str(),
                  network.buses().size(), network.branches().size(), network.loads().size(),
                  network.dg_units().size());
      for (const auto& c : network.classes()) std::printf(" %s=%.3f kW", c.c_str(), class_nominal_load(network, c, 1.0));
      std::printf("\n");
      return 0;
    }

    auto scenario = load_scenario(scenario_path);
    apply(scenario, ov);
    if (*no_dg) scenario.dg_enabled = false;

    if (*run || *no_dg) {
      const auto c = prepare_case(network, scenario, catalog);
      const auto results = solve_day(c, hour_inputs(scenario, c), scenario.config, threads);
      export_results(results, out_dir, trace);
      print_summary(results);
      return report_hours(results) ? 0 : kSolver;
    }

    if (*sweep_tech) {
      bool clean = true;
      std::string table = csv::join({"technology", "retailer", "daily_profit", "mean_price", "partial"});
      std::printf("%-26s", "technology");
      for (const auto& c : network.classes()) std::printf(" %12s", ("profit_" + c).c_str());
      std::printf(" %14s\n", "total_profit");
      for (const auto& t : catalog.rows()) {
        auto s = scenario;
        s.technology = t.name;
        s.unit_technology.clear();
        const auto c = prepare_case(network, s, catalog);
        const auto r = solve_day(c, hour_inputs(s, c), s.config, threads);
        clean = report_hours(r, t.name + ": ") && clean;
        std::printf("%-26s", t.name.c_str());
        for (std::size_t k = 0; k < r.classes.size(); ++k) {
          std::printf(" %12.6f", r.daily_profit[k]);
          table += csv::join({t.name, r.classes[k], csv::fixed6(r.daily_profit[k]), csv::fixed6(r.mean_price[k]),
                              r.partial ? "true" : "false"});
        }
        std::printf(" %14.6f\n", r.total_profit());
      }
      if (app.get_subcommand("sweep-tech")->count("--out")) {
        std::filesystem::create_directories(out_dir);
        csv::write_file(std::filesystem::path(out_dir) / "sweep_tech.csv", table);
      }
      return clean ? 0 : kSolver;
    }

    if (*sweep_beta) {
      const auto c = prepare_case(network, scenario, catalog);
      auto beta_at = [&](int k) {
        return range.steps == 1 ? range.start : range.start + (range.stop - range.start) * k / (range.steps - 1);
      };
      for (int k = 0; k < range.steps; ++k) with_beta(scenario, beta_at(k));  // reject bad values up front
      bool clean = true;
      std::string table = csv::join({"beta", "retailer", "daily_profit", "mean_price", "partial"});
      std::printf("%10s", "beta");
      for (const auto& cl : c.classes()) std::printf(" %12s", ("profit_" + cl).c_str());
      std::printf(" %14s\n", "total_profit");
      for (int k = 0; k < range.steps; ++k) {
        const double beta = beta_at(k);
        const auto s = with_beta(scenario, beta);
        const auto r = solve_day(c, hour_inputs(s, c), s.config, threads);
        clean = report_hours(r, "beta " + csv::fixed6(beta) + ": ") && clean;
        std::printf("%10.6f", beta);
        for (std::size_t j = 0; j < r.classes.size(); ++j) {
          std::printf(" %12.6f", r.daily_profit[j]);
          table += csv::join({csv::fixed6(beta), r.classes[j], csv::fixed6(r.daily_profit[j]),
                              csv::fixed6(r.mean_price[j]), r.partial ? "true" : "false"});
        }
        std::printf(" %14.6f\n", r.total_profit());
      }
      if (app.get_subcommand("sweep-beta")->count("--out")) {
        std::filesystem::create_directories(out_dir);
        csv::write_file(std::filesystem::path(out_dir) / "sweep_beta.csv", table);
      }
      return clean ? 0 : kSolver;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolver;
  }
  return kUsage;
}
