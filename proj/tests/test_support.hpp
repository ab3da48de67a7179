#pragma once

#include <random>
#include <string>
#include <vector>

#include "retail/retail.hpp"

namespace retail::testing {

inline std::string data_path(const std::string& file) { return std::string(RETAIL_DATA_DIR) + "/" + file; }

#ifdef RETAIL_TEST_DATA_DIR
inline std::string test_data_path(const std::string& file) { return std::string(RETAIL_TEST_DATA_DIR) + "/" + file; }
#endif

inline const NetworkCase& ieee33() {
  static const NetworkCase c = load_case(data_path("ieee33.case"));
  return c;
}

/// Unit `id` at `bus` with the catalog technology `tech`.
inline DGUnit unit_at(const std::string& id, int bus, const std::string& tech) {
  DGUnit u;
  u.id = id;
  u.bus_id = bus;
  return with_technology(u, builtin_catalog().at(tech));
}

/// Slack bus 1 feeding bus 2 through (r, x) pu; one load point of class "A".
inline CaseData two_bus_data(double r, double x, double p_kw, double q_kvar, double base_mva = 1.0) {
  CaseData d;
  d.name = "two-bus";
  d.buses = {{1, BusKind::slack, 12.66}, {2, BusKind::load, 12.66}};
  d.branches = {{1, 2, r, x}};
  d.loads = {{2, p_kw, q_kvar, "A"}};
  d.classes = {"A"};
  d.base_mva = base_mva;
  return d;
}

/// Random radial feeder with `n` buses (bus 1 slack), loads on every other
/// bus split over `classes`, and optional DG units at random buses.
inline CaseData random_feeder(std::mt19937& rng, int n, int classes, int dg_units, const Technology& tech) {
  std::uniform_real_distribution<double> imp(0.005, 0.04), load(40.0, 250.0), pf(0.3, 0.6);
  CaseData d;
  d.name = "random";
  d.base_mva = 1.0;
  for (int k = 1; k <= n; ++k) d.buses.push_back({k, k == 1 ? BusKind::slack : BusKind::load, 12.66});
  for (int k = 2; k <= n; ++k) {
    std::uniform_int_distribution<int> parent(1, k - 1);
    d.branches.push_back({parent(rng), k, imp(rng), imp(rng)});
  }
  for (int c = 0; c < classes; ++c) d.classes.push_back(std::string(1, static_cast<char>('A' + c)));
  for (int k = 2; k <= n; ++k) {
    const double p = load(rng);
    d.loads.push_back({k, p, p * pf(rng), d.classes[static_cast<std::size_t>((k - 2) % classes)]});
  }
  std::uniform_int_distribution<int> bus(2, n);
  for (int i = 0; i < dg_units; ++i) {
    DGUnit u;
    u.id = "G" + std::to_string(i + 1);
    u.bus_id = bus(rng);
    d.dg_units.push_back(with_technology(u, tech));
  }
  return d;
}

inline std::vector<double> nominal_class_loads(const NetworkCase& c, double multiplier = 1.0) {
  return class_nominal_loads(c, std::vector<double>(c.classes().size(), multiplier));
}

}  // namespace retail::testing
