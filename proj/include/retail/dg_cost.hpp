#pragma once

// Quadratic distributed-generation cost curves and the technology catalog.
//
// Units: a in $/kW^2h, b in $/kWh, c_fixed in $/h, powers in kW. Spot and
// retail prices use the same $/kWh scale.

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "retail/error.hpp"

namespace retail {

struct Technology {
  std::string name;
  double a = 0.0;
  double b = 0.0;
  double c_fixed = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
};

struct DGUnit {
  std::string id;
  int bus_id = 0;
  double a = 0.0;
  double b = 0.0;
  double c_fixed = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  std::string technology;
};

inline void validate_unit(const DGUnit& u) {
  if (!(u.a >= 0.0)) throw ValidationError("DG unit '" + u.id + "': quadratic coefficient a must be >= 0");
  if (!(u.p_min >= 0.0)) throw ValidationError("DG unit '" + u.id + "': p_min must be >= 0");
  if (!(u.p_min <= u.p_max)) throw ValidationError("DG unit '" + u.id + "': p_min must not exceed p_max");
}

/// Ordered set of technologies. Lookup is by exact name; iteration follows
/// insertion order so that reports list rows the way the catalog does.
class TechnologyCatalog {
 public:
  TechnologyCatalog() = default;
  explicit TechnologyCatalog(std::vector<Technology> rows) {
    for (auto& r : rows) add(std::move(r));
  }

  void add(Technology t) {
    if (!(t.a >= 0.0)) throw ValidationError("technology '" + t.name + "': a must be >= 0");
    if (!(t.p_min >= 0.0 && t.p_min <= t.p_max))
      throw ValidationError("technology '" + t.name + "': need 0 <= p_min <= p_max");
    if (contains(t.name)) throw ValidationError("duplicate technology '" + t.name + "'");
    rows_.push_back(std::move(t));
  }

  bool contains(std::string_view name) const {
    return std::any_of(rows_.begin(), rows_.end(), [&](const Technology& t) { return t.name == name; });
  }

  const Technology& at(std::string_view name) const {
    for (const auto& t : rows_)
      if (t.name == name) return t;
    throw ValidationError("unknown technology '" + std::string(name) + "'");
  }

  const std::vector<Technology>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }

 private:
  std::vector<Technology> rows_;
};

/// Built-in technology table: five technologies, 0..400 kW each.
inline const TechnologyCatalog& builtin_catalog() {
  static const TechnologyCatalog catalog({
      {"Fuel cell-CHP", 0.0001, 0.0315, 1.0749, 0.0, 400.0},
      {"Gas ICE-CHP", 0.0001, 0.0374, 0.4777, 0.0, 400.0},
      {"Gas ICE-power only", 0.0001, 0.0777, 0.3483, 0.0, 400.0},
      {"Microturbine-CHP", 0.0001, 0.0421, 0.5553, 0.0, 400.0},
      {"Microturbine-power only", 0.0001, 0.0841, 0.4603, 0.0, 400.0},
  });
  return catalog;
}

/// Copies the technology coefficients and limits onto `unit`, keeping its
/// id and location.
inline DGUnit with_technology(DGUnit unit, const Technology& t) {
  unit.a = t.a;
  unit.b = t.b;
  unit.c_fixed = t.c_fixed;
  unit.p_min = t.p_min;
  unit.p_max = t.p_max;
  unit.technology = t.name;
  return unit;
}

namespace detail {
inline constexpr double kLimitSlack = 1e-9;

inline void require_in_limits(const DGUnit& u, double p) {
  if (p < u.p_min - kLimitSlack || p > u.p_max + kLimitSlack)
    throw ValidationError("DG unit '" + u.id + "': output " + std::to_string(p) + " kW outside [" +
                          std::to_string(u.p_min) + ", " + std::to_string(u.p_max) + "]");
}
}  // namespace detail

/// Generation cost a p^2 + b p + c in $/h.
inline double cost(const DGUnit& u, double p) {
  detail::require_in_limits(u, p);
  return u.a * p * p + u.b * p + u.c_fixed;
}

/// dC/dp = 2 a p + b in $/kWh.
inline double marginal_cost(const DGUnit& u, double p) {
  detail::require_in_limits(u, p);
  return 2.0 * u.a * p + u.b;
}

/// Output at which the marginal cost equals `price`, clamped to the unit
/// limits. Linear-cost units (a == 0) jump from p_min to p_max above b.
inline double inverse_marginal(const DGUnit& u, double price) {
  if (u.a == 0.0) return price > u.b ? u.p_max : u.p_min;
  return std::clamp((price - u.b) / (2.0 * u.a), u.p_min, u.p_max);
}

}  // namespace retail
