#pragma once

// Radial distribution case: buses, branches, classed loads, DG placements.

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "retail/dg_cost.hpp"
#include "retail/error.hpp"

namespace retail {

enum class BusKind { slack, load };

struct Bus {
  int id = 0;
  BusKind kind = BusKind::load;
  double base_kv = 0.0;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double resistance = 0.0;  // pu
  double reactance = 0.0;   // pu
};

struct LoadPoint {
  int bus_id = 0;
  double p_nominal = 0.0;  // kW
  double q_nominal = 0.0;  // kvar
  std::string class_id;
};

/// Plain, unvalidated description of a case. Turn it into a NetworkCase to
/// use it with the solvers.
struct CaseData {
  std::string name;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<LoadPoint> loads;
  std::vector<DGUnit> dg_units;
  std::vector<std::string> classes;
  double base_mva = 1.0;
  double v_min = 0.90;
  double v_max = 1.05;
};

/// A branch oriented away from the slack bus; bus fields are positions in
/// NetworkCase::buses().
struct OrientedBranch {
  std::size_t branch = 0;
  std::size_t parent = 0;
  std::size_t child = 0;
};

/// Branches in parent-before-child order starting at the slack bus.
struct RadialOrder {
  std::size_t slack = 0;
  std::vector<OrientedBranch> branches;
};

namespace detail {

inline std::map<int, std::size_t> index_buses(const std::vector<Bus>& buses) {
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (!index.emplace(buses[i].id, i).second)
      throw ValidationError("duplicate bus id " + std::to_string(buses[i].id));
  }
  return index;
}

inline std::size_t bus_position(const std::map<int, std::size_t>& index, int id, const std::string& who) {
  auto it = index.find(id);
  if (it == index.end()) throw ValidationError(who + " references nonexistent bus " + std::to_string(id));
  return it->second;
}

inline RadialOrder radial_order(const std::vector<Bus>& buses, const std::vector<Branch>& branches) {
  const auto index = index_buses(buses);
  std::size_t slack_count = 0;
  RadialOrder order;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].kind == BusKind::slack) {
      ++slack_count;
      order.slack = i;
    }
  }
  if (slack_count != 1)
    throw ValidationError("case must have exactly one slack bus, found " + std::to_string(slack_count));

  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(buses.size());
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const auto& br = branches[k];
    const std::string who = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
    const auto f = bus_position(index, br.from_bus, who);
    const auto t = bus_position(index, br.to_bus, who);
    if (f == t) throw ValidationError("cycle detected: " + who + " is a self-loop");
    adj[f].emplace_back(t, k);
    adj[t].emplace_back(f, k);
  }

  // Breadth-first from the slack bus: reaching a visited bus through a
  // branch other than its own parent branch closes a loop.
  std::vector<bool> seen(buses.size(), false);
  std::vector<std::size_t> parent_branch(buses.size(), branches.size());
  std::vector<std::size_t> queue{order.slack};
  seen[order.slack] = true;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const auto u = queue[head];
    for (const auto& [v, k] : adj[u]) {
      if (k == parent_branch[u]) continue;
      if (seen[v])
        throw ValidationError("cycle detected through branch " + std::to_string(branches[k].from_bus) + "-" +
                              std::to_string(branches[k].to_bus));
      seen[v] = true;
      parent_branch[v] = k;
      order.branches.push_back({k, u, v});
      queue.push_back(v);
    }
  }
  const auto reached = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true));
  if (reached != buses.size())
    throw ValidationError("network is disconnected: " + std::to_string(buses.size() - reached) +
                          " bus(es) unreachable from the slack bus");
  return order;
}

}  // namespace detail

/// Validated, immutable radial case. Construction checks every invariant and
/// caches the slack-outward branch ordering.
class NetworkCase {
 public:
  explicit NetworkCase(CaseData data) : data_(std::move(data)) {
    if (data_.buses.empty()) throw ValidationError("case has no buses");
    index_ = detail::index_buses(data_.buses);
    for (const auto& b : data_.buses)
      if (!(b.base_kv > 0.0)) throw ValidationError("bus " + std::to_string(b.id) + ": base_kv must be > 0");
    for (const auto& br : data_.branches) {
      if (!(br.resistance >= 0.0 && br.reactance >= 0.0))
        throw ValidationError("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                              ": resistance and reactance must be >= 0");
      if (br.resistance == 0.0 && br.reactance == 0.0)
        throw ValidationError("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) +
                              ": zero impedance");
    }
    if (data_.branches.size() + 1 != data_.buses.size()) {
      const std::string counts = std::to_string(data_.branches.size()) + " branches for " +
                                 std::to_string(data_.buses.size()) + " buses (need bus count - 1)";
      // Name the loop or the stranded buses when the traversal can find them.
      try {
        detail::radial_order(data_.buses, data_.branches);
      } catch (const ValidationError& e) {
        throw ValidationError(std::string("not radial: ") + e.what() + "; " + counts);
      }
      throw ValidationError("not radial: " + counts);
    }
    order_ = detail::radial_order(data_.buses, data_.branches);

    if (!(data_.base_mva > 0.0)) throw ValidationError("base_mva must be > 0");
    if (!(data_.v_min > 0.0 && data_.v_min < data_.v_max))
      throw ValidationError("voltage limits must satisfy 0 < v_min < v_max");

    for (std::size_t i = 0; i < data_.classes.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (data_.classes[i] == data_.classes[j]) throw ValidationError("duplicate class '" + data_.classes[i] + "'");

    for (const auto& l : data_.loads) {
      detail::bus_position(index_, l.bus_id, "load");
      if (!(l.p_nominal >= 0.0))
        throw ValidationError("load at bus " + std::to_string(l.bus_id) + ": p_nominal must be >= 0");
      if (class_index(l.class_id) == data_.classes.size())
        throw ValidationError("load at bus " + std::to_string(l.bus_id) + ": undeclared class '" + l.class_id + "'");
    }
    for (std::size_t i = 0; i < data_.dg_units.size(); ++i) {
      const auto& u = data_.dg_units[i];
      detail::bus_position(index_, u.bus_id, "DG unit '" + u.id + "'");
      validate_unit(u);
      for (std::size_t j = 0; j < i; ++j)
        if (data_.dg_units[j].id == u.id) throw ValidationError("duplicate DG unit id '" + u.id + "'");
    }
  }

  const CaseData& data() const noexcept { return data_; }
  const std::string& name() const noexcept { return data_.name; }
  const std::vector<Bus>& buses() const noexcept { return data_.buses; }
  const std::vector<Branch>& branches() const noexcept { return data_.branches; }
  const std::vector<LoadPoint>& loads() const noexcept { return data_.loads; }
  const std::vector<DGUnit>& dg_units() const noexcept { return data_.dg_units; }
  const std::vector<std::string>& classes() const noexcept { return data_.classes; }
  double base_mva() const noexcept { return data_.base_mva; }
  double base_kw() const noexcept { return data_.base_mva * 1000.0; }
  double v_min() const noexcept { return data_.v_min; }
  double v_max() const noexcept { return data_.v_max; }
  const RadialOrder& topology() const noexcept { return order_; }

  /// Position of bus `id` in buses(); throws for unknown ids.
  std::size_t bus_index(int id) const { return detail::bus_position(index_, id, "lookup"); }

  /// Position of `class_id` in classes(), or classes().size() when absent.
  std::size_t class_index(const std::string& class_id) const {
    const auto it = std::find(data_.classes.begin(), data_.classes.end(), class_id);
    return static_cast<std::size_t>(it - data_.classes.begin());
  }

 private:
  CaseData data_;
  std::map<int, std::size_t> index_;
  RadialOrder order_;
};

/// Topological ordering of the case's branches (slack outward). Works on raw
/// data so that a cyclic or disconnected description reports the precise
/// failure rather than the edge-count check.
inline RadialOrder validate_radial(const CaseData& data) { return detail::radial_order(data.buses, data.branches); }
inline const RadialOrder& validate_radial(const NetworkCase& c) { return c.topology(); }

/// Summed nominal real load of a class, scaled by `multiplier` (kW).
inline double class_nominal_load(const NetworkCase& c, const std::string& class_id, double multiplier) {
  if (c.class_index(class_id) == c.classes().size()) throw ValidationError("unknown class '" + class_id + "'");
  if (!(multiplier >= 0.0)) throw ValidationError("load multiplier must be >= 0");
  double sum = 0.0;
  for (const auto& l : c.loads())
    if (l.class_id == class_id) sum += l.p_nominal;
  return sum * multiplier;
}

/// Nominal loads of every declared class, in classes() order.
inline std::vector<double> class_nominal_loads(const NetworkCase& c, const std::vector<double>& multipliers) {
  if (multipliers.size() != c.classes().size())
    throw ValidationError("expected one load multiplier per class");
  std::vector<double> out;
  out.reserve(multipliers.size());
  for (std::size_t k = 0; k < multipliers.size(); ++k)
    out.push_back(class_nominal_load(c, c.classes()[k], multipliers[k]));
  return out;
}

/// Case copy with every DG unit switched to technology `t`.
inline NetworkCase with_technology(const NetworkCase& c, const Technology& t) {
  CaseData d = c.data();
  for (auto& u : d.dg_units) u = with_technology(u, t);
  return NetworkCase(std::move(d));
}

/// Case copy with all DG units removed.
inline NetworkCase without_dg(const NetworkCase& c) {
  CaseData d = c.data();
  d.dg_units.clear();
  return NetworkCase(std::move(d));
}

}  // namespace retail
