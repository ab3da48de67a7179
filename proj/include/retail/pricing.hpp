#pragma once

// Retailer profit maximization for one class under linear price-elastic
// demand:
//
//   max_p  p * L(p) - K(L(p)),   L(p) = L_N * (1 + beta * (p - p_N) / p_N)
//
// K(L) is the cheapest way to buy L from the wholesale market at the spot
// price and from DG units along their marginal-cost lines. L is linear in p
// and K is convex, so the reduced profit is concave on the positive-demand
// interval and zero past it.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "retail/dg_cost.hpp"
#include "retail/error.hpp"

namespace retail {

struct DemandModel {
  double load_nominal = 0.0;   // kW
  double price_nominal = 0.0;  // $/kWh
  double beta = 0.0;           // elasticity, <= 0
  bool floor_at_zero = true;
};

/// Linear demand around the nominal point, floored at zero.
inline double demand(const DemandModel& m, double price) {
  if (!(price > 0.0)) throw ValidationError("demand: price must be > 0");
  if (!(m.price_nominal > 0.0)) throw ValidationError("demand: nominal price must be > 0");
  const double raw = m.load_nominal * (1.0 + m.beta * (price - m.price_nominal) / m.price_nominal);
  return m.floor_at_zero ? std::max(0.0, raw) : raw;
}

/// Sale price at nominal demand: `markup` times the unit supply cost.
inline double nominal_price(double unit_cost, double markup = 1.1) {
  if (!(unit_cost > 0.0)) throw ValidationError("nominal_price: unit cost must be > 0");
  return markup * unit_cost;
}

/// Energy a DG unit offers to one retailer. Buying p kW costs
/// quad * p^2 + lin * p per hour.
struct DgOffer {
  std::string unit_id;
  double availability = 0.0;  // kW
  double quad = 0.0;          // $/kW^2h
  double lin = 0.0;           // $/kWh

  double purchase_cost(double p) const { return quad * p * p + lin * p; }
  double marginal(double p) const { return 2.0 * quad * p + lin; }
};

/// Offer priced along the unit's own cost curve (fixed cost excluded).
inline DgOffer curve_offer(const DGUnit& u, double availability) { return {u.id, availability, u.a, u.b}; }

/// Offer at a flat rate: the unit's marginal cost at `dispatch_kw`.
inline DgOffer flat_offer(const DGUnit& u, double availability, double dispatch_kw) {
  return {u.id, availability, 0.0, 2.0 * u.a * dispatch_kw + u.b};
}

struct SupplyTerms {
  double spot_price = 0.0;
  std::vector<DgOffer> offers;
};

inline void validate_supply(const SupplyTerms& s) {
  if (!(s.spot_price > 0.0)) throw ValidationError("spot price must be > 0");
  for (const auto& o : s.offers) {
    if (!(o.availability >= 0.0)) throw ValidationError("DG offer '" + o.unit_id + "': availability must be >= 0");
    if (!(o.quad >= 0.0)) throw ValidationError("DG offer '" + o.unit_id + "': cost curve must be convex");
  }
}

struct Allocation {
  double p_wholesale = 0.0;
  std::vector<double> p_dg;
  double cost = 0.0;            // $/h
  double marginal_price = 0.0;  // $/kWh of the last kW bought
};

namespace detail {

// Quantity unit `o` supplies when the marginal purchase price is `lambda`.
// `at_tie` decides what a linear offer does exactly at lambda == lin.
inline double offer_response(const DgOffer& o, double lambda, bool at_tie) {
  if (o.availability <= 0.0) return 0.0;
  if (o.quad > 0.0) return std::clamp((lambda - o.lin) / (2.0 * o.quad), 0.0, o.availability);
  if (lambda > o.lin || (at_tie && lambda == o.lin)) return o.availability;
  return 0.0;
}

inline double total_response(const std::vector<DgOffer>& offers, double lambda, bool at_tie) {
  double s = 0.0;
  for (const auto& o : offers) s += offer_response(o, lambda, at_tie);
  return s;
}

}  // namespace detail

/// Cheapest split of `load` between DG offers and the wholesale market.
/// DG units are bought up to the point where their marginal cost reaches the
/// spot price; if that alone covers the load, purchases are trimmed at a
/// common marginal cost below spot and nothing is bought wholesale.
inline Allocation allocate_supply(double load, const SupplyTerms& supply) {
  validate_supply(supply);
  if (!(load >= 0.0)) throw ValidationError("allocate_supply: load must be >= 0");
  const auto& offers = supply.offers;
  const std::size_t m = offers.size();
  Allocation a;
  a.p_dg.assign(m, 0.0);
  a.marginal_price = supply.spot_price;
  if (load == 0.0) return a;

  const double spot = supply.spot_price;
  std::vector<double> at_spot(m);
  for (std::size_t i = 0; i < m; ++i) at_spot[i] = detail::offer_response(offers[i], spot, false);
  const double dg_at_spot = std::accumulate(at_spot.begin(), at_spot.end(), 0.0);

  if (dg_at_spot <= load) {
    a.p_dg = at_spot;
    a.p_wholesale = load - dg_at_spot;
  } else {
    // Smallest lambda < spot at which DG (ties included) covers the load.
    double lo = 0.0, hi = spot;
    for (const auto& o : offers) lo = std::min(lo, o.lin);
    for (int k = 0; k < 200; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (detail::total_response(offers, mid, true) >= load) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    const double lambda = hi;
    a.marginal_price = lambda;

    // Units pinned at a bound, and linear units strictly in merit, are fixed;
    // the rest share the remainder at one marginal cost.
    double fixed = 0.0;
    std::vector<std::size_t> free_quad, ties;
    for (std::size_t i = 0; i < m; ++i) {
      const auto& o = offers[i];
      if (o.availability <= 0.0) continue;
      if (o.quad > 0.0) {
        const double r = detail::offer_response(o, lambda, true);
        if (r > 0.0 && r < o.availability) {
          free_quad.push_back(i);
        } else {
          a.p_dg[i] = r;
          fixed += r;
        }
      } else if (o.lin < lambda && std::abs(o.lin - lambda) > 1e-15 * std::max(1.0, std::abs(lambda))) {
        a.p_dg[i] = o.availability;
        fixed += o.availability;
      } else if (std::abs(o.lin - lambda) <= 1e-12 * std::max(1.0, std::abs(lambda))) {
        ties.push_back(i);
      }
    }
    double remainder = load - fixed;
    if (!free_quad.empty()) {
      double inv = 0.0, shift = 0.0;
      for (auto i : free_quad) {
        inv += 1.0 / (2.0 * offers[i].quad);
        shift += offers[i].lin / (2.0 * offers[i].quad);
      }
      double lam = (remainder + shift) / inv;
      // Linear ties absorb whatever the quadratic units leave at lambda.
      if (!ties.empty()) lam = std::min(lam, lambda);
      for (auto i : free_quad) {
        a.p_dg[i] = std::clamp((lam - offers[i].lin) / (2.0 * offers[i].quad), 0.0, offers[i].availability);
        remainder -= a.p_dg[i];
      }
    }
    std::stable_sort(ties.begin(), ties.end(), [&](auto x, auto y) { return offers[x].lin < offers[y].lin; });
    for (auto i : ties) {
      const double take = std::clamp(remainder, 0.0, offers[i].availability);
      a.p_dg[i] = take;
      remainder -= take;
    }
    // Absorb round-off so that the split sums to the load exactly.
    if (remainder < 0.0) {
      for (std::size_t i = m; i-- > 0 && remainder < 0.0;) {
        const double give = std::min(a.p_dg[i], -remainder);
        a.p_dg[i] -= give;
        remainder += give;
      }
    }
    a.p_wholesale = std::max(0.0, remainder);
  }
  a.cost = spot * a.p_wholesale;
  for (std::size_t i = 0; i < m; ++i) a.cost += offers[i].purchase_cost(a.p_dg[i]);
  return a;
}

/// Average cost per kWh of buying `load` at least cost; spot for zero load.
inline double unit_supply_cost(double load, const SupplyTerms& supply) {
  if (load <= 0.0) return supply.spot_price;
  return allocate_supply(load, supply).cost / load;
}

struct RetailerDecision {
  std::string class_id;
  double price = 0.0;          // $/kWh
  double nominal_price = 0.0;  // $/kWh
  double load = 0.0;           // kW
  double p_wholesale = 0.0;    // kW
  std::vector<double> p_dg;    // kW per offer
  std::vector<double> availability;
  double income = 0.0;  // $/h
  double cost = 0.0;    // $/h
  double profit = 0.0;  // $/h
};

struct PricingOptions {
  double price_cap_factor = 20.0;  // upper end of the price search, times p_N
  double search_rel_tol = 1e-13;
};

/// income - purchases of a decision; rejects decisions whose supply split
/// does not add up to the load.
inline double profit(const RetailerDecision& d, const SupplyTerms& supply) {
  if (d.p_dg.size() != supply.offers.size()) throw ValidationError("decision and supply terms disagree on DG units");
  const double supplied = d.p_wholesale + std::accumulate(d.p_dg.begin(), d.p_dg.end(), 0.0);
  if (std::abs(d.load - supplied) > 1e-6)
    throw ValidationError("class '" + d.class_id + "': load " + std::to_string(d.load) + " kW != supply " +
                          std::to_string(supplied) + " kW");
  double purchases = supply.spot_price * d.p_wholesale;
  for (std::size_t i = 0; i < d.p_dg.size(); ++i) purchases += supply.offers[i].purchase_cost(d.p_dg[i]);
  return d.price * d.load - purchases;
}

/// Profit as a function of the sale price alone, supply bought at least cost.
inline double reduced_profit(const DemandModel& model, const SupplyTerms& supply, double price) {
  const double load = demand(model, price);
  return price * load - allocate_supply(load, supply).cost;
}

inline RetailerDecision make_decision(const std::string& class_id, const DemandModel& model, const SupplyTerms& supply,
                                      double price) {
  RetailerDecision d;
  d.class_id = class_id;
  d.price = price;
  d.nominal_price = model.price_nominal;
  d.load = demand(model, price);
  const auto alloc = allocate_supply(d.load, supply);
  d.p_wholesale = alloc.p_wholesale;
  d.p_dg = alloc.p_dg;
  for (const auto& o : supply.offers) d.availability.push_back(o.availability);
  d.income = price * d.load;
  d.cost = alloc.cost;
  d.profit = d.income - d.cost;
  return d;
}

namespace detail {

// True when no DG offer is cheaper than spot at zero output, so K(L) is
// exactly spot * L.
inline bool wholesale_only(const SupplyTerms& s) {
  return std::none_of(s.offers.begin(), s.offers.end(),
                      [&](const DgOffer& o) { return o.availability > 0.0 && o.lin < s.spot_price; });
}

}  // namespace detail

inline RetailerDecision solve_class(const std::string& class_id, const DemandModel& model, const SupplyTerms& supply,
                                    const PricingOptions& opts = {}) {
  validate_supply(supply);
  if (!(model.price_nominal > 0.0)) throw ValidationError("nominal price must be > 0");
  if (!(model.load_nominal >= 0.0)) throw ValidationError("nominal load must be >= 0");
  if (model.load_nominal == 0.0) {
    RetailerDecision d;
    d.class_id = class_id;
    d.price = model.price_nominal;
    d.nominal_price = model.price_nominal;
    d.p_dg.assign(supply.offers.size(), 0.0);
    for (const auto& o : supply.offers) d.availability.push_back(o.availability);
    return d;
  }

  const double cap = opts.price_cap_factor * model.price_nominal;
  const double floor = 1e-9 * model.price_nominal;
  const auto f = [&](double p) { return reduced_profit(model, supply, p); };

  double best;
  if (detail::wholesale_only(supply) && model.beta < 0.0) {
    // p * (alpha - gamma p) - s (alpha - gamma p) is maximized at
    // (alpha / gamma + s) / 2; concavity makes clamping exact.
    const double alpha = model.load_nominal * (1.0 - model.beta);
    const double gamma = -model.beta * model.load_nominal / model.price_nominal;
    best = std::clamp(0.5 * (alpha / gamma + supply.spot_price), floor, cap);
  } else {
    // Golden-section search; the reduced profit is unimodal on [floor, cap].
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = floor, b = cap;
    double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int k = 0; k < 400 && (b - a) > opts.search_rel_tol * model.price_nominal; ++k) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + invphi * (b - a);
        f2 = f(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - invphi * (b - a);
        f1 = f(x1);
      }
    }
    best = 0.5 * (a + b);
    if (f(cap) > f(best)) best = cap;
  }
  return make_decision(class_id, model, supply, best);
}

/// Classes drawing on shared DG capacity. Each pass re-solves every class in
/// order against what the others currently hold (the first pass is
/// first-come in class order); passes repeat until purchases settle.
struct PooledClass {
  std::string class_id;
  DemandModel model;
};

inline std::vector<RetailerDecision> solve_classes_pooled(const std::vector<PooledClass>& classes, double spot,
                                                          const std::vector<DgOffer>& capacity,
                                                          const PricingOptions& opts = {}, int max_passes = 50) {
  const std::size_t n = classes.size(), m = capacity.size();
  std::vector<std::vector<double>> held(n, std::vector<double>(m, 0.0));
  std::vector<RetailerDecision> out(n);
  for (int pass = 0; pass < max_passes; ++pass) {
    double change = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      SupplyTerms s{spot, capacity};
      for (std::size_t i = 0; i < m; ++i) {
        double others = 0.0;
        for (std::size_t k = 0; k < n; ++k)
          if (k != c) others += held[k][i];
        s.offers[i].availability = std::max(0.0, capacity[i].availability - others);
      }
      out[c] = solve_class(classes[c].class_id, classes[c].model, s, opts);
      for (std::size_t i = 0; i < m; ++i) {
        change = std::max(change, std::abs(out[c].p_dg[i] - held[c][i]));
        held[c][i] = out[c].p_dg[i];
      }
    }
    if (change <= 1e-9) break;
  }
  return out;
}

}  // namespace retail
