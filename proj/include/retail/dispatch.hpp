#pragma once

// Distribution-cost minimization: choose DG outputs (wholesale injection is
// the balance slack) to minimize
//
//   price_eff * P_W + sum_i C_i(P_i) + voltage penalty
//   s.t. P_W + sum_i P_i = sum_c Load_c + P_loss,  P_W >= 0,
//        p_min_i <= P_i <= p_max_i
//
// where price_eff is the load-share weighted class price. Losses and their
// derivatives come from the sweep power flow by central differences.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "retail/dg_cost.hpp"
#include "retail/error.hpp"
#include "retail/network.hpp"
#include "retail/power_flow.hpp"

namespace retail {

struct DispatchProblem {
  const NetworkCase& network;
  std::vector<double> class_loads;   // kW per class
  std::vector<double> class_prices;  // $/kWh per class
};

struct DispatchOptions {
  PowerFlowOptions power_flow{1e-9, 200};
  double fd_step_kw = 1.0;
  double kkt_tol = 1e-8;
  double loss_tol_kw = 0.1;
  int max_iter = 200;
  double voltage_penalty = 1e4;  // $/pu^2
  bool lossless = false;         // copper plate: no losses, no voltage limits
};

struct DispatchResult {
  std::vector<double> p_dg;  // kW per DG unit
  double p_wholesale = 0.0;  // kW
  double total_loss = 0.0;   // kW
  double objective = 0.0;    // $/h, including voltage_penalty
  double voltage_penalty = 0.0;
  double effective_price = 0.0;
  double kkt_residual = 0.0;
  bool voltage_feasible = true;
  std::vector<int> voltage_violations;
  std::vector<double> voltage_magnitude;
  int iterations = 0;
};

/// sum_c (Load_c / sum Load) * Price_c.
inline double effective_wholesale_price(const std::vector<double>& class_loads, const std::vector<double>& class_prices) {
  if (class_loads.size() != class_prices.size()) throw ValidationError("class loads and prices differ in length");
  const double total = std::accumulate(class_loads.begin(), class_loads.end(), 0.0);
  if (!(total > 0.0)) throw ValidationError("effective wholesale price undefined: total load is zero");
  double price = 0.0;
  for (std::size_t c = 0; c < class_loads.size(); ++c) price += class_loads[c] / total * class_prices[c];
  return price;
}

namespace detail {

struct NetworkState {
  double loss = 0.0;
  double penalty = 0.0;
  std::vector<double> vm;
};

class DispatchModel {
 public:
  DispatchModel(const DispatchProblem& prob, const DispatchOptions& opts) : prob_(prob), opts_(opts) {
    const auto& c = prob.network;
    if (prob.class_loads.size() != c.classes().size() || prob.class_prices.size() != c.classes().size())
      throw ValidationError("dispatch problem needs one load and one price per class");
    for (double l : prob.class_loads)
      if (!(l >= 0.0)) throw ValidationError("class loads must be >= 0");
    for (double p : prob.class_prices)
      if (!(p > 0.0)) throw ValidationError("class prices must be > 0");
    total_load_ = std::accumulate(prob.class_loads.begin(), prob.class_loads.end(), 0.0);
    // No load leaves the load-share weights undefined; fall back to the plain
    // mean so losses are still priced.
    price_ = total_load_ > 0.0
                 ? effective_wholesale_price(prob.class_loads, prob.class_prices)
                 : std::accumulate(prob.class_prices.begin(), prob.class_prices.end(), 0.0) /
                       static_cast<double>(std::max<std::size_t>(1, prob.class_prices.size()));
  }

  double price() const { return price_; }
  double total_load() const { return total_load_; }
  const std::vector<DGUnit>& units() const { return prob_.network.dg_units(); }

  NetworkState evaluate(const std::vector<double>& p) const {
    NetworkState s;
    if (opts_.lossless) return s;
    const auto& c = prob_.network;
    const auto sol = solve_sweep_or_throw(c, build_injections(c, p, prob_.class_loads), opts_.power_flow);
    s.loss = sol.total_loss_kw;
    s.vm = sol.voltage_magnitude;
    for (double v : sol.voltage_magnitude) {
      const double lo = std::max(0.0, c.v_min() - v);
      const double hi = std::max(0.0, v - c.v_max());
      s.penalty += opts_.voltage_penalty * (lo * lo + hi * hi);
    }
    return s;
  }

  double generation_cost(const std::vector<double>& p) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto& u = units()[i];
      sum += u.a * p[i] * p[i] + u.b * p[i] + u.c_fixed;
    }
    return sum;
  }

  double wholesale(const std::vector<double>& p, const NetworkState& s) const {
    return total_load_ + s.loss - std::accumulate(p.begin(), p.end(), 0.0);
  }

  double objective(const std::vector<double>& p, const NetworkState& s) const {
    return price_ * wholesale(p, s) + generation_cost(p) + s.penalty;
  }

  struct Sensitivity {
    std::vector<double> dloss, d2loss, dpen, d2pen;
  };

  Sensitivity sensitivities(const std::vector<double>& p, const NetworkState& base) const {
    const std::size_t m = p.size();
    Sensitivity s{std::vector<double>(m, 0.0), std::vector<double>(m, 0.0), std::vector<double>(m, 0.0),
                  std::vector<double>(m, 0.0)};
    if (opts_.lossless) return s;
    const double h = opts_.fd_step_kw;
    auto q = p;
    for (std::size_t i = 0; i < m; ++i) {
      q[i] = p[i] + h;
      const auto up = evaluate(q);
      q[i] = p[i] - h;
      const auto dn = evaluate(q);
      q[i] = p[i];
      s.dloss[i] = (up.loss - dn.loss) / (2.0 * h);
      s.d2loss[i] = (up.loss - 2.0 * base.loss + dn.loss) / (h * h);
      s.dpen[i] = (up.penalty - dn.penalty) / (2.0 * h);
      s.d2pen[i] = (up.penalty - 2.0 * base.penalty + dn.penalty) / (h * h);
    }
    return s;
  }

  /// Partial derivative of the Lagrangian in P_i when the balance multiplier
  /// is `mu` (mu == price_eff while wholesale is strictly positive).
  double gradient(std::size_t i, const std::vector<double>& p, const Sensitivity& s, double mu) const {
    const auto& u = units()[i];
    return 2.0 * u.a * p[i] + u.b + s.dpen[i] - mu * (1.0 - s.dloss[i]);
  }

  /// Largest stationarity/complementarity violation for multiplier `mu`,
  /// in $/kWh.
  double violation(const std::vector<double>& p, const Sensitivity& s, double mu) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto& u = units()[i];
      if (u.p_max - u.p_min <= 0.0) continue;
      const double g = gradient(i, p, s, mu);
      const double tol = 1e-9 * std::max(1.0, u.p_max);
      double v;
      if (p[i] <= u.p_min + tol) {
        v = std::max(0.0, -g);
      } else if (p[i] >= u.p_max - tol) {
        v = std::max(0.0, g);
      } else {
        v = std::abs(g);
      }
      worst = std::max(worst, v);
    }
    return worst;
  }

  /// Normalized KKT residual. With wholesale at its lower bound the balance
  /// multiplier may sit anywhere in [0, price_eff]; the best one is used.
  double kkt_residual(const std::vector<double>& p, const Sensitivity& s, double p_wholesale) const {
    if (p.empty()) return 0.0;
    if (p_wholesale > kBindingWholesaleKw) return violation(p, s, price_) / price_;
    // violation() is convex in mu (max of convex pieces): ternary search.
    double lo = 0.0, hi = price_;
    for (int k = 0; k < 200; ++k) {
      const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
      if (violation(p, s, m1) <= violation(p, s, m2)) {
        hi = m2;
      } else {
        lo = m1;
      }
    }
    return std::min(violation(p, s, 0.5 * (lo + hi)), violation(p, s, price_)) / price_;
  }

  static constexpr double kBindingWholesaleKw = 1e-6;

 private:
  const DispatchProblem& prob_;
  const DispatchOptions& opts_;
  double total_load_ = 0.0;
  double price_ = 0.0;
};

}  // namespace detail

/// Recomputes the normalized KKT residual of `result` from scratch.
inline double kkt_residual(const DispatchProblem& problem, const DispatchResult& result, const DispatchOptions& opts = {}) {
  detail::DispatchModel model(problem, opts);
  const auto base = model.evaluate(result.p_dg);
  const auto sens = model.sensitivities(result.p_dg, base);
  return model.kkt_residual(result.p_dg, sens, result.p_wholesale);
}

inline DispatchResult solve_phase1(const DispatchProblem& problem, const DispatchOptions& opts = {}) {
  detail::DispatchModel model(problem, opts);
  const auto& units = model.units();
  const std::size_t m = units.size();
  const double price = model.price();

  double min_output = 0.0;
  for (const auto& u : units) min_output += u.p_min;
  if (min_output > model.total_load() + 1e-9 && opts.lossless)
    throw SolverError("infeasible: DG minimum output exceeds the load and wholesale cannot export");

  std::vector<double> p(m);
  for (std::size_t i = 0; i < m; ++i) p[i] = inverse_marginal(units[i], price);

  DispatchResult res;
  auto state = model.evaluate(p);
  double prev_loss = std::numeric_limits<double>::quiet_NaN();
  bool done = false;

  for (int it = 1; it <= opts.max_iter; ++it) {
    res.iterations = it;
    const auto sens = model.sensitivities(p, state);
    const double pw = model.wholesale(p, state);
    const double resid = model.kkt_residual(p, sens, pw);
    const bool loss_settled = std::isfinite(prev_loss) && std::abs(state.loss - prev_loss) < opts.loss_tol_kw;
    if (resid <= opts.kkt_tol && pw >= -detail::DispatchModel::kBindingWholesaleKw && (loss_settled || m == 0)) {
      done = true;
      break;
    }
    prev_loss = state.loss;

    std::vector<double> curv(m);
    for (std::size_t i = 0; i < m; ++i)
      curv[i] = std::max(2.0 * units[i].a + price * sens.d2loss[i] + sens.d2pen[i], 1e-12);

    auto step = [&](double mu) {
      std::vector<double> q(m);
      for (std::size_t i = 0; i < m; ++i)
        q[i] = std::clamp(p[i] - model.gradient(i, p, sens, mu) / curv[i], units[i].p_min, units[i].p_max);
      return q;
    };
    // Wholesale implied by a candidate under linearized losses.
    auto linear_wholesale = [&](const std::vector<double>& q) {
      double w = pw;
      for (std::size_t i = 0; i < m; ++i) w += (sens.dloss[i] - 1.0) * (q[i] - p[i]);
      return w;
    };

    auto next = step(price);
    if (linear_wholesale(next) < 0.0) {
      // Wholesale would go negative: hold it at zero and find the balance
      // multiplier mu in [0, price] that makes DG cover load plus losses.
      if (linear_wholesale(step(0.0)) < 0.0)
        throw SolverError("infeasible: DG minimum output exceeds load plus losses and wholesale cannot export");
      double lo = 0.0, hi = price;
      for (int k = 0; k < 200 && hi - lo > 1e-15 * price; ++k) {
        const double mid = 0.5 * (lo + hi);
        if (linear_wholesale(step(mid)) < 0.0) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      next = step(lo);
    } else {
      // Plain descent step: backtrack if the true objective did not improve.
      const double f0 = model.objective(p, state);
      for (int k = 0; k < 30; ++k) {
        const auto trial = model.evaluate(next);
        if (model.objective(next, trial) <= f0 + 1e-12 * std::abs(f0)) break;
        for (std::size_t i = 0; i < m; ++i) next[i] = 0.5 * (next[i] + p[i]);
      }
    }
    p = std::move(next);
    state = model.evaluate(p);
  }
  if (!done) throw SolverError("dispatch did not reach the KKT tolerance within " + std::to_string(opts.max_iter) + " iterations");

  res.p_dg = p;
  res.total_loss = state.loss;
  res.voltage_penalty = state.penalty;
  res.p_wholesale = std::max(0.0, model.wholesale(p, state));
  res.effective_price = price;
  res.objective = price * res.p_wholesale + model.generation_cost(p) + state.penalty;
  res.kkt_residual = model.kkt_residual(p, model.sensitivities(p, state), model.wholesale(p, state));
  res.voltage_magnitude = state.vm;
  if (!opts.lossless) {
    PowerFlowSolution view;
    view.voltage_magnitude = state.vm;
    res.voltage_violations = check_voltage_limits(view, problem.network);
  }
  res.voltage_feasible = res.voltage_violations.empty();
  return res;
}

}  // namespace retail
