#pragma once

// Backward/forward sweep load flow for radial feeders.
//
// Constant-power injections; slack bus held at 1.0 pu, angle 0. Each
// iteration accumulates branch currents from the leaves toward the slack
// (backward) and then propagates voltage drops outward (forward).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "retail/error.hpp"
#include "retail/network.hpp"

namespace retail {

/// Net nodal injections indexed like NetworkCase::buses(). Generation is
/// positive, load negative.
struct InjectionSet {
  std::vector<double> p_kw;
  std::vector<double> q_kvar;

  static InjectionSet zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; }
};

struct PowerFlowOptions {
  double tol_kw = 1e-3;  // max nodal |dP| or |dQ| (kW / kvar)
  int max_iter = 100;
};

struct PowerFlowSolution {
  std::vector<double> voltage_magnitude;  // pu, per bus
  std::vector<double> voltage_angle;      // rad, per bus
  std::vector<double> branch_p_kw;        // sending-end flow, per case branch
  std::vector<double> branch_q_kvar;
  double total_loss_kw = 0.0;
  double slack_p_kw = 0.0;
  double slack_q_kvar = 0.0;
  bool converged = false;
  int iterations = 0;
  double max_mismatch_kw = 0.0;
  std::vector<double> mismatch_trace;  // max mismatch after each iteration
};

inline PowerFlowSolution solve_sweep(const NetworkCase& c, const InjectionSet& inj, const PowerFlowOptions& opts = {}) {
  using cplx = std::complex<double>;
  const std::size_t n = c.buses().size();
  if (inj.p_kw.size() != n || inj.q_kvar.size() != n)
    throw ValidationError("injection set size does not match the bus count");
  if (!(opts.tol_kw > 0.0)) throw ValidationError("power flow tolerance must be > 0");

  const auto& order = c.topology();
  const double base = c.base_kw();

  std::vector<cplx> s_spec(n);
  for (std::size_t k = 0; k < n; ++k) s_spec[k] = cplx(inj.p_kw[k], inj.q_kvar[k]) / base;
  s_spec[order.slack] = 0.0;

  std::vector<cplx> z(c.branches().size());
  for (std::size_t b = 0; b < z.size(); ++b) z[b] = cplx(c.branches()[b].resistance, c.branches()[b].reactance);

  std::vector<cplx> v(n, cplx(1.0, 0.0));
  std::vector<cplx> draw(n);   // current drawn out of the network at each bus
  std::vector<cplx> acc(n);
  std::vector<cplx> j(z.size());  // branch current, parent -> child

  PowerFlowSolution sol;
  for (int it = 1; it <= opts.max_iter; ++it) {
    for (std::size_t k = 0; k < n; ++k) draw[k] = -std::conj(s_spec[k] / v[k]);
    acc = draw;
    for (auto e = order.branches.rbegin(); e != order.branches.rend(); ++e) {
      j[e->branch] = acc[e->child];
      acc[e->parent] += acc[e->child];
    }
    for (const auto& e : order.branches) v[e.child] = v[e.parent] - z[e.branch] * j[e.branch];

    // With the updated voltages the branch currents are unchanged, so the
    // residual at each bus is the injection implied by the old load current.
    double worst = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == order.slack) continue;
      const cplx ds = (-v[k] * std::conj(draw[k]) - s_spec[k]) * base;
      worst = std::max({worst, std::abs(ds.real()), std::abs(ds.imag())});
    }
    sol.mismatch_trace.push_back(worst);
    sol.iterations = it;
    sol.max_mismatch_kw = worst;
    if (!std::isfinite(worst)) break;
    if (worst <= opts.tol_kw) {
      sol.converged = true;
      break;
    }
  }

  sol.voltage_magnitude.resize(n);
  sol.voltage_angle.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    sol.voltage_magnitude[k] = std::abs(v[k]);
    sol.voltage_angle[k] = std::arg(v[k]);
  }
  sol.branch_p_kw.assign(z.size(), 0.0);
  sol.branch_q_kvar.assign(z.size(), 0.0);
  double loss = 0.0;
  cplx slack_s = 0.0;
  for (const auto& e : order.branches) {
    const cplx s_send = v[e.parent] * std::conj(j[e.branch]) * base;
    sol.branch_p_kw[e.branch] = s_send.real();
    sol.branch_q_kvar[e.branch] = s_send.imag();
    loss += z[e.branch].real() * std::norm(j[e.branch]) * base;
    if (e.parent == order.slack) slack_s += s_send;
  }
  sol.total_loss_kw = loss;
  sol.slack_p_kw = slack_s.real();
  sol.slack_q_kvar = slack_s.imag();
  return sol;
}

/// solve_sweep that turns non-convergence into a SolverError.
inline PowerFlowSolution solve_sweep_or_throw(const NetworkCase& c, const InjectionSet& inj,
                                              const PowerFlowOptions& opts = {}) {
  auto sol = solve_sweep(c, inj, opts);
  if (!sol.converged)
    throw SolverError("power flow did not converge after " + std::to_string(sol.iterations) +
                      " iterations (max mismatch " + std::to_string(sol.max_mismatch_kw) + " kW)");
  return sol;
}

/// Buses whose voltage magnitude lies outside [v_min, v_max], by bus id.
inline std::vector<int> check_voltage_limits(const PowerFlowSolution& sol, const NetworkCase& c) {
  std::vector<int> out;
  for (std::size_t k = 0; k < c.buses().size(); ++k) {
    const double vm = sol.voltage_magnitude.at(k);
    if (vm < c.v_min() || vm > c.v_max()) out.push_back(c.buses()[k].id);
  }
  return out;
}

/// Builds nodal injections: each class load is spread over its member load
/// points in proportion to their nominal kW (reactive power follows at the
/// nominal power factor); DG outputs are added at their buses.
inline InjectionSet build_injections(const NetworkCase& c, const std::vector<double>& dg_outputs,
                                     const std::vector<double>& class_loads) {
  if (dg_outputs.size() != c.dg_units().size()) throw ValidationError("expected one output per DG unit");
  if (class_loads.size() != c.classes().size()) throw ValidationError("expected one load per class");
  auto inj = InjectionSet::zeros(c.buses().size());

  std::vector<double> nominal(c.classes().size(), 0.0);
  for (const auto& l : c.loads()) nominal[c.class_index(l.class_id)] += l.p_nominal;
  for (std::size_t k = 0; k < class_loads.size(); ++k) {
    if (!(class_loads[k] >= 0.0)) throw ValidationError("class load must be >= 0");
    if (class_loads[k] > 0.0 && nominal[k] <= 0.0)
      throw ValidationError("class '" + c.classes()[k] + "' has load but no nominal load points");
  }
  for (const auto& l : c.loads()) {
    const auto k = c.class_index(l.class_id);
    if (nominal[k] <= 0.0) continue;
    const double scale = class_loads[k] / nominal[k];
    const auto bus = c.bus_index(l.bus_id);
    inj.p_kw[bus] -= l.p_nominal * scale;
    inj.q_kvar[bus] -= l.q_nominal * scale;
  }
  for (std::size_t i = 0; i < dg_outputs.size(); ++i) inj.p_kw[c.bus_index(c.dg_units()[i].bus_id)] += dg_outputs[i];
  return inj;
}

/// Total real loss (kW) for a dispatch and per-class loads.
inline double loss_with_dispatch(const NetworkCase& c, const std::vector<double>& dg_outputs,
                                 const std::vector<double>& class_loads, const PowerFlowOptions& opts = {}) {
  for (std::size_t i = 0; i < dg_outputs.size() && i < c.dg_units().size(); ++i) {
    const auto& u = c.dg_units()[i];
    if (dg_outputs[i] < u.p_min - 1e-9 || dg_outputs[i] > u.p_max + 1e-9)
      throw ValidationError("DG unit '" + u.id + "' output outside its limits");
  }
  return solve_sweep_or_throw(c, build_injections(c, dg_outputs, class_loads), opts).total_loss_kw;
}

}  // namespace retail
