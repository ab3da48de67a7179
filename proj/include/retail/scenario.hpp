#pragma once

// Daily scenario files: 24 hourly load multipliers and spot prices, class
// elasticities, DG technology assignment and solver options.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "retail/case_io.hpp"
#include "retail/equilibrium.hpp"
#include "retail/json_reader.hpp"

namespace retail {

/// A value given either once for every class or per class id.
struct ClassValues {
  std::optional<double> all;
  std::map<std::string, double> per_class;

  std::vector<double> resolve(const std::vector<std::string>& classes, const std::string& what) const {
    for (const auto& [id, v] : per_class) {
      (void)v;
      if (std::find(classes.begin(), classes.end(), id) == classes.end())
        throw ValidationError(what + ": unknown class '" + id + "'");
    }
    std::vector<double> out;
    for (const auto& id : classes) {
      if (auto it = per_class.find(id); it != per_class.end()) {
        out.push_back(it->second);
      } else if (all) {
        out.push_back(*all);
      } else {
        throw ValidationError(what + ": no value for class '" + id + "'");
      }
    }
    return out;
  }
};

struct HourProfile {
  ClassValues load_multiplier;
  double spot_price = 0.0;
};

struct Scenario {
  static constexpr std::size_t kHours = 24;

  std::string name;
  std::vector<HourProfile> hours;
  ClassValues beta;
  std::optional<std::string> technology;              // every unit
  std::map<std::string, std::string> unit_technology;  // per unit id
  EquilibriumConfig config;
  bool dg_enabled = true;
  double beta_min = -1.0;
  bool allow_positive_beta = false;
};

namespace detail {

inline ClassValues read_class_values(const nlohmann::json& v, const std::string& path) {
  ClassValues cv;
  if (v.is_number()) {
    cv.all = v.get<double>();
  } else if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it)
      cv.per_class[it.key()] = json_io::ObjectReader::as_number(it.value(), path + "." + it.key());
  } else {
    throw ParseError(path + ": expected a number or an object keyed by class", path);
  }
  return cv;
}

inline void check_scenario(const Scenario& s) {
  if (s.hours.size() != Scenario::kHours)
    throw ValidationError("scenario must have exactly 24 hourly entries, found " + std::to_string(s.hours.size()));
  auto check_mult = [](double v, std::size_t h) {
    if (!(v >= 0.0)) throw ValidationError("hour " + std::to_string(h) + ": load multiplier must be >= 0");
  };
  for (std::size_t h = 0; h < s.hours.size(); ++h) {
    const auto& hp = s.hours[h];
    if (hp.load_multiplier.all) check_mult(*hp.load_multiplier.all, h);
    for (const auto& [id, v] : hp.load_multiplier.per_class) {
      (void)id;
      check_mult(v, h);
    }
    if (!(hp.spot_price > 0.0)) throw ValidationError("hour " + std::to_string(h) + ": spot price must be > 0");
  }
  auto check_beta = [&](double b) {
    if (b > 0.0 && !s.allow_positive_beta) throw ValidationError("positive elasticity " + std::to_string(b) + " rejected");
    if (b < s.beta_min) throw ValidationError("elasticity " + std::to_string(b) + " below beta_min");
  };
  if (s.beta.all) check_beta(*s.beta.all);
  for (const auto& [id, b] : s.beta.per_class) {
    (void)id;
    check_beta(b);
  }
  validate_config(s.config);
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>") {
  using namespace json_io;
  const json root = parse_text(text, source);
  ObjectReader top(root, "");
  Scenario s;
  s.name = top.string_or("name", "");
  s.beta = detail::read_class_values(top.required("beta"), "beta");

  if (const auto* tech = top.optional("technology")) {
    if (tech->is_string()) {
      s.technology = tech->get<std::string>();
    } else if (tech->is_object()) {
      for (auto it = tech->begin(); it != tech->end(); ++it)
        s.unit_technology[it.key()] = ObjectReader::as_string(it.value(), "technology." + it.key());
    } else {
      throw ParseError("technology: expected a name or an object keyed by unit id", "technology");
    }
  }

  const auto& hours = require_array(top.required("hours"), "hours");
  for (std::size_t h = 0; h < hours.size(); ++h) {
    const auto path = index_path("hours", h);
    ObjectReader r(hours[h], path);
    HourProfile hp;
    if (const auto* idx = r.optional("hour")) {
      if (ObjectReader::as_integer(*idx, path + ".hour") != static_cast<int>(h))
        throw ValidationError(path + ".hour: hours must be listed in order starting at 0");
    }
    hp.load_multiplier = detail::read_class_values(r.required("load_multiplier"), path + ".load_multiplier");
    hp.spot_price = r.number("spot_price");
    r.finish();
    s.hours.push_back(std::move(hp));
  }

  if (const auto* opts = top.optional("options")) {
    ObjectReader r(*opts, "options");
    auto& c = s.config;
    c.price_tol = r.number_or("price_tol", c.price_tol);
    if (const auto* v = r.optional("max_iters")) c.max_iters = ObjectReader::as_integer(*v, "options.max_iters");
    c.damping = r.number_or("damping", c.damping);
    c.auto_damping = r.boolean_or("auto_damping", c.auto_damping);
    c.markup = r.number_or("markup", c.markup);
    c.pricing.price_cap_factor = r.number_or("price_cap_factor", c.pricing.price_cap_factor);
    c.demand_floor = r.boolean_or("demand_floor", c.demand_floor);
    c.wholesale_at_spot = r.boolean_or("wholesale_at_spot", c.wholesale_at_spot);
    c.flat_mc = r.boolean_or("flat_mc", c.flat_mc);
    c.pooled = r.boolean_or("pooled", c.pooled);
    c.dispatch.voltage_penalty = r.number_or("voltage_penalty", c.dispatch.voltage_penalty);
    c.dispatch.kkt_tol = r.number_or("kkt_tol", c.dispatch.kkt_tol);
    c.dispatch.fd_step_kw = r.number_or("fd_step_kw", c.dispatch.fd_step_kw);
    c.dispatch.loss_tol_kw = r.number_or("loss_tol_kw", c.dispatch.loss_tol_kw);
    c.dispatch.power_flow.tol_kw = r.number_or("pf_tol_kw", c.dispatch.power_flow.tol_kw);
    s.dg_enabled = r.boolean_or("dg_enabled", s.dg_enabled);
    s.beta_min = r.number_or("beta_min", s.beta_min);
    s.allow_positive_beta = r.boolean_or("allow_positive_beta", s.allow_positive_beta);
    r.finish();
  }
  top.finish();
  detail::check_scenario(s);
  return s;
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(json_io::read_file(path), path); }

/// Case as the scenario wants it: technologies applied, DG dropped when
/// disabled.
inline NetworkCase prepare_case(const NetworkCase& c, const Scenario& s,
                                const TechnologyCatalog& catalog = builtin_catalog()) {
  if (!s.dg_enabled) return without_dg(c);
  CaseData d = c.data();
  for (const auto& [id, tech] : s.unit_technology) {
    (void)tech;
    const bool found = std::any_of(d.dg_units.begin(), d.dg_units.end(), [&](const DGUnit& u) { return u.id == id; });
    if (!found) throw ValidationError("scenario assigns a technology to unknown DG unit '" + id + "'");
  }
  for (auto& u : d.dg_units) {
    if (auto it = s.unit_technology.find(u.id); it != s.unit_technology.end()) {
      u = with_technology(u, catalog.at(it->second));
    } else if (s.technology) {
      u = with_technology(u, catalog.at(*s.technology));
    }
  }
  return NetworkCase(std::move(d));
}

/// Per-hour solver inputs for the case's class list.
inline std::vector<HourInputs> hour_inputs(const Scenario& s, const NetworkCase& c) {
  const auto betas = s.beta.resolve(c.classes(), "beta");
  std::vector<HourInputs> out;
  for (std::size_t h = 0; h < s.hours.size(); ++h) {
    HourInputs in;
    in.load_multipliers = s.hours[h].load_multiplier.resolve(c.classes(), "hours[" + std::to_string(h) + "].load_multiplier");
    in.spot_price = s.hours[h].spot_price;
    in.betas = betas;
    out.push_back(std::move(in));
  }
  return out;
}

/// Scenario with the given elasticity for every class.
inline Scenario with_beta(Scenario s, double beta) {
  s.beta = ClassValues{beta, {}};
  detail::check_scenario(s);
  return s;
}

}  // namespace retail
