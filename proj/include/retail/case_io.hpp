#pragma once

// Case and technology-catalog files (JSON). See docs/file_formats.md.

#include <string>
#include <utility>
#include <vector>

#include "retail/dg_cost.hpp"
#include "retail/json_reader.hpp"
#include "retail/network.hpp"

namespace retail {

inline TechnologyCatalog parse_catalog(const std::string& text, const std::string& source = "<catalog>") {
  using namespace json_io;
  const json root = parse_text(text, source);
  ObjectReader top(root, "");
  const double scale = top.number_or("scale", 1.0);
  if (!(scale > 0.0)) throw ValidationError("catalog scale must be > 0");
  const auto& rows = require_array(top.required("technologies"), "technologies");
  TechnologyCatalog catalog;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ObjectReader r(rows[i], index_path("technologies", i));
    Technology t;
    t.name = r.string("name");
    t.a = r.number("a") * scale;
    t.b = r.number("b") * scale;
    t.c_fixed = r.number("c") * scale;
    t.p_min = r.number("p_min");
    t.p_max = r.number("p_max");
    r.finish();
    catalog.add(std::move(t));
  }
  top.finish();
  return catalog;
}

inline TechnologyCatalog load_catalog(const std::string& path) {
  return parse_catalog(json_io::read_file(path), path);
}

/// Parses a case description. DG units name a technology; coefficients come
/// from `catalog` unless the entry spells them out.
inline CaseData parse_case_data(const std::string& text, const TechnologyCatalog& catalog,
                                const std::string& source = "<case>") {
  using namespace json_io;
  const json root = parse_text(text, source);
  ObjectReader top(root, "");
  CaseData d;
  d.name = top.string_or("name", "");
  d.base_mva = top.number("base_mva");

  const auto& buses = require_array(top.required("buses"), "buses");
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const auto path = index_path("buses", i);
    ObjectReader r(buses[i], path);
    Bus b;
    b.id = r.integer("id");
    const auto kind = r.string("kind");
    if (kind == "slack") {
      b.kind = BusKind::slack;
    } else if (kind == "load") {
      b.kind = BusKind::load;
    } else {
      throw ParseError(path + ".kind: expected \"slack\" or \"load\"", path + ".kind");
    }
    b.base_kv = r.number("base_kv");
    r.finish();
    d.buses.push_back(b);
  }

  const auto& branches = require_array(top.required("branches"), "branches");
  for (std::size_t i = 0; i < branches.size(); ++i) {
    ObjectReader r(branches[i], index_path("branches", i));
    Branch br;
    br.from_bus = r.integer("from");
    br.to_bus = r.integer("to");
    br.resistance = r.number("r");
    br.reactance = r.number("x");
    r.finish();
    d.branches.push_back(br);
  }

  const auto& loads = require_array(top.required("loads"), "loads");
  for (std::size_t i = 0; i < loads.size(); ++i) {
    ObjectReader r(loads[i], index_path("loads", i));
    LoadPoint l;
    l.bus_id = r.integer("bus");
    l.p_nominal = r.number("p");
    l.q_nominal = r.number_or("q", 0.0);
    l.class_id = r.string("class");
    r.finish();
    d.loads.push_back(std::move(l));
  }

  if (const auto* units = top.optional("dg_units")) {
    require_array(*units, "dg_units");
    for (std::size_t i = 0; i < units->size(); ++i) {
      const auto path = index_path("dg_units", i);
      ObjectReader r((*units)[i], path);
      DGUnit u;
      u.id = r.string("id");
      u.bus_id = r.integer("bus");
      u.technology = r.string("technology");
      if (catalog.contains(u.technology)) u = with_technology(u, catalog.at(u.technology));
      const bool known = catalog.contains(u.technology);
      auto field = [&](const char* key, double& slot) {
        if (r.has(key)) {
          slot = r.number(key);
        } else {
          r.optional(key);
          if (!known)
            throw ParseError(path + "." + key + ": required for technology '" + u.technology + "' (not in catalog)",
                             path + "." + key);
        }
      };
      field("a", u.a);
      field("b", u.b);
      field("c", u.c_fixed);
      field("p_min", u.p_min);
      field("p_max", u.p_max);
      r.finish();
      d.dg_units.push_back(std::move(u));
    }
  }

  const auto& classes = require_array(top.required("classes"), "classes");
  for (std::size_t i = 0; i < classes.size(); ++i)
    d.classes.push_back(ObjectReader::as_string(classes[i], index_path("classes", i)));

  if (const auto* limits = top.optional("limits")) {
    ObjectReader r(*limits, "limits");
    d.v_min = r.number_or("v_min", d.v_min);
    d.v_max = r.number_or("v_max", d.v_max);
    r.finish();
  }
  top.finish();
  return d;
}

inline NetworkCase parse_case(const std::string& text, const TechnologyCatalog& catalog = builtin_catalog(),
                              const std::string& source = "<case>") {
  return NetworkCase(parse_case_data(text, catalog, source));
}

inline NetworkCase load_case(const std::string& path, const TechnologyCatalog& catalog = builtin_catalog()) {
  return parse_case(json_io::read_file(path), catalog, path);
}

}  // namespace retail
