#pragma once

// CSV output: hourly.csv, summary.csv and the optional iteration trace.
// Numbers are printed with exactly six decimals so repeated runs produce
// identical bytes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "retail/equilibrium.hpp"
#include "retail/error.hpp"

namespace retail {

namespace csv {

inline std::string fixed6(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s = buf;
  if (s == "-0.000000") s = "0.000000";
  return s;
}

inline std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string join(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += quote(fields[i]);
  }
  return line + "\n";
}

/// Splits one CSV record (RFC 4180 quoting, no embedded newlines).
inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        out.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.emplace_back();
    } else if (ch != '\r') {
      out.back() += ch;
    }
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ParseError("CSV has no column '" + name + "'", name);
  }
};

inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", "");
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size())
        throw ParseError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                             " fields",
                         "", lineno);
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace csv

inline std::string hourly_csv(const DailyResults& r) {
  std::vector<std::string> header{"hour", "class", "price", "load", "p_wholesale"};
  for (const auto& id : r.unit_ids) header.push_back("p_dg_" + id);
  for (const char* h : {"profit", "losses", "iterations", "converged"}) header.emplace_back(h);
  std::string out = csv::join(header);
  const double nan = std::nan("");
  for (const auto& h : r.hours) {
    for (std::size_t k = 0; k < r.classes.size(); ++k) {
      std::vector<std::string> row{std::to_string(h.hour), r.classes[k]};
      if (h.ok()) {
        const auto& eq = *h.equilibrium;
        const auto& d = eq.decisions[k];
        row.push_back(csv::fixed6(d.price));
        row.push_back(csv::fixed6(d.load));
        row.push_back(csv::fixed6(d.p_wholesale));
        for (double p : d.p_dg) row.push_back(csv::fixed6(p));
        row.push_back(csv::fixed6(d.profit));
        row.push_back(csv::fixed6(eq.dispatch.total_loss));
        row.push_back(std::to_string(eq.iterations));
        row.push_back(eq.converged ? "true" : "false");
      } else {
        for (std::size_t i = 0; i < 3 + r.unit_ids.size() + 2; ++i) row.push_back(csv::fixed6(nan));
        row.push_back("0");
        row.push_back("false");
      }
      out += csv::join(row);
    }
  }
  return out;
}

inline std::string summary_csv(const DailyResults& r) {
  std::string out = csv::join({"retailer", "technology", "daily_profit", "mean_price", "partial"});
  for (std::size_t k = 0; k < r.classes.size(); ++k)
    out += csv::join({r.classes[k], r.technology, csv::fixed6(r.daily_profit[k]), csv::fixed6(r.mean_price[k]),
                      r.partial ? "true" : "false"});
  return out;
}

inline std::string trace_csv(const DailyResults& r) {
  std::string out = csv::join(
      {"hour", "iteration", "class", "price", "target", "residual", "input_gap", "damping", "p_dg_total", "p_wholesale",
       "loss"});
  for (const auto& h : r.hours) {
    if (!h.ok()) continue;
    for (const auto& rec : h.equilibrium->trace)
      for (std::size_t k = 0; k < r.classes.size(); ++k)
        out += csv::join({std::to_string(h.hour), std::to_string(rec.iteration), r.classes[k],
                          csv::fixed6(rec.prices[k]), csv::fixed6(rec.targets[k]), csv::fixed6(rec.residual),
                          csv::fixed6(rec.input_gap), csv::fixed6(rec.damping), csv::fixed6(rec.p_dg_total), csv::fixed6(rec.p_wholesale),
                          csv::fixed6(rec.loss)});
  }
  return out;
}

/// Writes hourly.csv and summary.csv (and trace.csv if asked) into `dir`.
inline void export_results(const DailyResults& r, const std::filesystem::path& dir, bool trace = false) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create '" + dir.string() + "': " + ec.message());
  csv::write_file(dir / "hourly.csv", hourly_csv(r));
  csv::write_file(dir / "summary.csv", summary_csv(r));
  if (trace) csv::write_file(dir / "trace.csv", trace_csv(r));
}

struct SummaryRow {
  std::string retailer;
  std::string technology;
  double daily_profit = 0.0;
  double mean_price = 0.0;
  bool partial = false;
};

inline std::vector<SummaryRow> read_summary(const std::string& path) {
  const auto t = csv::read(path);
  const auto cr = t.column("retailer"), ct = t.column("technology"), cp = t.column("daily_profit"),
             cm = t.column("mean_price"), cx = t.column("partial");
  std::vector<SummaryRow> out;
  for (const auto& row : t.rows)
    out.push_back({row[cr], row[ct], std::stod(row[cp]), std::stod(row[cm]), row[cx] == "true"});
  return out;
}

}  // namespace retail
