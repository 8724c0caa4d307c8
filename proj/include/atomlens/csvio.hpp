#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "efficiency.hpp"
#include "errors.hpp"
#include "lens_design.hpp"
#include "telegraph.hpp"

namespace atomlens {

// 9 significant digits: enough to round-trip the physics while keeping
// exports byte-stable across runs.
inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::string(buf);
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // row index 0 is file line 2
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  CsvTable t;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (t.header.empty()) {
      t.header = fields;
    } else {
      if (fields.size() != t.header.size())
        throw input_error(path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(t.header.size()) + " columns, got " +
                          std::to_string(fields.size()));
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.header.empty()) throw input_error(path + ": empty file");
  return t;
}

inline double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw input_error(context + ": not a number: '" + s + "'");
  }
}

inline long parse_long(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw input_error(context + ": not an integer: '" + s + "'");
  }
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);  // binary: identical bytes on every platform
  if (!out) throw input_error("cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

// --- layout schema ----------------------------------------------------------

inline void save_layout_csv(const LayoutTable& layout, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(layout.sites.size() + 1);
  lines.emplace_back("x_m,y_m,class,theta_rad,len_m,wid_m");
  for (const auto& s : layout.sites)
    lines.push_back(fmt9(s.x_m) + "," + fmt9(s.y_m) + "," +
                    std::to_string(static_cast<int>(s.cls)) + "," + fmt9(s.theta_rad) + "," +
                    fmt9(s.len_m) + "," + fmt9(s.wid_m));
  write_lines(path, lines);
}

inline std::vector<NanobrickSpec> load_layout_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const std::vector<std::string> expected = {"x_m", "y_m", "class",
                                             "theta_rad", "len_m", "wid_m"};
  if (t.header != expected) throw input_error(path + ": unexpected layout header");
  std::vector<NanobrickSpec> sites;
  sites.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string ctx = path + ":" + std::to_string(i + 2);
    const auto& r = t.rows[i];
    NanobrickSpec s;
    s.x_m = parse_double(r[0], ctx);
    s.y_m = parse_double(r[1], ctx);
    const long cls = parse_long(r[2], ctx);
    if (cls != 1 && cls != 2) throw input_error(ctx + ": class must be 1 or 2");
    s.cls = static_cast<BrickClass>(cls);
    s.theta_rad = parse_double(r[3], ctx);
    s.len_m = parse_double(r[4], ctx);
    s.wid_m = parse_double(r[5], ctx);
    sites.push_back(s);
  }
  return sites;
}

// --- efficiency schema ------------------------------------------------------

inline void save_efficiency_csv(const EfficiencyTable& table, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(table.lambda_m.size() + 1);
  lines.emplace_back("lambda_m,eff_class1,eff_class2");
  for (std::size_t i = 0; i < table.lambda_m.size(); ++i)
    lines.push_back(fmt9(table.lambda_m[i]) + "," + fmt9(table.eff_class1[i]) + "," +
                    fmt9(table.eff_class2[i]));
  write_lines(path, lines);
}

inline EfficiencyTable load_efficiency_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const std::vector<std::string> expected = {"lambda_m", "eff_class1", "eff_class2"};
  if (t.header != expected) throw input_error(path + ": unexpected efficiency header");
  EfficiencyTable table;
  double prev = -1;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string ctx = path + ":" + std::to_string(i + 2);
    const auto& r = t.rows[i];
    const double lam = parse_double(r[0], ctx);
    if (lam <= prev) throw input_error(ctx + ": wavelengths must be strictly ascending");
    prev = lam;
    const double e1 = parse_double(r[1], ctx);
    const double e2 = parse_double(r[2], ctx);
    if (e1 < 0 || e1 > 1 || e2 < 0 || e2 > 1)
      throw input_error(ctx + ": efficiencies must be within [0, 1]");
    table.lambda_m.push_back(lam);
    table.eff_class1.push_back(e1);
    table.eff_class2.push_back(e2);
  }
  if (table.lambda_m.size() < 2) throw input_error(path + ": needs >= 2 rows");
  return table;
}

// --- trace schema -----------------------------------------------------------

inline void save_trace_csv(const TelegraphTrace& trace, const std::string& path) {
  std::vector<std::string> lines;
  lines.reserve(trace.counts.size() + 1);
  lines.emplace_back("bin_index,t_start_s,counts");
  for (int b = 0; b < trace.n_bins(); ++b)
    lines.push_back(std::to_string(b) + "," + fmt9(trace.t_start(b)) + "," +
                    std::to_string(trace.counts[b]));
  write_lines(path, lines);
}

// Counts column with full validation; timing consistency is checked against
// the sidecar-provided bin width.
inline std::vector<long> load_trace_csv(const std::string& path, double bin_s) {
  const CsvTable t = read_csv(path);
  const std::vector<std::string> expected = {"bin_index", "t_start_s", "counts"};
  if (t.header != expected) throw input_error(path + ": unexpected trace header");
  std::vector<long> counts;
  counts.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string ctx = path + ":" + std::to_string(i + 2);
    const auto& r = t.rows[i];
    const long idx = parse_long(r[0], ctx);
    if (idx != static_cast<long>(i))
      throw input_error(ctx + ": bin_index must be contiguous from 0");
    const double t_start = parse_double(r[1], ctx);
    if (std::abs(t_start - idx * bin_s) > 1e-9 * std::max(1.0, std::abs(t_start)))
      throw input_error(ctx + ": t_start_s inconsistent with bin_s");
    const long c = parse_long(r[2], ctx);
    if (c < 0) throw input_error(ctx + ": negative counts");
    counts.push_back(c);
  }
  if (counts.empty()) throw input_error(path + ": no data rows");
  return counts;
}

// --- generic two-column profile --------------------------------------------

inline void save_xy_csv(const std::string& path, const std::string& x_name,
                        const std::string& y_name, const std::vector<double>& x,
                        const std::vector<double>& y) {
  if (x.size() != y.size()) throw input_error("save_xy_csv: column length mismatch");
  std::vector<std::string> lines;
  lines.reserve(x.size() + 1);
  lines.emplace_back(x_name + "," + y_name);
  for (std::size_t i = 0; i < x.size(); ++i)
    lines.push_back(fmt9(x[i]) + "," + fmt9(y[i]));
  write_lines(path, lines);
}

inline void load_xy_csv(const std::string& path, std::vector<double>& x,
                        std::vector<double>& y) {
  const CsvTable t = read_csv(path);
  if (t.header.size() < 2) throw input_error(path + ": need at least two columns");
  x.clear();
  y.clear();
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string ctx = path + ":" + std::to_string(i + 2);
    x.push_back(parse_double(t.rows[i][0], ctx));
    y.push_back(parse_double(t.rows[i][1], ctx));
  }
  if (x.size() < 2) throw input_error(path + ": needs >= 2 data rows");
}

}  // namespace atomlens
