#pragma once

// CSV and text-table emission for evaluation reports, learning curves and
// trajectory dumps. All output is byte-deterministic for a fixed input:
// doubles are printed with printf's shortest-round-trip %.17g everywhere.

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cbtrl/eval.hpp"
#include "cbtrl/pipeline.hpp"
#include "cbtrl/types.hpp"

namespace cbtrl {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

enum class ReportFormat { Csv, TextTable };

// One evaluated method, labeled for the report row.
struct MethodReport {
  std::string method;
  EvalReport report;
};

namespace detail_report {

inline std::vector<std::string> report_header(
    const std::vector<std::string>& atoms) {
  std::vector<std::string> cols = {"method",       "episodes",
                                   "success_rate", "mean_return",
                                   "std_return",   "mean_steps",
                                   "mean_switches"};
  for (const auto& a : atoms) {
    cols.push_back("viol_" + a);
    cols.push_back("viol_" + a + "_pct_episodes");
  }
  return cols;
}

inline std::vector<std::string> report_row(const MethodReport& m,
                                           const std::vector<std::string>& atoms,
                                           bool fixed) {
  const EvalReport& r = m.report;
  auto num = [fixed](double v) {
    return fixed ? fmt_fixed(v, 3) : fmt_double(v);
  };
  std::vector<std::string> row = {m.method,
                                  std::to_string(r.episodes.size()),
                                  num(r.success_rate()),
                                  num(r.mean_return()),
                                  num(r.std_return()),
                                  num(r.mean_steps()),
                                  num(r.mean_switches())};
  const double n = r.episodes.empty() ? 1.0 : double(r.episodes.size());
  for (const auto& a : atoms) {
    row.push_back(std::to_string(r.total_violations(a)));
    row.push_back(num(100.0 * r.episodes_with_violation(a) / n));
  }
  return row;
}

inline void write_csv_line(std::ostream& os,
                           const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i)
    os << (i ? "," : "") << cells[i];
  os << "\n";
}

}  // namespace detail_report

inline void emit_report(const std::vector<MethodReport>& methods,
                        const std::vector<std::string>& atoms,
                        ReportFormat format, std::ostream& os) {
  auto header = detail_report::report_header(atoms);
  if (format == ReportFormat::Csv) {
    detail_report::write_csv_line(os, header);
    for (const auto& m : methods)
      detail_report::write_csv_line(
          os, detail_report::report_row(m, atoms, false));
    return;
  }
  std::vector<std::vector<std::string>> rows = {header};
  for (const auto& m : methods)
    rows.push_back(detail_report::report_row(m, atoms, true));
  std::vector<size_t> width(header.size(), 0);
  for (const auto& row : rows)
    for (size_t i = 0; i < row.size(); ++i)
      width[i] = std::max(width[i], row[i].size());
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      os << (i ? "  " : "");
      os << row[i] << std::string(width[i] - row[i].size(), ' ');
    }
    os << "\n";
  }
}

inline void emit_report(const std::vector<MethodReport>& methods,
                        const std::vector<std::string>& atoms,
                        ReportFormat format, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path + "'");
  emit_report(methods, atoms, format, os);
}

// Learning-curve rows as logged by the training pipeline's periodic greedy
// evaluations.
inline void write_curve_csv(const std::vector<CurvePoint>& curve,
                            std::ostream& os) {
  os << "env_steps,episode,rank,mean_return,std_return,success_rate\n";
  for (const auto& p : curve) {
    os << p.steps << ',' << p.episode << ',' << p.rank << ','
       << fmt_double(p.mean_return) << ',' << fmt_double(p.std_return) << ','
       << fmt_double(p.success_rate) << "\n";
  }
}

inline void write_curve_csv(const std::vector<CurvePoint>& curve,
                            const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path + "'");
  write_curve_csv(curve, os);
}

// One row per transition, full decimal precision.
inline void write_trajectory_csv(const std::vector<TransitionRecord>& data,
                                 std::ostream& os) {
  size_t dim = data.empty() ? 0 : data.front().state.size();
  os << "step";
  for (size_t i = 0; i < dim; ++i) os << ",s" << i;
  os << ",action,reward";
  for (size_t i = 0; i < dim; ++i) os << ",next_s" << i;
  os << ",terminated,truncated\n";
  for (size_t t = 0; t < data.size(); ++t) {
    const auto& r = data[t];
    os << t;
    for (double v : r.state) os << ',' << fmt_double(v);
    os << ',' << r.action << ',' << fmt_double(r.reward);
    for (double v : r.next_state) os << ',' << fmt_double(v);
    os << ',' << (r.terminated ? 1 : 0) << ',' << (r.truncated ? 1 : 0)
       << "\n";
  }
}

inline void write_trajectory_csv(const std::vector<TransitionRecord>& data,
                                 const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path + "'");
  write_trajectory_csv(data, os);
}

}  // namespace cbtrl
