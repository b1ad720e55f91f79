#pragma once

// CSV report writers and readers.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "molmeta/cca.hpp"
#include "molmeta/errors.hpp"
#include "molmeta/metalearn.hpp"
#include "molmeta/stats.hpp"
#include "molmeta/taskdata.hpp"

namespace molmeta {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

namespace detail {

inline std::ofstream open_report(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path);
  return out;
}

inline std::optional<double> parse_optional(const std::string& s, const std::string& where) {
  if (s == "NA" || s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw LoadError(where + ": not a number: '" + s + "'");
  }
}

}  // namespace detail

inline void write_records_csv(const std::string& path, const std::vector<EvalRecord>& records) {
  auto out = detail::open_report(path);
  out << "method,task_id,task_type,seed,auprc,auroc,frac_pos,n_obs\n";
  for (const auto& r : records) {
    out << r.method << ',' << r.task_id << ',' << to_char(r.task_type) << ',' << r.seed << ','
        << format_optional(r.auprc) << ',' << format_optional(r.auroc) << ',' << format_number(r.frac_pos) << ','
        << r.n_obs << '\n';
  }
}

inline std::vector<EvalRecord> read_records_csv(const std::string& path) {
  const auto table = detail::read_csv(path);
  const std::size_t c_method = detail::need_column(table, "method", path);
  const std::size_t c_task = detail::need_column(table, "task_id", path);
  const std::size_t c_type = detail::need_column(table, "task_type", path);
  const std::size_t c_seed = detail::need_column(table, "seed", path);
  const std::size_t c_auprc = detail::need_column(table, "auprc", path);
  const auto opt_col = [&](const char* name) -> std::optional<std::size_t> {
    auto it = table.columns.find(name);
    if (it == table.columns.end()) return std::nullopt;
    return it->second;
  };
  const auto c_auroc = opt_col("auroc");
  const auto c_frac = opt_col("frac_pos");
  const auto c_nobs = opt_col("n_obs");
  std::vector<EvalRecord> records;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::string where = path + ":" + std::to_string(table.line_numbers[i]);
    EvalRecord r;
    r.method = detail::cell(table, i, c_method, path);
    r.task_id = detail::cell(table, i, c_task, path);
    const auto type = parse_task_type(detail::cell(table, i, c_type, path));
    if (!type) throw LoadError(where + ": task_type must be one of A T U B F");
    r.task_type = *type;
    try {
      r.seed = std::stoull(detail::cell(table, i, c_seed, path));
    } catch (const std::exception&) {
      throw LoadError(where + ": bad seed");
    }
    r.auprc = detail::parse_optional(detail::cell(table, i, c_auprc, path), where);
    if (c_auroc) r.auroc = detail::parse_optional(detail::cell(table, i, *c_auroc, path), where);
    if (c_frac) r.frac_pos = detail::parse_optional(detail::cell(table, i, *c_frac, path), where).value_or(0.0);
    if (c_nobs) {
      r.n_obs = static_cast<std::size_t>(
          detail::parse_optional(detail::cell(table, i, *c_nobs, path), where).value_or(0.0));
    }
    records.push_back(std::move(r));
  }
  return records;
}

// One row per task subset, one column per method.
inline void write_rank_table_csv(const std::string& path, const RankTable& t) {
  auto out = detail::open_report(path);
  out << "subset,n_tasks";
  for (const auto& m : t.methods) out << ',' << m;
  out << '\n';
  for (TaskSubset s : {TaskSubset::kInDistribution, TaskSubset::kOutOfDistribution, TaskSubset::kAll}) {
    out << subset_name(s) << ',' << t.tasks.at(s);
    for (double v : t.average.at(s)) out << ',' << format_number(v);
    out << '\n';
  }
}

// Symmetric matrix with "*" on the diagonal.
inline void write_pvalue_csv(const std::string& path, const PValueMatrix& m) {
  auto out = detail::open_report(path);
  out << "method";
  for (const auto& name : m.methods) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < m.methods.size(); ++i) {
    out << m.methods[i];
    for (std::size_t j = 0; j < m.methods.size(); ++j) out << ',' << (i == j ? std::string("*") : format_number(m.p[i][j]));
    out << '\n';
  }
}

inline void write_cca_csv(const std::string& path, const std::vector<CcaReport>& reports) {
  auto out = detail::open_report(path);
  out << "subset,layer,mean_cca,std_cca,n\n";
  for (const auto& r : reports) {
    for (const auto& l : r.layers) {
      out << (r.subset == TaskSubset::kOutOfDistribution ? "ood" : subset_name(r.subset)) << ','
          << layer_name(l.layer) << ',' << format_number(l.mean) << ',' << format_number(l.std) << ',' << l.count
          << '\n';
    }
  }
}

inline void write_cca_rows_csv(const std::string& path, const std::vector<CcaReport>& reports) {
  auto out = detail::open_report(path);
  out << "subset,task_id,seed,layer,cca\n";
  for (const auto& r : reports) {
    for (const auto& row : r.rows) {
      out << (r.subset == TaskSubset::kOutOfDistribution ? "ood" : subset_name(r.subset)) << ',' << row.task_id
          << ',' << row.seed << ',' << layer_name(row.layer) << ',' << format_number(row.similarity) << '\n';
    }
  }
}

inline void write_log_csv(const std::string& path, const std::vector<LogRow>& rows) {
  auto out = detail::open_report(path);
  out << "step,split,loss,auprc\n";
  for (const auto& r : rows) {
    out << r.step << ',' << r.split << ',' << format_number(r.loss) << ',' << format_optional(r.auprc) << '\n';
  }
}

struct ThresholdPoint {
  std::size_t threshold = 0;
  std::size_t tasks = 0;
  double mean_auroc = 0.0;  // over seeds of the per-seed task average
  double std_auroc = 0.0;
};

inline void write_threshold_curve_csv(const std::string& path, const std::string& method,
                                      const std::vector<ThresholdPoint>& points) {
  auto out = detail::open_report(path);
  out << "method,threshold,n_tasks,mean_auroc,std_auroc\n";
  for (const auto& p : points) {
    out << method << ',' << p.threshold << ',' << p.tasks << ',' << format_number(p.mean_auroc) << ','
        << format_number(p.std_auroc) << '\n';
  }
}

}  // namespace molmeta
