#pragma once

// Evaluation records, average-rank tables and the Wilcoxon signed-rank test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "molmeta/errors.hpp"
#include "molmeta/taskdata.hpp"

namespace molmeta {

struct EvalRecord {
  std::string method;
  std::string task_id;
  TaskType task_type = TaskType::U;
  std::uint64_t seed = 0;
  std::optional<double> auprc;  // empty when undefined on the test split
  std::optional<double> auroc;
  double frac_pos = 0.0;
  std::size_t n_obs = 0;
};

enum class TaskSubset { kInDistribution, kOutOfDistribution, kAll };

inline const char* subset_name(TaskSubset s) {
  switch (s) {
    case TaskSubset::kInDistribution: return "in_distribution";
    case TaskSubset::kOutOfDistribution: return "out_of_distribution";
    case TaskSubset::kAll: return "all";
  }
  return "?";
}

inline bool in_subset(TaskType t, TaskSubset s) {
  switch (s) {
    case TaskSubset::kInDistribution: return !is_out_of_distribution(t);
    case TaskSubset::kOutOfDistribution: return is_out_of_distribution(t);
    case TaskSubset::kAll: return true;
  }
  return false;
}

struct CellSummary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

// Mean (and spread) AUPRC per method and task.
struct ScoreTable {
  std::vector<std::string> methods;  // column order of the report
  std::vector<std::string> tasks;
  std::map<std::string, TaskType> task_types;
  std::map<std::pair<std::string, std::string>, CellSummary> cells;  // (method, task)

  void set(const std::string& method, const std::string& task, TaskType type, CellSummary c) {
    if (std::find(methods.begin(), methods.end(), method) == methods.end()) methods.push_back(method);
    if (std::find(tasks.begin(), tasks.end(), task) == tasks.end()) tasks.push_back(task);
    task_types[task] = type;
    cells[{method, task}] = c;
  }
};

// Sample standard deviation over seeds (0 for a single seed). Records with
// an undefined AUPRC are skipped.
inline ScoreTable summarize(std::span<const EvalRecord> records) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  ScoreTable t;
  for (const auto& r : records) {
    if (std::find(t.methods.begin(), t.methods.end(), r.method) == t.methods.end()) t.methods.push_back(r.method);
    if (std::find(t.tasks.begin(), t.tasks.end(), r.task_id) == t.tasks.end()) t.tasks.push_back(r.task_id);
    t.task_types[r.task_id] = r.task_type;
    if (r.auprc) values[{r.method, r.task_id}].push_back(*r.auprc);
  }
  for (const auto& [key, v] : values) {
    CellSummary c;
    c.count = v.size();
    c.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - c.mean) * (x - c.mean);
      c.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    t.cells[key] = c;
  }
  return t;
}

struct RankTable {
  std::vector<std::string> methods;
  std::map<TaskSubset, std::vector<double>> average;  // per method, NaN for an empty subset
  std::map<TaskSubset, std::size_t> tasks;
};

// Within each task, methods are ordered by descending mean AUPRC; equal means
// are ordered by ascending std, and methods equal in both share the mean of
// their ranks. Ranks are then averaged over the tasks of each subset.
inline RankTable rank_table(const ScoreTable& table) {
  RankTable out;
  out.methods = table.methods;
  const std::size_t m = table.methods.size();
  std::map<TaskSubset, std::vector<double>> sums;
  for (TaskSubset s : {TaskSubset::kInDistribution, TaskSubset::kOutOfDistribution, TaskSubset::kAll}) {
    sums[s].assign(m, 0.0);
    out.tasks[s] = 0;
  }
  std::vector<std::string> missing;
  for (const auto& task : table.tasks) {
    std::vector<CellSummary> cells(m);
    bool complete = true;
    for (std::size_t i = 0; i < m; ++i) {
      auto it = table.cells.find({table.methods[i], task});
      if (it == table.cells.end()) {
        missing.push_back(table.methods[i] + "/" + task);
        complete = false;
      } else {
        cells[i] = it->second;
      }
    }
    if (!complete) continue;
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    auto better = [&](std::size_t a, std::size_t b) {
      if (cells[a].mean != cells[b].mean) return cells[a].mean > cells[b].mean;
      return cells[a].std < cells[b].std;
    };
    std::stable_sort(order.begin(), order.end(), better);
    std::vector<double> rank(m);
    for (std::size_t i = 0; i < m;) {
      std::size_t j = i;
      while (j < m && !better(order[i], order[j]) && !better(order[j], order[i])) ++j;
      const double mid = 0.5 * static_cast<double>(i + 1 + j);
      for (std::size_t k = i; k < j; ++k) rank[order[k]] = mid;
      i = j;
    }
    const TaskType type = table.task_types.at(task);
    for (auto& [subset, sum] : sums) {
      if (!in_subset(type, subset)) continue;
      out.tasks[subset] += 1;
      for (std::size_t i = 0; i < m; ++i) sum[i] += rank[i];
    }
  }
  if (!missing.empty()) {
    std::string msg = "rank table: missing method/task cells:";
    for (const auto& s : missing) msg += " " + s;
    throw AnalysisError(msg);
  }
  for (auto& [subset, sum] : sums) {
    const double n = static_cast<double>(out.tasks[subset]);
    std::vector<double> avg(m, std::nan(""));
    if (n > 0) {
      for (std::size_t i = 0; i < m; ++i) avg[i] = sum[i] / n;
    }
    out.average[subset] = std::move(avg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double p_value = 1.0;    // two-sided
  std::size_t n = 0;       // pairs with non-zero difference
  bool exact = false;
  bool degenerate = false;  // every difference was zero
};

inline constexpr std::size_t kWilcoxonExactMax = 12;

namespace detail {

// Mid-ranks of `v` (1-based).
inline std::vector<double> mid_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && v[order[j]] == v[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) r[order[k]] = mid;
    i = j;
  }
  return r;
}

}  // namespace detail

inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("wilcoxon: samples differ in length");
  if (x.empty()) throw ContractError("wilcoxon: empty sample");
  std::vector<double> abs_d;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    if (d == 0.0) continue;
    abs_d.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  WilcoxonResult res;
  res.n = abs_d.size();
  if (res.n == 0) {
    res.degenerate = true;
    res.p_value = 1.0;
    return res;
  }
  const auto ranks = detail::mid_ranks(abs_d);
  double w_plus = 0.0, w_minus = 0.0;
  for (std::size_t i = 0; i < res.n; ++i) (positive[i] ? w_plus : w_minus) += ranks[i];
  res.statistic = std::min(w_plus, w_minus);
  const double n = static_cast<double>(res.n);

  if (res.n <= kWilcoxonExactMax) {
    // Null distribution of W+ over all 2^n sign patterns; mid-ranks are
    // multiples of 1/2, so the DP runs over doubled ranks.
    res.exact = true;
    std::vector<int> doubled(res.n);
    int total = 0;
    for (std::size_t i = 0; i < res.n; ++i) {
      doubled[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      total += doubled[i];
    }
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (int r : doubled) {
      for (int s = total; s >= r; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];
    }
    const int obs = static_cast<int>(std::lround(2.0 * res.statistic));
    double tail = 0.0;
    for (int s = 0; s <= obs; ++s) tail += count[static_cast<std::size_t>(s)];
    res.p_value = std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(res.n)));
    return res;
  }

  // Normal approximation with tie and continuity corrections.
  std::vector<double> sorted = abs_d;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  const double z = std::max(0.0, std::abs(res.statistic - mean) - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

// Pairwise two-sided p-values between methods over their common
// (task, seed) grid. Every method must cover the same grid.
struct PValueMatrix {
  std::vector<std::string> methods;
  std::vector<std::vector<double>> p;  // p[i][i] is NaN
  std::size_t datapoints = 0;
};

inline PValueMatrix wilcoxon_matrix(std::span<const EvalRecord> records) {
  std::vector<std::string> methods;
  std::map<std::string, std::map<std::pair<std::string, std::uint64_t>, double>> grid;
  std::set<std::pair<std::string, std::uint64_t>> keys;
  for (const auto& r : records) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    if (!r.auprc) continue;
    grid[r.method][{r.task_id, r.seed}] = *r.auprc;
    keys.insert({r.task_id, r.seed});
  }
  std::vector<std::string> missing;
  for (const auto& m : methods) {
    for (const auto& k : keys) {
      if (!grid[m].count(k)) missing.push_back(m + "/" + k.first + "/seed " + std::to_string(k.second));
    }
  }
  if (!missing.empty()) {
    std::string msg = "evaluation grid mismatch, missing:";
    for (const auto& s : missing) msg += " " + s;
    throw AnalysisError(msg);
  }
  PValueMatrix out;
  out.methods = methods;
  out.datapoints = keys.size();
  const std::size_t m = methods.size();
  out.p.assign(m, std::vector<double>(m, std::nan("")));
  std::vector<std::vector<double>> vec(m);
  for (std::size_t i = 0; i < m; ++i)
    for (const auto& k : keys) vec[i].push_back(grid[methods[i]][k]);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (keys.empty()) continue;
      const double p = wilcoxon_signed_rank(vec[i], vec[j]).p_value;
      out.p[i][j] = out.p[j][i] = p;
    }
  }
  return out;
}

}  // namespace molmeta
