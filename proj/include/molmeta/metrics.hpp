#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "molmeta/errors.hpp"

namespace molmeta {

namespace detail {

inline void check_metric_inputs(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("metric: scores and labels differ in length");
  }
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw ContractError("metric: labels must be 0 or 1");
  }
}

}  // namespace detail

// Mann-Whitney AUROC: probability that a random positive outscores a random
// negative, ties counted one half. Computed from mid-ranks in O(n log n).
inline double auroc(std::span<const double> scores, std::span<const double> labels) {
  detail::check_metric_inputs(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  double positives = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1.0) {
        rank_sum += mid;
        positives += 1.0;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw UndefinedMetricError("AUROC needs both classes");
  }
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

// Average precision: the sum over positive hits of precision at that rank
// times the recall step 1/P. Items are ordered by descending score; equal
// scores keep their input order (stable sort).
inline double auprc(std::span<const double> scores, std::span<const double> labels) {
  detail::check_metric_inputs(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double positives = 0.0;
  for (double y : labels) positives += y;
  if (positives == 0.0) throw UndefinedMetricError("AUPRC needs at least one positive");
  double hits = 0.0, total = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == 1.0) {
      hits += 1.0;
      total += hits / static_cast<double>(k + 1);
    }
  }
  return total / positives;
}

inline double fraction_positive(std::span<const double> labels) {
  if (labels.empty()) return 0.0;
  double p = 0.0;
  for (double y : labels) p += y;
  return p / static_cast<double>(labels.size());
}

}  // namespace molmeta
