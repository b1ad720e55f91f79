#pragma once

// Canonical correlation similarity between activation matrices, and the
// pre/post adaptation experiment built on it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "molmeta/errors.hpp"
#include "molmeta/metalearn.hpp"
#include "molmeta/stats.hpp"
#include "molmeta/tensor.hpp"

namespace molmeta {

inline constexpr double kCcaRankTolerance = 1e-10;

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Orthonormal basis of the column space of the centred matrix.
inline Eigen::MatrixXd centred_basis(const Tensor& a, const char* which) {
  if (a.rank() != 2) throw DimensionError(std::string("cca: ") + which + " must be a matrix");
  Eigen::Map<const RowMatrix> m(a.data().data(), static_cast<Eigen::Index>(a.rows()),
                                static_cast<Eigen::Index>(a.cols()));
  Eigen::MatrixXd x = m;
  x.rowwise() -= x.colwise().mean();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s.maxCoeff() : 0.0;
  if (!(smax > 0.0)) throw DegenerateInputError(std::string("cca: ") + which + " has zero variance");
  Eigen::Index r = 0;
  while (r < s.size() && s[r] > kCcaRankTolerance * smax) ++r;
  return svd.matrixU().leftCols(r);
}

}  // namespace detail

// Mean canonical correlation over all components up to numerical rank.
inline double cca_similarity(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows()) {
    throw DimensionError("cca: inputs must be matrices with the same number of rows");
  }
  const Eigen::MatrixXd qa = detail::centred_basis(a, "first input");
  const Eigen::MatrixXd qb = detail::centred_basis(b, "second input");
  const Eigen::MatrixXd cross = qa.transpose() * qb;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
  const auto& s = svd.singularValues();
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) total += std::clamp(s[i], 0.0, 1.0);
  return std::clamp(total / static_cast<double>(s.size()), 0.0, 1.0);
}

enum class CcaLayer { kEmbedding, kFfn1, kFfn2 };

inline const char* layer_name(CcaLayer l) {
  switch (l) {
    case CcaLayer::kEmbedding: return "molecule_embedding";
    case CcaLayer::kFfn1: return "ffn_1";
    case CcaLayer::kFfn2: return "ffn_2";
  }
  return "?";
}

struct CcaLayerSummary {
  CcaLayer layer = CcaLayer::kEmbedding;
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

struct CcaReport {
  TaskSubset subset = TaskSubset::kAll;
  std::vector<CcaLayerSummary> layers;
  // (task, seed, layer) -> similarity
  struct Row {
    std::string task_id;
    std::uint64_t seed = 0;
    CcaLayer layer = CcaLayer::kEmbedding;
    double similarity = 0.0;
  };
  std::vector<Row> rows;
};

// For each task of the subset and each seed: adapt theta with inner_update on
// a support draw from the task's train role, then compare activations on all
// of the task's molecules before and after. Layers: the molecule embedding,
// the first feed-forward hidden layer and the output layer.
template <class Model>
CcaReport cca_experiment(const Model& model, const ParamSet& theta,
                         const std::vector<MetaTask<typename Model::Input>>& tasks, TaskSubset subset,
                         const std::vector<std::uint64_t>& seeds, const MetaHyperParams& hp) {
  CcaReport report;
  report.subset = subset;
  std::map<CcaLayer, std::vector<double>> values;
  for (const auto& task : tasks) {
    if (!in_subset(task.type, subset)) continue;
    std::vector<std::size_t> all(task.data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto pool = make_batch(model, task.data, all);
    const Trace before = model.trace(theta, pool);
    for (std::uint64_t seed : seeds) {
      Rng rng(seed);
      const auto& train = task.role(Role::kTrain);
      const auto support_rows = detail::draw_without_replacement(train, hp.inner_batch_size, rng);
      const auto support = make_batch(model, task.data, support_rows);
      const AdaptationResult adapted = inner_update(model, theta, support, hp, false, rng);
      const Trace after = model.trace(adapted.adapted, pool);
      const std::pair<CcaLayer, std::pair<const Tensor*, const Tensor*>> layers[] = {
          {CcaLayer::kEmbedding, {&before.embedding, &after.embedding}},
          {CcaLayer::kFfn1, {&before.ffn_hidden, &after.ffn_hidden}},
          {CcaLayer::kFfn2, {&before.logits, &after.logits}},
      };
      for (const auto& [layer, acts] : layers) {
        const double s = cca_similarity(*acts.first, *acts.second);
        values[layer].push_back(s);
        report.rows.push_back({task.id, seed, layer, s});
      }
    }
  }
  for (CcaLayer layer : {CcaLayer::kEmbedding, CcaLayer::kFfn1, CcaLayer::kFfn2}) {
    CcaLayerSummary s;
    s.layer = layer;
    const auto& v = values[layer];
    s.count = v.size();
    if (!v.empty()) {
      for (double x : v) s.mean += x;
      s.mean /= static_cast<double>(v.size());
      if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
      }
    } else {
      s.mean = std::nan("");
    }
    report.layers.push_back(s);
  }
  return report;
}

}  // namespace molmeta
