#pragma once

// Reverse-mode automatic differentiation over an explicit tape.
//
// Every primitive records a node whose backward rule is itself written in
// terms of primitives. Running the backward pass with GradMode::kCreateGraph
// therefore records the gradient computation on the same tape, and the
// resulting gradients can be differentiated again. This is what the MAML
// outer loop needs: the adapted parameters theta' = theta - alpha * g(theta)
// stay connected to theta through g.
//
// A tape and the Vars that point into it belong to one thread at a time.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "molmeta/errors.hpp"
#include "molmeta/random.hpp"
#include "molmeta/tensor.hpp"

namespace molmeta::ad {

enum class Mode { kTrain, kEval };

enum class GradMode {
  kDiscard,      // gradients are plain values; nothing is recorded
  kCreateGraph,  // the backward pass is recorded and can be differentiated
};

class Tape;

// Handle to one node of a tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  inline const Tensor& value() const;
  inline bool requires_grad() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Receives the upstream gradient and the node's own output; returns one
// gradient per input (an invalid Var means "no gradient").
using BackwardFn = std::function<std::vector<Var>(const Var& upstream, const Var& self)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input.
  Var leaf(Tensor value) { return push(std::move(value), {}, nullptr, "leaf", true, false); }

  Var constant(Tensor value) { return push(std::move(value), {}, nullptr, "constant", false, false); }

  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward, const char* op) {
    bool depends = false;
    bool detached = false;
    for (const Var& v : inputs) {
      if (v.tape_ != this) throw ContractError(std::string(op) + ": operand belongs to another tape");
      const Node& n = nodes_[v.id_];
      depends = depends || n.requires_grad;
      detached = detached || n.detached;
    }
    const bool needs_grad = recording_ && depends;
    detached = detached || (!recording_ && depends);
    std::vector<std::size_t> ids;
    if (needs_grad) {
      ids.reserve(inputs.size());
      for (const Var& v : inputs) ids.push_back(v.id_);
    } else {
      backward = nullptr;
    }
    return push(std::move(value), std::move(ids), std::move(backward), op, needs_grad, detached);
  }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return recording_; }

  // d loss / d w for every w in wrt. Parameters the loss does not depend on
  // get zero gradients.
  inline std::vector<Var> grad(const Var& loss, std::span<const Var> wrt,
                               GradMode mode = GradMode::kDiscard);

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    const char* op;
    bool requires_grad;
    // Derived from a gradient that was computed without recording.
    bool detached;
  };

  Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, const char* op,
           bool needs_grad, bool detached) {
    if (!value.all_finite()) {
      throw NumericError(std::string(op) + " produced a non-finite value");
    }
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(backward), op, needs_grad,
                          detached});
    return Var(this, nodes_.size() - 1);
  }

  class RecordingScope {
   public:
    RecordingScope(Tape& tape, bool on) : tape_(tape), saved_(tape.recording_) {
      tape_.recording_ = saved_ && on;
    }
    ~RecordingScope() { tape_.recording_ = saved_; }
    RecordingScope(const RecordingScope&) = delete;
    RecordingScope& operator=(const RecordingScope&) = delete;

   private:
    Tape& tape_;
    bool saved_;
  };

  // Deque keeps node references stable while the backward pass appends.
  std::deque<Node> nodes_;
  bool recording_ = true;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

// ---------------------------------------------------------------------------
// Primitives

namespace detail {

inline void same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
  }
}

inline void need_matrix(const Var& a, const char* op) {
  if (a.value().rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " +
                         shape_str(a.shape()));
  }
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

using Indices = std::shared_ptr<const std::vector<std::size_t>>;

}  // namespace detail

inline Var add(const Var& a, const Var& b);
inline Var sub(const Var& a, const Var& b);
inline Var mul(const Var& a, const Var& b);
inline Var scale(const Var& a, double s);
inline Var sum(const Var& a);
inline Var expand(const Var& scalar, const Shape& shape);
inline Var transpose(const Var& a);
inline Var matmul(const Var& a, const Var& b);
inline Var sum_rows(const Var& a);
inline Var broadcast_rows(const Var& row, std::size_t rows);
inline Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
inline Var pad_cols(const Var& a, std::size_t offset, std::size_t total);
inline Var segment_sum(const Var& rows, detail::Indices segments, std::size_t num_segments);
inline Var gather_rows(const Var& a, detail::Indices index);
inline Var sigmoid(const Var& a);

inline Var add(const Var& a, const Var& b) {
  detail::same_shape(a, b, "add");
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape().record(
      std::move(out), {a, b},
      [](const Var& g, const Var&) { return std::vector<Var>{g, g}; }, "add");
}

inline Var sub(const Var& a, const Var& b) {
  detail::same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape().record(
      std::move(out), {a, b},
      [](const Var& g, const Var&) { return std::vector<Var>{g, scale(g, -1.0)}; }, "sub");
}

inline Var mul(const Var& a, const Var& b) {
  detail::same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape().record(
      std::move(out), {a, b},
      [a, b](const Var& g, const Var&) { return std::vector<Var>{mul(g, b), mul(g, a)}; }, "mul");
}

inline Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  return a.tape().record(
      std::move(out), {a},
      [s](const Var& g, const Var&) { return std::vector<Var>{scale(g, s)}; }, "scale");
}

// s * a + shift, elementwise.
inline Var affine(const Var& a, double s, double shift) {
  Tensor out = a.value();
  for (double& v : out.data()) v = s * v + shift;
  return a.tape().record(
      std::move(out), {a},
      [s](const Var& g, const Var&) { return std::vector<Var>{scale(g, s)}; }, "affine");
}

// Elementwise product with a constant tensor.
inline Var mul_const(const Var& a, std::shared_ptr<const Tensor> c) {
  if (a.shape() != c->shape()) throw DimensionError("mul_const: shape mismatch");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*c)[i];
  return a.tape().record(
      std::move(out), {a},
      [c](const Var& g, const Var&) { return std::vector<Var>{mul_const(g, c)}; }, "mul_const");
}

inline Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const Shape shape = a.shape();
  return a.tape().record(
      Tensor::scalar(s), {a},
      [shape](const Var& g, const Var&) { return std::vector<Var>{expand(g, shape)}; }, "sum");
}

inline Var mean(const Var& a) {
  if (a.value().size() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

// Broadcast a one-element tensor to `shape`.
inline Var expand(const Var& scalar, const Shape& shape) {
  if (scalar.value().size() != 1) throw DimensionError("expand: input must hold one value");
  Tensor out = Tensor::filled(shape, scalar.value()[0]);
  const Shape in_shape = scalar.shape();
  return scalar.tape().record(
      std::move(out), {scalar},
      [in_shape](const Var& g, const Var&) {
        Var s = sum(g);
        if (in_shape.empty()) return std::vector<Var>{s};
        return std::vector<Var>{expand(s, in_shape)};
      },
      "expand");
}

inline Var transpose(const Var& a) {
  detail::need_matrix(a, "transpose");
  const std::size_t r = a.value().rows(), c = a.value().cols();
  Tensor out = Tensor::zeros({c, r});
  detail::MutMap(out.data().data(), c, r) = detail::ConstMap(a.value().data().data(), r, c).transpose();
  return a.tape().record(
      std::move(out), {a},
      [](const Var& g, const Var&) { return std::vector<Var>{transpose(g)}; }, "transpose");
}

inline Var matmul(const Var& a, const Var& b) {
  detail::need_matrix(a, "matmul");
  detail::need_matrix(b, "matmul");
  const std::size_t n = a.value().rows(), k = a.value().cols(), m = b.value().cols();
  if (b.value().rows() != k) {
    throw DimensionError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({n, m});
  if (n > 0 && m > 0 && k > 0) {
    detail::MutMap(out.data().data(), n, m).noalias() =
        detail::ConstMap(a.value().data().data(), n, k) *
        detail::ConstMap(b.value().data().data(), k, m);
  }
  return a.tape().record(
      std::move(out), {a, b},
      [a, b](const Var& g, const Var&) {
        return std::vector<Var>{matmul(g, transpose(b)), matmul(transpose(a), g)};
      },
      "matmul");
}

// rows x cols -> [cols]
inline Var sum_rows(const Var& a) {
  detail::need_matrix(a, "sum_rows");
  const std::size_t r = a.value().rows(), c = a.value().cols();
  Tensor out = Tensor::zeros({c});
  const auto& v = a.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += v[i * c + j];
  return a.tape().record(
      std::move(out), {a},
      [r](const Var& g, const Var&) { return std::vector<Var>{broadcast_rows(g, r)}; },
      "sum_rows");
}

// [cols] -> rows x cols
inline Var broadcast_rows(const Var& row, std::size_t rows) {
  if (row.value().rank() != 1) throw DimensionError("broadcast_rows: expected a vector");
  const std::size_t c = row.value().size();
  Tensor out = Tensor::zeros({rows, c});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = row.value()[j];
  return row.tape().record(
      std::move(out), {row},
      [](const Var& g, const Var&) { return std::vector<Var>{sum_rows(g)}; }, "broadcast_rows");
}

// Matrix plus a bias vector added to every row.
inline Var add_row(const Var& m, const Var& row) {
  detail::need_matrix(m, "add_row");
  if (row.value().rank() != 1 || row.value().size() != m.value().cols()) {
    throw DimensionError("add_row: bias " + shape_str(row.shape()) + " vs matrix " +
                         shape_str(m.shape()));
  }
  return add(m, broadcast_rows(row, m.value().rows()));
}

inline Var concat_cols(const Var& a, const Var& b) {
  detail::need_matrix(a, "concat_cols");
  detail::need_matrix(b, "concat_cols");
  const std::size_t r = a.value().rows();
  if (b.value().rows() != r) {
    throw DimensionError("concat_cols: row counts " + std::to_string(r) + " and " +
                         std::to_string(b.value().rows()));
  }
  const std::size_t ca = a.value().cols(), cb = b.value().cols();
  Tensor out = Tensor::zeros({r, ca + cb});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < ca; ++j) out[i * (ca + cb) + j] = a.value()[i * ca + j];
    for (std::size_t j = 0; j < cb; ++j) out[i * (ca + cb) + ca + j] = b.value()[i * cb + j];
  }
  return a.tape().record(
      std::move(out), {a, b},
      [ca, cb](const Var& g, const Var&) {
        return std::vector<Var>{slice_cols(g, 0, ca), slice_cols(g, ca, ca + cb)};
      },
      "concat_cols");
}

inline Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  detail::need_matrix(a, "slice_cols");
  const std::size_t r = a.value().rows(), c = a.value().cols();
  if (begin > end || end > c) throw IndexError("slice_cols: range out of bounds");
  const std::size_t w = end - begin;
  Tensor out = Tensor::zeros({r, w});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = a.value()[i * c + begin + j];
  return a.tape().record(
      std::move(out), {a},
      [begin, c](const Var& g, const Var&) { return std::vector<Var>{pad_cols(g, begin, c)}; },
      "slice_cols");
}

// Places `a` at column `offset` of a zero matrix with `total` columns.
inline Var pad_cols(const Var& a, std::size_t offset, std::size_t total) {
  detail::need_matrix(a, "pad_cols");
  const std::size_t r = a.value().rows(), c = a.value().cols();
  if (offset + c > total) throw IndexError("pad_cols: range out of bounds");
  Tensor out = Tensor::zeros({r, total});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * total + offset + j] = a.value()[i * c + j];
  return a.tape().record(
      std::move(out), {a},
      [offset, c](const Var& g, const Var&) {
        return std::vector<Var>{slice_cols(g, offset, offset + c)};
      },
      "pad_cols");
}

// The derivative at exactly 0 is taken to be 0.
inline Var relu(const Var& a) {
  auto mask = std::make_shared<Tensor>(Tensor::zeros(a.shape()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] > 0.0) {
      (*mask)[i] = 1.0;
    } else {
      out[i] = 0.0;
    }
  }
  std::shared_ptr<const Tensor> m = mask;
  return a.tape().record(
      std::move(out), {a},
      [m](const Var& g, const Var&) { return std::vector<Var>{mul_const(g, m)}; }, "relu");
}

inline double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = stable_sigmoid(v);
  return a.tape().record(
      std::move(out), {a},
      [](const Var& g, const Var& self) {
        return std::vector<Var>{mul(g, mul(self, affine(self, -1.0, 1.0)))};
      },
      "sigmoid");
}

inline Var segment_sum(const Var& rows, detail::Indices segments, std::size_t num_segments) {
  detail::need_matrix(rows, "segment_sum");
  const std::size_t r = rows.value().rows(), c = rows.value().cols();
  if (segments->size() != r) {
    throw DimensionError("segment_sum: " + std::to_string(segments->size()) +
                         " segment ids for " + std::to_string(r) + " rows");
  }
  Tensor out = Tensor::zeros({num_segments, c});
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t s = (*segments)[i];
    if (s >= num_segments) {
      throw IndexError("segment_sum: segment id " + std::to_string(s) + " >= " +
                       std::to_string(num_segments));
    }
    for (std::size_t j = 0; j < c; ++j) out[s * c + j] += rows.value()[i * c + j];
  }
  return rows.tape().record(
      std::move(out), {rows},
      [segments](const Var& g, const Var&) { return std::vector<Var>{gather_rows(g, segments)}; },
      "segment_sum");
}

inline Var segment_sum(const Var& rows, std::vector<std::size_t> segments,
                       std::size_t num_segments) {
  return segment_sum(rows, std::make_shared<const std::vector<std::size_t>>(std::move(segments)),
                     num_segments);
}

// out[i] = a[index[i]]
inline Var gather_rows(const Var& a, detail::Indices index) {
  detail::need_matrix(a, "gather_rows");
  const std::size_t r = a.value().rows(), c = a.value().cols();
  Tensor out = Tensor::zeros({index->size(), c});
  for (std::size_t i = 0; i < index->size(); ++i) {
    const std::size_t src = (*index)[i];
    if (src >= r) {
      throw IndexError("gather_rows: row " + std::to_string(src) + " >= " + std::to_string(r));
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = a.value()[src * c + j];
  }
  return a.tape().record(
      std::move(out), {a},
      [index, r](const Var& g, const Var&) { return std::vector<Var>{segment_sum(g, index, r)}; },
      "gather_rows");
}

inline Var gather_rows(const Var& a, std::vector<std::size_t> index) {
  return gather_rows(a, std::make_shared<const std::vector<std::size_t>>(std::move(index)));
}

// Inverted dropout: kept units are scaled by 1/(1-p) during training, so
// evaluation is the identity.
inline Var dropout(const Var& a, double p, Mode mode, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw ContractError("dropout probability must lie in [0, 1)");
  if (mode == Mode::kEval || p == 0.0) return a;
  auto mask = std::make_shared<Tensor>(Tensor::zeros(a.shape()));
  const double keep = 1.0 - p;
  for (double& m : mask->data()) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  return mul_const(a, std::move(mask));
}

// Elementwise binary cross-entropy of logits z against constant targets y,
// max(z, 0) - z*y + log(1 + exp(-|z|)).
inline Var bce_with_logits(const Var& z, std::shared_ptr<const Tensor> y) {
  if (z.shape() != y->shape()) throw DimensionError("bce_with_logits: shape mismatch");
  Tensor out = z.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = out[i];
    out[i] = std::max(x, 0.0) - x * (*y)[i] + std::log1p(std::exp(-std::abs(x)));
  }
  return z.tape().record(
      std::move(out), {z},
      [z, y](const Var& g, const Var&) {
        Var target = z.tape().constant(*y);
        return std::vector<Var>{mul(g, sub(sigmoid(z), target))};
      },
      "bce_with_logits");
}

// ---------------------------------------------------------------------------

inline std::vector<Var> Tape::grad(const Var& loss, std::span<const Var> wrt, GradMode mode) {
  if (loss.tape_ != this) throw ContractError("grad: loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw ContractError("grad: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  for (const Var& w : wrt) {
    if (w.tape_ != this) throw ContractError("grad: parameter belongs to another tape");
  }

  auto zeros_for = [&](const Var& w) { return constant(Tensor::zeros(w.shape())); };

  const Node& root = nodes_[loss.id_];
  if (!root.requires_grad) {
    if (root.detached) {
      throw ContractError(
          "grad: loss only depends on parameters through gradients computed without "
          "GradMode::kCreateGraph");
    }
    std::vector<Var> out;
    for (const Var& w : wrt) out.push_back(zeros_for(w));
    return out;
  }

  RecordingScope scope(*this, mode == GradMode::kCreateGraph);

  std::vector<Var> grads(loss.id_ + 1);
  grads[loss.id_] = constant(Tensor::ones(loss.shape()));

  for (std::size_t k = loss.id_ + 1; k-- > 0;) {
    if (!grads[k].valid()) continue;
    if (!nodes_[k].requires_grad || !nodes_[k].backward) continue;
    const BackwardFn fn = nodes_[k].backward;
    const std::vector<std::size_t> inputs = nodes_[k].inputs;
    std::vector<Var> local = fn(grads[k], Var(this, k));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (!local[i].valid()) continue;
      const std::size_t in = inputs[i];
      if (!nodes_[in].requires_grad) continue;
      grads[in] = grads[in].valid() ? add(grads[in], local[i]) : local[i];
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    if (w.id_ <= loss.id_ && grads[w.id_].valid()) {
      out.push_back(grads[w.id_]);
    } else {
      out.push_back(zeros_for(w));
    }
  }
  return out;
}

}  // namespace molmeta::ad
