#pragma once

// Predictors: a directed message-passing encoder with a two-layer
// feed-forward readout, and a feed-forward network over fingerprint bits.
//
// Both models expose the same surface so the training loops in metalearn.hpp
// can be written once:
//
//   using Input; using Batch;
//   ParamSet init(seed)
//   Batch collate(inputs, labels, mask)
//   Var logits(tape, params, batch, mode, rng)
//   Var loss(tape, params, batch, mode, rng)
//   Trace trace(params, batch)

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "molmeta/autodiff.hpp"
#include "molmeta/featurize.hpp"
#include "molmeta/fingerprint.hpp"
#include "molmeta/params.hpp"
#include "molmeta/random.hpp"

namespace molmeta {

using ad::Mode;
using ad::Tape;
using ad::Var;

struct ModelConfig {
  std::size_t hidden_size = 300;
  std::size_t depth = 2;  // message-passing iterations
  double dropout = 0.2;
  std::size_t ffn_hidden = 300;
  std::size_t outputs = 1;
  std::size_t atom_dim = kAtomFeatureWidth;
  std::size_t bond_dim = kBondFeatureWidth;
  std::size_t fingerprint_bits = kDefaultFingerprintBits;
  int fingerprint_radius = kEcfp4Radius;

  static ModelConfig fingerprint_defaults() {
    ModelConfig c;
    c.ffn_hidden = 400;
    return c;
  }

  void validate() const {
    if (depth < 1) throw ConfigError("message-passing depth must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (hidden_size == 0 || ffn_hidden == 0 || outputs == 0) {
      throw ConfigError("layer widths must be positive");
    }
    if (fingerprint_bits == 0 || (fingerprint_bits & (fingerprint_bits - 1)) != 0) {
      throw ConfigError("fingerprint_bits must be a power of two");
    }
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"hidden_size", c.hidden_size},
                     {"depth", c.depth},
                     {"dropout", c.dropout},
                     {"ffn_hidden", c.ffn_hidden},
                     {"outputs", c.outputs},
                     {"atom_dim", c.atom_dim},
                     {"bond_dim", c.bond_dim},
                     {"fingerprint_bits", c.fingerprint_bits},
                     {"fingerprint_radius", c.fingerprint_radius}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.depth = j.value("depth", c.depth);
  c.dropout = j.value("dropout", c.dropout);
  c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
  c.outputs = j.value("outputs", c.outputs);
  c.atom_dim = j.value("atom_dim", c.atom_dim);
  c.bond_dim = j.value("bond_dim", c.bond_dim);
  c.fingerprint_bits = j.value("fingerprint_bits", c.fingerprint_bits);
  c.fingerprint_radius = j.value("fingerprint_radius", c.fingerprint_radius);
}

// Mean binary cross-entropy over entries whose mask is 1, computed from logits.
inline Var bce_loss(const Var& logits, const Tensor& labels, const Tensor& mask) {
  if (labels.shape() != logits.shape() || mask.shape() != logits.shape()) {
    throw DimensionError("bce_loss: logits " + shape_str(logits.shape()) + ", labels " +
                         shape_str(labels.shape()) + ", mask " + shape_str(mask.shape()));
  }
  double count = 0.0;
  for (double m : mask.data()) count += m;
  if (count == 0.0) throw ContractError("bce_loss: every entry is masked");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (mask[i] != 0.0 && labels[i] != 0.0 && labels[i] != 1.0) {
      throw ContractError("bce_loss: labels must be 0 or 1");
    }
  }
  Var elementwise = ad::bce_with_logits(logits, std::make_shared<const Tensor>(labels));
  Var masked = ad::mul_const(elementwise, std::make_shared<const Tensor>(mask));
  return ad::scale(ad::sum(masked), 1.0 / count);
}

inline Var bce_loss(const Var& logits, const Tensor& labels) {
  return bce_loss(logits, labels, Tensor::ones(labels.shape()));
}

// Activations recorded for representation-similarity analysis (eval mode).
struct Trace {
  Tensor embedding;   // model input to the feed-forward readout
  Tensor ffn_hidden;  // after the first layer's ReLU
  Tensor logits;
};

template <class Input>
struct LabeledData {
  std::vector<Input> inputs;
  Tensor labels;  // n x outputs
  Tensor mask;    // n x outputs, 1 where a label is present
  std::size_t size() const { return inputs.size(); }
};

namespace detail {

inline Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (double& x : v) x = rng.uniform(-limit, limit);
  return Tensor::matrix(fan_in, fan_out, std::move(v));
}

inline void add_ffn_params(ParamSet& p, std::size_t in, const ModelConfig& c, Rng& rng) {
  p.add("ffn_1.weight", xavier_uniform(in, c.ffn_hidden, rng), LayerGroup::kBody);
  p.add("ffn_1.bias", Tensor::zeros({c.ffn_hidden}), LayerGroup::kBody);
  p.add("ffn_2.weight", xavier_uniform(c.ffn_hidden, c.outputs, rng), LayerGroup::kHead);
  p.add("ffn_2.bias", Tensor::zeros({c.outputs}), LayerGroup::kHead);
}

struct FfnOut {
  Var hidden;
  Var logits;
};

// Parameters [first, first+4) are ffn_1.weight, ffn_1.bias, ffn_2.weight, ffn_2.bias.
inline FfnOut ffn_forward(const Var& x, std::span<const Var> p, std::size_t first,
                          const ModelConfig& c, Mode mode, Rng& rng) {
  if (x.value().cols() != p[first].value().rows()) {
    throw ConfigError("feed-forward input width " + std::to_string(x.value().cols()) +
                      " does not match first layer " + std::to_string(p[first].value().rows()));
  }
  Var hidden = ad::relu(ad::add_row(ad::matmul(x, p[first]), p[first + 1]));
  Var dropped = ad::dropout(hidden, c.dropout, mode, rng);
  Var logits = ad::add_row(ad::matmul(dropped, p[first + 2]), p[first + 3]);
  return {hidden, logits};
}

inline void check_bound(std::span<const Var> params, const ParamSet& like) {
  if (params.size() != like.size()) {
    throw ConfigError("expected " + std::to_string(like.size()) + " parameter tensors, got " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < like.size(); ++i) {
    if (params[i].shape() != like[i].value.shape()) {
      throw ConfigError("parameter " + like[i].name + " has shape " +
                        shape_str(params[i].shape()) + ", expected " +
                        shape_str(like[i].value.shape()));
    }
  }
}

}  // namespace detail

// Directed message passing over bonds:
//   h0_vw    = relu(W_i [x_v, e_vw])
//   m_vw     = sum over k in N(v) \ w of h_kv
//   h_vw     = relu(h0_vw + W_m m_vw)            (depth times)
//   m_v      = sum over k in N(v) of h_kv
//   h_v      = relu(W_a [x_v, m_v])
//   h_G      = sum over v of h_v
// followed by the two-layer feed-forward readout.
class DmpnnModel {
 public:
  using Input = FeaturizedMol;

  struct Batch {
    MolBatch graphs;
    Tensor labels;
    Tensor mask;
  };

  explicit DmpnnModel(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    Rng rng(0);
    shape_template_ = init_with(rng);
  }

  const ModelConfig& config() const { return config_; }

  ParamSet init(std::uint64_t seed) const {
    Rng rng(seed);
    return init_with(rng);
  }

  Batch collate(std::span<const Input* const> inputs, Tensor labels, Tensor mask) const {
    return Batch{molmeta::collate(inputs), std::move(labels), std::move(mask)};
  }

  Var encode(Tape& tape, std::span<const Var> p, const MolBatch& g, Mode mode, Rng& rng) const {
    detail::check_bound(p, shape_template_);
    if (g.atom_features.cols() != config_.atom_dim && g.num_atoms > 0) {
      throw ConfigError("atom feature width does not match the model");
    }
    const Var& w_i = p[0];
    const Var& w_m = p[1];
    const Var& w_a = p[2];
    auto src = std::make_shared<const std::vector<std::size_t>>(g.edge_source);
    auto tgt = std::make_shared<const std::vector<std::size_t>>(g.edge_target);
    auto rev = std::make_shared<const std::vector<std::size_t>>(g.edge_reverse);
    auto mol = std::make_shared<const std::vector<std::size_t>>(g.atom_molecule);

    Var x = tape.constant(g.atom_features);
    Var edge_in = tape.constant(g.edge_features);
    Var h0 = ad::relu(ad::matmul(edge_in, w_i));
    Var h = h0;
    for (std::size_t t = 0; t < config_.depth; ++t) {
      // Sum of all incoming states at the source atom minus the reverse edge.
      Var incoming = ad::segment_sum(h, tgt, g.num_atoms);
      Var message = ad::sub(ad::gather_rows(incoming, src), ad::gather_rows(h, rev));
      h = ad::relu(ad::add(h0, ad::matmul(message, w_m)));
    }
    Var atom_message = ad::segment_sum(h, tgt, g.num_atoms);
    Var atom_hidden = ad::relu(ad::matmul(ad::concat_cols(x, atom_message), w_a));
    atom_hidden = ad::dropout(atom_hidden, config_.dropout, mode, rng);
    return ad::segment_sum(atom_hidden, mol, g.num_molecules);
  }

  Var logits(Tape& tape, std::span<const Var> p, const Batch& b, Mode mode, Rng& rng) const {
    Var emb = encode(tape, p, b.graphs, mode, rng);
    return detail::ffn_forward(emb, p, 3, config_, mode, rng).logits;
  }

  Var loss(Tape& tape, std::span<const Var> p, const Batch& b, Mode mode, Rng& rng) const {
    return bce_loss(logits(tape, p, b, mode, rng), b.labels, b.mask);
  }

  Trace trace(const ParamSet& params, const Batch& b) const {
    Tape tape;
    Rng rng(0);
    auto p = bind(tape, params);
    Var emb = encode(tape, p, b.graphs, Mode::kEval, rng);
    auto out = detail::ffn_forward(emb, p, 3, config_, Mode::kEval, rng);
    return Trace{emb.value(), out.hidden.value(), out.logits.value()};
  }

 private:
  ParamSet init_with(Rng& rng) const {
    const std::size_t h = config_.hidden_size;
    ParamSet p;
    p.add("W_i", detail::xavier_uniform(config_.atom_dim + config_.bond_dim, h, rng), LayerGroup::kBody);
    p.add("W_m", detail::xavier_uniform(h, h, rng), LayerGroup::kBody);
    p.add("W_a", detail::xavier_uniform(config_.atom_dim + h, h, rng), LayerGroup::kBody);
    detail::add_ffn_params(p, h, config_, rng);
    return p;
  }

  ModelConfig config_;
  ParamSet shape_template_;
};

// Feed-forward network over fingerprint bit vectors.
class FingerprintModel {
 public:
  using Input = Fingerprint;

  struct Batch {
    Tensor features;  // n x bits
    Tensor labels;
    Tensor mask;
  };

  explicit FingerprintModel(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    Rng rng(0);
    shape_template_ = init_with(rng);
  }

  const ModelConfig& config() const { return config_; }

  ParamSet init(std::uint64_t seed) const {
    Rng rng(seed);
    return init_with(rng);
  }

  Batch collate(std::span<const Input* const> inputs, Tensor labels, Tensor mask) const {
    const std::size_t bits = config_.fingerprint_bits;
    std::vector<double> v;
    v.reserve(inputs.size() * bits);
    for (const Input* fp : inputs) {
      if (fp->bits.size() != bits) {
        throw ConfigError("fingerprint length " + std::to_string(fp->bits.size()) +
                          " does not match model input " + std::to_string(bits));
      }
      v.insert(v.end(), fp->bits.begin(), fp->bits.end());
    }
    return Batch{Tensor::matrix(inputs.size(), bits, std::move(v)), std::move(labels), std::move(mask)};
  }

  Var logits(Tape& tape, std::span<const Var> p, const Batch& b, Mode mode, Rng& rng) const {
    detail::check_bound(p, shape_template_);
    Var x = tape.constant(b.features);
    return detail::ffn_forward(x, p, 0, config_, mode, rng).logits;
  }

  Var loss(Tape& tape, std::span<const Var> p, const Batch& b, Mode mode, Rng& rng) const {
    return bce_loss(logits(tape, p, b, mode, rng), b.labels, b.mask);
  }

  Trace trace(const ParamSet& params, const Batch& b) const {
    Tape tape;
    Rng rng(0);
    auto p = bind(tape, params);
    Var x = tape.constant(b.features);
    auto out = detail::ffn_forward(x, p, 0, config_, Mode::kEval, rng);
    return Trace{b.features, out.hidden.value(), out.logits.value()};
  }

 private:
  ParamSet init_with(Rng& rng) const {
    ParamSet p;
    detail::add_ffn_params(p, config_.fingerprint_bits, config_, rng);
    return p;
  }

  ModelConfig config_;
  ParamSet shape_template_;
};

template <class Model>
typename Model::Batch make_batch(const Model& model, const LabeledData<typename Model::Input>& data,
                                 std::span<const std::size_t> rows) {
  const std::size_t k = data.labels.cols();
  std::vector<const typename Model::Input*> inputs;
  std::vector<double> labels, mask;
  inputs.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= data.size()) throw IndexError("batch row " + std::to_string(r) + " out of range");
    inputs.push_back(&data.inputs[r]);
    for (std::size_t j = 0; j < k; ++j) {
      labels.push_back(data.labels.at(r, j));
      mask.push_back(data.mask.at(r, j));
    }
  }
  return model.collate(inputs, Tensor::matrix(rows.size(), k, std::move(labels)),
                       Tensor::matrix(rows.size(), k, std::move(mask)));
}

// Eval-mode logits as plain values.
template <class Model>
Tensor predict(const Model& model, const ParamSet& params, const typename Model::Batch& batch) {
  Tape tape;
  Rng rng(0);
  auto p = bind(tape, params);
  return model.logits(tape, p, batch, Mode::kEval, rng).value();
}

// Copies every body tensor of `source` into `target` (matching names and
// shapes); head tensors of `target` are kept.
inline ParamSet transfer_body(const ParamSet& source, ParamSet target) {
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i].group != LayerGroup::kBody) continue;
    const Tensor& v = source.value(target[i].name);
    if (v.shape() != target[i].value.shape()) {
      throw ConfigError("cannot transfer " + target[i].name + ": shape mismatch");
    }
    target[i].value = v;
  }
  return target;
}

}  // namespace molmeta
