#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "molmeta/models.hpp"
#include "molmeta/optim.hpp"
#include "molmeta/smiles.hpp"
#include "support/oracles.hpp"

using namespace molmeta;

namespace {

ModelConfig small_config(std::size_t hidden = 16, double dropout = 0.0) {
  ModelConfig c;
  c.hidden_size = hidden;
  c.ffn_hidden = hidden;
  c.dropout = dropout;
  return c;
}

DmpnnModel::Batch graph_batch(const DmpnnModel& model, const std::vector<std::string>& smiles,
                              std::vector<double> labels = {}) {
  static std::vector<std::vector<FeaturizedMol>> keep;  // inputs must outlive the batch
  keep.emplace_back();
  for (const auto& s : smiles) keep.back().push_back(featurize(parse_smiles(s)));
  std::vector<const FeaturizedMol*> ptrs;
  for (const auto& f : keep.back()) ptrs.push_back(&f);
  if (labels.empty()) labels.assign(smiles.size(), 1.0);
  const std::size_t n = labels.size();
  return model.collate(ptrs, Tensor::matrix(n, 1, labels), Tensor::ones({n, 1}));
}

Tensor embed(const DmpnnModel& model, const ParamSet& params, const DmpnnModel::Batch& b) {
  Tape tape;
  Rng rng(0);
  auto p = bind(tape, params);
  return model.encode(tape, p, b.graphs, Mode::kEval, rng).value();
}

}  // namespace

TEST(ParamSet, LayerGroups) {
  DmpnnModel model(small_config());
  ParamSet p = model.init(1);
  std::vector<std::string> names, heads;
  for (const auto& e : p) {
    names.push_back(e.name);
    if (e.group == LayerGroup::kHead) heads.push_back(e.name);
  }
  EXPECT_EQ(names, (std::vector<std::string>{"W_i", "W_m", "W_a", "ffn_1.weight", "ffn_1.bias", "ffn_2.weight",
                                             "ffn_2.bias"}));
  EXPECT_EQ(heads, (std::vector<std::string>{"ffn_2.weight", "ffn_2.bias"}));
  EXPECT_EQ(p.value("W_i").shape(), (Shape{kAtomFeatureWidth + kBondFeatureWidth, 16}));
  EXPECT_EQ(p.value("W_a").shape(), (Shape{kAtomFeatureWidth + 16, 16}));
}

TEST(ParamSet, ArithmeticRoundTrip) {
  DmpnnModel model(small_config());
  const ParamSet theta = model.init(3);
  ParamSet g = model.init(4);
  const double alpha = 0.05;
  ParamSet stepped = theta - alpha * g;
  EXPECT_TRUE(stepped.same_structure(theta));
  ParamSet back = stepped + alpha * g;
  EXPECT_TRUE(back.same_structure(theta));
  EXPECT_LE(max_abs_diff(back, theta), 1e-15);
}

TEST(ParamSet, StructureMismatchRejected) {
  ParamSet a = DmpnnModel(small_config(16)).init(1);
  ParamSet b = DmpnnModel(small_config(8)).init(1);
  EXPECT_THROW(a += b, DimensionError);
  EXPECT_THROW(a.add("W_i", Tensor::zeros({1}), LayerGroup::kBody), ContractError);
}

TEST(ParamSet, InitIsSeeded) {
  DmpnnModel model(small_config());
  EXPECT_EQ(model.init(5), model.init(5));
  EXPECT_FALSE(model.init(5) == model.init(6));
  // Glorot bound for W_m (16 x 16).
  const double limit = std::sqrt(6.0 / 32.0);
  for (double v : model.init(5).value("W_m").data()) EXPECT_LE(std::abs(v), limit);
}

TEST(Checkpoint, RoundTrip) {
  DmpnnModel model(small_config());
  Checkpoint ck;
  ck.metadata = {{"model", model.config()}, {"method", "maml"}};
  ck.params = model.init(9);
  const std::string bytes = serialize_checkpoint(ck);
  Checkpoint back = deserialize_checkpoint(bytes);
  EXPECT_EQ(back.params, ck.params);
  EXPECT_EQ(back.metadata, ck.metadata);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_THROW(deserialize_checkpoint("NOTMOLMETA"), LoadError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), LoadError);
}

TEST(Encoder, SingleAtomReadout) {
  DmpnnModel model(small_config());
  ParamSet p = model.init(2);
  auto batch = graph_batch(model, {"C"});
  const Tensor h = embed(model, p, batch);
  ASSERT_EQ(h.shape(), (Shape{1, 16}));
  const Tensor x = featurize(parse_smiles("C")).atom_features;
  const Tensor& w_a = p.value("W_a");
  for (std::size_t j = 0; j < 16; ++j) {
    double z = 0.0;
    for (std::size_t i = 0; i < kAtomFeatureWidth; ++i) z += x[i] * w_a.at(i, j);
    EXPECT_NEAR(h.at(0, j), std::max(z, 0.0), 1e-14);
  }
}

TEST(Encoder, PermutationInvariant) {
  DmpnnModel model(small_config(24));
  ParamSet p = model.init(7);
  Rng rng(31);
  for (const auto& s : oracle::molecule_panel()) {
    MolGraph g = parse_smiles(s);
    const Tensor ref = embed(model, p, graph_batch(model, {s}));
    for (int trial = 0; trial < 2; ++trial) {
      const std::string other = oracle::random_smiles(g, rng);
      EXPECT_LE(max_abs_diff(embed(model, p, graph_batch(model, {other})), ref), 1e-10) << s << " vs " << other;
    }
  }
  EXPECT_LE(max_abs_diff(embed(model, p, graph_batch(model, {"CCO"})), embed(model, p, graph_batch(model, {"OCC"}))),
            1e-10);
}

TEST(Encoder, ZeroMessageWeightsMakeDepthIrrelevant) {
  ModelConfig one = small_config(), two = small_config();
  one.depth = 1;
  two.depth = 2;
  DmpnnModel m1(one), m2(two);
  ParamSet p = m1.init(4);
  // On a three-atom chain every message source starts at a terminal atom, so
  // edge states are already fixed after one step; four atoms are needed.
  auto c3_1 = graph_batch(m1, {"CCO"}), c3_2 = graph_batch(m2, {"CCO"});
  auto c4_1 = graph_batch(m1, {"CCCO"}), c4_2 = graph_batch(m2, {"CCCO"});
  EXPECT_LE(max_abs_diff(embed(m1, p, c3_1), embed(m2, p, c3_2)), 1e-15);
  EXPECT_GT(max_abs_diff(embed(m1, p, c4_1), embed(m2, p, c4_2)), 1e-6);
  p.value("W_m") = Tensor::zeros(p.value("W_m").shape());
  EXPECT_EQ(embed(m1, p, c3_1), embed(m2, p, c3_2));
  EXPECT_EQ(embed(m1, p, c4_1), embed(m2, p, c4_2));
}

TEST(Encoder, DisconnectedMoleculesIsolated) {
  DmpnnModel model(small_config());
  ParamSet p = model.init(8);
  const Tensor pair = embed(model, p, graph_batch(model, {"CC(=O)O", "c1ccccc1N"}));
  const Tensor triple = embed(model, p, graph_batch(model, {"CC(=O)O", "c1ccccc1N", "C"}));
  const Tensor alone = embed(model, p, graph_batch(model, {"c1ccccc1N"}));
  for (std::size_t j = 0; j < 16; ++j) {
    EXPECT_EQ(pair.at(0, j), triple.at(0, j));
    EXPECT_EQ(pair.at(1, j), triple.at(1, j));
    EXPECT_NEAR(pair.at(1, j), alone.at(0, j), 1e-12);
  }
}

TEST(Encoder, WrongParameterShapeIsConfigError) {
  DmpnnModel model(small_config(16));
  ParamSet other = DmpnnModel(small_config(8)).init(1);
  auto batch = graph_batch(model, {"CCO"});
  EXPECT_THROW(predict(model, other, batch), ConfigError);
}

TEST(Readout, ZeroWeightsGiveHalf) {
  DmpnnModel model(small_config());
  ParamSet p = model.init(1);
  p *= 0.0;
  auto batch = graph_batch(model, {"CCO", "c1ccccc1"});
  const Tensor z = predict(model, p, batch);
  for (double v : z.data()) {
    EXPECT_EQ(v, 0.0);
    EXPECT_EQ(ad::stable_sigmoid(v), 0.5);
  }
}

TEST(Readout, EvalDeterministicTrainSeeded) {
  DmpnnModel model(small_config(16, 0.2));
  ParamSet p = model.init(1);
  auto batch = graph_batch(model, {"CCO", "c1ccccc1", "CC(=O)Nc1ccc(O)cc1"});
  auto run = [&](Mode mode, std::uint64_t seed) {
    Tape tape;
    Rng rng(seed);
    auto vars = bind(tape, p);
    return model.logits(tape, vars, batch, mode, rng).value();
  };
  EXPECT_EQ(run(Mode::kEval, 1), run(Mode::kEval, 2));
  EXPECT_EQ(run(Mode::kTrain, 3), run(Mode::kTrain, 3));
  EXPECT_FALSE(run(Mode::kTrain, 3) == run(Mode::kTrain, 4));
}

TEST(Readout, FingerprintWidthMismatch) {
  ModelConfig c = ModelConfig::fingerprint_defaults();
  EXPECT_EQ(c.ffn_hidden, 400u);
  FingerprintModel model(c);
  Fingerprint short_fp = morgan_fingerprint(parse_smiles("CCO"), 2, 1024);
  std::vector<const Fingerprint*> ptrs{&short_fp};
  EXPECT_THROW(model.collate(ptrs, Tensor::ones({1, 1}), Tensor::ones({1, 1})), ConfigError);
}

TEST(Readout, MultiHeadOutputs) {
  ModelConfig c = small_config();
  c.outputs = 3;
  DmpnnModel model(c);
  ParamSet p = model.init(1);
  std::vector<FeaturizedMol> mols{featurize(parse_smiles("CCO")), featurize(parse_smiles("CCN"))};
  std::vector<const FeaturizedMol*> ptrs{&mols[0], &mols[1]};
  auto batch = model.collate(ptrs, Tensor::zeros({2, 3}), Tensor::ones({2, 3}));
  EXPECT_EQ(predict(model, p, batch).shape(), (Shape{2, 3}));
}

TEST(Loss, AnalyticValues) {
  Tape tape;
  EXPECT_NEAR(bce_loss(tape.constant(Tensor::matrix({{0.0}})), Tensor::matrix({{1.0}})).value().item(),
              0.6931471805599453, 1e-15);
  EXPECT_NEAR(bce_loss(tape.constant(Tensor::matrix({{20.0}})), Tensor::matrix({{1.0}})).value().item(), 2.06e-9,
              1e-11);
}

TEST(Loss, MaskedEqualsSubset) {
  const Tensor z = Tensor::matrix({{0.3, -1.2, 2.0}, {1.5, 0.1, -0.4}});
  const Tensor y = Tensor::matrix({{1, 0, 1}, {0, 1, 0}});
  const Tensor mask = Tensor::matrix({{1, 0, 1}, {0, 1, 1}});
  Tape tape;
  const double masked = bce_loss(tape.constant(z), y, mask).value().item();
  double total = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (mask[i] == 0.0) continue;
    const double p = 1.0 / (1.0 + std::exp(-z[i]));
    total += -(y[i] * std::log(p) + (1 - y[i]) * std::log(1 - p));
    ++count;
  }
  EXPECT_NEAR(masked, total / count, 1e-14);
  // Masked entries may carry any label value.
  Tensor y_garbage = y;
  y_garbage[1] = 0.5;
  EXPECT_NEAR(bce_loss(tape.constant(z), y_garbage, mask).value().item(), masked, 1e-15);
}

TEST(Loss, Contracts) {
  Tape tape;
  EXPECT_THROW(bce_loss(tape.constant(Tensor::matrix({{0.0}})), Tensor::matrix({{1.0}}), Tensor::matrix({{0.0}})),
               ContractError);
  EXPECT_THROW(bce_loss(tape.constant(Tensor::matrix({{0.0}})), Tensor::matrix({{2.0}})), ContractError);
  EXPECT_THROW(bce_loss(tape.constant(Tensor::matrix({{0.0, 1.0}})), Tensor::matrix({{1.0}})), DimensionError);
}

TEST(Gradient, FullModelMatchesFiniteDifferences) {
  DmpnnModel model(small_config(16));
  ParamSet p = model.init(12);
  auto batch = graph_batch(model, {"CC(=O)O", "c1ccncc1", "CN"}, {1.0, 0.0, 1.0});
  auto loss_at = [&](const ParamSet& q) {
    Tape tape;
    Rng rng(0);
    auto vars = bind(tape, q);
    return model.loss(tape, vars, batch, Mode::kEval, rng).value().item();
  };
  Tape tape;
  Rng rng(0);
  auto vars = bind(tape, p);
  auto grads = tape.grad(model.loss(tape, vars, batch, Mode::kEval, rng), vars);
  for (std::size_t i = 0; i < p.size(); ++i) {
    SCOPED_TRACE(p[i].name);
    const Tensor numeric = oracle::numeric_gradient(
        [&](const Tensor& v) {
          ParamSet q = p;
          q[i].value = v;
          return loss_at(q);
        },
        p[i].value, 1e-6);
    EXPECT_LT(oracle::relative_error(grads[i].value(), numeric), 1e-4);
  }
}

TEST(Gradient, FingerprintModelMatchesFiniteDifferences) {
  ModelConfig c;
  c.fingerprint_bits = 64;
  c.ffn_hidden = 8;
  c.dropout = 0.0;
  FingerprintModel model(c);
  ParamSet p = model.init(3);
  std::vector<Fingerprint> fps;
  for (const char* s : {"CCO", "c1ccccc1", "CC(=O)N"}) fps.push_back(morgan_fingerprint(parse_smiles(s), 2, 64));
  std::vector<const Fingerprint*> ptrs{&fps[0], &fps[1], &fps[2]};
  auto batch = model.collate(ptrs, Tensor::matrix({{1}, {0}, {1}}), Tensor::ones({3, 1}));
  Tape tape;
  Rng rng(0);
  auto vars = bind(tape, p);
  auto grads = tape.grad(model.loss(tape, vars, batch, Mode::kEval, rng), vars);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Tensor numeric = oracle::numeric_gradient(
        [&](const Tensor& v) {
          ParamSet q = p;
          q[i].value = v;
          Tape t;
          Rng r(0);
          auto qv = bind(t, q);
          return model.loss(t, qv, batch, Mode::kEval, r).value().item();
        },
        p[i].value, 1e-6);
    EXPECT_LT(oracle::relative_error(grads[i].value(), numeric), 1e-4) << p[i].name;
  }
}

TEST(Transfer, CopiesBodyKeepsHead) {
  ModelConfig multi = small_config();
  multi.outputs = 4;
  DmpnnModel source_model(multi), target_model(small_config());
  ParamSet source = source_model.init(1);
  ParamSet target = target_model.init(2);
  ParamSet moved = transfer_body(source, target);
  for (std::size_t i = 0; i < moved.size(); ++i) {
    if (moved[i].group == LayerGroup::kBody) {
      EXPECT_EQ(moved[i].value, source.value(moved[i].name));
    } else {
      EXPECT_EQ(moved[i].value, target[i].value);
    }
  }
}

TEST(Optimizer, SgdAndAdamFirstStep) {
  ParamSet p;
  p.add("w", Tensor::vector({1.0, -2.0}), LayerGroup::kBody);
  ParamSet g;
  g.add("w", Tensor::vector({0.5, -4.0}), LayerGroup::kBody);
  ParamSet s = p;
  Sgd(0.1).step(s, g);
  EXPECT_DOUBLE_EQ(s.value("w")[0], 0.95);
  EXPECT_DOUBLE_EQ(s.value("w")[1], -1.6);
  // Adam's bias-corrected first step moves each coordinate by about lr * sign(g).
  ParamSet a = p;
  Adam(0.01).step(a, g);
  EXPECT_NEAR(a.value("w")[0], 0.99, 1e-7);
  EXPECT_NEAR(a.value("w")[1], -1.99, 1e-7);
}
