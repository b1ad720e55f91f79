// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "molmeta/molmeta.hpp"
#include "support/oracles.hpp"
#include "support/published_tables.hpp"
#include "support/quad_model.hpp"
#include "support/synthetic_corpus.hpp"

using namespace molmeta;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

Tensor gaussian(std::size_t n, std::size_t d, std::mt19937_64& gen) {
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<double> v(n * d);
  for (double& x : v) x = N(gen);
  return Tensor::matrix(n, d, std::move(v));
}

Eigen::MatrixXd to_eigen(const Tensor& t) {
  Eigen::MatrixXd m(t.rows(), t.cols());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m(i, j) = t.at(i, j);
  return m;
}

Tensor from_eigen(const Eigen::MatrixXd& m) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
  return Tensor::matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), std::move(v));
}

ModelConfig small_dmpnn(std::size_t hidden) {
  ModelConfig c;
  c.hidden_size = hidden;
  c.ffn_hidden = hidden;
  c.dropout = 0.0;
  return c;
}

struct GraphBatch {
  std::vector<FeaturizedMol> mols;
  DmpnnModel::Batch batch;
};

GraphBatch graph_batch(const DmpnnModel& model, const std::vector<std::string>& smiles, std::vector<double> labels) {
  GraphBatch gb;
  for (const auto& s : smiles) gb.mols.push_back(featurize(parse_smiles(s)));
  std::vector<const FeaturizedMol*> ptrs;
  for (const auto& f : gb.mols) ptrs.push_back(&f);
  const std::size_t n = labels.size();
  gb.batch = model.collate(ptrs, Tensor::matrix(n, 1, labels), Tensor::ones({n, 1}));
  return gb;
}

Tensor embed(const DmpnnModel& model, const ParamSet& p, const std::vector<std::string>& smiles) {
  GraphBatch gb = graph_batch(model, smiles, std::vector<double>(smiles.size(), 1.0));
  Tape tape;
  Rng rng(0);
  auto vars = bind(tape, p);
  return model.encode(tape, vars, gb.batch.graphs, Mode::kEval, rng).value();
}

// ---------------------------------------------------------------------------

Outcome rank_table_reproduction() {
  Outcome o;
  std::vector<fixtures::PublishedRow> rows = fixtures::kInDistribution;
  rows.insert(rows.end(), fixtures::kOutOfDistribution.begin(), fixtures::kOutOfDistribution.end());
  ScoreTable table;
  for (const auto& row : rows)
    for (std::size_t m = 0; m < 5; ++m)
      table.set(fixtures::kMethods[m], row.task, row.type, {row.cells[m].first, row.cells[m].second, 5});
  const RankTable r = rank_table(table);
  std::ostringstream got;
  for (auto [subset, expected] : {std::pair{TaskSubset::kInDistribution, fixtures::kRanksInDistribution},
                                  std::pair{TaskSubset::kOutOfDistribution, fixtures::kRanksOutOfDistribution}}) {
    got << subset_name(subset) << " [";
    for (std::size_t m = 0; m < 5; ++m) {
      const double v = r.average.at(subset)[m];
      got << (m ? " " : "") << fmt(v, 3);
      o.require(std::abs(v - expected[m]) <= 0.01,
                std::string(subset_name(subset)) + " " + fixtures::kMethods[m] + " = " + fmt(v, 4));
    }
    got << "] ";
  }
  if (o.pass) o.detail = got.str();
  return o;
}

Outcome gradient_correctness() {
  Outcome o;
  // First order: full D-MPNN + FFN + BCE against central differences.
  DmpnnModel model(small_dmpnn(16));
  const ParamSet p = model.init(12);
  GraphBatch gb = graph_batch(model, {"CC(=O)O", "c1ccncc1", "CN"}, {1.0, 0.0, 1.0});
  auto loss_at = [&](const ParamSet& q) {
    Tape tape;
    Rng rng(0);
    auto vars = bind(tape, q);
    return model.loss(tape, vars, gb.batch, Mode::kEval, rng).value().item();
  };
  Tape tape;
  Rng rng(0);
  auto vars = bind(tape, p);
  auto grads = tape.grad(model.loss(tape, vars, gb.batch, Mode::kEval, rng), vars);
  double worst_fd = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Tensor numeric = oracle::numeric_gradient(
        [&](const Tensor& v) {
          ParamSet q = p;
          q[i].value = v;
          return loss_at(q);
        },
        p[i].value, 1e-6);
    worst_fd = std::max(worst_fd, oracle::relative_error(grads[i].value(), numeric));
  }
  o.require(worst_fd < 1e-4, "finite-difference relative error " + fmt(worst_fd));

  // Second order: MAML meta-gradient against the explicit (I - alpha H) chain rule.
  using namespace quad;
  Rng qrng(11);
  double worst_meta = 0.0;
  for (std::size_t n_body : {0u, 2u, 4u}) {
    QuadModel m{n_body, 10 - n_body};
    const std::size_t n = 10;
    for (std::size_t steps : {1u, 2u, 3u}) {
      for (int trial = 0; trial < 4; ++trial) {
        const Mat as = random_spd(n, qrng), aq = random_spd(n, qrng);
        std::vector<double> bs(n), bq(n), x(n);
        for (std::size_t i = 0; i < n; ++i) {
          bs[i] = qrng.uniform(-1, 1);
          bq[i] = qrng.uniform(-1, 1);
          x[i] = qrng.uniform(-1, 1);
        }
        MetaHyperParams hp;
        hp.inner_lr = 0.05;
        hp.inner_steps = steps;
        Episode<QuadModel> ep{"q", quad_batch(as, bs), quad_batch(aq, bq)};
        std::vector<double> theta = x;
        for (std::size_t s = 0; s < steps; ++s) {
          auto g = matvec(as, theta);
          for (std::size_t i = 0; i < n; ++i) theta[i] -= hp.inner_lr * (g[i] - bs[i]);
        }
        std::vector<double> grad = matvec(aq, theta);
        for (std::size_t i = 0; i < n; ++i) grad[i] -= bq[i];
        for (std::size_t s = 0; s < steps; ++s) {
          auto hg = matvec(as, grad);
          for (std::size_t i = 0; i < n; ++i) grad[i] -= hp.inner_lr * hg[i];
        }
        Rng r(0);
        const auto flat = meta_gradient(m, m.params(x), ep, hp, Variant::kMaml, r).grad.flatten();
        for (std::size_t i = 0; i < n; ++i) worst_meta = std::max(worst_meta, std::abs(flat[i] - grad[i]));
      }
    }
  }
  o.require(worst_meta < 1e-10, "meta-gradient error " + fmt(worst_meta));
  if (o.pass) o.detail = "fd rel err " + fmt(worst_fd, 2) + ", meta-gradient err " + fmt(worst_meta, 2);
  return o;
}

Outcome analytic_maml_example() {
  Outcome o;
  using namespace quad;
  QuadModel m;
  MetaHyperParams hp;
  hp.inner_lr = 0.5;
  auto batch = quad_batch({{1.0}}, {1.0});
  Episode<QuadModel> ep{"q", batch, batch};
  Rng rng(0);
  const double maml = meta_gradient(m, m.params({0.0}), ep, hp, Variant::kMaml, rng).grad.value("head")[0];
  const double fo = meta_gradient(m, m.params({0.0}), ep, hp, Variant::kFoMaml, rng).grad.value("head")[0];
  o.require(std::abs(maml + 0.25) <= 1e-12, "MAML gradient " + fmt(maml, 17));
  o.require(std::abs(fo + 0.5) <= 1e-12, "FO-MAML gradient " + fmt(fo, 17));
  if (o.pass) o.detail = "MAML " + fmt(maml) + ", FO-MAML " + fmt(fo);
  return o;
}

std::vector<MetaTask<FeaturizedMol>> synthetic_meta_tasks(const DmpnnModel& model, std::size_t count,
                                                          SplitRatios ratios, std::size_t lo, std::size_t hi,
                                                          std::uint64_t seed, std::size_t ood_every = 0) {
  auto tasks = synthetic::make_tasks(synthetic::task_specs(count, seed, ood_every), lo, hi, seed);
  std::vector<MetaTask<FeaturizedMol>> out;
  for (auto& t : tasks) {
    t.splits = scaffold_split(t, ratios, seed).roles;
    out.push_back(prepare_task(model, t));
  }
  return out;
}

Outcome variant_equivalence() {
  Outcome o;
  DmpnnModel model(small_dmpnn(16));
  const auto tasks = synthetic_meta_tasks(model, 3, kMetaTrainRatios, 60, 80, 5);
  std::size_t checked = 0;
  for (const auto& task : tasks) {
    Rng rng(7 + checked);
    const auto ep = make_episode(model, task, sample_episode(task, 16, rng));
    const ParamSet theta = model.init(3 + checked);

    MetaHyperParams zero;
    zero.inner_lr = 0.0;
    Rng r1(0), r2(0), r3(0);
    const ParamSet maml0 = meta_gradient(model, theta, ep, zero, Variant::kMaml, r1).grad;
    o.require(maml0 == meta_gradient(model, theta, ep, zero, Variant::kFoMaml, r2).grad, "alpha=0 MAML != FO-MAML");
    o.require(maml0 == meta_gradient(model, theta, ep, zero, Variant::kAnil, r3).grad, "alpha=0 MAML != ANIL");

    MetaHyperParams hp;
    hp.inner_steps = 2;
    hp.mask = AdaptationMask::kHeadOnly;
    Rng r4(0);
    const ParamSet adapted = inner_update(model, theta, ep.support, hp, true, r4).adapted;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (theta[i].group == LayerGroup::kBody) {
        o.require(adapted[i].value == theta[i].value, "ANIL moved body tensor " + theta[i].name);
      }
    }

    MetaHyperParams plain;
    MetaHyperParams head_only = plain;
    head_only.mask = AdaptationMask::kHeadOnly;
    Rng r5(0), r6(0);
    const ParamSet anil = meta_gradient(model, theta, ep, plain, Variant::kAnil, r5).grad;
    const ParamSet maml = meta_gradient(model, theta, ep, head_only, Variant::kMaml, r6).grad;
    const auto a = anil.flatten(), b = maml.flatten();
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
    o.require(diff <= 1e-10, "ANIL vs head-only MAML differ by " + fmt(diff));
    ++checked;
  }
  if (o.pass) o.detail = std::to_string(checked) + " episodes";
  return o;
}

Outcome encoder_invariants() {
  Outcome o;
  DmpnnModel model(small_dmpnn(24));
  const ParamSet p = model.init(7);
  Rng rng(31);
  std::vector<std::string> molecules = oracle::molecule_panel();
  while (molecules.size() < 100) molecules.push_back(synthetic::random_molecule(rng).smiles);
  double worst = 0.0;
  for (const auto& s : molecules) {
    const MolGraph g = parse_smiles(s);
    const Tensor ref = embed(model, p, {s});
    const std::string other = oracle::random_smiles(g, rng);
    worst = std::max(worst, max_abs_diff(embed(model, p, {other}), ref));
  }
  o.require(worst <= 1e-10, "permutation difference " + fmt(worst));

  // Single atom: h_G = relu(x W_a) with no messages.
  const Tensor h = embed(model, p, {"C"});
  const Tensor x = featurize(parse_smiles("C")).atom_features;
  double single = 0.0;
  for (std::size_t j = 0; j < 24; ++j) {
    double z = 0.0;
    for (std::size_t i = 0; i < kAtomFeatureWidth; ++i) z += x[i] * p.value("W_a").at(i, j);
    single = std::max(single, std::abs(h.at(0, j) - std::max(z, 0.0)));
  }
  o.require(single <= 1e-14, "single-atom readout off by " + fmt(single));

  // Disconnected batch members do not interact.
  const Tensor pair = embed(model, p, {"CC(=O)O", "c1ccccc1N"});
  const Tensor alone = embed(model, p, {"c1ccccc1N"});
  double iso = 0.0;
  for (std::size_t j = 0; j < 24; ++j) iso = std::max(iso, std::abs(pair.at(1, j) - alone.at(0, j)));
  o.require(iso <= 1e-12, "batch isolation off by " + fmt(iso));
  if (o.pass) o.detail = std::to_string(molecules.size()) + " molecules, max diff " + fmt(worst, 2);
  return o;
}

double enumerated_wilcoxon_p(const std::vector<double>& ranks, double statistic) {
  const std::size_t n = ranks.size();
  std::size_t at_most = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double w = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      if (mask & (std::size_t{1} << r)) w += ranks[r];
    if (w <= statistic) ++at_most;
  }
  return std::min(1.0, 2.0 * static_cast<double>(at_most) / static_cast<double>(std::size_t{1} << n));
}

Outcome statistics_oracles() {
  Outcome o;
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst_w = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 12);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = U(gen);
      y[i] = U(gen);
    }
    const WilcoxonResult r = wilcoxon_signed_rank(x, y);
    std::vector<double> ad(n), ranks(n);
    for (std::size_t i = 0; i < n; ++i) ad[i] = std::abs(x[i] - y[i]);
    double wp = 0.0, wm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ranks[i] = 1.0;
      for (std::size_t j = 0; j < n; ++j) ranks[i] += ad[j] < ad[i] ? 1.0 : 0.0;
      (x[i] > y[i] ? wp : wm) += ranks[i];
    }
    const double stat = std::min(wp, wm);
    o.require(r.exact && r.statistic == stat, "Wilcoxon statistic mismatch at trial " + std::to_string(trial));
    worst_w = std::max(worst_w, std::abs(r.p_value - enumerated_wilcoxon_p(ranks, stat)));
  }
  o.require(worst_w <= 1e-12, "Wilcoxon p error " + fmt(worst_w));

  double worst_pr = 0.0, worst_roc = 0.0;
  std::size_t cases = 0;
  std::uniform_int_distribution<int> level(0, 5);
  for (std::size_t n = 1; n <= 10; ++n) {
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
      std::vector<double> labels(n), scores(n);
      for (std::size_t i = 0; i < n; ++i) {
        labels[i] = (mask >> i) & 1 ? 1.0 : 0.0;
        scores[i] = 0.1 * level(gen);
      }
      // Step integral over each cut of the stably ranked list.
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
      const double pos = std::accumulate(labels.begin(), labels.end(), 0.0);
      double area = 0.0, prev = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        double tp = 0.0;
        for (std::size_t i = 0; i < k; ++i) tp += labels[order[i]];
        area += (tp / pos - prev) * tp / static_cast<double>(k);
        prev = tp / pos;
      }
      worst_pr = std::max(worst_pr, std::abs(auprc(scores, labels) - area));
      if (pos < static_cast<double>(n)) {
        double wins = 0.0, pairs = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j)
            if (labels[i] == 1.0 && labels[j] == 0.0) {
              pairs += 1.0;
              wins += scores[i] > scores[j] ? 1.0 : (scores[i] == scores[j] ? 0.5 : 0.0);
            }
        worst_roc = std::max(worst_roc, std::abs(auroc(scores, labels) - wins / pairs));
      }
      ++cases;
    }
  }
  o.require(worst_pr <= 1e-12, "AUPRC oracle error " + fmt(worst_pr));
  o.require(worst_roc <= 1e-12, "AUROC oracle error " + fmt(worst_roc));
  if (o.pass) o.detail = "1000 Wilcoxon inputs, " + std::to_string(cases) + " labelings";
  return o;
}

Outcome cca_properties() {
  Outcome o;
  std::mt19937_64 gen(1);
  const Tensor a = gaussian(300, 10, gen);
  const double same = cca_similarity(a, a);
  o.require(std::abs(same - 1.0) <= 1e-8, "identical inputs gave " + fmt(same, 12));
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(to_eigen(gaussian(10, 10, gen))).householderQ();
  const double rot = cca_similarity(a, from_eigen(to_eigen(a) * q));
  o.require(std::abs(rot - 1.0) <= 1e-8, "rotated inputs gave " + fmt(rot, 12));
  const double indep = cca_similarity(gaussian(2000, 20, gen), gaussian(2000, 20, gen));
  o.require(indep < 0.15, "independent Gaussians gave " + fmt(indep));

  DmpnnModel model(small_dmpnn(16));
  const auto tasks = synthetic_meta_tasks(model, 4, kMetaTestRatios, 50, 60, 2, 2);
  MetaHyperParams hp;
  hp.inner_steps = 0;
  const CcaReport r = cca_experiment(model, model.init(1), tasks, TaskSubset::kAll, {1, 2, 3, 4, 5}, hp);
  for (const auto& l : r.layers) {
    o.require(std::abs(l.mean - 1.0) <= 1e-8, std::string("zero-step ") + layer_name(l.layer) + " gave " + fmt(l.mean, 12));
  }
  if (o.pass) o.detail = "independent Gaussians " + fmt(indep);
  return o;
}

Outcome fingerprint_invariance() {
  Outcome o;
  Rng rng(77);
  std::size_t compared = 0;
  for (const auto& s : oracle::molecule_panel()) {
    const MolGraph g = parse_smiles(s);
    const Fingerprint ref = morgan_fingerprint(g);
    for (int k = 0; k < 5; ++k) {
      const std::string other = oracle::random_smiles(g, rng);
      o.require(morgan_fingerprint(parse_smiles(other)) == ref, s + " vs " + other);
      ++compared;
    }
  }
  if (o.pass) o.detail = std::to_string(compared) + " rewritings";
  return o;
}

// Meta-trains on a synthetic substructure corpus and compares meta-test
// AUPRC against the positive fraction and a scratch D-MPNN fine-tuned with
// the same data and schedule.
Outcome end_to_end_meta_learning() {
  Outcome o;
  const std::size_t kTasks = 150;
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  auto raw = synthetic::make_tasks(synthetic::task_specs(kTasks, 17, 12), 150, 250, 18);
  const MetaSplit split = make_meta_split(raw, 19, MetaSplitQuota{5, 3});
  build_manifest(raw, split, 0, 1000);

  ModelConfig mc = small_dmpnn(32);
  DmpnnModel model(mc);
  auto pick = [&](const std::vector<std::string>& ids) {
    std::vector<MetaTask<FeaturizedMol>> out;
    for (const auto& id : ids) out.push_back(prepare_task(model, find_task(raw, id)));
    return out;
  };
  const auto train = pick(split.train), val = pick(split.val), test = pick(split.test);

  MetaHyperParams hp;
  hp.inner_lr = 0.01;
  hp.outer_lr = 3e-3;
  hp.meta_test_lr = 1e-3;
  hp.meta_batch_size = 8;
  hp.inner_batch_size = 32;
  MetaTrainOptions opts;
  opts.meta_steps = 1200;
  opts.eval_every = 150;
  opts.val_episodes = 4;
  FitOptions fit;
  fit.batch_size = 16;
  fit.max_epochs = 10;
  fit.patience = 3;

  std::map<std::string, std::vector<double>> maml_scores, scratch_scores;
  std::map<std::string, double> frac_pos;
  for (std::uint64_t seed : seeds) {
    const TrainResult tr = meta_train(model, train, val, hp, Variant::kMaml, seed, opts);
    for (const auto& t : test) {
      const EvalRecord m = meta_test(model, tr.best, t, hp, seed, "maml", fit);
      const EvalRecord s = meta_test(model, model.init(seed + 1000), t, hp, seed, "scratch", fit);
      if (m.auprc && s.auprc) {
        maml_scores[t.id].push_back(*m.auprc);
        scratch_scores[t.id].push_back(*s.auprc);
        frac_pos[t.id] = m.frac_pos;
      }
    }
  }
  std::size_t wins = 0;
  double maml_total = 0.0, scratch_total = 0.0;
  for (const auto& [id, v] : maml_scores) {
    const double mm = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    const auto& sv = scratch_scores[id];
    const double sm = std::accumulate(sv.begin(), sv.end(), 0.0) / static_cast<double>(sv.size());
    maml_total += mm;
    scratch_total += sm;
    if (mm > std::max(frac_pos[id], sm)) ++wins;
  }
  const std::size_t n = maml_scores.size();
  o.require(n >= 10, "only " + std::to_string(n) + " held-out tasks scored");
  const double rate = n ? static_cast<double>(wins) / static_cast<double>(n) : 0.0;
  o.require(rate >= 0.7, "MAML ahead on " + std::to_string(wins) + "/" + std::to_string(n) + " tasks");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("MAML ahead on ") + std::to_string(wins) + "/" +
              std::to_string(n) + " held-out tasks, mean AUPRC maml " + fmt(n ? maml_total / n : 0.0) + " vs scratch " +
              fmt(n ? scratch_total / n : 0.0);
  return o;
}

Outcome split_protocol() {
  Outcome o;
  std::vector<Task> census;
  auto add = [&](char prefix, TaskType type, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      Task t;
      t.id = std::string(1, prefix) + std::to_string(i);
      t.type = type;
      census.push_back(t);
    }
  };
  add('A', TaskType::A, 2);
  add('T', TaskType::T, 2);
  add('U', TaskType::U, 2);
  add('B', TaskType::B, 148);
  add('F', TaskType::F, 491);
  const MetaSplit s = make_meta_split(census, 0);
  auto counts = [](const std::vector<std::string>& ids) {
    std::map<char, std::size_t> m;
    for (const auto& id : ids) m[id[0]] += 1;
    return m;
  };
  using Counts = std::map<char, std::size_t>;
  o.require(counts(s.train) == Counts{{'B', 128}, {'F', 471}}, "train counts differ");
  o.require(counts(s.val) == Counts{{'B', 10}, {'F', 10}}, "val counts differ");
  o.require(counts(s.test) == Counts{{'A', 2}, {'B', 10}, {'F', 10}, {'T', 2}, {'U', 2}}, "test counts differ");

  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto tasks = synthetic::make_tasks(synthetic::task_specs(6, seed), 80, 200, seed + 100);
    for (const Task& t : tasks) {
      for (SplitRatios ratios : {kMetaTrainRatios, kMetaTestRatios}) {
        const ScaffoldSplit sp = scaffold_split(t, ratios, seed);
        std::map<std::string, Role> role_of;
        for (const auto& [role, idx] : sp.roles)
          for (std::size_t i : idx) {
            auto [it, inserted] = role_of.emplace(scaffold_key(t.graphs[i]), role);
            o.require(it->second == role, "scaffold straddles splits in " + t.id);
          }
        ++checked;
      }
    }
  }
  if (o.pass) o.detail = "Table 5 counts, " + std::to_string(checked) + " scaffold splits";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  setenv("MOLMETA_LOG", "error", 0);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"rank table reproduces published ranks", rank_table_reproduction},
      {"gradient correctness", gradient_correctness},
      {"analytic MAML example", analytic_maml_example},
      {"variant equivalences", variant_equivalence},
      {"encoder invariants", encoder_invariants},
      {"statistics oracles", statistics_oracles},
      {"CCA properties", cca_properties},
      {"fingerprint invariance", fingerprint_invariance},
      {"end-to-end meta-learning", end_to_end_meta_learning},
      {"split protocol", split_protocol},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::stoul(argv[i])));
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!only.empty() && !only.count(k + 1)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2zu %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
