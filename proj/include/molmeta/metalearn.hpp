#pragma once

// Training regimes: MAML, FO-MAML and ANIL meta-learning, supervised
// fine-tuning with early stopping (meta-test), multitask pretraining and the
// from-scratch fingerprint baseline.
//
// The loops are templates over a model type providing
//   using Input; using Batch;
//   Var loss(Tape&, span<const Var>, const Batch&, Mode, Rng&)
// and, for anything that evaluates metrics, Var logits(...) with the same
// arguments, plus init(seed) and collate(...) as in models.hpp.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "molmeta/autodiff.hpp"
#include "molmeta/errors.hpp"
#include "molmeta/featurize.hpp"
#include "molmeta/fingerprint.hpp"
#include "molmeta/log.hpp"
#include "molmeta/metrics.hpp"
#include "molmeta/models.hpp"
#include "molmeta/optim.hpp"
#include "molmeta/params.hpp"
#include "molmeta/random.hpp"
#include "molmeta/stats.hpp"
#include "molmeta/taskdata.hpp"

namespace molmeta {

enum class Variant { kMaml, kFoMaml, kAnil };
enum class AdaptationMask { kAllLayers, kHeadOnly };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kMaml: return "maml";
    case Variant::kFoMaml: return "fomaml";
    case Variant::kAnil: return "anil";
  }
  return "?";
}

struct MetaHyperParams {
  double inner_lr = 0.05;       // alpha
  double outer_lr = 1e-3;       // beta
  double meta_test_lr = 1e-4;
  std::size_t meta_batch_size = 32;
  std::size_t inner_batch_size = 32;
  std::size_t inner_steps = 1;
  AdaptationMask mask = AdaptationMask::kAllLayers;
  OptimizerKind outer_optimizer = OptimizerKind::kAdam;

  void validate() const {
    if (!(inner_lr > 0.0) || !(outer_lr > 0.0) || !(meta_test_lr > 0.0)) {
      throw ConfigError("learning rates must be positive");
    }
    if (meta_batch_size < 1 || inner_batch_size < 1) throw ConfigError("batch sizes must be >= 1");
  }
};

// Supervised training schedule (fine-tuning, pretraining, baselines).
struct FitOptions {
  double lr = 1e-4;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
};

template <class Model>
struct Episode {
  std::string task_id;
  typename Model::Batch support;
  typename Model::Batch query;
};

struct AdaptationResult {
  ParamSet adapted;
  double support_loss = 0.0;  // at the last inner step
};

// A task with model inputs prepared once.
template <class Input>
struct MetaTask {
  std::string id;
  TaskType type = TaskType::U;
  LabeledData<Input> data;  // n x 1
  std::map<Role, std::vector<std::size_t>> splits;

  const std::vector<std::size_t>& role(Role r) const {
    auto it = splits.find(r);
    if (it == splits.end()) throw ContractError("task " + id + " has no " + role_name(r) + " split");
    return it->second;
  }
};

inline std::vector<FeaturizedMol> model_inputs(const DmpnnModel&, const std::vector<MolGraph>& graphs) {
  std::vector<FeaturizedMol> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(featurize(g));
  return out;
}

inline std::vector<Fingerprint> model_inputs(const FingerprintModel& m, const std::vector<MolGraph>& graphs) {
  std::vector<Fingerprint> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) {
    out.push_back(morgan_fingerprint(g, m.config().fingerprint_radius, m.config().fingerprint_bits));
  }
  return out;
}

template <class Model>
MetaTask<typename Model::Input> prepare_task(const Model& model, const Task& task) {
  MetaTask<typename Model::Input> t;
  t.id = task.id;
  t.type = task.type;
  t.splits = task.splits;
  t.data.inputs = model_inputs(model, task.graphs);
  t.data.labels = Tensor::matrix(task.size(), 1, task.labels);
  t.data.mask = Tensor::ones({task.size(), 1});
  return t;
}

template <class Model>
Episode<Model> make_episode(const Model& model, const MetaTask<typename Model::Input>& task,
                            const EpisodeIndices& idx) {
  return Episode<Model>{task.id, make_batch(model, task.data, idx.support),
                        make_batch(model, task.data, idx.query)};
}

// Same draw as sample_episode(Task, ...), on a prepared task.
template <class Input>
EpisodeIndices sample_episode(const MetaTask<Input>& task, std::size_t batch_size, Rng& rng) {
  const auto& train = task.role(Role::kTrain);
  const auto& val = task.role(Role::kVal);
  if (train.empty() || val.empty()) {
    throw ContractError("task " + task.id + ": episode needs non-empty train and validation roles");
  }
  EpisodeIndices ep;
  ep.task_id = task.id;
  ep.support = detail::draw_without_replacement(train, batch_size, rng);
  ep.query = detail::draw_without_replacement(val, batch_size, rng);
  return ep;
}

// ---------------------------------------------------------------------------
// Inner loop

namespace detail {

inline bool adapts(const NamedTensor& p, AdaptationMask mask) {
  return mask == AdaptationMask::kAllLayers || p.group == LayerGroup::kHead;
}

// Runs the inner SGD steps on `tape`, starting from `theta`. With
// GradMode::kCreateGraph the steps stay differentiable with respect to
// `theta`; with kDiscard the step directions are constants.
template <class Model>
std::vector<Var> adapt_on_tape(const Model& model, Tape& tape, std::span<const Var> theta,
                               const ParamSet& like, const typename Model::Batch& support,
                               double alpha, std::size_t steps, AdaptationMask mask,
                               ad::GradMode mode, Rng& rng, double* last_loss = nullptr) {
  std::vector<Var> cur(theta.begin(), theta.end());
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < like.size(); ++i)
    if (adapts(like[i], mask)) active.push_back(i);
  for (std::size_t s = 0; s < steps; ++s) {
    Var loss = model.loss(tape, cur, support, Mode::kTrain, rng);
    if (last_loss) *last_loss = loss.value().item();
    std::vector<Var> wrt;
    wrt.reserve(active.size());
    for (std::size_t i : active) wrt.push_back(cur[i]);
    auto g = tape.grad(loss, wrt, mode);
    for (std::size_t k = 0; k < active.size(); ++k) {
      cur[active[k]] = ad::sub(cur[active[k]], ad::scale(g[k], alpha));
    }
  }
  return cur;
}

inline AdaptationMask effective_mask(Variant v, const MetaHyperParams& hp) {
  return v == Variant::kAnil ? AdaptationMask::kHeadOnly : hp.mask;
}

}  // namespace detail

// theta' = theta - alpha * grad L_support(theta), repeated hp.inner_steps
// times, on the layers allowed by hp.mask. `record_higher_order` keeps the
// update differentiable; the returned values are the same either way.
template <class Model>
AdaptationResult inner_update(const Model& model, const ParamSet& theta,
                              const typename Model::Batch& support, const MetaHyperParams& hp,
                              bool record_higher_order, Rng& rng) {
  if (support.labels.size() == 0) throw ContractError("inner_update: empty support set");
  Tape tape;
  auto vars = bind(tape, theta);
  AdaptationResult res;
  auto adapted = detail::adapt_on_tape(model, tape, vars, theta, support, hp.inner_lr, hp.inner_steps,
                                       hp.mask,
                                       record_higher_order ? ad::GradMode::kCreateGraph : ad::GradMode::kDiscard,
                                       rng, &res.support_loss);
  res.adapted = unbind(theta, adapted);
  return res;
}

struct MetaGradient {
  ParamSet grad;
  double query_loss = 0.0;
};

// Gradient of the query loss at theta'_i with respect to theta. MAML and
// ANIL differentiate through the inner update; FO-MAML treats the inner step
// directions as constants.
template <class Model>
MetaGradient meta_gradient(const Model& model, const ParamSet& theta, const Episode<Model>& episode,
                           const MetaHyperParams& hp, Variant variant, Rng& rng) {
  if (episode.support.labels.size() == 0) throw ContractError("meta_gradient: empty support set");
  Tape tape;
  auto vars = bind(tape, theta);
  const auto mode = variant == Variant::kFoMaml ? ad::GradMode::kDiscard : ad::GradMode::kCreateGraph;
  auto adapted = detail::adapt_on_tape(model, tape, vars, theta, episode.support, hp.inner_lr,
                                       hp.inner_steps, detail::effective_mask(variant, hp), mode, rng);
  Var q = model.loss(tape, adapted, episode.query, Mode::kTrain, rng);
  auto g = tape.grad(q, vars, ad::GradMode::kDiscard);
  MetaGradient out;
  out.query_loss = q.value().item();
  std::vector<Var> gv(g.begin(), g.end());
  out.grad = unbind(theta, gv);
  return out;
}

struct MetaStep {
  ParamSet grad;          // averaged meta-gradient
  double meta_loss = 0.0;  // mean query loss
};

// Averages the per-episode meta-gradients in episode order, then takes one
// optimizer step on theta.
template <class Model>
MetaStep meta_update(const Model& model, ParamSet& theta, std::span<const Episode<Model>> episodes,
                     const MetaHyperParams& hp, Variant variant, Optimizer& optimizer, Rng& rng) {
  if (episodes.empty()) throw ContractError("meta_update: empty episode batch");
  MetaStep step;
  step.grad = theta.zeros_like();
  for (const auto& ep : episodes) {
    MetaGradient g = meta_gradient(model, theta, ep, hp, variant, rng);
    step.grad += g.grad;
    step.meta_loss += g.query_loss;
  }
  const double inv = 1.0 / static_cast<double>(episodes.size());
  step.grad *= inv;
  step.meta_loss *= inv;
  optimizer.step(theta, step.grad);
  return step;
}

// ---------------------------------------------------------------------------
// Meta-training

struct MetaTrainOptions {
  std::size_t meta_steps = 200;
  std::size_t eval_every = 20;
  std::size_t val_episodes = 1;  // per validation task at each evaluation
};

struct LogRow {
  std::size_t step = 0;
  std::string split;  // "train" or "val"
  double loss = 0.0;
  std::optional<double> auprc;
};

struct TrainResult {
  ParamSet best;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
  std::vector<LogRow> log;
};

// Generic loop: `sample(rng)` returns the next episode batch, `validate(theta)`
// returns a score (higher is better) and optionally a loss. The parameters
// with the highest validation score seen (first on ties) are returned.
template <class Model, class Sampler, class Validate>
TrainResult meta_train_loop(const Model& model, ParamSet theta, Sampler&& sample, Validate&& validate,
                            const MetaHyperParams& hp, Variant variant, const MetaTrainOptions& opts,
                            std::uint64_t seed) {
  hp.validate();
  Rng root(seed);
  Rng sample_rng = root.fork();
  Rng step_rng = root.fork();
  Optimizer opt(hp.outer_optimizer, hp.outer_lr);
  TrainResult res;
  auto evaluate = [&](std::size_t step) {
    auto [score, loss] = validate(std::as_const(theta));
    res.log.push_back({step, "val", loss, score});
    const double s = score ? *score : -loss;
    if (s > res.best_score) {
      res.best_score = s;
      res.best = theta;
      res.best_step = step;
    }
  };
  evaluate(0);
  for (std::size_t step = 1; step <= opts.meta_steps; ++step) {
    std::vector<Episode<Model>> batch = sample(sample_rng);
    MetaStep ms = meta_update<Model>(model, theta, batch, hp, variant, opt, step_rng);
    res.log.push_back({step, "train", ms.meta_loss, std::nullopt});
    log::debug("meta step ", step, " loss ", ms.meta_loss);
    if (opts.eval_every > 0 && (step % opts.eval_every == 0 || step == opts.meta_steps)) evaluate(step);
  }
  return res;
}

namespace detail {

inline std::vector<std::size_t> sample_task_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  if (k <= n) return draw_without_replacement(all, k, rng);
  std::vector<std::size_t> out(k);
  for (auto& v : out) v = rng.uniform_int(n);
  return out;
}

template <class Model>
std::optional<double> batch_auprc(const Model& model, const ParamSet& params, const typename Model::Batch& b) {
  const Tensor logits = predict(model, params, b);
  std::vector<double> scores, labels;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (b.mask[i] == 0.0) continue;
    scores.push_back(logits[i]);
    labels.push_back(b.labels[i]);
  }
  try {
    return auprc(scores, labels);
  } catch (const UndefinedMetricError&) {
    return std::nullopt;
  }
}

template <class Model>
double batch_loss(const Model& model, const ParamSet& params, const typename Model::Batch& b) {
  Tape tape;
  Rng rng(0);
  auto p = bind(tape, params);
  return model.loss(tape, p, b, Mode::kEval, rng).value().item();
}

}  // namespace detail

// Meta-trains from model.init(seed). Validation adapts to episodes of each
// T^val task (fixed draws across evaluations) and scores the mean query
// AUPRC after adaptation.
template <class Model>
TrainResult meta_train(const Model& model, const std::vector<MetaTask<typename Model::Input>>& train_tasks,
                       const std::vector<MetaTask<typename Model::Input>>& val_tasks, const MetaHyperParams& hp,
                       Variant variant, std::uint64_t seed, const MetaTrainOptions& opts = {}) {
  if (train_tasks.empty()) throw ContractError("meta_train: no meta-training tasks");
  std::vector<Episode<Model>> val_episodes;
  {
    Rng vrng(seed ^ 0x76616c6964617465ULL);
    for (const auto& t : val_tasks)
      for (std::size_t k = 0; k < opts.val_episodes; ++k)
        val_episodes.push_back(make_episode(model, t, sample_episode(t, hp.inner_batch_size, vrng)));
  }
  auto sampler = [&](Rng& rng) {
    std::vector<Episode<Model>> batch;
    for (std::size_t i : detail::sample_task_indices(train_tasks.size(), hp.meta_batch_size, rng)) {
      batch.push_back(make_episode(model, train_tasks[i], sample_episode(train_tasks[i], hp.inner_batch_size, rng)));
    }
    return batch;
  };
  MetaHyperParams adapt_hp = hp;
  adapt_hp.mask = detail::effective_mask(variant, hp);
  auto validate = [&](const ParamSet& theta) -> std::pair<std::optional<double>, double> {
    if (val_episodes.empty()) return {std::nullopt, 0.0};
    double score = 0.0, loss = 0.0;
    std::size_t scored = 0;
    Rng arng(seed);
    for (const auto& ep : val_episodes) {
      AdaptationResult a = inner_update(model, theta, ep.support, adapt_hp, false, arng);
      loss += detail::batch_loss(model, a.adapted, ep.query);
      if (auto s = detail::batch_auprc(model, a.adapted, ep.query)) {
        score += *s;
        ++scored;
      }
    }
    loss /= static_cast<double>(val_episodes.size());
    if (scored == 0) return {std::nullopt, loss};
    return {score / static_cast<double>(scored), loss};
  };
  return meta_train_loop(model, model.init(seed), sampler, validate, hp, variant, opts, seed);
}

// ---------------------------------------------------------------------------
// Supervised training with early stopping

struct FitResult {
  ParamSet best;
  std::size_t best_epoch = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  std::vector<LogRow> log;
};

namespace detail {

// Mean AUPRC over output columns where it is defined; nullopt if none.
inline std::optional<double> masked_auprc(const Tensor& logits, const Tensor& labels, const Tensor& mask) {
  const std::size_t k = logits.cols();
  double total = 0.0;
  std::size_t defined = 0;
  for (std::size_t j = 0; j < k; ++j) {
    std::vector<double> s, y;
    for (std::size_t i = 0; i < logits.rows(); ++i) {
      if (mask.at(i, j) == 0.0) continue;
      s.push_back(logits.at(i, j));
      y.push_back(labels.at(i, j));
    }
    if (s.empty()) continue;
    try {
      total += auprc(s, y);
      ++defined;
    } catch (const UndefinedMetricError&) {
    }
  }
  if (defined == 0) return std::nullopt;
  return total / static_cast<double>(defined);
}

}  // namespace detail

// Minibatch Adam on `train_rows` starting from `init`. Epoch 0 scores the
// initial parameters. The validation score is AUPRC on `val_rows`, or minus
// the validation loss when AUPRC is undefined there. Training stops after
// `patience` epochs without improvement.
template <class Model>
FitResult fit_supervised(const Model& model, ParamSet init, const LabeledData<typename Model::Input>& data,
                         const std::vector<std::size_t>& train_rows, const std::vector<std::size_t>& val_rows,
                         const FitOptions& opts, std::uint64_t seed) {
  if (train_rows.empty()) throw ContractError("fit: empty training split");
  if (val_rows.empty()) throw ContractError("fit: empty validation split");
  if (opts.batch_size == 0) throw ConfigError("fit: batch size must be >= 1");
  Rng root(seed);
  Rng shuffle_rng = root.fork();
  Rng dropout_rng = root.fork();
  Adam adam(opts.lr);
  const auto val_batch = make_batch(model, data, val_rows);
  ParamSet theta = std::move(init);
  FitResult res;
  std::size_t since_best = 0;
  auto evaluate = [&](std::size_t epoch) {
    const Tensor logits = predict(model, theta, val_batch);
    const double loss = detail::batch_loss(model, theta, val_batch);
    const auto score = detail::masked_auprc(logits, val_batch.labels, val_batch.mask);
    res.log.push_back({epoch, "val", loss, score});
    const double s = score ? *score : -loss;
    if (s > res.best_score) {
      res.best_score = s;
      res.best = theta;
      res.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
  };
  evaluate(0);
  std::vector<std::size_t> order = train_rows;
  for (std::size_t epoch = 1; epoch <= opts.max_epochs && since_best < opts.patience; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      std::span<const std::size_t> rows(order.data() + start, end - start);
      const auto batch = make_batch(model, data, rows);
      double mask_sum = 0.0;
      for (double m : batch.mask.data()) mask_sum += m;
      if (mask_sum == 0.0) continue;
      Tape tape;
      auto p = bind(tape, theta);
      Var loss = model.loss(tape, p, batch, Mode::kTrain, dropout_rng);
      auto g = tape.grad(loss, p, ad::GradMode::kDiscard);
      std::vector<Var> gv(g.begin(), g.end());
      adam.step(theta, unbind(theta, gv));
      epoch_loss += loss.value().item();
      ++batches;
    }
    res.log.push_back({epoch, "train", batches ? epoch_loss / static_cast<double>(batches) : 0.0, std::nullopt});
    evaluate(epoch);
  }
  return res;
}

namespace detail {

template <class Model>
EvalRecord score_test(const Model& model, const ParamSet& params, const MetaTask<typename Model::Input>& task,
                      const std::string& method, std::uint64_t seed) {
  const auto& rows = task.role(Role::kTest);
  if (rows.empty()) throw ContractError("task " + task.id + ": empty test split");
  const auto batch = make_batch(model, task.data, rows);
  const Tensor logits = predict(model, params, batch);
  std::vector<double> scores(logits.data().begin(), logits.data().end());
  std::vector<double> labels(batch.labels.data().begin(), batch.labels.data().end());
  EvalRecord r;
  r.method = method;
  r.task_id = task.id;
  r.task_type = task.type;
  r.seed = seed;
  r.n_obs = task.data.size();
  r.frac_pos = fraction_positive(std::span<const double>(task.data.labels.data().data(), task.data.labels.size()));
  try {
    r.auprc = auprc(scores, labels);
  } catch (const UndefinedMetricError& e) {
    log::warn("task ", task.id, " seed ", seed, ": ", e.what());
  }
  try {
    r.auroc = auroc(scores, labels);
  } catch (const UndefinedMetricError& e) {
    log::warn("task ", task.id, " seed ", seed, ": ", e.what());
  }
  return r;
}

template <class Input>
void require_test_splits(const MetaTask<Input>& task) {
  for (Role r : {Role::kTrain, Role::kVal, Role::kTest}) task.role(r);
}

template <class Input>
void warn_single_class(const MetaTask<Input>& task) {
  double pos = 0.0;
  const auto& rows = task.role(Role::kTrain);
  for (std::size_t i : rows) pos += task.data.labels.at(i, 0);
  if (pos == 0.0 || pos == static_cast<double>(rows.size())) {
    log::warn("task ", task.id, ": training split has a single class");
  }
}

}  // namespace detail

// Fine-tunes every layer from `init` on the task's train split at the
// meta-test learning rate, early-stopping on validation AUPRC, and scores
// the test split.
template <class Model>
EvalRecord meta_test(const Model& model, const ParamSet& init, const MetaTask<typename Model::Input>& task,
                     const MetaHyperParams& hp, std::uint64_t seed, const std::string& method,
                     FitOptions opts = {}, FitResult* fit_out = nullptr) {
  detail::require_test_splits(task);
  opts.lr = hp.meta_test_lr;
  FitResult fit = fit_supervised(model, init, task.data, task.role(Role::kTrain), task.role(Role::kVal), opts, seed);
  EvalRecord r = detail::score_test(model, fit.best, task, method, seed);
  if (fit_out) *fit_out = std::move(fit);
  return r;
}

// Fingerprint network trained from a fresh initialisation on one task.
inline EvalRecord train_fingerprint_baseline(const FingerprintModel& model, const MetaTask<Fingerprint>& task,
                                             std::uint64_t seed, FitOptions opts = {},
                                             const std::string& method = "ecfp") {
  detail::require_test_splits(task);
  detail::warn_single_class(task);
  FitResult fit = fit_supervised(model, model.init(seed), task.data, task.role(Role::kTrain),
                                 task.role(Role::kVal), opts, seed);
  return detail::score_test(model, fit.best, task, method, seed);
}

// Joint training with one output column per task over the union of records.
// Labels missing for a task are masked out. Each task contributes its train
// role to D^tr and its validation role to D^val.
template <class Model>
struct MultitaskData {
  LabeledData<typename Model::Input> data;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  std::vector<std::string> task_ids;  // column order
};

template <class Model>
MultitaskData<Model> build_multitask(const std::vector<MetaTask<typename Model::Input>>& tasks) {
  if (tasks.empty()) throw ContractError("multitask training needs at least one task");
  MultitaskData<Model> mt;
  const std::size_t k = tasks.size();
  std::size_t n = 0;
  for (const auto& t : tasks) n += t.data.size();
  std::vector<double> labels(n * k, 0.0), mask(n * k, 0.0);
  std::size_t row = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const auto& t = tasks[j];
    mt.task_ids.push_back(t.id);
    std::vector<std::size_t> role_of(t.data.size(), 99);
    for (const auto& [role, idx] : t.splits)
      for (std::size_t i : idx) role_of[i] = static_cast<std::size_t>(role);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      mt.data.inputs.push_back(t.data.inputs[i]);
      labels[row * k + j] = t.data.labels.at(i, 0);
      mask[row * k + j] = 1.0;
      if (role_of[i] == static_cast<std::size_t>(Role::kTrain)) mt.train_rows.push_back(row);
      if (role_of[i] == static_cast<std::size_t>(Role::kVal)) mt.val_rows.push_back(row);
      ++row;
    }
  }
  mt.data.labels = Tensor::matrix(n, k, std::move(labels));
  mt.data.mask = Tensor::matrix(n, k, std::move(mask));
  return mt;
}

// `model` must have config().outputs == tasks.size().
template <class Model>
FitResult pretrain_multitask(const Model& model, const std::vector<MetaTask<typename Model::Input>>& tasks,
                             std::uint64_t seed, FitOptions opts = {}) {
  if (model.config().outputs != tasks.size()) {
    throw ConfigError("pretraining model needs one output per task (" + std::to_string(tasks.size()) + ")");
  }
  auto mt = build_multitask<Model>(tasks);
  return fit_supervised(model, model.init(seed), mt.data, mt.train_rows, mt.val_rows, opts, seed);
}

}  // namespace molmeta
