#pragma once

// End-to-end commands behind the molmeta CLI. Each command writes a resolved
// configuration snapshot into the output directory before any computation,
// and appends a timestamped line to run_log.txt (the only file that differs
// between identical runs).

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "molmeta/cca.hpp"
#include "molmeta/config.hpp"
#include "molmeta/errors.hpp"
#include "molmeta/log.hpp"
#include "molmeta/metalearn.hpp"
#include "molmeta/models.hpp"
#include "molmeta/params.hpp"
#include "molmeta/reports.hpp"
#include "molmeta/stats.hpp"
#include "molmeta/taskdata.hpp"

namespace molmeta {

namespace fs = std::filesystem;

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write " + path.string());
  out << text;
}

inline void append_run_log(const ExperimentConfig& c, const std::string& line) {
  std::ofstream out(fs::path(c.output_dir) / "run_log.txt", std::ios::app);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  out << stamp << ' ' << line << '\n';
}

inline void snapshot(const ExperimentConfig& c, const std::string& name) {
  fs::create_directories(c.output_dir);
  write_text(fs::path(c.output_dir) / ("resolved_config_" + name + ".json"), config_to_json(c).dump(2) + "\n");
}

inline void fail_if(const std::vector<std::string>& errors) {
  if (errors.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

inline void need_dataset(const ExperimentConfig& c, std::vector<std::string>& errors) {
  if (c.dataset.empty()) {
    errors.push_back("dataset: not set");
  } else if (!fs::exists(c.dataset)) {
    errors.push_back("dataset: " + c.dataset + " does not exist");
  }
}

inline void need_manifest(const ExperimentConfig& c, std::vector<std::string>& errors) {
  if (!fs::exists(c.manifest_path())) {
    errors.push_back("split_manifest: " + c.manifest_path() + " does not exist (run 'molmeta split' first)");
  }
}

inline std::string checkpoint_name(const std::string& method, std::uint64_t seed) {
  return method + "_seed" + std::to_string(seed) + ".ckpt";
}

}  // namespace detail

inline std::string checkpoint_path(const ExperimentConfig& c, const std::string& method, std::uint64_t seed) {
  return (fs::path(c.output_dir) / detail::checkpoint_name(method, seed)).string();
}

// Tasks after the size filter, with roles restored from the manifest.
struct Experiment {
  std::vector<Task> tasks;
  MetaSplit meta;

  std::vector<const Task*> select(const std::vector<std::string>& ids) const {
    std::vector<const Task*> out;
    for (const auto& id : ids) out.push_back(&find_task(tasks, id));
    return out;
  }
};

inline Experiment load_experiment(const ExperimentConfig& c) {
  Experiment e;
  e.tasks = filter_by_size(load_tasks(c.dataset), c.min_size, c.max_size);
  std::ifstream in(c.manifest_path());
  if (!in) throw ConfigError("cannot read split manifest " + c.manifest_path());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    throw LoadError(c.manifest_path() + ": " + err.what());
  }
  e.meta = apply_manifest(j, e.tasks);
  std::set<std::string> have;
  for (const auto& t : e.tasks) have.insert(t.id);
  for (const auto* ids : {&e.meta.train, &e.meta.val, &e.meta.test})
    for (const auto& id : *ids)
      if (!have.count(id)) throw LoadError("manifest task " + id + " is not in the filtered dataset");
  return e;
}

template <class Model>
std::vector<MetaTask<typename Model::Input>> prepare_tasks(const Model& model, const std::vector<const Task*>& tasks) {
  std::vector<MetaTask<typename Model::Input>> out;
  out.reserve(tasks.size());
  for (const Task* t : tasks) out.push_back(prepare_task(model, *t));
  return out;
}

// ---------------------------------------------------------------------------
// split

inline SplitManifest cmd_split(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  detail::need_dataset(c, errors);
  detail::fail_if(errors);
  detail::snapshot(c, "split");
  LoadReport report;
  auto tasks = filter_by_size(load_tasks(c.dataset, TaskFileFormat::kAuto, &report), c.min_size, c.max_size);
  const MetaSplit meta = make_meta_split(tasks, c.split_seed);
  SplitManifest m = build_manifest(tasks, meta, c.min_size, c.max_size);
  const fs::path path = c.manifest_path();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  detail::write_text(path, manifest_to_json(m, tasks).dump(2) + "\n");
  log::info("split: ", tasks.size(), " tasks -> ", meta.train.size(), " train / ", meta.val.size(), " val / ",
            meta.test.size(), " test");
  detail::append_run_log(c, "split ok");
  return m;
}

// ---------------------------------------------------------------------------
// train

inline nlohmann::json checkpoint_metadata(const ExperimentConfig& c, const std::string& method, std::uint64_t seed,
                                          const ModelConfig& model) {
  nlohmann::json meta;
  meta["method"] = method;
  meta["seed"] = seed;
  meta["model"] = model;
  meta["hyperparameters"] = config_to_json(c)["meta"];
  meta["fit"] = config_to_json(c)["fit"];
  return meta;
}

inline ModelConfig checkpoint_model(const Checkpoint& ck) {
  ModelConfig m;
  if (ck.metadata.contains("model")) m = ck.metadata["model"].get<ModelConfig>();
  return m;
}

// Returns the checkpoint paths written (none for ecfp, which trains per
// test task during evaluation).
inline std::vector<std::string> cmd_train(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  if (c.method.empty()) errors.push_back("method: not set");
  detail::need_dataset(c, errors);
  detail::need_manifest(c, errors);
  detail::fail_if(errors);
  detail::snapshot(c, "train_" + c.method);
  const Experiment e = load_experiment(c);
  std::vector<std::string> written;

  if (c.method == "ecfp") {
    log::info("train: ecfp is trained from scratch per test task by 'evaluate'");
  } else if (is_meta_method(c.method)) {
    DmpnnModel model(c.model);
    const auto train = prepare_tasks(model, e.select(e.meta.train));
    const auto val = prepare_tasks(model, e.select(e.meta.val));
    for (std::uint64_t seed : c.seeds) {
      TrainResult r = meta_train(model, train, val, c.meta, variant_of(c.method), seed, c.meta_train);
      Checkpoint ck{checkpoint_metadata(c, c.method, seed, model.config()), r.best};
      ck.metadata["best_step"] = r.best_step;
      ck.metadata["best_score"] = r.best_score;
      const std::string path = checkpoint_path(c, c.method, seed);
      save_checkpoint(path, ck);
      write_log_csv((fs::path(c.output_dir) / (c.method + "_seed" + std::to_string(seed) + "_log.csv")).string(),
                    r.log);
      written.push_back(path);
    }
  } else if (c.method == "pretrain") {
    std::vector<std::string> ids = e.meta.train;
    ids.insert(ids.end(), e.meta.val.begin(), e.meta.val.end());
    ModelConfig mc = c.model;
    mc.outputs = ids.size();
    DmpnnModel model(mc);
    const auto tasks = prepare_tasks(model, e.select(ids));
    for (std::uint64_t seed : c.seeds) {
      FitResult r = pretrain_multitask(model, tasks, seed, c.fit);
      Checkpoint ck{checkpoint_metadata(c, c.method, seed, model.config()), r.best};
      ck.metadata["best_epoch"] = r.best_epoch;
      ck.metadata["tasks"] = ids;
      const std::string path = checkpoint_path(c, c.method, seed);
      save_checkpoint(path, ck);
      write_log_csv((fs::path(c.output_dir) / (c.method + "_seed" + std::to_string(seed) + "_log.csv")).string(),
                    r.log);
      written.push_back(path);
    }
  }
  detail::append_run_log(c, "train " + c.method + " ok");
  return written;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluationOutput {
  std::vector<EvalRecord> records;
  RankTable ranks;
  PValueMatrix pvalues;
};

// Records for one method over every meta-test task and seed.
inline std::vector<EvalRecord> evaluate_method(const ExperimentConfig& c, const Experiment& e,
                                               const std::string& method) {
  std::vector<EvalRecord> out;
  const auto test_tasks = e.select(e.meta.test);
  if (method == "ecfp") {
    FingerprintModel model(c.fingerprint_model);
    const auto tasks = prepare_tasks(model, test_tasks);
    for (const auto& t : tasks)
      for (std::uint64_t seed : c.seeds) out.push_back(train_fingerprint_baseline(model, t, seed, c.fit, method));
    return out;
  }
  std::vector<MetaTask<FeaturizedMol>> tasks;
  for (std::uint64_t seed : c.seeds) {
    const Checkpoint ck = load_checkpoint(checkpoint_path(c, method, seed));
    ModelConfig mc = checkpoint_model(ck);
    mc.outputs = 1;
    DmpnnModel model(mc);
    if (tasks.empty()) tasks = prepare_tasks(model, test_tasks);
    const ParamSet init = method == "pretrain" ? transfer_body(ck.params, model.init(seed)) : ck.params;
    if (!init.same_structure(model.init(seed))) {
      throw ConfigError("checkpoint " + checkpoint_path(c, method, seed) + " does not match its model config");
    }
    for (const auto& t : tasks) out.push_back(meta_test(model, init, t, c.meta, seed, method, c.fit));
  }
  return out;
}

inline EvaluationOutput cmd_evaluate(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  const auto methods = c.methods_to_evaluate();
  if (c.evaluate_records.empty()) {
    if (methods.empty() || (methods.size() == 1 && methods[0].empty())) errors.push_back("evaluate.methods: not set");
    detail::need_dataset(c, errors);
    detail::need_manifest(c, errors);
    for (const auto& m : methods) {
      if (m == "ecfp" || m.empty()) continue;
      for (std::uint64_t seed : c.seeds) {
        if (!fs::exists(checkpoint_path(c, m, seed))) {
          errors.push_back("checkpoint " + checkpoint_path(c, m, seed) + " does not exist (run 'molmeta train')");
        }
      }
    }
  } else if (!fs::exists(c.evaluate_records)) {
    errors.push_back("evaluate.records: " + c.evaluate_records + " does not exist");
  }
  detail::fail_if(errors);
  detail::snapshot(c, "evaluate");

  EvaluationOutput out;
  if (!c.evaluate_records.empty()) {
    out.records = read_records_csv(c.evaluate_records);
  } else {
    const Experiment e = load_experiment(c);
    for (const auto& m : methods) {
      auto r = evaluate_method(c, e, m);
      out.records.insert(out.records.end(), r.begin(), r.end());
    }
    write_records_csv((fs::path(c.output_dir) / "records.csv").string(), out.records);
  }
  ScoreTable table = summarize(out.records);
  // A test split without positives leaves AUPRC undefined for every method.
  std::erase_if(table.tasks, [&](const std::string& task) {
    for (const auto& m : table.methods)
      if (table.cells.count({m, task})) return false;
    log::warn("evaluate: AUPRC undefined for every method on task ", task, "; left out of the rank table");
    return true;
  });
  out.ranks = rank_table(table);
  out.pvalues = wilcoxon_matrix(out.records);
  write_rank_table_csv((fs::path(c.output_dir) / "ranks.csv").string(), out.ranks);
  write_pvalue_csv((fs::path(c.output_dir) / "pvalues.csv").string(), out.pvalues);
  detail::append_run_log(c, "evaluate ok");
  return out;
}

// ---------------------------------------------------------------------------
// threshold-benchmark

namespace detail {

// Joint training on `tasks` (one head each) and the mean test AUROC over the
// tasks where it is defined.
template <class Model>
double joint_test_auroc(const Model& model, const std::vector<MetaTask<typename Model::Input>>& tasks,
                        std::uint64_t seed, const FitOptions& fit) {
  auto mt = build_multitask<Model>(tasks);
  FitResult r = fit_supervised(model, model.init(seed), mt.data, mt.train_rows, mt.val_rows, fit, seed);
  double total = 0.0;
  std::size_t defined = 0;
  std::size_t offset = 0;
  for (std::size_t j = 0; j < tasks.size(); ++j) {
    std::vector<std::size_t> rows;
    for (std::size_t i : tasks[j].role(Role::kTest)) rows.push_back(offset + i);
    offset += tasks[j].data.size();
    if (rows.empty()) continue;
    const auto batch = make_batch(model, mt.data, rows);
    const Tensor logits = predict(model, r.best, batch);
    std::vector<double> s, y;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      s.push_back(logits.at(i, j));
      y.push_back(batch.labels.at(i, j));
    }
    try {
      total += auroc(s, y);
      ++defined;
    } catch (const UndefinedMetricError&) {
    }
  }
  return defined ? total / static_cast<double>(defined) : std::nan("");
}

}  // namespace detail

// For each threshold, jointly trains each method on every task with fewer
// datapoints than the threshold and reports mean test AUROC. Returns one
// curve per method, in config order.
inline std::vector<std::vector<ThresholdPoint>> cmd_threshold_benchmark(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  detail::need_dataset(c, errors);
  if (c.thresholds.empty()) errors.push_back("threshold_benchmark.thresholds: must not be empty");
  detail::fail_if(errors);
  detail::snapshot(c, "threshold_benchmark");

  std::vector<Task> tasks = load_tasks(c.dataset);
  MetaSplit all_test;
  all_test.seed = c.split_seed;
  for (const auto& t : tasks) all_test.test.push_back(t.id);
  build_manifest(tasks, all_test, 0, 0);

  std::vector<std::vector<ThresholdPoint>> curves;
  for (const auto& method : c.threshold_methods) {
    std::vector<ThresholdPoint> curve;
    for (std::size_t threshold : c.thresholds) {
      std::vector<const Task*> chosen;
      for (const auto& t : tasks)
        if (t.size() < threshold) chosen.push_back(&t);
      if (chosen.empty()) {
        log::warn("threshold ", threshold, ": no tasks with fewer datapoints; skipped");
        continue;
      }
      std::vector<double> per_seed;
      for (std::uint64_t seed : c.seeds) {
        if (method == "ecfp") {
          ModelConfig mc = c.fingerprint_model;
          mc.outputs = chosen.size();
          FingerprintModel model(mc);
          per_seed.push_back(detail::joint_test_auroc(model, prepare_tasks(model, chosen), seed, c.fit));
        } else {
          ModelConfig mc = c.model;
          mc.outputs = chosen.size();
          DmpnnModel model(mc);
          per_seed.push_back(detail::joint_test_auroc(model, prepare_tasks(model, chosen), seed, c.fit));
        }
      }
      ThresholdPoint p;
      p.threshold = threshold;
      p.tasks = chosen.size();
      for (double v : per_seed) p.mean_auroc += v;
      p.mean_auroc /= static_cast<double>(per_seed.size());
      if (per_seed.size() > 1) {
        double ss = 0.0;
        for (double v : per_seed) ss += (v - p.mean_auroc) * (v - p.mean_auroc);
        p.std_auroc = std::sqrt(ss / static_cast<double>(per_seed.size() - 1));
      }
      curve.push_back(p);
    }
    write_threshold_curve_csv((fs::path(c.output_dir) / ("threshold_curve_" + method + ".csv")).string(), method,
                              curve);
    curves.push_back(std::move(curve));
  }
  detail::append_run_log(c, "threshold-benchmark ok");
  return curves;
}

// ---------------------------------------------------------------------------
// cca

inline std::vector<CcaReport> cmd_cca(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  std::string ckpt = c.cca_checkpoint;
  if (ckpt.empty() && !c.method.empty() && !c.seeds.empty()) ckpt = checkpoint_path(c, c.method, c.seeds.front());
  if (ckpt.empty()) {
    errors.push_back("cca.checkpoint: not set");
  } else if (!fs::exists(ckpt)) {
    errors.push_back("cca.checkpoint: " + ckpt + " does not exist");
  }
  detail::need_dataset(c, errors);
  detail::need_manifest(c, errors);
  detail::fail_if(errors);
  detail::snapshot(c, "cca");

  const Experiment e = load_experiment(c);
  const Checkpoint ck = load_checkpoint(ckpt);
  DmpnnModel model(checkpoint_model(ck));
  if (!ck.params.same_structure(model.init(0))) throw ConfigError("checkpoint " + ckpt + " does not match its model");
  const auto tasks = prepare_tasks(model, e.select(e.meta.test));
  std::vector<CcaReport> reports;
  for (const auto& s : c.cca_subsets) {
    const TaskSubset subset = s == "ood" ? TaskSubset::kOutOfDistribution : TaskSubset::kAll;
    reports.push_back(cca_experiment(model, ck.params, tasks, subset, c.seeds, c.meta));
  }
  write_cca_csv((fs::path(c.output_dir) / "cca.csv").string(), reports);
  write_cca_rows_csv((fs::path(c.output_dir) / "cca_rows.csv").string(), reports);
  detail::append_run_log(c, "cca ok");
  return reports;
}

}  // namespace molmeta
