#pragma once

// Experiment configuration: a JSON document whose every field has a default,
// so a minimal file names only the dataset and the method.
//
//   {
//     "dataset": "data/tasks.csv",
//     "method": "maml",
//     "seeds": [1, 2, 3, 4, 5],
//     "output_dir": "runs/maml",
//     "split_manifest": "runs/split_manifest.json",
//     "split_seed": 0,
//     "filter": {"min_size": 128, "max_size": 1024},
//     "model": {"hidden_size": 300, "depth": 2, "dropout": 0.2, "ffn_hidden": 300},
//     "fingerprint_model": {"ffn_hidden": 400, "dropout": 0.2, "fingerprint_bits": 2048},
//     "meta": {"inner_lr": 0.05, "outer_lr": 0.001, "meta_test_lr": 0.0001,
//              "meta_batch_size": 32, "inner_batch_size": 32, "inner_steps": 1,
//              "adaptation": "all", "outer_optimizer": "adam"},
//     "meta_train": {"meta_steps": 200, "eval_every": 20, "val_episodes": 1},
//     "fit": {"lr": 0.0001, "batch_size": 32, "max_epochs": 100, "patience": 10},
//     "evaluate": {"methods": ["ecfp", "maml"], "records": ""},
//     "threshold_benchmark": {"thresholds": [128, 256, 512, 1024], "methods": ["ecfp", "dmpnn"]},
//     "cca": {"checkpoint": "", "subsets": ["all", "ood"]}
//   }

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "molmeta/errors.hpp"
#include "molmeta/metalearn.hpp"
#include "molmeta/models.hpp"

namespace molmeta {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"ecfp", "pretrain", "maml", "fomaml", "anil"};
  return m;
}

inline bool is_meta_method(const std::string& m) { return m == "maml" || m == "fomaml" || m == "anil"; }

inline Variant variant_of(const std::string& m) {
  if (m == "maml") return Variant::kMaml;
  if (m == "fomaml") return Variant::kFoMaml;
  if (m == "anil") return Variant::kAnil;
  throw ConfigError("not a meta-learning method: " + m);
}

struct ExperimentConfig {
  std::string dataset;
  std::string method;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string output_dir = "molmeta_out";
  std::string split_manifest;  // empty: <output_dir>/split_manifest.json
  std::uint64_t split_seed = 0;
  std::size_t min_size = 128;
  std::size_t max_size = 1024;
  ModelConfig model;
  ModelConfig fingerprint_model = ModelConfig::fingerprint_defaults();
  MetaHyperParams meta;
  MetaTrainOptions meta_train;
  FitOptions fit;
  std::vector<std::string> evaluate_methods;  // empty: {method}
  std::string evaluate_records;               // evaluate from a records CSV instead
  std::vector<std::size_t> thresholds{128, 256, 512, 1024};
  std::vector<std::string> threshold_methods{"ecfp", "dmpnn"};
  std::string cca_checkpoint;
  std::vector<std::string> cca_subsets{"all", "ood"};

  std::string manifest_path() const {
    if (!split_manifest.empty()) return split_manifest;
    return (std::filesystem::path(output_dir) / "split_manifest.json").string();
  }
  std::vector<std::string> methods_to_evaluate() const {
    return evaluate_methods.empty() ? std::vector<std::string>{method} : evaluate_methods;
  }
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(std::vector<std::string>& errors) : errors_(errors) {}

  void allow_only(const nlohmann::json& obj, const std::string& where, std::set<std::string> keys) {
    if (!obj.is_object()) {
      errors_.push_back(where + ": expected an object");
      return;
    }
    for (const auto& [k, v] : obj.items()) {
      if (!keys.count(k)) errors_.push_back(where + ": unknown key '" + k + "'");
    }
  }

  template <class T>
  void get(const nlohmann::json& obj, const std::string& key, T& out, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      errors_.push_back(where + "." + key + ": wrong type");
    }
  }

 private:
  std::vector<std::string>& errors_;
};

inline void read_model(ConfigReader& r, const nlohmann::json& j, ModelConfig& m, const std::string& where) {
  r.allow_only(j, where, {"hidden_size", "depth", "dropout", "ffn_hidden", "fingerprint_bits", "fingerprint_radius"});
  r.get(j, "hidden_size", m.hidden_size, where);
  r.get(j, "depth", m.depth, where);
  r.get(j, "dropout", m.dropout, where);
  r.get(j, "ffn_hidden", m.ffn_hidden, where);
  r.get(j, "fingerprint_bits", m.fingerprint_bits, where);
  r.get(j, "fingerprint_radius", m.fingerprint_radius, where);
}

inline void check_model(const ModelConfig& m, const std::string& where, std::vector<std::string>& errors) {
  if (m.depth < 1) errors.push_back(where + ".depth: must be >= 1");
  if (!(m.dropout >= 0.0 && m.dropout < 1.0)) errors.push_back(where + ".dropout: must lie in [0, 1)");
  if (m.hidden_size == 0) errors.push_back(where + ".hidden_size: must be positive");
  if (m.ffn_hidden == 0) errors.push_back(where + ".ffn_hidden: must be positive");
  if (m.fingerprint_bits == 0 || (m.fingerprint_bits & (m.fingerprint_bits - 1)) != 0) {
    errors.push_back(where + ".fingerprint_bits: must be a power of two");
  }
  if (m.fingerprint_radius < 0) errors.push_back(where + ".fingerprint_radius: must be >= 0");
}

}  // namespace detail

// Parses and validates; every problem found is reported in one ConfigError.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  std::vector<std::string> errors;
  detail::ConfigReader r(errors);
  ExperimentConfig c;
  r.allow_only(j, "config",
               {"dataset", "method", "seeds", "output_dir", "split_manifest", "split_seed", "filter", "model",
                "fingerprint_model", "meta", "meta_train", "fit", "evaluate", "threshold_benchmark", "cca"});
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  r.get(j, "dataset", c.dataset, "config");
  r.get(j, "method", c.method, "config");
  r.get(j, "seeds", c.seeds, "config");
  r.get(j, "output_dir", c.output_dir, "config");
  r.get(j, "split_manifest", c.split_manifest, "config");
  r.get(j, "split_seed", c.split_seed, "config");
  if (j.contains("filter")) {
    r.allow_only(j["filter"], "filter", {"min_size", "max_size"});
    r.get(j["filter"], "min_size", c.min_size, "filter");
    r.get(j["filter"], "max_size", c.max_size, "filter");
  }
  if (j.contains("model")) detail::read_model(r, j["model"], c.model, "model");
  if (j.contains("fingerprint_model")) detail::read_model(r, j["fingerprint_model"], c.fingerprint_model, "fingerprint_model");
  if (j.contains("meta")) {
    const auto& m = j["meta"];
    r.allow_only(m, "meta",
                 {"inner_lr", "outer_lr", "meta_test_lr", "meta_batch_size", "inner_batch_size", "inner_steps",
                  "adaptation", "outer_optimizer"});
    r.get(m, "inner_lr", c.meta.inner_lr, "meta");
    r.get(m, "outer_lr", c.meta.outer_lr, "meta");
    r.get(m, "meta_test_lr", c.meta.meta_test_lr, "meta");
    r.get(m, "meta_batch_size", c.meta.meta_batch_size, "meta");
    r.get(m, "inner_batch_size", c.meta.inner_batch_size, "meta");
    r.get(m, "inner_steps", c.meta.inner_steps, "meta");
    std::string adaptation = "all", optimizer = "adam";
    r.get(m, "adaptation", adaptation, "meta");
    r.get(m, "outer_optimizer", optimizer, "meta");
    if (adaptation == "all") {
      c.meta.mask = AdaptationMask::kAllLayers;
    } else if (adaptation == "head") {
      c.meta.mask = AdaptationMask::kHeadOnly;
    } else {
      errors.push_back("meta.adaptation: must be 'all' or 'head'");
    }
    if (optimizer == "adam") {
      c.meta.outer_optimizer = OptimizerKind::kAdam;
    } else if (optimizer == "sgd") {
      c.meta.outer_optimizer = OptimizerKind::kSgd;
    } else {
      errors.push_back("meta.outer_optimizer: must be 'adam' or 'sgd'");
    }
  }
  if (j.contains("meta_train")) {
    r.allow_only(j["meta_train"], "meta_train", {"meta_steps", "eval_every", "val_episodes"});
    r.get(j["meta_train"], "meta_steps", c.meta_train.meta_steps, "meta_train");
    r.get(j["meta_train"], "eval_every", c.meta_train.eval_every, "meta_train");
    r.get(j["meta_train"], "val_episodes", c.meta_train.val_episodes, "meta_train");
  }
  if (j.contains("fit")) {
    r.allow_only(j["fit"], "fit", {"lr", "batch_size", "max_epochs", "patience"});
    r.get(j["fit"], "lr", c.fit.lr, "fit");
    r.get(j["fit"], "batch_size", c.fit.batch_size, "fit");
    r.get(j["fit"], "max_epochs", c.fit.max_epochs, "fit");
    r.get(j["fit"], "patience", c.fit.patience, "fit");
  }
  if (j.contains("evaluate")) {
    r.allow_only(j["evaluate"], "evaluate", {"methods", "records"});
    r.get(j["evaluate"], "methods", c.evaluate_methods, "evaluate");
    r.get(j["evaluate"], "records", c.evaluate_records, "evaluate");
  }
  if (j.contains("threshold_benchmark")) {
    r.allow_only(j["threshold_benchmark"], "threshold_benchmark", {"thresholds", "methods"});
    r.get(j["threshold_benchmark"], "thresholds", c.thresholds, "threshold_benchmark");
    r.get(j["threshold_benchmark"], "methods", c.threshold_methods, "threshold_benchmark");
  }
  if (j.contains("cca")) {
    r.allow_only(j["cca"], "cca", {"checkpoint", "subsets"});
    r.get(j["cca"], "checkpoint", c.cca_checkpoint, "cca");
    r.get(j["cca"], "subsets", c.cca_subsets, "cca");
  }

  auto method_ok = [](const std::string& m) {
    for (const auto& k : known_methods())
      if (k == m) return true;
    return false;
  };
  if (!c.method.empty() && !method_ok(c.method)) {
    errors.push_back("method: '" + c.method + "' is not one of ecfp, pretrain, maml, fomaml, anil");
  }
  for (const auto& m : c.evaluate_methods)
    if (!method_ok(m)) errors.push_back("evaluate.methods: unknown method '" + m + "'");
  if (c.seeds.empty()) errors.push_back("seeds: must not be empty");
  if (c.output_dir.empty()) errors.push_back("output_dir: must not be empty");
  if (c.min_size > c.max_size) errors.push_back("filter: min_size exceeds max_size");
  detail::check_model(c.model, "model", errors);
  detail::check_model(c.fingerprint_model, "fingerprint_model", errors);
  if (!(c.meta.inner_lr > 0.0)) errors.push_back("meta.inner_lr: must be positive");
  if (!(c.meta.outer_lr > 0.0)) errors.push_back("meta.outer_lr: must be positive");
  if (!(c.meta.meta_test_lr > 0.0)) errors.push_back("meta.meta_test_lr: must be positive");
  if (c.meta.meta_batch_size < 1) errors.push_back("meta.meta_batch_size: must be >= 1");
  if (c.meta.inner_batch_size < 1) errors.push_back("meta.inner_batch_size: must be >= 1");
  if (!(c.fit.lr > 0.0)) errors.push_back("fit.lr: must be positive");
  if (c.fit.batch_size < 1) errors.push_back("fit.batch_size: must be >= 1");
  for (std::size_t i = 1; i < c.thresholds.size(); ++i) {
    if (c.thresholds[i] <= c.thresholds[i - 1]) {
      errors.push_back("threshold_benchmark.thresholds: must be strictly ascending");
      break;
    }
  }
  for (const auto& m : c.threshold_methods)
    if (m != "ecfp" && m != "dmpnn") errors.push_back("threshold_benchmark.methods: unknown method '" + m + "'");
  for (const auto& s : c.cca_subsets)
    if (s != "all" && s != "ood") errors.push_back("cca.subsets: unknown subset '" + s + "'");

  if (c.method == "anil") c.meta.mask = AdaptationMask::kHeadOnly;
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return parse_config(j);
}

// Fully resolved configuration, every default spelled out.
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  auto model_json = [](const ModelConfig& m) {
    return nlohmann::json{{"hidden_size", m.hidden_size},
                          {"depth", m.depth},
                          {"dropout", m.dropout},
                          {"ffn_hidden", m.ffn_hidden},
                          {"fingerprint_bits", m.fingerprint_bits},
                          {"fingerprint_radius", m.fingerprint_radius}};
  };
  nlohmann::json j;
  j["dataset"] = c.dataset;
  j["method"] = c.method;
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  j["split_manifest"] = c.manifest_path();
  j["split_seed"] = c.split_seed;
  j["filter"] = {{"min_size", c.min_size}, {"max_size", c.max_size}};
  j["model"] = model_json(c.model);
  j["fingerprint_model"] = model_json(c.fingerprint_model);
  j["meta"] = {{"inner_lr", c.meta.inner_lr},
               {"outer_lr", c.meta.outer_lr},
               {"meta_test_lr", c.meta.meta_test_lr},
               {"meta_batch_size", c.meta.meta_batch_size},
               {"inner_batch_size", c.meta.inner_batch_size},
               {"inner_steps", c.meta.inner_steps},
               {"adaptation", c.meta.mask == AdaptationMask::kHeadOnly ? "head" : "all"},
               {"outer_optimizer", c.meta.outer_optimizer == OptimizerKind::kAdam ? "adam" : "sgd"}};
  j["meta_train"] = {{"meta_steps", c.meta_train.meta_steps},
                     {"eval_every", c.meta_train.eval_every},
                     {"val_episodes", c.meta_train.val_episodes}};
  j["fit"] = {{"lr", c.fit.lr},
              {"batch_size", c.fit.batch_size},
              {"max_epochs", c.fit.max_epochs},
              {"patience", c.fit.patience}};
  j["evaluate"] = {{"methods", c.methods_to_evaluate()}, {"records", c.evaluate_records}};
  j["threshold_benchmark"] = {{"thresholds", c.thresholds}, {"methods", c.threshold_methods}};
  j["cca"] = {{"checkpoint", c.cca_checkpoint}, {"subsets", c.cca_subsets}};
  return j;
}

}  // namespace molmeta
