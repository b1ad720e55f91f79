// molmeta command-line interface.
//
//   molmeta split               --config c.json [--seed N] [--out DIR]
//   molmeta train               --config c.json [--method NAME] [--seed N] [--out DIR]
//   molmeta evaluate            --config c.json [--method NAME] [--seed N] [--out DIR]
//   molmeta threshold-benchmark --config c.json [--seed N] [--out DIR]
//   molmeta cca                 --config c.json [--checkpoint PATH] [--seed N] [--out DIR]
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime error.
// MOLMETA_LOG=debug|info|warn|error|off sets log verbosity (default warn).

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "molmeta/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string dataset;
  std::string method;
  std::string out;
  std::string checkpoint;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Overrides& o, bool with_method) {
  cmd->add_option("--config", o.config, "Experiment configuration (JSON)");
  cmd->add_option("--dataset", o.dataset, "Dataset CSV file or directory (overrides config)");
  cmd->add_option("--seed", o.seed, "Seed (split seed for 'split', single run seed otherwise)");
  cmd->add_option("--out", o.out, "Output directory (overrides config)");
  if (with_method) cmd->add_option("--method", o.method, "ecfp, pretrain, maml, fomaml or anil");
}

molmeta::ExperimentConfig resolve(const Overrides& o, bool seed_is_split_seed) {
  nlohmann::json j = nlohmann::json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw molmeta::ConfigError("cannot read config " + o.config);
    try {
      j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
      throw molmeta::ConfigError("config " + o.config + ": " + e.what());
    }
  }
  if (!j.is_object()) throw molmeta::ConfigError("config: expected a JSON object");
  if (!o.dataset.empty()) j["dataset"] = o.dataset;
  if (!o.method.empty()) j["method"] = o.method;
  if (!o.out.empty()) j["output_dir"] = o.out;
  if (!o.checkpoint.empty()) j["cca"]["checkpoint"] = o.checkpoint;
  if (o.seed) {
    if (seed_is_split_seed) {
      j["split_seed"] = *o.seed;
    } else {
      j["seeds"] = nlohmann::json::array({*o.seed});
    }
  }
  return molmeta::parse_config(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learning for molecular property prediction"};
  app.require_subcommand(1);
  Overrides o;
  auto* split = app.add_subcommand("split", "Filter tasks and write the split manifest");
  auto* train = app.add_subcommand("train", "Train checkpoints for the configured method");
  auto* evaluate = app.add_subcommand("evaluate", "Meta-test methods; write records, ranks and p-values");
  auto* threshold = app.add_subcommand("threshold-benchmark", "Joint-training AUROC curves by dataset size");
  auto* cca = app.add_subcommand("cca", "CCA similarity before and after adaptation");
  add_common(split, o, false);
  add_common(train, o, true);
  add_common(evaluate, o, true);
  add_common(threshold, o, false);
  add_common(cca, o, true);
  cca->add_option("--checkpoint", o.checkpoint, "Checkpoint to analyse");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (split->parsed()) {
      const auto c = resolve(o, true);
      const auto m = molmeta::cmd_split(c);
      std::cout << "wrote " << c.manifest_path() << " (" << m.meta.train.size() << " train, " << m.meta.val.size()
                << " val, " << m.meta.test.size() << " test tasks)\n";
    } else if (train->parsed()) {
      const auto c = resolve(o, false);
      for (const auto& path : molmeta::cmd_train(c)) std::cout << "wrote " << path << '\n';
    } else if (evaluate->parsed()) {
      const auto c = resolve(o, false);
      const auto out = molmeta::cmd_evaluate(c);
      std::cout << out.records.size() << " records; reports in " << c.output_dir << '\n';
    } else if (threshold->parsed()) {
      const auto c = resolve(o, false);
      molmeta::cmd_threshold_benchmark(c);
      std::cout << "curves in " << c.output_dir << '\n';
    } else if (cca->parsed()) {
      const auto c = resolve(o, false);
      molmeta::cmd_cca(c);
      std::cout << "wrote " << c.output_dir << "/cca.csv\n";
    }
  } catch (const molmeta::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
