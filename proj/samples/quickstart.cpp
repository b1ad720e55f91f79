// Parses a few molecules, fingerprints them, then meta-trains a small D-MPNN
// on toy "contains a halogen / nitrile / hydroxyl" tasks and adapts it to a
// held-out task.

#include <cstdio>
#include <string>
#include <vector>

#include "molmeta/molmeta.hpp"

using namespace molmeta;

namespace {

const std::vector<std::string> kCores{"c1ccccc1", "C1CCCCC1", "c1ccncc1", "C1CCOC1", "c1ccsc1", "CCCC"};
const std::vector<std::string> kGroups{"Cl", "F", "Br", "O", "N", "C#N", "C(=O)O", "OC"};

// Each task labels molecules by the presence of one substituent.
Task toy_task(const std::string& id, TaskType type, std::size_t group, std::size_t n, Rng& rng) {
  Task t;
  t.id = id;
  t.type = type;
  for (std::size_t i = 0; i < n; ++i) {
    std::string core = kCores[rng.uniform_int(kCores.size())];
    const std::size_t a = rng.uniform_int(kGroups.size());
    const std::size_t b = rng.uniform_int(kGroups.size());
    std::string smi = core.substr(0, 2) + "(" + kGroups[a] + ")" + core.substr(2);
    if (rng.uniform_int(2)) smi += kGroups[b];
    const bool positive = a == group || smi.ends_with(kGroups[group]);
    t.smiles.push_back(smi);
    t.graphs.push_back(parse_smiles(smi));
    t.labels.push_back(positive ? 1.0 : 0.0);
  }
  return t;
}

}  // namespace

int main() {
  const MolGraph aspirin = parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
  const Fingerprint fp = morgan_fingerprint(aspirin);
  std::printf("aspirin: %zu atoms, %zu bonds, %zu of %zu ECFP4 bits set, scaffold %s\n", aspirin.num_atoms(),
              aspirin.num_bonds(), fp.count(), fp.size(), scaffold_key(aspirin).c_str());

  Rng rng(7);
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < 16; ++i) {
    const TaskType type = i % 2 == 0 ? TaskType::B : TaskType::F;
    tasks.push_back(toy_task("toy" + std::to_string(i), type, i % kGroups.size(), 80, rng));
  }
  const MetaSplit split = make_meta_split(tasks, 1, MetaSplitQuota{1, 1});
  build_manifest(tasks, split, 0, 1000);
  std::printf("meta-split: %zu train, %zu val, %zu test tasks\n", split.train.size(), split.val.size(),
              split.test.size());

  ModelConfig mc;
  mc.hidden_size = 16;
  mc.ffn_hidden = 16;
  mc.dropout = 0.0;
  DmpnnModel model(mc);
  auto prepare = [&](const std::vector<std::string>& ids) {
    std::vector<MetaTask<FeaturizedMol>> out;
    for (const auto& id : ids) out.push_back(prepare_task(model, find_task(tasks, id)));
    return out;
  };
  const auto train = prepare(split.train), val = prepare(split.val), test = prepare(split.test);

  MetaHyperParams hp;
  hp.inner_lr = 0.01;
  hp.outer_lr = 3e-3;
  hp.meta_batch_size = 4;
  hp.inner_batch_size = 16;
  MetaTrainOptions opts;
  opts.meta_steps = 300;
  opts.eval_every = 50;
  const TrainResult tr = meta_train(model, train, val, hp, Variant::kMaml, 1, opts);
  std::printf("meta-train: best validation AUPRC %.3f at step %zu\n", tr.best_score, tr.best_step);

  FitOptions fit;
  fit.max_epochs = 20;
  for (const auto& t : test) {
    const EvalRecord r = meta_test(model, tr.best, t, hp, 1, "maml", fit);
    if (r.auprc)
      std::printf("%s: test AUPRC %.3f (fraction positive %.3f)\n", t.id.c_str(), *r.auprc, r.frac_pos);
    else
      std::printf("%s: test AUPRC undefined\n", t.id.c_str());
  }
}
