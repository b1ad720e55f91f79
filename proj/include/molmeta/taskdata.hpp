#pragma once

// Task datasets: CSV ingestion, size filtering, the meta-task split
// (train / validation / test task sets), scaffold-grouped splits within a
// task, and episode sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "molmeta/errors.hpp"
#include "molmeta/log.hpp"
#include "molmeta/random.hpp"
#include "molmeta/scaffold.hpp"
#include "molmeta/smiles.hpp"

namespace molmeta {

// ADME, Toxicity, Unassigned, Binding, Functional.
enum class TaskType { A, T, U, B, F };

inline char to_char(TaskType t) {
  switch (t) {
    case TaskType::A: return 'A';
    case TaskType::T: return 'T';
    case TaskType::U: return 'U';
    case TaskType::B: return 'B';
    case TaskType::F: return 'F';
  }
  return '?';
}

inline std::optional<TaskType> parse_task_type(std::string_view s) {
  if (s.size() != 1) return std::nullopt;
  switch (s[0]) {
    case 'A': return TaskType::A;
    case 'T': return TaskType::T;
    case 'U': return TaskType::U;
    case 'B': return TaskType::B;
    case 'F': return TaskType::F;
    default: return std::nullopt;
  }
}

// A, T and U tasks never appear in meta-training.
inline bool is_out_of_distribution(TaskType t) {
  return t == TaskType::A || t == TaskType::T || t == TaskType::U;
}

enum class Role { kTrain, kVal, kTest };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::kTrain: return "train";
    case Role::kVal: return "val";
    case Role::kTest: return "test";
  }
  return "?";
}

struct Task {
  std::string id;
  TaskType type = TaskType::U;
  std::vector<std::string> smiles;
  std::vector<double> labels;
  std::vector<MolGraph> graphs;
  std::map<Role, std::vector<std::size_t>> splits;

  std::size_t size() const { return labels.size(); }
  bool has_role(Role r) const { return splits.count(r) != 0; }
  const std::vector<std::size_t>& role(Role r) const {
    auto it = splits.find(r);
    if (it == splits.end()) {
      throw ContractError("task " + id + " has no " + role_name(r) + " split");
    }
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Loading

enum class TaskFileFormat {
  kAuto,
  kLong,     // task_id,smiles,label,task_type in one file
  kPerTask,  // smiles,label[,task_type]; task id from the file stem
};

struct LoadReport {
  std::size_t rows = 0;
  std::size_t dropped_smiles = 0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  for (auto& f : out) {
    while (!f.empty() && (f.back() == ' ' || f.back() == '\r')) f.pop_back();
    while (!f.empty() && f.front() == ' ') f.erase(f.begin());
  }
  return out;
}

inline double parse_label(const std::string& s, const std::string& where) {
  if (s == "0" || s == "0.0" || s == "0.00" || s == "false") return 0.0;
  if (s == "1" || s == "1.0" || s == "1.00" || s == "true") return 1.0;
  throw LoadError(where + ": label '" + s + "' is not binary");
}

struct CsvTable {
  std::map<std::string, std::size_t> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (header) {
      if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
      for (std::size_t i = 0; i < fields.size(); ++i) t.columns[fields[i]] = i;
      header = false;
      continue;
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (header) throw LoadError(path + ": empty file");
  return t;
}

inline std::size_t need_column(const CsvTable& t, const std::string& name, const std::string& path) {
  auto it = t.columns.find(name);
  if (it == t.columns.end()) throw LoadError(path + ": missing column '" + name + "'");
  return it->second;
}

inline const std::string& cell(const CsvTable& t, std::size_t row, std::size_t col,
                               const std::string& path) {
  if (col >= t.rows[row].size()) {
    throw LoadError(path + ":" + std::to_string(t.line_numbers[row]) + ": too few fields");
  }
  return t.rows[row][col];
}

inline bool add_record(Task& task, const std::string& smiles, double label, LoadReport& report) {
  ++report.rows;
  try {
    task.graphs.push_back(parse_smiles(smiles));
  } catch (const ParseError& e) {
    ++report.dropped_smiles;
    log::debug("dropping '", smiles, "': ", e.what());
    return false;
  }
  task.smiles.push_back(smiles);
  task.labels.push_back(label);
  return true;
}

inline std::vector<Task> load_long(const std::string& path, LoadReport& report) {
  const CsvTable t = read_csv(path);
  const std::size_t c_id = need_column(t, "task_id", path);
  const std::size_t c_smi = need_column(t, "smiles", path);
  const std::size_t c_lab = need_column(t, "label", path);
  const std::size_t c_type = need_column(t, "task_type", path);
  std::vector<Task> tasks;
  std::map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    const std::string& id = cell(t, r, c_id, path);
    const auto type = parse_task_type(cell(t, r, c_type, path));
    if (!type) throw LoadError(where + ": task_type must be one of A T U B F");
    const double label = parse_label(cell(t, r, c_lab, path), where);
    auto [it, inserted] = index.emplace(id, tasks.size());
    if (inserted) {
      tasks.emplace_back();
      tasks.back().id = id;
      tasks.back().type = *type;
    } else if (tasks[it->second].type != *type) {
      throw LoadError(where + ": task " + id + " changes task_type");
    }
    add_record(tasks[it->second], cell(t, r, c_smi, path), label, report);
  }
  return tasks;
}

inline Task load_per_task(const std::string& path, LoadReport& report) {
  const CsvTable t = read_csv(path);
  const std::size_t c_smi = need_column(t, "smiles", path);
  const std::size_t c_lab = need_column(t, "label", path);
  const auto c_type = t.columns.find("task_type");
  Task task;
  task.id = std::filesystem::path(path).stem().string();
  task.type = TaskType::U;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
    if (c_type != t.columns.end()) {
      const auto type = parse_task_type(cell(t, r, c_type->second, path));
      if (!type) throw LoadError(where + ": task_type must be one of A T U B F");
      task.type = *type;
    }
    add_record(task, cell(t, r, c_smi, path), parse_label(cell(t, r, c_lab, path), where), report);
  }
  return task;
}

}  // namespace detail

// `path` is a long-format CSV, a per-task CSV, or a directory of per-task
// CSVs (loaded in file-name order). Rows whose SMILES fail to parse are
// dropped and counted.
inline std::vector<Task> load_tasks(const std::string& path,
                                    TaskFileFormat format = TaskFileFormat::kAuto,
                                    LoadReport* report_out = nullptr) {
  LoadReport report;
  std::vector<Task> tasks;
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) tasks.push_back(detail::load_per_task(f, report));
  } else {
    if (format == TaskFileFormat::kAuto) {
      const auto t = detail::read_csv(path);
      format = t.columns.count("task_id") ? TaskFileFormat::kLong : TaskFileFormat::kPerTask;
    }
    if (format == TaskFileFormat::kLong) {
      tasks = detail::load_long(path, report);
    } else {
      tasks.push_back(detail::load_per_task(path, report));
    }
  }
  if (report.dropped_smiles > 0) {
    log::warn("dropped ", report.dropped_smiles, " of ", report.rows, " rows with unparseable SMILES");
  }
  if (report_out) *report_out = report;
  return tasks;
}

// Keeps tasks with min_size <= |records| <= max_size.
inline std::vector<Task> filter_by_size(std::vector<Task> tasks, std::size_t min_size = 128,
                                        std::size_t max_size = 1024) {
  std::erase_if(tasks, [&](const Task& t) { return t.size() < min_size || t.size() > max_size; });
  return tasks;
}

// ---------------------------------------------------------------------------
// Meta-task split

struct MetaSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

struct MetaSplitQuota {
  std::size_t test_per_type = 10;  // of each of B and F
  std::size_t val_per_type = 10;
};

// All A/T/U tasks go to test. Within each of B and F, a seeded shuffle gives
// `test_per_type` tasks to test, the next `val_per_type` to validation and
// the remainder to training.
inline MetaSplit make_meta_split(const std::vector<Task>& tasks, std::uint64_t seed,
                                 MetaSplitQuota quota = {}) {
  MetaSplit split;
  split.seed = seed;
  std::vector<std::string> b_ids, f_ids;
  std::set<std::string> seen;
  for (const Task& t : tasks) {
    if (!seen.insert(t.id).second) throw SplitError("duplicate task id " + t.id);
    if (is_out_of_distribution(t.type)) {
      split.test.push_back(t.id);
    } else if (t.type == TaskType::B) {
      b_ids.push_back(t.id);
    } else {
      f_ids.push_back(t.id);
    }
  }
  if (b_ids.size() + f_ids.size() < quota.test_per_type + quota.val_per_type) {
    throw SplitError("need at least " + std::to_string(quota.test_per_type + quota.val_per_type) +
                     " B/F tasks, have " + std::to_string(b_ids.size() + f_ids.size()));
  }
  Rng rng(seed);
  for (auto* ids : {&b_ids, &f_ids}) {
    std::sort(ids->begin(), ids->end());
    rng.shuffle(std::span<std::string>(*ids));
    std::size_t i = 0;
    for (; i < ids->size() && i < quota.test_per_type; ++i) split.test.push_back((*ids)[i]);
    for (std::size_t v = 0; i < ids->size() && v < quota.val_per_type; ++i, ++v) split.val.push_back((*ids)[i]);
    for (; i < ids->size(); ++i) split.train.push_back((*ids)[i]);
  }
  for (auto* v : {&split.train, &split.val, &split.test}) std::sort(v->begin(), v->end());
  return split;
}

// ---------------------------------------------------------------------------
// Within-task scaffold split

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

inline constexpr SplitRatios kMetaTrainRatios{0.8, 0.2, 0.0};
inline constexpr SplitRatios kMetaTestRatios{0.8, 0.1, 0.1};

struct ScaffoldSplit {
  std::map<Role, std::vector<std::size_t>> roles;
  std::vector<std::string> warnings;
};

// Groups molecules by scaffold key and assigns whole groups. Groups are taken
// largest first (seeded shuffle among equal sizes). Each group goes to the
// split that is least full relative to its target among those it still fits
// in; if it fits nowhere it goes to the least-full split, or to train when it
// alone exceeds the train target.
inline ScaffoldSplit scaffold_split(const Task& task, SplitRatios ratios, std::uint64_t seed) {
  const double total = ratios.train + ratios.val + ratios.test;
  if (std::abs(total - 1.0) > 1e-9 || ratios.train < 0 || ratios.val < 0 || ratios.test < 0) {
    throw ContractError("split ratios must be non-negative and sum to 1");
  }
  std::map<std::string, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < task.graphs.size(); ++i) {
    auto [it, inserted] = group_of.emplace(scaffold_key(task.graphs[i]), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::vector<std::size_t>>(groups));
  std::stable_sort(groups.begin(), groups.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });

  const double n = static_cast<double>(task.graphs.size());
  const Role roles[3] = {Role::kTrain, Role::kVal, Role::kTest};
  const double targets[3] = {ratios.train * n, ratios.val * n, ratios.test * n};
  double counts[3] = {0, 0, 0};
  ScaffoldSplit out;
  for (Role r : roles) out.roles[r];

  for (const auto& group : groups) {
    const double size = static_cast<double>(group.size());
    int chosen = -1;
    if (size > targets[0] + 1e-9) {
      chosen = 0;
      out.warnings.push_back("scaffold group of " + std::to_string(group.size()) +
                             " molecules exceeds the train target; assigned to train");
    } else {
      auto pick = [&](bool must_fit) {
        int best = -1;
        double best_fill = 0.0;
        for (int s = 0; s < 3; ++s) {
          if (targets[s] <= 0.0) continue;
          if (must_fit && counts[s] + size > targets[s] + 1e-9) continue;
          const double fill = counts[s] / targets[s];
          if (best < 0 || fill < best_fill) {
            best = s;
            best_fill = fill;
          }
        }
        return best;
      };
      chosen = pick(true);
      if (chosen < 0) chosen = pick(false);
    }
    counts[chosen] += size;
    auto& dst = out.roles[roles[chosen]];
    dst.insert(dst.end(), group.begin(), group.end());
  }
  for (auto& [role, idx] : out.roles) std::sort(idx.begin(), idx.end());
  for (const auto& w : out.warnings) log::warn("task ", task.id, ": ", w);
  return out;
}

// ---------------------------------------------------------------------------
// Episodes

struct EpisodeIndices {
  std::string task_id;
  std::vector<std::size_t> support;  // from the train role
  std::vector<std::size_t> query;    // from the validation role
};

namespace detail {

inline std::vector<std::size_t> draw_without_replacement(const std::vector<std::size_t>& pool,
                                                         std::size_t k, Rng& rng) {
  std::vector<std::size_t> v = pool;
  if (k >= v.size()) {
    rng.shuffle(std::span<std::size_t>(v));
    return v;
  }
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_int(v.size() - i);
    std::swap(v[i], v[j]);
  }
  v.resize(k);
  return v;
}

}  // namespace detail

// Support and query are each up to `batch_size` records drawn without
// replacement from the task's train and validation roles.
inline EpisodeIndices sample_episode(const Task& task, std::size_t batch_size, Rng& rng) {
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
// Split manifests

struct SplitManifest {
  MetaSplit meta;
  std::size_t min_size = 128;
  std::size_t max_size = 1024;
  // task id -> role -> record indices
  std::map<std::string, std::map<Role, std::vector<std::size_t>>> roles;
  std::map<std::string, std::vector<std::string>> warnings;
};

// Scaffold-splits every task: 80/20 for meta-train and meta-validation tasks,
// 80/10/10 for meta-test tasks. Each task's seed is derived from the global
// seed and the task id.
inline SplitManifest build_manifest(std::vector<Task>& tasks, const MetaSplit& meta,
                                    std::size_t min_size, std::size_t max_size) {
  SplitManifest m;
  m.meta = meta;
  m.min_size = min_size;
  m.max_size = max_size;
  const std::set<std::string> test(meta.test.begin(), meta.test.end());
  for (Task& t : tasks) {
    const std::uint64_t task_seed = Fnv1a64().u64(meta.seed).str(t.id).digest();
    const SplitRatios ratios = test.count(t.id) ? kMetaTestRatios : kMetaTrainRatios;
    ScaffoldSplit s = scaffold_split(t, ratios, task_seed);
    t.splits = s.roles;
    m.roles[t.id] = std::move(s.roles);
    if (!s.warnings.empty()) m.warnings[t.id] = std::move(s.warnings);
  }
  return m;
}

inline nlohmann::json manifest_to_json(const SplitManifest& m, const std::vector<Task>& tasks) {
  using nlohmann::json;
  json j;
  j["format"] = "molmeta-split-manifest";
  j["version"] = 1;
  j["seed"] = m.meta.seed;
  j["filter"] = {{"min_size", m.min_size}, {"max_size", m.max_size}};
  j["meta_split"] = {{"train", m.meta.train}, {"val", m.meta.val}, {"test", m.meta.test}};
  std::map<std::string, std::map<std::string, int>> census;
  std::vector<std::string> ood;
  json tj = json::object();
  std::map<std::string, std::string> meta_role;
  for (const auto& id : m.meta.train) meta_role[id] = "train";
  for (const auto& id : m.meta.val) meta_role[id] = "val";
  for (const auto& id : m.meta.test) meta_role[id] = "test";
  for (const Task& t : tasks) {
    auto it = m.roles.find(t.id);
    if (it == m.roles.end()) continue;
    json entry;
    entry["type"] = std::string(1, to_char(t.type));
    entry["size"] = t.size();
    entry["meta_role"] = meta_role[t.id];
    json roles = json::object();
    for (const auto& [role, idx] : it->second) roles[role_name(role)] = idx;
    entry["roles"] = roles;
    if (auto w = m.warnings.find(t.id); w != m.warnings.end()) entry["warnings"] = w->second;
    tj[t.id] = entry;
    census[meta_role[t.id]][std::string(1, to_char(t.type))] += 1;
    if (meta_role[t.id] == "test" && is_out_of_distribution(t.type)) ood.push_back(t.id);
  }
  j["tasks"] = tj;
  j["census"] = census;
  std::sort(ood.begin(), ood.end());
  j["out_of_distribution_test_tasks"] = ood;
  if (ood.empty()) j["notes"] = json::array({"no A/T/U tasks: the out-of-distribution subset is empty"});
  return j;
}

// Restores meta split and per-task roles onto `tasks` (matched by id).
inline MetaSplit apply_manifest(const nlohmann::json& j, std::vector<Task>& tasks) {
  if (j.value("format", "") != "molmeta-split-manifest") throw LoadError("not a split manifest");
  MetaSplit meta;
  meta.seed = j.at("seed").get<std::uint64_t>();
  meta.train = j.at("meta_split").at("train").get<std::vector<std::string>>();
  meta.val = j.at("meta_split").at("val").get<std::vector<std::string>>();
  meta.test = j.at("meta_split").at("test").get<std::vector<std::string>>();
  const auto& tj = j.at("tasks");
  for (Task& t : tasks) {
    if (!tj.contains(t.id)) continue;
    const auto& entry = tj.at(t.id);
    if (entry.at("size").get<std::size_t>() != t.size()) {
      throw LoadError("manifest size for task " + t.id + " does not match the dataset");
    }
    t.splits.clear();
    for (Role r : {Role::kTrain, Role::kVal, Role::kTest}) {
      if (entry.at("roles").contains(role_name(r))) {
        t.splits[r] = entry.at("roles").at(role_name(r)).get<std::vector<std::size_t>>();
      }
    }
  }
  return meta;
}

inline const Task& find_task(const std::vector<Task>& tasks, const std::string& id) {
  for (const Task& t : tasks)
    if (t.id == id) return t;
  throw ContractError("unknown task " + id);
}

}  // namespace molmeta
