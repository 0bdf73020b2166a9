#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "reid/dataset.hpp"
#include "reid/errors.hpp"
#include "reid/evaluation.hpp"
#include "reid/inspect.hpp"
#include "reid/model.hpp"
#include "reid/training.hpp"

namespace reid::cli {

using nlohmann::json;

inline json load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " +
                     std::string(e.what()));
  }
  return j;
}

template <typename T>
T require(const json& j, const std::string& key) {
  if (!j.contains(key)) throw UsageError("missing required config key \"" + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key \"" + key + "\" has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key \"" + key + "\" has the wrong type");
  }
}

// Published recipe defaults; lr, lr_decay_per_epoch and hidden_dim are dataset
// dependent and deliberately carry no default.
inline json default_train_config_json() {
  const TrainConfig d;
  return json{{"margin", d.margin},
              {"batch_size", d.batch_size},
              {"rmsprop_decay", d.rmsprop_decay},
              {"clip", d.clip},
              {"max_epochs", d.max_epochs},
              {"patience", d.patience}};
}

inline TrainConfig parse_train_config(const json& root) {
  if (!root.contains("train")) throw UsageError("missing required config key \"train\"");
  const json& t = root.at("train");
  TrainConfig cfg;
  cfg.margin = get_or(t, "margin", cfg.margin);
  cfg.batch_size = get_or(t, "batch_size", cfg.batch_size);
  cfg.rmsprop_decay = get_or(t, "rmsprop_decay", cfg.rmsprop_decay);
  cfg.clip = get_or(t, "clip", cfg.clip);
  cfg.lr = require<double>(t, "lr");
  cfg.lr_decay_per_epoch = require<double>(t, "lr_decay_per_epoch");
  cfg.max_epochs = get_or(t, "max_epochs", cfg.max_epochs);
  cfg.patience = get_or(t, "patience", cfg.patience);
  cfg.hidden_dim = require<std::size_t>(t, "hidden_dim");
  cfg.seed = get_or<std::uint64_t>(root, "seed", 1);
  cfg.validate();
  return cfg;
}

inline json train_config_to_json(const TrainConfig& cfg) {
  return json{{"margin", cfg.margin},
              {"batch_size", cfg.batch_size},
              {"rmsprop_decay", cfg.rmsprop_decay},
              {"clip", cfg.clip},
              {"lr", cfg.lr},
              {"lr_decay_per_epoch", cfg.lr_decay_per_epoch},
              {"max_epochs", cfg.max_epochs},
              {"patience", cfg.patience},
              {"hidden_dim", cfg.hidden_dim},
              {"seed", cfg.seed}};
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

inline std::vector<std::string> feature_names(const json& cfg) {
  std::vector<std::string> names = require<std::vector<std::string>>(cfg, "feature_sets");
  if (names.empty()) throw UsageError("config key \"feature_sets\" must be nonempty");
  return names;
}

// One model file per feature set; a single set uses the path verbatim.
inline std::filesystem::path model_path_for(const std::filesystem::path& base,
                                            const std::string& name, bool single) {
  if (single) return base;
  std::filesystem::path p = base;
  p += "." + name;
  return p;
}

struct LoadedSet {
  FeatureSet set;
  SplitSpec split;
};

inline LoadedSet load_and_prepare(const json& cfg, const std::string& name) {
  const std::filesystem::path manifest = require<std::string>(cfg, "manifest");
  LoadedSet out;
  out.set = load_feature_set(manifest, name);
  const double train_ratio = get_or(cfg, "train_ratio", 0.5);
  const double val_fraction = get_or(cfg, "val_fraction", 0.1);
  const std::uint64_t seed = get_or<std::uint64_t>(cfg, "seed", 1);
  out.split = make_split(out.set, train_ratio, seed, val_fraction);
  if (get_or(cfg, "normalize", true)) {
    const FeatureStats stats = compute_stats(out.set, out.split.train_identities);
    apply_stats(out.set, stats);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

inline void cmd_synth(const json& cfg) {
  const json& s = cfg.contains("synthetic") ? cfg.at("synthetic") : json::object();
  SyntheticSpec spec;
  spec.identities = get_or(s, "identities", spec.identities);
  spec.cameras = get_or(s, "cameras", spec.cameras);
  spec.images_per_identity_per_camera =
      get_or(s, "images_per_identity_per_camera", spec.images_per_identity_per_camera);
  spec.row_count = get_or(s, "R", spec.row_count);
  spec.dim = get_or(s, "d", spec.dim);
  spec.noise = get_or(s, "noise", spec.noise);
  spec.seed = get_or<std::uint64_t>(cfg, "seed", spec.seed);

  const std::filesystem::path out_dir = require<std::string>(cfg, "out_dir");
  std::filesystem::create_directories(out_dir);
  const FeatureSet set = generate_synthetic(spec);
  save_feature_set(set, out_dir / "manifest.json", set.name + ".sfeat");
  std::cerr << "synth: wrote " << set.items.size() << " items (R=" << set.row_count
            << ", d=" << set.dim << ") to " << out_dir.string() << "\n";
}

template <typename Model>
void train_one(Model& model, const LoadedSet& data, const TrainConfig& tc,
               const std::filesystem::path& model_path,
               const std::filesystem::path& log_path) {
  const MiningResult mined = mine_pairs(data.set, data.split.train_identities, tc.seed);
  if (mined.skipped_identities > 0) {
    std::cerr << "train: " << mined.skipped_identities
              << " identities had no cross-camera positive pair\n";
  }
  const TrainResult result =
      train(model, mined.pairs, data.set, data.split.validation_identities, tc);

  std::ofstream log(log_path);
  if (!log) throw DataError("cannot write training log " + log_path.string());
  for (const EpochLog& e : result.log) log << epoch_log_to_json(e).dump() << "\n";

  std::ofstream out(model_path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + model_path.string());
  model.save(out);
  std::cerr << "train: best epoch " << result.best_epoch << " (metric "
            << result.best_metric << "), model at " << model_path.string() << "\n";
}

inline void cmd_train(const json& cfg) {
  const TrainConfig tc = parse_train_config(cfg);
  const std::vector<std::string> names = feature_names(cfg);
  const std::filesystem::path model_out = require<std::string>(cfg, "model_out");
  const std::string model_type = get_or<std::string>(cfg, "model_type", "lstm");

  // Resolved configuration, defaults filled in, next to the model.
  {
    json resolved = train_config_to_json(tc);
    resolved["model_type"] = model_type;
    std::filesystem::path p = model_out;
    p += ".config.json";
    std::ofstream out(p);
    if (out) out << resolved.dump(2) << "\n";
  }

  for (const std::string& name : names) {
    const LoadedSet data = load_and_prepare(cfg, name);
    const std::filesystem::path path = model_path_for(model_out, name, names.size() == 1);
    std::filesystem::path log_path = path;
    log_path += ".log.jsonl";
    SeededRng rng(tc.seed);
    if (model_type == "lstm") {
      if (tc.hidden_dim < 1) throw UsageError("hidden_dim must be >= 1");
      SiameseModel model(
          SiameseParams::init(data.set.dim, tc.hidden_dim, data.set.row_count, rng));
      train_one(model, data, tc, path, log_path);
    } else if (model_type == "baseline") {
      const std::size_t layers = get_or<std::size_t>(cfg, "baseline_layers", 1);
      if (layers < 1 || layers > 3) throw UsageError("baseline_layers must be 1..3");
      const std::size_t width = data.set.row_count * data.set.dim;
      std::vector<std::size_t> widths(layers + 1, width);
      BaselineModel model(BaselineParams::init(widths, rng));
      train_one(model, data, tc, path, log_path);
    } else {
      throw UsageError("unknown model_type \"" + model_type + "\"");
    }
  }
}

template <typename Model>
ScoreMatrix test_scores(const Model& model, const LoadedSet& data) {
  std::vector<const FeatureItem*> queries, gallery;
  for (std::size_t i : data.split.test_query_items) queries.push_back(&data.set.items[i]);
  for (std::size_t i : data.split.test_gallery_items) gallery.push_back(&data.set.items[i]);
  return score_matrix(model, queries, gallery);
}

inline ScoreMatrix eval_one(const json& cfg, const std::string& name, bool single) {
  const std::filesystem::path model_in = require<std::string>(cfg, "model_in");
  const std::filesystem::path path = model_path_for(model_in, name, single);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  const std::string model_type = get_or<std::string>(cfg, "model_type", "lstm");
  const LoadedSet data = load_and_prepare(cfg, name);
  if (model_type == "lstm") {
    const SiameseModel model = SiameseModel::load(in);
    return test_scores(model, data);
  }
  if (model_type == "baseline") {
    const BaselineModel model = BaselineModel::load(in);
    return test_scores(model, data);
  }
  throw UsageError("unknown model_type \"" + model_type + "\"");
}

inline EvalReport cmd_eval(const json& cfg) {
  const std::vector<std::string> names = feature_names(cfg);
  std::vector<ScoreMatrix> matrices;
  for (const std::string& name : names) {
    matrices.push_back(eval_one(cfg, name, names.size() == 1));
  }
  ScoreMatrix fused = fuse_scores(matrices);
  const bool multi_query = get_or(cfg, "multi_query", false);
  if (multi_query) fused = multi_query_collapse(fused);
  const EvalReport report =
      make_report(fused, multi_query ? "multi-query" : "single-query");

  const std::filesystem::path report_out = require<std::string>(cfg, "report_out");
  std::ofstream out(report_out);
  if (!out) throw DataError("cannot write report " + report_out.string());
  out << report_to_json(report).dump(2) << "\n";
  std::cerr << "eval: rank1=" << report.rank1 << " map=" << report.map << " ("
            << report.protocol << ")\n";
  return report;
}

inline Gate parse_gate(const std::string& name) {
  if (name == "input") return Gate::Input;
  if (name == "forget") return Gate::Forget;
  if (name == "output") return Gate::Output;
  if (name == "candidate") return Gate::Candidate;
  throw UsageError("unknown gate \"" + name +
                   "\" (expected input|forget|output|candidate)");
}

inline void cmd_inspect(const json& cfg, const std::string& image_id) {
  const std::vector<std::string> names = feature_names(cfg);
  const LoadedSet data = load_and_prepare(cfg, names.front());

  const FeatureItem* item = nullptr;
  for (const FeatureItem& it : data.set.items) {
    if (it.id == image_id) {
      item = &it;
      break;
    }
  }
  if (!item) {
    // List the lexicographic neighbours of the unknown id.
    std::vector<std::string> ids;
    for (const FeatureItem& it : data.set.items) ids.push_back(it.id);
    std::sort(ids.begin(), ids.end());
    const auto pos = std::lower_bound(ids.begin(), ids.end(), image_id);
    std::string nearest;
    const std::ptrdiff_t at = pos - ids.begin();
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(0, at - 2);
         k < std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(ids.size()), at + 3);
         ++k) {
      nearest += (nearest.empty() ? "" : ", ") + ids[static_cast<std::size_t>(k)];
    }
    throw DataError("unknown image id \"" + image_id + "\"; nearest ids: " + nearest);
  }

  const std::filesystem::path model_in = require<std::string>(cfg, "model_in");
  std::ifstream in(model_in, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + model_in.string());
  const SiameseModel model = SiameseModel::load(in);

  const GateTrace trace = trace_gates(model.params(), item->seq, image_id);
  const Gate gate = parse_gate(get_or<std::string>(cfg, "gate", "input"));
  const std::filesystem::path prefix =
      get_or<std::string>(cfg, "inspect_out", image_id + "_gates");
  const std::filesystem::path pgm = export_heatmap(trace, gate, prefix);
  std::cerr << "inspect: wrote " << prefix.string() << ".csv and " << pgm.string()
            << "\n";
}

}  // namespace reid::cli
