#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "reid/errors.hpp"
#include "reid/io.hpp"
#include "reid/numerics.hpp"
#include "reid/sequence.hpp"

namespace reid {

struct FeatureItem {
  std::string id;
  int identity = 0;
  int camera = 0;
  RowSequence seq;
};

struct FeatureSet {
  std::string name;
  std::size_t row_count = 0;  // R
  std::size_t dim = 0;        // d
  std::vector<FeatureItem> items;
};

struct SplitSpec {
  std::set<int> train_identities;
  std::set<int> validation_identities;
  std::vector<std::size_t> test_query_items;    // indices into FeatureSet::items
  std::vector<std::size_t> test_gallery_items;  // indices into FeatureSet::items
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// On-disk formats
//
// Manifest (JSON):
//   {"feature_sets":[{"name","R","d","file"}], "items":[{"id","identity","camera"}]}
// Feature binary: magic "SFEAT001", then count, R, d as u32 LE, then
// count*R*d f32 LE, item-major then row-major, in manifest item order.
// ---------------------------------------------------------------------------

struct ManifestItem {
  std::string id;
  int identity = 0;
  int camera = 0;
};

struct Manifest {
  struct SetEntry {
    std::string name;
    std::size_t row_count = 0;
    std::size_t dim = 0;
    std::string file;
  };
  std::vector<SetEntry> feature_sets;
  std::vector<ManifestItem> items;
};

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  Manifest m;
  for (const auto& fs : j.at("feature_sets")) {
    m.feature_sets.push_back({fs.at("name").get<std::string>(),
                              fs.at("R").get<std::size_t>(),
                              fs.at("d").get<std::size_t>(),
                              fs.at("file").get<std::string>()});
  }
  for (const auto& it : j.at("items")) {
    m.items.push_back({it.at("id").get<std::string>(), it.at("identity").get<int>(),
                       it.at("camera").get<int>()});
  }
  return m;
}

inline void write_manifest(const Manifest& m, const std::filesystem::path& path) {
  nlohmann::json j;
  j["feature_sets"] = nlohmann::json::array();
  for (const auto& fs : m.feature_sets) {
    j["feature_sets"].push_back(
        {{"name", fs.name}, {"R", fs.row_count}, {"d", fs.dim}, {"file", fs.file}});
  }
  j["items"] = nlohmann::json::array();
  for (const auto& it : m.items) {
    j["items"].push_back(
        {{"id", it.id}, {"identity", it.identity}, {"camera", it.camera}});
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << j.dump(2) << "\n";
}

// Values are stored as f32 on disk and promoted to f64 in memory.
inline void write_feature_binary(const FeatureSet& set,
                                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file " + path.string());
  io::write_magic(out, "SFEAT001");
  io::write_u32le(out, static_cast<std::uint32_t>(set.items.size()));
  io::write_u32le(out, static_cast<std::uint32_t>(set.row_count));
  io::write_u32le(out, static_cast<std::uint32_t>(set.dim));
  for (const FeatureItem& item : set.items) {
    for (const Vector& row : item.seq.rows) {
      for (double v : row) io::write_f32le(out, static_cast<float>(v));
    }
  }
}

inline FeatureSet load_feature_set(const std::filesystem::path& manifest_path,
                                   const std::string& feature_name) {
  const Manifest manifest = read_manifest(manifest_path);
  const Manifest::SetEntry* entry = nullptr;
  for (const auto& fs : manifest.feature_sets) {
    if (fs.name == feature_name) {
      entry = &fs;
      break;
    }
  }
  if (!entry) {
    throw DataError("manifest has no feature set named \"" + feature_name + "\"");
  }

  const std::filesystem::path file = manifest_path.parent_path() / entry->file;
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    throw DataError("feature set \"" + feature_name + "\": missing file " +
                    file.string());
  }
  io::expect_magic(in, "SFEAT001", file.string());
  const std::uint32_t count = io::read_u32le(in, "item count");
  const std::uint32_t rows = io::read_u32le(in, "row count");
  const std::uint32_t dim = io::read_u32le(in, "row dimension");
  if (count != manifest.items.size()) {
    throw DataError(file.string() + ": item count " + std::to_string(count) +
                    " does not match manifest item count " +
                    std::to_string(manifest.items.size()));
  }
  if (rows != entry->row_count || dim != entry->dim) {
    throw DataError(file.string() + ": R/d header (" + std::to_string(rows) + "," +
                    std::to_string(dim) + ") disagrees with manifest (" +
                    std::to_string(entry->row_count) + "," +
                    std::to_string(entry->dim) + ")");
  }

  FeatureSet set;
  set.name = entry->name;
  set.row_count = rows;
  set.dim = dim;
  std::set<std::string> seen_ids;
  for (const ManifestItem& mi : manifest.items) {
    if (!seen_ids.insert(mi.id).second) {
      throw DataError("duplicate item id \"" + mi.id + "\" in manifest");
    }
    FeatureItem item;
    item.id = mi.id;
    item.identity = mi.identity;
    item.camera = mi.camera;
    item.seq.rows.assign(rows, Vector(dim));
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < dim; ++c) {
        item.seq.rows[r][c] = io::read_f32le(in, "features of item " + mi.id);
      }
    }
    set.items.push_back(std::move(item));
  }
  return set;
}

inline void save_feature_set(const FeatureSet& set,
                             const std::filesystem::path& manifest_path,
                             const std::string& binary_name) {
  Manifest m;
  m.feature_sets.push_back({set.name, set.row_count, set.dim, binary_name});
  for (const FeatureItem& item : set.items) {
    m.items.push_back({item.id, item.identity, item.camera});
  }
  write_manifest(m, manifest_path);
  write_feature_binary(set, manifest_path.parent_path() / binary_name);
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

// Identity-disjoint train/validation/test split. The split depends only on
// the identity labels and the seed, never on item file order.
inline SplitSpec make_split(const FeatureSet& set, double train_ratio,
                            std::uint64_t seed, double val_fraction = 0.1) {
  std::set<int> id_set;
  for (const FeatureItem& item : set.items) id_set.insert(item.identity);
  std::vector<int> ids(id_set.begin(), id_set.end());

  const std::size_t train_count =
      static_cast<std::size_t>(ids.size() * train_ratio + 0.5);
  if (train_count < 2 || train_count >= ids.size()) {
    throw DataError("make_split: " + std::to_string(ids.size()) +
                    " identities is too few for train ratio " +
                    std::to_string(train_ratio));
  }

  SeededRng rng(seed);
  rng.shuffle(ids);

  SplitSpec split;
  split.seed = seed;
  const std::size_t val_count =
      static_cast<std::size_t>(train_count * val_fraction + 0.5);
  for (std::size_t i = 0; i < train_count; ++i) {
    if (i < train_count - val_count) {
      split.train_identities.insert(ids[i]);
    } else {
      split.validation_identities.insert(ids[i]);
    }
  }
  std::set<int> test_ids(ids.begin() + static_cast<std::ptrdiff_t>(train_count),
                         ids.end());
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    if (test_ids.count(set.items[i].identity)) {
      split.test_query_items.push_back(i);
      split.test_gallery_items.push_back(i);
    }
  }
  return split;
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  std::size_t identities = 50;
  std::size_t cameras = 2;
  std::size_t images_per_identity_per_camera = 2;
  std::size_t row_count = 16;  // R
  std::size_t dim = 32;        // d
  double noise = 0.1;
  std::uint64_t seed = 1;
};

// Generates row sequences with a planted contextual dependency: identities
// come in pairs that share the body pattern of every row r >= 2 exactly;
// only the first two rows, written at reduced magnitude, tell the pair
// members apart. Telling two paired identities apart from a late row alone
// is impossible; the early rows must be carried along the sequence. Each
// camera adds a fixed offset to every row, and i.i.d. Gaussian noise is
// added per entry.
inline FeatureSet generate_synthetic(const SyntheticSpec& spec) {
  if (spec.identities < 1 || spec.cameras < 1 ||
      spec.images_per_identity_per_camera < 1 || spec.row_count < 1 || spec.dim < 1) {
    throw UsageError("generate_synthetic: all counts must be >= 1");
  }
  if (spec.row_count < 3) {
    throw UsageError("generate_synthetic: R must be >= 3 for the planted structure");
  }

  SeededRng rng(spec.seed);
  FeatureSet set;
  set.name = "synthetic";
  set.row_count = spec.row_count;
  set.dim = spec.dim;

  // Per-camera additive offsets, drawn per row so the offset magnitude
  // concentrates instead of hinging on a single low-dimensional draw.
  std::vector<std::vector<Vector>> camera_offset(
      spec.cameras, std::vector<Vector>(spec.row_count, Vector(spec.dim)));
  for (auto& rows : camera_offset) {
    for (auto& off : rows) {
      for (double& v : off) v = 0.16 * rng.gaussian();
    }
  }

  // Shared body per identity pair; per-identity marker rows.
  const std::size_t groups = (spec.identities + 1) / 2;
  std::vector<std::vector<Vector>> body(groups);
  for (auto& rows : body) {
    rows.assign(spec.row_count - 2, Vector(spec.dim));
    for (auto& row : rows) {
      for (double& v : row) v = rng.gaussian();
    }
  }
  std::vector<std::vector<Vector>> marker(spec.identities);
  for (auto& rows : marker) {
    rows.assign(2, Vector(spec.dim));
    for (auto& row : rows) {
      for (double& v : row) v = 0.45 * rng.gaussian();
    }
  }

  for (std::size_t id = 0; id < spec.identities; ++id) {
    for (std::size_t cam = 0; cam < spec.cameras; ++cam) {
      for (std::size_t k = 0; k < spec.images_per_identity_per_camera; ++k) {
        FeatureItem item;
        item.id = "id" + std::to_string(id) + "_c" + std::to_string(cam) + "_k" +
                  std::to_string(k);
        item.identity = static_cast<int>(id);
        item.camera = static_cast<int>(cam);
        item.seq.rows.reserve(spec.row_count);
        for (std::size_t r = 0; r < spec.row_count; ++r) {
          const Vector& base =
              r < 2 ? marker[id][r] : body[id / 2][r - 2];
          Vector row(spec.dim);
          for (std::size_t c = 0; c < spec.dim; ++c) {
            row[c] = base[c] + camera_offset[cam][r][c] + spec.noise * rng.gaussian();
          }
          item.seq.rows.push_back(std::move(row));
        }
        set.items.push_back(std::move(item));
      }
    }
  }
  return set;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

struct FeatureStats {
  std::vector<Vector> mean;  // R x d
  std::vector<Vector> std;   // R x d
};

// Mean and standard deviation of every (row, dimension) coordinate over the
// items whose identity is in the given set.
inline FeatureStats compute_stats(const FeatureSet& set,
                                  const std::set<int>& identities) {
  FeatureStats stats;
  stats.mean.assign(set.row_count, Vector(set.dim, 0.0));
  stats.std.assign(set.row_count, Vector(set.dim, 0.0));
  std::size_t count = 0;
  for (const FeatureItem& item : set.items) {
    if (!identities.count(item.identity)) continue;
    ++count;
    for (std::size_t r = 0; r < set.row_count; ++r) {
      for (std::size_t c = 0; c < set.dim; ++c) {
        stats.mean[r][c] += item.seq.rows[r][c];
      }
    }
  }
  if (count == 0) throw DataError("compute_stats: no items in the given partition");
  for (std::size_t r = 0; r < set.row_count; ++r) {
    for (std::size_t c = 0; c < set.dim; ++c) stats.mean[r][c] /= count;
  }
  for (const FeatureItem& item : set.items) {
    if (!identities.count(item.identity)) continue;
    for (std::size_t r = 0; r < set.row_count; ++r) {
      for (std::size_t c = 0; c < set.dim; ++c) {
        const double diff = item.seq.rows[r][c] - stats.mean[r][c];
        stats.std[r][c] += diff * diff;
      }
    }
  }
  for (std::size_t r = 0; r < set.row_count; ++r) {
    for (std::size_t c = 0; c < set.dim; ++c) {
      stats.std[r][c] = std::sqrt(stats.std[r][c] / count);
      if (stats.std[r][c] < 1e-12) stats.std[r][c] = 1.0;  // constant dimension
    }
  }
  return stats;
}

inline void apply_stats(FeatureSet& set, const FeatureStats& stats) {
  for (FeatureItem& item : set.items) {
    for (std::size_t r = 0; r < set.row_count; ++r) {
      for (std::size_t c = 0; c < set.dim; ++c) {
        item.seq.rows[r][c] =
            (item.seq.rows[r][c] - stats.mean[r][c]) / stats.std[r][c];
      }
    }
  }
}

}  // namespace reid
