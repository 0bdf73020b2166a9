#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "reid/dataset.hpp"
#include "reid/training.hpp"

using namespace reid;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("reid_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.identities = 20;
  spec.cameras = 2;
  spec.images_per_identity_per_camera = 2;
  spec.row_count = 16;
  spec.dim = 32;
  spec.noise = 0.1;
  spec.seed = 7;
  return spec;
}

// Brute-force nearest-neighbor rank-1 in raw concatenated feature space,
// cross-camera protocol.
double raw_nn_rank1(const FeatureSet& set) {
  std::size_t hits = 0, total = 0;
  for (std::size_t p = 0; p < set.items.size(); ++p) {
    double best = 0.0;
    std::ptrdiff_t best_q = -1;
    const Vector fp = concat_rows(set.items[p].seq);
    for (std::size_t q = 0; q < set.items.size(); ++q) {
      if (q == p) continue;
      if (set.items[q].identity == set.items[p].identity &&
          set.items[q].camera == set.items[p].camera) {
        continue;
      }
      const double d = distance(fp, concat_rows(set.items[q].seq));
      if (best_q < 0 || d < best) {
        best = d;
        best_q = static_cast<std::ptrdiff_t>(q);
      }
    }
    if (best_q < 0) continue;
    ++total;
    if (set.items[static_cast<std::size_t>(best_q)].identity == set.items[p].identity) {
      ++hits;
    }
  }
  return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

}  // namespace

TEST_CASE("synthetic generation is deterministic and well formed") {
  const SyntheticSpec spec = small_spec();
  const FeatureSet a = generate_synthetic(spec);
  const FeatureSet b = generate_synthetic(spec);
  CHECK(a.items.size() == 20 * 2 * 2);
  CHECK(a.row_count == 16);
  CHECK(a.dim == 32);
  REQUIRE(a.items.size() == b.items.size());
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].id == b.items[i].id);
    CHECK(a.items[i].seq.rows == b.items[i].seq.rows);
  }
}

TEST_CASE("noise level 0 makes same-identity same-camera images identical") {
  SyntheticSpec spec = small_spec();
  spec.noise = 0.0;
  const FeatureSet set = generate_synthetic(spec);
  for (const FeatureItem& a : set.items) {
    for (const FeatureItem& b : set.items) {
      if (a.identity == b.identity && a.camera == b.camera) {
        CHECK(a.seq.rows == b.seq.rows);
      }
    }
  }
}

TEST_CASE("raw nearest-neighbor matching is above chance but below perfect") {
  SyntheticSpec spec = small_spec();
  spec.identities = 50;
  const FeatureSet set = generate_synthetic(spec);
  const double rank1 = raw_nn_rank1(set);
  CHECK(rank1 > 1.0 / 50.0);  // above chance
  CHECK(rank1 < 1.0);         // planted confusions keep it imperfect
}

TEST_CASE("save and load round-trip is bit-identical at f32 precision") {
  const fs::path dir = temp_dir("roundtrip");
  FeatureSet set = generate_synthetic(small_spec());
  // Quantize through f32 so the round trip is exact by construction.
  for (FeatureItem& item : set.items) {
    for (Vector& row : item.seq.rows) {
      for (double& v : row) v = static_cast<double>(static_cast<float>(v));
    }
  }
  save_feature_set(set, dir / "manifest.json", "synthetic.sfeat");
  const FeatureSet loaded = load_feature_set(dir / "manifest.json", "synthetic");
  REQUIRE(loaded.items.size() == set.items.size());
  CHECK(loaded.row_count == set.row_count);
  CHECK(loaded.dim == set.dim);
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    CHECK(loaded.items[i].id == set.items[i].id);
    CHECK(loaded.items[i].identity == set.items[i].identity);
    CHECK(loaded.items[i].camera == set.items[i].camera);
    CHECK(loaded.items[i].seq.rows == set.items[i].seq.rows);
  }
}

TEST_CASE("synthetic set of 20 identities loads with the written R and d") {
  const fs::path dir = temp_dir("gen_roundtrip");
  const FeatureSet set = generate_synthetic(small_spec());
  save_feature_set(set, dir / "manifest.json", "synthetic.sfeat");
  const FeatureSet loaded = load_feature_set(dir / "manifest.json", "synthetic");
  CHECK(loaded.row_count == 16);
  CHECK(loaded.dim == 32);
  CHECK(loaded.items.size() == 80);
}

TEST_CASE("manifest referencing a missing file names the file") {
  const fs::path dir = temp_dir("missing");
  Manifest m;
  m.feature_sets.push_back({"ghost", 4, 4, "ghost.sfeat"});
  m.items.push_back({"x", 0, 0});
  write_manifest(m, dir / "manifest.json");
  bool threw = false;
  try {
    load_feature_set(dir / "manifest.json", "ghost");
  } catch (const DataError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("ghost.sfeat") != std::string::npos);
  }
  CHECK(threw);
}

TEST_CASE("unknown feature name, bad magic, truncation, duplicates") {
  const fs::path dir = temp_dir("badfiles");
  const FeatureSet set = generate_synthetic(small_spec());
  save_feature_set(set, dir / "manifest.json", "synthetic.sfeat");
  CHECK_THROWS_AS(load_feature_set(dir / "manifest.json", "nope"), DataError);

  // Corrupt the magic.
  {
    std::fstream f(dir / "synthetic.sfeat",
                   std::ios::binary | std::ios::in | std::ios::out);
    f.write("XXXXXXXX", 8);
  }
  CHECK_THROWS_AS(load_feature_set(dir / "manifest.json", "synthetic"), DataError);

  // Rewrite, then truncate.
  write_feature_binary(set, dir / "synthetic.sfeat");
  fs::resize_file(dir / "synthetic.sfeat", 100);
  CHECK_THROWS_AS(load_feature_set(dir / "manifest.json", "synthetic"), DataError);

  // Duplicate ids in the manifest.
  write_feature_binary(set, dir / "synthetic.sfeat");
  Manifest m = read_manifest(dir / "manifest.json");
  m.items[1].id = m.items[0].id;
  write_manifest(m, dir / "manifest.json");
  CHECK_THROWS_AS(load_feature_set(dir / "manifest.json", "synthetic"), DataError);
}

TEST_CASE("item count mismatch between manifest and binary fails loudly") {
  const fs::path dir = temp_dir("count");
  const FeatureSet set = generate_synthetic(small_spec());
  save_feature_set(set, dir / "manifest.json", "synthetic.sfeat");
  Manifest m = read_manifest(dir / "manifest.json");
  m.items.pop_back();
  write_manifest(m, dir / "manifest.json");
  CHECK_THROWS_AS(load_feature_set(dir / "manifest.json", "synthetic"), DataError);
}

TEST_CASE("make_split determinism and partition laws") {
  const FeatureSet set = generate_synthetic(small_spec());
  const SplitSpec a = make_split(set, 0.5, 99);
  const SplitSpec b = make_split(set, 0.5, 99);
  CHECK(a.train_identities == b.train_identities);
  CHECK(a.validation_identities == b.validation_identities);
  CHECK(a.test_query_items == b.test_query_items);

  // Union covers all identities; intersections empty.
  std::set<int> all;
  for (const FeatureItem& item : set.items) all.insert(item.identity);
  std::set<int> seen = a.train_identities;
  for (int id : a.validation_identities) {
    CHECK(!seen.count(id));
    seen.insert(id);
  }
  for (std::size_t idx : a.test_query_items) {
    const int id = set.items[idx].identity;
    CHECK(!a.train_identities.count(id));
    CHECK(!a.validation_identities.count(id));
    seen.insert(id);
  }
  CHECK(seen == all);
}

TEST_CASE("632 identities at ratio 0.5 split 316/316") {
  FeatureSet set;
  set.name = "viperlike";
  set.row_count = 1;
  set.dim = 1;
  for (int id = 0; id < 632; ++id) {
    for (int cam = 0; cam < 2; ++cam) {
      FeatureItem item;
      item.id = std::to_string(id) + "_" + std::to_string(cam);
      item.identity = id;
      item.camera = cam;
      item.seq.rows = {{static_cast<double>(id)}};
      set.items.push_back(item);
    }
  }
  const SplitSpec split = make_split(set, 0.5, 3, 0.0);
  std::set<int> test_ids;
  for (std::size_t idx : split.test_query_items) test_ids.insert(set.items[idx].identity);
  CHECK(split.train_identities.size() + split.validation_identities.size() == 316);
  CHECK(test_ids.size() == 316);
}

TEST_CASE("splits are invariant under manifest item reordering") {
  FeatureSet set = generate_synthetic(small_spec());
  const SplitSpec before = make_split(set, 0.5, 5);

  FeatureSet reversed = set;
  std::reverse(reversed.items.begin(), reversed.items.end());
  const SplitSpec after = make_split(reversed, 0.5, 5);
  CHECK(before.train_identities == after.train_identities);
  CHECK(before.validation_identities == after.validation_identities);

  std::set<int> test_before, test_after;
  for (std::size_t i : before.test_query_items) test_before.insert(set.items[i].identity);
  for (std::size_t i : after.test_query_items) {
    test_after.insert(reversed.items[i].identity);
  }
  CHECK(test_before == test_after);
}

TEST_CASE("too few identities for a split is an error") {
  SyntheticSpec spec = small_spec();
  spec.identities = 2;
  spec.row_count = 3;
  const FeatureSet set = generate_synthetic(spec);
  CHECK_THROWS_AS(make_split(set, 0.5, 1), DataError);
}

TEST_CASE("degenerate synthetic specs are rejected") {
  SyntheticSpec spec = small_spec();
  spec.identities = 0;
  CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
  spec = small_spec();
  spec.row_count = 2;
  CHECK_THROWS_AS(generate_synthetic(spec), UsageError);
}

TEST_CASE("normalization standardizes training coordinates") {
  FeatureSet set = generate_synthetic(small_spec());
  std::set<int> train_ids;
  for (int id = 0; id < 10; ++id) train_ids.insert(id);
  const FeatureStats stats = compute_stats(set, train_ids);
  apply_stats(set, stats);
  const FeatureStats after = compute_stats(set, train_ids);
  for (std::size_t r = 0; r < set.row_count; ++r) {
    for (std::size_t c = 0; c < set.dim; ++c) {
      CHECK(std::fabs(after.mean[r][c]) < 1e-9);
      CHECK(after.std[r][c] == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}
