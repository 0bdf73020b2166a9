#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "reid/inspect.hpp"

using namespace reid;
namespace fs = std::filesystem;

namespace {

SiameseParams zero_model(std::size_t d, std::size_t n, std::size_t steps) {
  SiameseParams p;
  p.lstm = LstmParams::zeros(d, n);
  p.rows = steps;
  p.w_m = Matrix::identity(steps * n);
  return p;
}

fs::path temp_prefix(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / "reid_inspect";
  fs::create_directories(dir);
  return dir / tag;
}

}  // namespace

TEST_CASE("zero parameters give gate norms of sqrt(n)*0.5 exactly") {
  const std::size_t n = 4;
  const SiameseParams p = zero_model(3, n, 5);
  SeededRng rng(1);
  const RowSequence seq = testutil::random_sequence(5, 3, rng);
  const GateTrace trace = trace_gates(p, seq, "img");
  const double expect = std::sqrt(static_cast<double>(n)) * 0.5;
  for (std::size_t r = 0; r < trace.step_count(); ++r) {
    CHECK(trace.i_norm[r] == doctest::Approx(expect).epsilon(1e-15));
    CHECK(trace.f_norm[r] == doctest::Approx(expect).epsilon(1e-15));
    CHECK(trace.o_norm[r] == doctest::Approx(expect).epsilon(1e-15));
    CHECK(trace.g_norm[r] == 0.0);
  }
}

TEST_CASE("norms match recomputation from a full LstmTrace") {
  SeededRng rng(3);
  SiameseParams p = SiameseParams::init(4, 3, 6, rng);
  const RowSequence seq = testutil::random_sequence(6, 4, rng);
  const GateTrace gt = trace_gates(p, seq);
  const LstmTrace lt =
      sequence_forward(p.lstm, seq, Vector(3, 0.0), Vector(3, 0.0));
  for (std::size_t r = 0; r < 6; ++r) {
    CHECK(gt.i_norm[r] == l2_norm(lt.steps[r].i));
    CHECK(gt.f_norm[r] == l2_norm(lt.steps[r].f));
    CHECK(gt.o_norm[r] == l2_norm(lt.steps[r].o));
    CHECK(gt.g_norm[r] == l2_norm(lt.steps[r].g));
    // Tracing must not perturb the computation.
    CHECK(gt.i[r] == lt.steps[r].i);
  }
}

TEST_CASE("saturated forget bias pushes f norms to sqrt(n)") {
  SeededRng rng(7);
  const std::size_t n = 3;
  SiameseParams p = SiameseParams::init(4, n, 5, rng);
  for (std::size_t j = 0; j < n; ++j) p.lstm.bias(n + j, 0) = 100.0;
  const RowSequence seq = testutil::random_sequence(5, 4, rng);
  const GateTrace trace = trace_gates(p, seq);
  const double expect = std::sqrt(static_cast<double>(n));
  for (double v : trace.f_norm) CHECK(std::fabs(v - expect) < 1e-6);
}

TEST_CASE("gate norm bounds: i/f/o below sqrt(n)") {
  SeededRng rng(9);
  SiameseParams p = SiameseParams::init(3, 4, 4, rng);
  const RowSequence seq = testutil::random_sequence(4, 3, rng, 3.0);
  const GateTrace trace = trace_gates(p, seq);
  const double cap = std::sqrt(4.0);
  for (std::size_t r = 0; r < trace.step_count(); ++r) {
    CHECK(trace.i_norm[r] >= 0.0);
    CHECK(trace.i_norm[r] < cap);
    CHECK(trace.f_norm[r] < cap);
    CHECK(trace.o_norm[r] < cap);
  }
}

TEST_CASE("CSV round-trips the norm values exactly") {
  SeededRng rng(11);
  SiameseParams p = SiameseParams::init(3, 2, 4, rng);
  const RowSequence seq = testutil::random_sequence(4, 3, rng);
  const GateTrace trace = trace_gates(p, seq);
  const fs::path csv = temp_prefix("norms.csv");
  export_norms_csv(trace, csv);

  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,i_norm,f_norm,o_norm,g_norm");
  for (std::size_t r = 0; r < trace.step_count(); ++r) {
    std::string line;
    REQUIRE(std::getline(in, line));
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    CHECK(std::stoul(field) == r + 1);
    std::getline(ss, field, ',');
    CHECK(std::stod(field) == trace.i_norm[r]);
    std::getline(ss, field, ',');
    CHECK(std::stod(field) == trace.f_norm[r]);
    std::getline(ss, field, ',');
    CHECK(std::stod(field) == trace.o_norm[r]);
    std::getline(ss, field, ',');
    CHECK(std::stod(field) == trace.g_norm[r]);
  }
}

TEST_CASE("graymap is one pixel row per step; zero model is uniform mid-gray") {
  const std::size_t steps = 24;
  const SiameseParams p = zero_model(3, 4, steps);
  SeededRng rng(13);
  const RowSequence seq = testutil::random_sequence(steps, 3, rng);
  const GateTrace trace = trace_gates(p, seq);
  const fs::path prefix = temp_prefix("zero");
  const fs::path pgm = export_heatmap(trace, Gate::Input, prefix);

  std::ifstream in(pgm, std::ios::binary);
  std::string magic, dims_w, dims_h, maxval;
  in >> magic >> dims_w >> dims_h >> maxval;
  CHECK(magic == "P5");
  CHECK(dims_w == "1");
  CHECK(dims_h == "24");
  CHECK(maxval == "255");
  in.get();  // single whitespace after header
  for (std::size_t r = 0; r < steps; ++r) {
    const int pixel = in.get();
    CHECK(pixel == 128);  // 0.5 of the norm ceiling, rounded
  }
  CHECK(fs::exists(prefix.string() + ".csv"));
}

TEST_CASE("exports are identical across reruns") {
  SeededRng rng(17);
  SiameseParams p = SiameseParams::init(3, 2, 4, rng);
  const RowSequence seq = testutil::random_sequence(4, 3, rng);
  const GateTrace trace = trace_gates(p, seq);
  const fs::path a = temp_prefix("rerun_a");
  const fs::path b = temp_prefix("rerun_b");
  export_heatmap(trace, Gate::Forget, a);
  export_heatmap(trace, Gate::Forget, b);
  const auto slurp = [](const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(a.string() + ".csv") == slurp(b.string() + ".csv"));
  CHECK(slurp(a.string() + "_forget.pgm") == slurp(b.string() + "_forget.pgm"));
}

TEST_CASE("dimension mismatch is rejected") {
  const SiameseParams p = zero_model(3, 2, 4);
  SeededRng rng(19);
  const RowSequence seq = testutil::random_sequence(5, 3, rng);
  CHECK_THROWS_AS(trace_gates(p, seq), ShapeError);
}
