#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "reid/errors.hpp"
#include "reid/lstm.hpp"
#include "reid/numerics.hpp"
#include "reid/sequence.hpp"
#include "reid/siamese.hpp"

namespace reid {

// Per-step gate activations of the forward pass over one image, with their
// L2 norms. The norms are for illustration only; the raw vectors are kept
// alongside them.
struct GateTrace {
  std::string image_id;
  std::vector<Vector> i, f, o, g;  // R vectors of length n each
  std::vector<double> i_norm, f_norm, o_norm, g_norm;

  std::size_t step_count() const { return i_norm.size(); }
  std::size_t hidden_dim() const { return i.empty() ? 0 : i.front().size(); }
};

enum class Gate { Input, Forget, Output, Candidate };

inline std::string gate_name(Gate gate) {
  switch (gate) {
    case Gate::Input: return "input";
    case Gate::Forget: return "forget";
    case Gate::Output: return "output";
    case Gate::Candidate: return "candidate";
  }
  throw UsageError("unknown gate selector");
}

// Identical forward computation as embed, with gate states captured. The
// trace is read off the same sequence_forward pass, so it cannot perturb
// the hidden outputs.
inline GateTrace trace_gates(const SiameseParams& model, const RowSequence& seq,
                             const std::string& image_id = "") {
  model.validate();
  if (seq.length() != model.rows || seq.dim() != model.lstm.input_dim) {
    throw ShapeError("trace_gates: sequence is " + std::to_string(seq.length()) +
                     "x" + std::to_string(seq.dim()) + ", model expects " +
                     std::to_string(model.rows) + "x" +
                     std::to_string(model.lstm.input_dim));
  }
  const std::size_t n = model.lstm.hidden_dim;
  const LstmTrace trace =
      sequence_forward(model.lstm, seq, Vector(n, 0.0), Vector(n, 0.0));

  GateTrace gt;
  gt.image_id = image_id;
  for (const LstmStepState& s : trace.steps) {
    gt.i.push_back(s.i);
    gt.f.push_back(s.f);
    gt.o.push_back(s.o);
    gt.g.push_back(s.g);
    gt.i_norm.push_back(l2_norm(s.i));
    gt.f_norm.push_back(l2_norm(s.f));
    gt.o_norm.push_back(l2_norm(s.o));
    gt.g_norm.push_back(l2_norm(s.g));
  }
  return gt;
}

inline const std::vector<double>& gate_norms(const GateTrace& trace, Gate gate) {
  switch (gate) {
    case Gate::Input: return trace.i_norm;
    case Gate::Forget: return trace.f_norm;
    case Gate::Output: return trace.o_norm;
    case Gate::Candidate: return trace.g_norm;
  }
  throw UsageError("unknown gate selector");
}

inline void export_norms_csv(const GateTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CSV to " + path.string());
  out << "step,i_norm,f_norm,o_norm,g_norm\n";
  out.precision(17);
  for (std::size_t r = 0; r < trace.step_count(); ++r) {
    out << (r + 1) << "," << trace.i_norm[r] << "," << trace.f_norm[r] << ","
        << trace.o_norm[r] << "," << trace.g_norm[r] << "\n";
  }
}

// Binary portable graymap, one pixel row per step, one column. 0 maps to
// black and the theoretical norm maximum sqrt(n) to white (255).
inline void export_heatmap_pgm(const GateTrace& trace, Gate gate,
                               const std::filesystem::path& path) {
  const std::vector<double>& norms = gate_norms(trace, gate);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write graymap to " + path.string());
  const double max_norm = std::sqrt(static_cast<double>(trace.hidden_dim()));
  out << "P5\n1 " << norms.size() << "\n255\n";
  for (double v : norms) {
    const double scaled = max_norm > 0.0 ? v / max_norm : 0.0;
    const int pixel = std::clamp(static_cast<int>(std::lround(scaled * 255.0)), 0, 255);
    out.put(static_cast<char>(pixel));
  }
}

// Writes <prefix>.csv with all four norms and <prefix>_<gate>.pgm for the
// selected gate. Returns the graymap path.
inline std::filesystem::path export_heatmap(const GateTrace& trace, Gate gate,
                                            const std::filesystem::path& prefix) {
  std::filesystem::path csv = prefix;
  csv += ".csv";
  export_norms_csv(trace, csv);
  std::filesystem::path pgm = prefix;
  pgm += "_" + gate_name(gate) + ".pgm";
  export_heatmap_pgm(trace, gate, pgm);
  return pgm;
}

}  // namespace reid
