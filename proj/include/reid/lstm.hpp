#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "reid/errors.hpp"
#include "reid/io.hpp"
#include "reid/numerics.hpp"
#include "reid/sequence.hpp"

namespace reid {

// Single-layer LSTM without peephole connections.
//
// Gate rows of the weight matrix are stacked as (i, f, o, g), top to bottom.
// The order is frozen for serialization stability.
struct LstmParams {
  Matrix w;     // 4n x (d+n)
  Matrix bias;  // 4n x 1
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  static LstmParams zeros(std::size_t d, std::size_t n) {
    LstmParams p;
    p.input_dim = d;
    p.hidden_dim = n;
    p.w = Matrix(4 * n, d + n);
    p.bias = Matrix(4 * n, 1);
    return p;
  }

  // Weights uniform in [-a, a] with a = sqrt(1/(d+n)); bias zero.
  static LstmParams init(std::size_t d, std::size_t n, SeededRng& rng) {
    LstmParams p = zeros(d, n);
    const double bound = std::sqrt(1.0 / static_cast<double>(d + n));
    p.w = uniform_init(rng, 4 * n, d + n, bound);
    return p;
  }

  void validate() const {
    if (w.rows() != 4 * hidden_dim || w.cols() != input_dim + hidden_dim) {
      throw ShapeError("LstmParams: weight shape " + w.shape_str() +
                       " does not match 4n x (d+n) for d=" +
                       std::to_string(input_dim) + " n=" + std::to_string(hidden_dim));
    }
    if (bias.rows() != 4 * hidden_dim || bias.cols() != 1) {
      throw ShapeError("LstmParams: bias shape " + bias.shape_str());
    }
  }
};

struct LstmStepState {
  Vector h, c;           // length n
  Vector i, f, o, g;     // gate activations, length n
};

struct LstmTrace {
  std::vector<LstmStepState> steps;  // one per input row
  RowSequence inputs;
  Vector h0, c0;
};

struct LstmGradients {
  Matrix d_w;                    // 4n x (d+n)
  Matrix d_bias;                 // 4n x 1
  std::vector<Vector> d_inputs;  // per step, length d
};

// One step of the cell dynamics:
//   (i,f,o,g) = (sigm,sigm,sigm,tanh)(W [x; h_prev] + b)
//   c = f . c_prev + i . g
//   h = o . tanh(c)
inline LstmStepState cell_forward(const LstmParams& params, const Vector& x,
                                  const Vector& h_prev, const Vector& c_prev) {
  const std::size_t d = params.input_dim;
  const std::size_t n = params.hidden_dim;
  if (x.size() != d || h_prev.size() != n || c_prev.size() != n) {
    throw ShapeError("cell_forward: got x=" + std::to_string(x.size()) +
                     " h_prev=" + std::to_string(h_prev.size()) +
                     " c_prev=" + std::to_string(c_prev.size()) + ", expected d=" +
                     std::to_string(d) + " n=" + std::to_string(n));
  }
  params.validate();

  LstmStepState s;
  s.i.resize(n);
  s.f.resize(n);
  s.o.resize(n);
  s.g.resize(n);
  s.c.resize(n);
  s.h.resize(n);

  // a = W [x; h_prev] + b, gate blocks at row offsets 0, n, 2n, 3n.
  Vector a(4 * n);
  for (std::size_t r = 0; r < 4 * n; ++r) {
    double acc = params.bias(r, 0);
    for (std::size_t k = 0; k < d; ++k) acc += params.w(r, k) * x[k];
    for (std::size_t k = 0; k < n; ++k) acc += params.w(r, d + k) * h_prev[k];
    a[r] = acc;
  }
  for (std::size_t j = 0; j < n; ++j) {
    s.i[j] = sigmoid(a[j]);
    s.f[j] = sigmoid(a[n + j]);
    s.o[j] = sigmoid(a[2 * n + j]);
    s.g[j] = std::tanh(a[3 * n + j]);
    s.c[j] = s.f[j] * c_prev[j] + s.i[j] * s.g[j];
    s.h[j] = s.o[j] * std::tanh(s.c[j]);
  }
  return s;
}

inline LstmTrace sequence_forward(const LstmParams& params, const RowSequence& seq,
                                  const Vector& h0, const Vector& c0) {
  if (seq.rows.empty()) throw DataError("sequence_forward: empty sequence");
  seq.validate();

  LstmTrace trace;
  trace.inputs = seq;
  trace.h0 = h0;
  trace.c0 = c0;
  trace.steps.reserve(seq.length());
  const Vector* h = &h0;
  const Vector* c = &c0;
  for (const Vector& x : seq.rows) {
    trace.steps.push_back(cell_forward(params, x, *h, *c));
    h = &trace.steps.back().h;
    c = &trace.steps.back().c;
  }
  return trace;
}

// Exact gradients of the traced forward pass by reverse traversal (BPTT).
// d_h carries the upstream gradient of the loss with respect to each h_r.
inline LstmGradients sequence_backward(const LstmParams& params, const LstmTrace& trace,
                                       const std::vector<Vector>& d_h) {
  const std::size_t d = params.input_dim;
  const std::size_t n = params.hidden_dim;
  const std::size_t steps = trace.steps.size();
  if (d_h.size() != steps) {
    throw ShapeError("sequence_backward: " + std::to_string(d_h.size()) +
                     " upstream gradients for " + std::to_string(steps) + " steps");
  }

  LstmGradients grads;
  grads.d_w = Matrix(4 * n, d + n);
  grads.d_bias = Matrix(4 * n, 1);
  grads.d_inputs.assign(steps, Vector(d, 0.0));

  Vector dh_next(n, 0.0);  // gradient flowing into h_t from step t+1
  Vector dc_next(n, 0.0);  // gradient flowing into c_t from step t+1
  Vector da(4 * n);        // gradient at the pre-activations of one step

  for (std::size_t t = steps; t-- > 0;) {
    const LstmStepState& s = trace.steps[t];
    const Vector& c_prev = (t == 0) ? trace.c0 : trace.steps[t - 1].c;
    const Vector& h_prev = (t == 0) ? trace.h0 : trace.steps[t - 1].h;
    const Vector& x = trace.inputs.rows[t];
    if (d_h[t].size() != n) {
      throw ShapeError("sequence_backward: upstream gradient at step " +
                       std::to_string(t) + " has length " +
                       std::to_string(d_h[t].size()));
    }

    for (std::size_t j = 0; j < n; ++j) {
      const double dh = d_h[t][j] + dh_next[j];
      const double tc = std::tanh(s.c[j]);
      const double d_o = dh * tc;
      const double dc = dc_next[j] + dh * s.o[j] * (1.0 - tc * tc);
      const double d_i = dc * s.g[j];
      const double d_f = dc * c_prev[j];
      const double d_g = dc * s.i[j];
      dc_next[j] = dc * s.f[j];
      da[j] = d_i * s.i[j] * (1.0 - s.i[j]);
      da[n + j] = d_f * s.f[j] * (1.0 - s.f[j]);
      da[2 * n + j] = d_o * s.o[j] * (1.0 - s.o[j]);
      da[3 * n + j] = d_g * (1.0 - s.g[j] * s.g[j]);
    }

    Vector& dx = grads.d_inputs[t];
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    for (std::size_t r = 0; r < 4 * n; ++r) {
      const double dar = da[r];
      grads.d_bias(r, 0) += dar;
      if (dar == 0.0) continue;
      for (std::size_t k = 0; k < d; ++k) {
        grads.d_w(r, k) += dar * x[k];
        dx[k] += params.w(r, k) * dar;
      }
      for (std::size_t k = 0; k < n; ++k) {
        grads.d_w(r, d + k) += dar * h_prev[k];
        dh_next[k] += params.w(r, d + k) * dar;
      }
    }
  }
  return grads;
}

// Binary blob: magic "SLSTM001", d and n as u32 LE, then w row-major and
// bias, both as f64 LE.
inline void save_lstm(const LstmParams& params, std::ostream& os) {
  io::write_magic(os, "SLSTM001");
  io::write_u32le(os, static_cast<std::uint32_t>(params.input_dim));
  io::write_u32le(os, static_cast<std::uint32_t>(params.hidden_dim));
  for (double v : params.w.raw()) io::write_f64le(os, v);
  for (double v : params.bias.raw()) io::write_f64le(os, v);
}

inline LstmParams load_lstm(std::istream& is) {
  io::expect_magic(is, "SLSTM001", "LSTM parameter blob");
  const std::uint32_t d = io::read_u32le(is, "LSTM input_dim");
  const std::uint32_t n = io::read_u32le(is, "LSTM hidden_dim");
  LstmParams p = LstmParams::zeros(d, n);
  for (double& v : p.w.raw()) v = io::read_f64le(is, "LSTM weights");
  for (double& v : p.bias.raw()) v = io::read_f64le(is, "LSTM bias");
  return p;
}

}  // namespace reid
