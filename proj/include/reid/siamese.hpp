#pragma once

#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "reid/errors.hpp"
#include "reid/io.hpp"
#include "reid/lstm.hpp"
#include "reid/numerics.hpp"
#include "reid/sequence.hpp"

namespace reid {

// Two weight-shared LSTM branches followed by a linear embedding map over
// the concatenated hidden states. The embedding is purely linear: no bias,
// no nonlinearity.
struct SiameseParams {
  LstmParams lstm;
  Matrix w_m;            // (R*n) x (R*n)
  std::size_t rows = 0;  // R

  static SiameseParams init(std::size_t d, std::size_t n, std::size_t rows,
                            SeededRng& rng) {
    SiameseParams p;
    p.lstm = LstmParams::init(d, n, rng);
    p.rows = rows;
    const std::size_t side = rows * n;
    const double bound = std::sqrt(1.0 / static_cast<double>(d + n));
    p.w_m = uniform_init(rng, side, side, bound);
    return p;
  }

  void validate() const {
    lstm.validate();
    const std::size_t side = rows * lstm.hidden_dim;
    if (w_m.rows() != side || w_m.cols() != side) {
      throw ShapeError("SiameseParams: w_m shape " + w_m.shape_str() +
                       " is not square with side R*n=" + std::to_string(side));
    }
  }
};

struct PairExample {
  RowSequence p;
  RowSequence q;
  int label = 0;  // 0 similar, 1 dissimilar
  std::size_t pair_index = 0;
};

struct SiameseGradients {
  Matrix d_w;     // lstm weights
  Matrix d_bias;  // lstm bias
  Matrix d_w_m;

  static SiameseGradients zeros(const SiameseParams& p) {
    SiameseGradients g;
    g.d_w = Matrix(p.lstm.w.rows(), p.lstm.w.cols());
    g.d_bias = Matrix(p.lstm.bias.rows(), 1);
    g.d_w_m = Matrix(p.w_m.rows(), p.w_m.cols());
    return g;
  }
};

inline Vector concat_hidden(const LstmTrace& trace) {
  Vector h;
  if (trace.steps.empty()) return h;
  h.reserve(trace.steps.size() * trace.steps.front().h.size());
  for (const LstmStepState& s : trace.steps) {
    h.insert(h.end(), s.h.begin(), s.h.end());
  }
  return h;
}

// s = W_M^T [h_1; ...; h_R]
inline Vector embed_from_trace(const SiameseParams& params, const LstmTrace& trace) {
  const Vector h = concat_hidden(trace);
  const std::size_t side = params.w_m.rows();
  if (h.size() != side) {
    throw ShapeError("embed: concatenated hidden size " + std::to_string(h.size()) +
                     " does not match w_m side " + std::to_string(side));
  }
  Vector s(side, 0.0);
  for (std::size_t r = 0; r < side; ++r) {
    const double hr = h[r];
    if (hr == 0.0) continue;
    for (std::size_t c = 0; c < side; ++c) s[c] += params.w_m(r, c) * hr;
  }
  return s;
}

inline Vector embed(const SiameseParams& params, const RowSequence& seq) {
  params.validate();
  if (seq.length() != params.rows || seq.dim() != params.lstm.input_dim) {
    throw ShapeError("embed: sequence is " + std::to_string(seq.length()) + "x" +
                     std::to_string(seq.dim()) + ", model expects " +
                     std::to_string(params.rows) + "x" +
                     std::to_string(params.lstm.input_dim));
  }
  const std::size_t n = params.lstm.hidden_dim;
  const LstmTrace trace =
      sequence_forward(params.lstm, seq, Vector(n, 0.0), Vector(n, 0.0));
  return embed_from_trace(params, trace);
}


// L = (1-Y) * 1/2 * d^2 + Y * 1/2 * max(0, m-d)^2
inline double contrastive_loss(double d_s, int y, double m) {
  if (d_s < 0.0) throw NumericError("contrastive_loss: negative distance");
  if (m <= 0.0) throw UsageError("contrastive_loss: margin must be positive");
  if (y != 0 && y != 1) throw UsageError("contrastive_loss: label must be 0 or 1");
  if (y == 0) return 0.5 * d_s * d_s;
  const double hinge = m - d_s;
  return hinge > 0.0 ? 0.5 * hinge * hinge : 0.0;
}

namespace detail {

// Gradient of the contrastive loss with respect to s_p, written into d_s_p.
// Returns the loss. The hinge subgradient at d = 0 with Y = 1 is defined as
// the zero vector (no repulsion direction when s_p = s_q).
inline double loss_grad_wrt_embedding(const Vector& s_p, const Vector& s_q, int y,
                                      double m, Vector& d_s_p) {
  const double d = distance(s_p, s_q);
  const double loss = contrastive_loss(d, y, m);
  d_s_p.assign(s_p.size(), 0.0);
  if (y == 0) {
    for (std::size_t i = 0; i < s_p.size(); ++i) d_s_p[i] = s_p[i] - s_q[i];
  } else if (d < m && d >= 1e-12) {
    const double scale = -(m - d) / d;
    for (std::size_t i = 0; i < s_p.size(); ++i) {
      d_s_p[i] = scale * (s_p[i] - s_q[i]);
    }
  }
  return loss;
}

// Backprop through one branch: ds is dL/ds for that branch's embedding.
// Accumulates into the shared gradient struct.
inline void branch_backward(const SiameseParams& params, const LstmTrace& trace,
                            const Vector& ds, SiameseGradients& grads) {
  const std::size_t n = params.lstm.hidden_dim;
  const std::size_t side = params.w_m.rows();
  const Vector h = concat_hidden(trace);

  // s = W_M^T h  =>  dL/dW_M = h ds^T, dL/dh = W_M ds
  Vector dh_full(side, 0.0);
  for (std::size_t r = 0; r < side; ++r) {
    const double hr = h[r];
    double acc = 0.0;
    for (std::size_t c = 0; c < side; ++c) {
      grads.d_w_m(r, c) += hr * ds[c];
      acc += params.w_m(r, c) * ds[c];
    }
    dh_full[r] = acc;
  }

  std::vector<Vector> d_h(trace.steps.size());
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    d_h[t].assign(dh_full.begin() + static_cast<std::ptrdiff_t>(t * n),
                  dh_full.begin() + static_cast<std::ptrdiff_t>((t + 1) * n));
  }
  const LstmGradients lg = sequence_backward(params.lstm, trace, d_h);
  for (std::size_t k = 0; k < lg.d_w.size(); ++k) {
    grads.d_w.raw()[k] += lg.d_w.raw()[k];
  }
  for (std::size_t k = 0; k < lg.d_bias.size(); ++k) {
    grads.d_bias.raw()[k] += lg.d_bias.raw()[k];
  }
}

}  // namespace detail

// Full loss and parameter gradients for one pair; the two branches share
// weights, so branch gradients are summed.
inline double pair_backward(const SiameseParams& params, const PairExample& pair,
                            double m, SiameseGradients& grads) {
  params.validate();
  const std::size_t n = params.lstm.hidden_dim;
  const Vector zero(n, 0.0);
  const LstmTrace trace_p = sequence_forward(params.lstm, pair.p, zero, zero);
  const LstmTrace trace_q = sequence_forward(params.lstm, pair.q, zero, zero);
  const Vector s_p = embed_from_trace(params, trace_p);
  const Vector s_q = embed_from_trace(params, trace_q);

  Vector d_s_p;
  const double loss = detail::loss_grad_wrt_embedding(s_p, s_q, pair.label, m, d_s_p);
  Vector d_s_q(d_s_p.size());
  for (std::size_t i = 0; i < d_s_p.size(); ++i) d_s_q[i] = -d_s_p[i];

  detail::branch_backward(params, trace_p, d_s_p, grads);
  detail::branch_backward(params, trace_q, d_s_q, grads);
  return loss;
}

// ---------------------------------------------------------------------------
// Baseline: 1-3 stacked linear maps with a fixed nonlinearity, applied to the
// concatenated raw rows. No recurrence.
// ---------------------------------------------------------------------------

enum class Activation { Tanh, Identity };

struct BaselineParams {
  std::vector<Matrix> layers;  // layer l maps via s = f(W_l^T v)
  Activation activation = Activation::Tanh;

  // widths[0] is the input width R*d; widths.back() the embedding width.
  static BaselineParams init(const std::vector<std::size_t>& widths, SeededRng& rng) {
    if (widths.size() < 2 || widths.size() > 4) {
      throw UsageError("BaselineParams: 1 to 3 layers required");
    }
    BaselineParams p;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      const double bound =
          std::sqrt(1.0 / static_cast<double>(widths[l] + widths[l + 1]));
      p.layers.push_back(uniform_init(rng, widths[l], widths[l + 1], bound));
    }
    return p;
  }
};

inline double apply_activation(Activation a, double x) {
  return a == Activation::Tanh ? std::tanh(x) : x;
}

inline Vector baseline_forward(const BaselineParams& params, const RowSequence& seq) {
  Vector v = concat_rows(seq);
  for (const Matrix& w : params.layers) {
    if (v.size() != w.rows()) {
      throw ShapeError("baseline_forward: input width " + std::to_string(v.size()) +
                       " does not match layer shape " + w.shape_str());
    }
    Vector out(w.cols(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double vr = v[r];
      if (vr == 0.0) continue;
      for (std::size_t c = 0; c < w.cols(); ++c) out[c] += w(r, c) * vr;
    }
    for (double& x : out) x = apply_activation(params.activation, x);
    v = std::move(out);
  }
  return v;
}

struct BaselineGradients {
  std::vector<Matrix> d_layers;

  static BaselineGradients zeros(const BaselineParams& p) {
    BaselineGradients g;
    for (const Matrix& w : p.layers) g.d_layers.emplace_back(w.rows(), w.cols());
    return g;
  }
};

namespace detail {

// Forward keeping per-layer outputs, then reverse pass. ds is dL/ds at the
// top; gradients accumulate into grads.
inline void baseline_branch_backward(const BaselineParams& params,
                                     const RowSequence& seq, const Vector& ds,
                                     BaselineGradients& grads) {
  std::vector<Vector> activ;  // activ[0] = input, activ[l+1] = layer l output
  activ.push_back(concat_rows(seq));
  for (const Matrix& w : params.layers) {
    const Vector& v = activ.back();
    Vector out(w.cols(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      for (std::size_t c = 0; c < w.cols(); ++c) out[c] += w(r, c) * v[r];
    }
    for (double& x : out) x = apply_activation(params.activation, x);
    activ.push_back(std::move(out));
  }

  Vector delta = ds;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Matrix& w = params.layers[l];
    const Vector& out = activ[l + 1];
    const Vector& in = activ[l];
    if (params.activation == Activation::Tanh) {
      for (std::size_t c = 0; c < delta.size(); ++c) {
        delta[c] *= 1.0 - out[c] * out[c];
      }
    }
    Vector dv(w.rows(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < w.cols(); ++c) {
        grads.d_layers[l](r, c) += in[r] * delta[c];
        acc += w(r, c) * delta[c];
      }
      dv[r] = acc;
    }
    delta = std::move(dv);
  }
}

}  // namespace detail

inline double baseline_pair_backward(const BaselineParams& params,
                                     const PairExample& pair, double m,
                                     BaselineGradients& grads) {
  const Vector s_p = baseline_forward(params, pair.p);
  const Vector s_q = baseline_forward(params, pair.q);
  Vector d_s_p;
  const double loss = detail::loss_grad_wrt_embedding(s_p, s_q, pair.label, m, d_s_p);
  Vector d_s_q(d_s_p.size());
  for (std::size_t i = 0; i < d_s_p.size(); ++i) d_s_q[i] = -d_s_p[i];
  detail::baseline_branch_backward(params, pair.p, d_s_p, grads);
  detail::baseline_branch_backward(params, pair.q, d_s_q, grads);
  return loss;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

// Container: magic "SSIAM001", the LSTM blob, R as u32 LE, then w_m f64 LE
// row-major.
inline void save_siamese(const SiameseParams& params, std::ostream& os) {
  io::write_magic(os, "SSIAM001");
  save_lstm(params.lstm, os);
  io::write_u32le(os, static_cast<std::uint32_t>(params.rows));
  for (double v : params.w_m.raw()) io::write_f64le(os, v);
}

inline SiameseParams load_siamese(std::istream& is) {
  io::expect_magic(is, "SSIAM001", "siamese model");
  SiameseParams p;
  p.lstm = load_lstm(is);
  p.rows = io::read_u32le(is, "siamese R");
  const std::size_t side = p.rows * p.lstm.hidden_dim;
  p.w_m = Matrix(side, side);
  for (double& v : p.w_m.raw()) v = io::read_f64le(is, "siamese w_m");
  return p;
}

// Baseline container: magic "SBASE001", layer count and activation as u32 LE,
// then per layer rows, cols (u32 LE) and entries (f64 LE, row-major).
inline void save_baseline(const BaselineParams& params, std::ostream& os) {
  io::write_magic(os, "SBASE001");
  io::write_u32le(os, static_cast<std::uint32_t>(params.layers.size()));
  io::write_u32le(os, params.activation == Activation::Tanh ? 0u : 1u);
  for (const Matrix& w : params.layers) {
    io::write_u32le(os, static_cast<std::uint32_t>(w.rows()));
    io::write_u32le(os, static_cast<std::uint32_t>(w.cols()));
    for (double v : w.raw()) io::write_f64le(os, v);
  }
}

inline BaselineParams load_baseline(std::istream& is) {
  io::expect_magic(is, "SBASE001", "baseline model");
  const std::uint32_t count = io::read_u32le(is, "baseline layer count");
  const std::uint32_t act = io::read_u32le(is, "baseline activation");
  BaselineParams p;
  p.activation = act == 0 ? Activation::Tanh : Activation::Identity;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint32_t rows = io::read_u32le(is, "baseline layer rows");
    const std::uint32_t cols = io::read_u32le(is, "baseline layer cols");
    Matrix w(rows, cols);
    for (double& v : w.raw()) v = io::read_f64le(is, "baseline layer weights");
    p.layers.push_back(std::move(w));
  }
  return p;
}

}  // namespace reid
