#pragma once

#include <cmath>
#include <functional>

#include "reid/lstm.hpp"
#include "reid/numerics.hpp"
#include "reid/sequence.hpp"

namespace testutil {

inline double rel_err(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-8});
}

// Central finite difference of a scalar-valued function with respect to one
// matrix entry.
inline double central_diff(reid::Matrix& m, std::size_t r, std::size_t c,
                           const std::function<double()>& loss, double eps = 1e-5) {
  const double saved = m(r, c);
  m(r, c) = saved + eps;
  const double up = loss();
  m(r, c) = saved - eps;
  const double down = loss();
  m(r, c) = saved;
  return (up - down) / (2.0 * eps);
}

// Max relative error between an analytic gradient matrix and central
// differences of `loss` over every entry of `param`.
inline double max_grad_rel_err(reid::Matrix& param, const reid::Matrix& analytic,
                               const std::function<double()>& loss,
                               double eps = 1e-5) {
  double worst = 0.0;
  for (std::size_t r = 0; r < param.rows(); ++r) {
    for (std::size_t c = 0; c < param.cols(); ++c) {
      const double numeric = central_diff(param, r, c, loss, eps);
      worst = std::max(worst, rel_err(analytic(r, c), numeric));
    }
  }
  return worst;
}

inline reid::RowSequence random_sequence(std::size_t steps, std::size_t dim,
                                         reid::SeededRng& rng, double scale = 1.0) {
  reid::RowSequence seq;
  for (std::size_t r = 0; r < steps; ++r) {
    reid::Vector row(dim);
    for (double& v : row) v = rng.uniform(scale);
    seq.rows.push_back(std::move(row));
  }
  return seq;
}

// Plain scalar (d = n = 1) evaluation of the cell update, used as an
// independent oracle against cell_forward.
struct ScalarCell {
  double w_xi = 0, w_hi = 0, b_i = 0;
  double w_xf = 0, w_hf = 0, b_f = 0;
  double w_xo = 0, w_ho = 0, b_o = 0;
  double w_xg = 0, w_hg = 0, b_g = 0;

  struct Out {
    double i, f, o, g, c, h;
  };

  Out step(double x, double h_prev, double c_prev) const {
    Out s;
    s.i = reid::sigmoid(w_xi * x + w_hi * h_prev + b_i);
    s.f = reid::sigmoid(w_xf * x + w_hf * h_prev + b_f);
    s.o = reid::sigmoid(w_xo * x + w_ho * h_prev + b_o);
    s.g = std::tanh(w_xg * x + w_hg * h_prev + b_g);
    s.c = s.f * c_prev + s.i * s.g;
    s.h = s.o * std::tanh(s.c);
    return s;
  }

  reid::LstmParams to_params() const {
    reid::LstmParams p = reid::LstmParams::zeros(1, 1);
    p.w(0, 0) = w_xi;
    p.w(0, 1) = w_hi;
    p.w(1, 0) = w_xf;
    p.w(1, 1) = w_hf;
    p.w(2, 0) = w_xo;
    p.w(2, 1) = w_ho;
    p.w(3, 0) = w_xg;
    p.w(3, 1) = w_hg;
    p.bias(0, 0) = b_i;
    p.bias(1, 0) = b_f;
    p.bias(2, 0) = b_o;
    p.bias(3, 0) = b_g;
    return p;
  }
};

}  // namespace testutil
