#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <utility>
#include <vector>

#include "reid/siamese.hpp"

namespace reid {

// Uniform trainable-model surface over the siamese LSTM and the no-LSTM
// baseline: a flat list of parameter matrices with aligned gradient
// accumulators. The training loop (clipping, RMSProp, checkpointing) works
// against this surface only.

class SiameseModel {
 public:
  explicit SiameseModel(SiameseParams params)
      : params_(std::move(params)), grads_(SiameseGradients::zeros(params_)) {}

  const SiameseParams& params() const { return params_; }

  Vector embed(const RowSequence& seq) const { return reid::embed(params_, seq); }

  void zero_grads() {
    grads_ = SiameseGradients::zeros(params_);
  }

  double add_pair_grad(const PairExample& pair, double margin) {
    return pair_backward(params_, pair, margin, grads_);
  }

  std::vector<Matrix*> param_list() {
    return {&params_.lstm.w, &params_.lstm.bias, &params_.w_m};
  }

  std::vector<Matrix*> grad_list() {
    return {&grads_.d_w, &grads_.d_bias, &grads_.d_w_m};
  }

  void save(std::ostream& os) const { save_siamese(params_, os); }

  static SiameseModel load(std::istream& is) {
    return SiameseModel(load_siamese(is));
  }

 private:
  SiameseParams params_;
  SiameseGradients grads_;
};

class BaselineModel {
 public:
  explicit BaselineModel(BaselineParams params)
      : params_(std::move(params)), grads_(BaselineGradients::zeros(params_)) {}

  const BaselineParams& params() const { return params_; }

  Vector embed(const RowSequence& seq) const {
    return baseline_forward(params_, seq);
  }

  void zero_grads() { grads_ = BaselineGradients::zeros(params_); }

  double add_pair_grad(const PairExample& pair, double margin) {
    return baseline_pair_backward(params_, pair, margin, grads_);
  }

  std::vector<Matrix*> param_list() {
    std::vector<Matrix*> out;
    for (Matrix& w : params_.layers) out.push_back(&w);
    return out;
  }

  std::vector<Matrix*> grad_list() {
    std::vector<Matrix*> out;
    for (Matrix& g : grads_.d_layers) out.push_back(&g);
    return out;
  }

  void save(std::ostream& os) const { save_baseline(params_, os); }

  static BaselineModel load(std::istream& is) {
    return BaselineModel(load_baseline(is));
  }

 private:
  BaselineParams params_;
  BaselineGradients grads_;
};

}  // namespace reid
