#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "reid/dataset.hpp"
#include "reid/errors.hpp"
#include "reid/evaluation.hpp"
#include "reid/numerics.hpp"
#include "reid/siamese.hpp"

namespace reid {

struct TrainConfig {
  double margin = 0.5;
  std::size_t batch_size = 100;
  double rmsprop_decay = 0.95;
  double clip = 5.0;
  double lr = 0.0;                  // dataset dependent, no default
  double lr_decay_per_epoch = 1.0;  // dataset dependent
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  std::size_t hidden_dim = 0;  // dataset dependent
  std::uint64_t seed = 1;

  void validate() const {
    if (margin <= 0.0) throw UsageError("TrainConfig: margin must be > 0");
    if (batch_size < 1) throw UsageError("TrainConfig: batch_size must be >= 1");
    if (rmsprop_decay <= 0.0 || rmsprop_decay >= 1.0) {
      throw UsageError("TrainConfig: rmsprop_decay must be in (0,1)");
    }
    if (clip <= 0.0) throw UsageError("TrainConfig: clip must be > 0");
    if (lr <= 0.0) throw UsageError("TrainConfig: lr must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Pair mining
// ---------------------------------------------------------------------------

struct MiningResult {
  std::vector<PairExample> pairs;
  std::size_t skipped_identities = 0;  // identities with no cross-camera positive
};

// All cross-camera positive pairs per identity, plus per image its nearest
// wrong-identity images by Euclidean distance on concatenated raw rows,
// twice as many negatives as the image has positive pairs.
inline MiningResult mine_pairs(const FeatureSet& set,
                               const std::set<int>& identities,
                               std::uint64_t seed) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < set.items.size(); ++i) {
    if (identities.count(set.items[i].identity)) pool.push_back(i);
  }
  std::set<int> distinct;
  for (std::size_t i : pool) distinct.insert(set.items[i].identity);
  if (distinct.size() < 2) {
    throw DataError("mine_pairs: need at least 2 identities, got " +
                    std::to_string(distinct.size()));
  }

  std::vector<Vector> flat(pool.size());
  for (std::size_t k = 0; k < pool.size(); ++k) {
    flat[k] = concat_rows(set.items[pool[k]].seq);
  }

  MiningResult result;
  std::vector<std::size_t> positive_count(pool.size(), 0);
  std::set<int> matched_identities;
  for (std::size_t a = 0; a < pool.size(); ++a) {
    for (std::size_t b = a + 1; b < pool.size(); ++b) {
      const FeatureItem& ia = set.items[pool[a]];
      const FeatureItem& ib = set.items[pool[b]];
      if (ia.identity != ib.identity || ia.camera == ib.camera) continue;
      PairExample pair;
      pair.p = ia.seq;
      pair.q = ib.seq;
      pair.label = 0;
      result.pairs.push_back(std::move(pair));
      ++positive_count[a];
      ++positive_count[b];
      matched_identities.insert(ia.identity);
    }
  }
  result.skipped_identities = distinct.size() - matched_identities.size();

  for (std::size_t a = 0; a < pool.size(); ++a) {
    const std::size_t want = 2 * positive_count[a];
    if (want == 0) continue;
    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t b = 0; b < pool.size(); ++b) {
      if (set.items[pool[b]].identity == set.items[pool[a]].identity) continue;
      candidates.emplace_back(distance(flat[a], flat[b]), b);
    }
    const std::size_t take = std::min(want, candidates.size());
    std::partial_sort(candidates.begin(),
                      candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end());
    for (std::size_t k = 0; k < take; ++k) {
      PairExample pair;
      pair.p = set.items[pool[a]].seq;
      pair.q = set.items[pool[candidates[k].second]].seq;
      pair.label = 1;
      result.pairs.push_back(std::move(pair));
    }
  }

  SeededRng rng(seed);
  rng.shuffle(result.pairs);
  for (std::size_t i = 0; i < result.pairs.size(); ++i) {
    result.pairs[i].pair_index = i;
  }
  return result;
}

inline MiningResult mine_pairs(const FeatureSet& set, std::uint64_t seed) {
  std::set<int> all;
  for (const FeatureItem& item : set.items) all.insert(item.identity);
  return mine_pairs(set, all, seed);
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

inline void clip_gradients(Matrix& grads, double clip) {
  for (double& g : grads.raw()) g = std::min(std::max(g, -clip), clip);
}

struct RmspropState {
  std::vector<Matrix> cache;  // running averages of squared gradients
  double epsilon = 1e-8;

  static RmspropState init(const std::vector<Matrix*>& params) {
    RmspropState state;
    for (const Matrix* p : params) state.cache.emplace_back(p->rows(), p->cols());
    return state;
  }
};

// cache <- decay*cache + (1-decay)*g^2 ; param <- param - lr*g/(sqrt(cache)+eps)
inline void rmsprop_step(const std::vector<Matrix*>& params,
                         const std::vector<Matrix*>& grads, RmspropState& state,
                         double lr, double decay) {
  if (params.size() != grads.size() || params.size() != state.cache.size()) {
    throw ShapeError("rmsprop_step: parameter/gradient/state list sizes differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k];
    const Matrix& g = *grads[k];
    Matrix& c = state.cache[k];
    if (!p.same_shape(g) || !p.same_shape(c)) {
      throw ShapeError("rmsprop_step: shape mismatch " + p.shape_str() + " vs " +
                       g.shape_str());
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g.raw()[i];
      c.raw()[i] = decay * c.raw()[i] + (1.0 - decay) * gi * gi;
      p.raw()[i] -= lr * gi / (std::sqrt(c.raw()[i]) + state.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double val_rank1 = 0.0;
  double lr = 0.0;
};

inline nlohmann::json epoch_log_to_json(const EpochLog& log) {
  return nlohmann::json{{"epoch", log.epoch},
                        {"mean_loss", log.mean_loss},
                        {"val_rank1", log.val_rank1},
                        {"lr", log.lr}};
}

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 1-based
  double best_metric = 0.0;
};

// Cross-camera rank-1 over the items of the given identity partition; all
// items act as queries against the full partition as gallery.
template <typename Model>
double partition_rank1(const Model& model, const FeatureSet& set,
                       const std::set<int>& identities) {
  std::vector<const FeatureItem*> items;
  for (const FeatureItem& item : set.items) {
    if (identities.count(item.identity)) items.push_back(&item);
  }
  if (items.empty()) return 0.0;
  const ScoreMatrix sm = score_matrix(model, items, items);
  const CmcResult c = cmc(sm);
  return c.cmc.empty() ? 0.0 : c.cmc.front();
}

// The full training recipe: seeded per-epoch shuffling, mini batches,
// gradient clipping, RMSProp, learning-rate decay after every epoch, early
// stopping on validation rank-1, best-checkpoint return.
//
// With an empty validation identity set, -mean_loss stands in as the early
// stopping metric.
template <typename Model>
TrainResult train(Model& model, std::vector<PairExample> pairs,
                  const FeatureSet& data, const std::set<int>& val_identities,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (pairs.empty()) throw DataError("train: empty pair list");

  const std::vector<Matrix*> params = model.param_list();
  RmspropState state = RmspropState::init(params);
  SeededRng shuffle_rng(cfg.seed);

  TrainResult result;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_snapshot;
  for (const Matrix* p : params) best_snapshot.push_back(*p);

  double lr = cfg.lr;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(pairs);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, pairs.size());
      model.zero_grads();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        batch_loss += model.add_pair_grad(pairs[i], cfg.margin);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train: non-finite loss in batch " +
                           std::to_string(batch_index) + " of epoch " +
                           std::to_string(epoch));
      }
      loss_sum += batch_loss;
      const double inv = 1.0 / static_cast<double>(end - start);
      const std::vector<Matrix*> grads = model.grad_list();
      for (Matrix* g : grads) {
        for (double& v : g->raw()) v *= inv;
        clip_gradients(*g, cfg.clip);
      }
      rmsprop_step(params, grads, state, lr, cfg.rmsprop_decay);
      ++batch_index;
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(pairs.size());
    log.val_rank1 = val_identities.empty()
                        ? 0.0
                        : partition_rank1(model, data, val_identities);
    log.lr = lr;
    result.log.push_back(log);

    const double metric = val_identities.empty() ? -log.mean_loss : log.val_rank1;
    if (metric > best_metric) {
      best_metric = metric;
      result.best_epoch = epoch;
      for (std::size_t k = 0; k < params.size(); ++k) best_snapshot[k] = *params[k];
    }
    lr *= cfg.lr_decay_per_epoch;
    if (epoch - result.best_epoch >= cfg.patience) break;
  }

  for (std::size_t k = 0; k < params.size(); ++k) *params[k] = best_snapshot[k];
  result.best_metric = best_metric;
  return result;
}

}  // namespace reid
