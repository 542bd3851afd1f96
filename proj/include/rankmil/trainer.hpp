#pragma once

// Training loops.
//
// Triplet ranking: an epoch is N_pos iterations. Each iteration takes the
// next positive from a per-epoch shuffle, draws two distinct negatives
// uniformly, scores the three bags, applies triplet_ranking_loss to the bag
// scores and takes one optimizer step on the summed gradient.
//
// Pairwise ranking follows the same schedule with a single negative.
// Cross-entropy and MSE visit every bag once per epoch in shuffled order.
//
// After every epoch the validation AUC is computed; the parameters of the best
// epoch (earliest on ties) are kept and training stops after `patience`
// epochs without improvement.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rankmil/data.hpp"
#include "rankmil/errors.hpp"
#include "rankmil/losses.hpp"
#include "rankmil/metrics.hpp"
#include "rankmil/model.hpp"
#include "rankmil/numerics.hpp"

namespace rankmil {

enum class OptimizerKind { SGD, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  LossConfig loss;
  std::size_t hidden = 128;
  double topk_fraction = 0.1;
  double learning_rate = 1e-3;
  std::size_t epochs = 200;
  std::uint64_t seed = 1;
  std::size_t patience = 20;
  OptimizerConfig optimizer;

  void validate() const {
    loss.validate();
    if (hidden == 0) throw InvalidArgument("train: hidden width must be >= 1");
    if (!(topk_fraction > 0.0 && topk_fraction <= 1.0)) {
      throw InvalidArgument("train: topk fraction must lie in (0, 1]");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw InvalidArgument("train: learning rate must be > 0");
    }
    if (epochs == 0) throw InvalidArgument("train: epochs must be >= 1");
    if (optimizer.kind == OptimizerKind::Adam &&
        !(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 &&
          optimizer.beta2 < 1.0 && optimizer.epsilon > 0.0)) {
      throw InvalidArgument("train: Adam needs beta1, beta2 in [0, 1) and epsilon > 0");
    }
  }
};

/// Plain SGD or Adam with bias correction, over the flattened parameters.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, double learning_rate, std::size_t num_params)
      : cfg_(cfg), lr_(learning_rate) {
    if (cfg_.kind == OptimizerKind::Adam) {
      m_.assign(num_params, 0.0);
      v_.assign(num_params, 0.0);
    }
  }

  void step(ModelParams& params, const ParamGradient& grad) {
    auto dst = params.blocks();
    const auto src = grad.blocks();
    if (cfg_.kind == OptimizerKind::SGD) {
      for (std::size_t b = 0; b < dst.size(); ++b) {
        for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] -= lr_ * src[b][i];
      }
      return;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::size_t k = 0;
    for (std::size_t b = 0; b < dst.size(); ++b) {
      for (std::size_t i = 0; i < dst[b].size(); ++i, ++k) {
        const double g = src[b][i];
        m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * g;
        v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = m_[k] / c1;
        const double v_hat = v_[k] / c2;
        dst[b][i] -= lr_ * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
      }
    }
  }

 private:
  OptimizerConfig cfg_;
  double lr_;
  std::uint64_t t_ = 0;
  Vector m_;
  Vector v_;
};

struct Triplet {
  std::size_t positive;
  std::size_t negative1;
  std::size_t negative2;
};

/// Positives cycle without replacement, reshuffled at the start of every
/// pass; negatives are drawn uniformly without replacement within a triplet.
class TripletSampler {
 public:
  /// `min_negatives` is 2 for triplets; pairwise training passes 1.
  explicit TripletSampler(const Dataset& ds, std::size_t min_negatives = 2)
      : positives_(ds.indices_of(Label::Positive)), negatives_(ds.indices_of(Label::Negative)) {
    if (positives_.empty()) throw DataError("triplet sampling needs at least one positive bag");
    if (negatives_.size() < std::max<std::size_t>(min_negatives, 1)) {
      throw DataError("sampling needs at least " + std::to_string(min_negatives) +
                      " negative bags, dataset has " + std::to_string(negatives_.size()));
    }
  }

  std::size_t positives_per_epoch() const noexcept { return positives_.size(); }

  std::size_t next_positive(Rng& rng) {
    if (cursor_ == 0) rng.shuffle(positives_);
    const auto p = positives_[cursor_];
    cursor_ = (cursor_ + 1) % positives_.size();
    return p;
  }

  Triplet next(Rng& rng) {
    const auto n = negatives_.size();
    if (n < 2) throw DataError("triplet sampling needs at least two negative bags");
    const auto p = next_positive(rng);
    const auto i = static_cast<std::size_t>(rng.below(n));
    auto j = static_cast<std::size_t>(rng.below(n - 1));
    if (j >= i) ++j;
    return {p, negatives_[i], negatives_[j]};
  }

  std::size_t next_negative(Rng& rng) {
    return negatives_[static_cast<std::size_t>(rng.below(negatives_.size()))];
  }

 private:
  std::vector<std::size_t> positives_;
  std::vector<std::size_t> negatives_;
  std::size_t cursor_ = 0;
};

inline std::vector<BagScore> score_dataset(const ModelParams& params, const Dataset& ds,
                                           double fraction) {
  std::vector<BagScore> out;
  out.reserve(ds.size());
  for (const auto& bag : ds.bags) out.push_back(score_bag(params, bag, fraction));
  return out;
}

inline std::vector<int> labels_of(const Dataset& ds) {
  std::vector<int> out;
  out.reserve(ds.size());
  for (const auto& b : ds.bags) out.push_back(to_int(b.label));
  return out;
}

inline double dataset_auc(const ModelParams& params, const Dataset& ds, double fraction) {
  const auto scored = score_dataset(params, ds, fraction);
  Vector scores;
  scores.reserve(scored.size());
  for (const auto& s : scored) scores.push_back(s.score);
  return auc(scores, labels_of(ds));
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_auc = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 1-based epoch number of the kept parameters
  double best_val_auc = 0.0;
  ModelParams params;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

namespace detail {

inline void require_classes(const Dataset& ds, std::size_t min_pos, std::size_t min_neg,
                            const char* which) {
  const auto pos = ds.count(Label::Positive);
  const auto neg = ds.count(Label::Negative);
  if (pos < min_pos || neg < min_neg) {
    throw DataError(std::string(which) + " set needs >= " + std::to_string(min_pos) +
                    " positive and >= " + std::to_string(min_neg) + " negative bags, has " +
                    std::to_string(pos) + " and " + std::to_string(neg));
  }
}

class Epoch {
 public:
  explicit Epoch(std::size_t epoch) : epoch_(epoch) {}

  /// Records one iteration's loss, aborting on divergence.
  void record(double value, std::size_t iteration) {
    if (!std::isfinite(value)) diverged(iteration);
    sum_ += value;
    ++count_;
  }

  [[noreturn]] void diverged(std::size_t iteration, const std::string& why = "non-finite loss") const {
    throw TrainingError("training diverged at epoch " + std::to_string(epoch_) + ", iteration " +
                        std::to_string(iteration) + ": " + why);
  }

  double mean() const noexcept { return count_ ? sum_ / static_cast<double>(count_) : 0.0; }

 private:
  std::size_t epoch_;
  double sum_ = 0.0;
  std::size_t count_ = 0;
};

}  // namespace detail

/// One optimizer state plus sampling stream over a fixed training set.
/// train() drives it epoch by epoch; it is exposed so a single epoch can be
/// run from chosen parameters.
class Trainer {
 public:
  Trainer(const Dataset& train_set, const TrainConfig& cfg, ModelParams params, Rng rng)
      : data_(train_set), cfg_(cfg), params_(std::move(params)), rng_(std::move(rng)),
        opt_(cfg.optimizer, cfg.learning_rate, params_.size()),
        grad_(ModelParams::zeros(params_.dim(), params_.hidden())) {
    cfg_.validate();
    const auto variant = cfg_.loss.variant;
    if (variant == LossVariant::TripletEmbedding || variant == LossVariant::Quadruplet) {
      throw InvalidArgument("train: loss '" + std::string(to_string(variant)) +
                            "' does not operate on bag scores");
    }
    if (data_.empty()) throw DataError("training set is empty");
    if (data_.dim != params_.dim()) {
      throw DataError("training D=" + std::to_string(data_.dim) + " but model D=" +
                      std::to_string(params_.dim()));
    }
    detail::require_classes(data_, 1, variant == LossVariant::TripletRanking ? 2 : 1, "training");
    if (variant == LossVariant::TripletRanking) sampler_.emplace(data_, 2);
    if (variant == LossVariant::PairwiseRanking) sampler_.emplace(data_, 1);
    order_.resize(data_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  }

  const ModelParams& params() const noexcept { return params_; }

  /// Runs one epoch and returns the mean per-iteration loss.
  double run_epoch() {
    ++epoch_;
    detail::Epoch tracker(epoch_);
    try {
      switch (cfg_.loss.variant) {
        case LossVariant::TripletRanking: triplet_epoch(tracker); break;
        case LossVariant::PairwiseRanking: pairwise_epoch(tracker); break;
        default: single_bag_epoch(tracker); break;
      }
    } catch (const NumericError& e) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch_) + ": " + e.what());
    }
    return tracker.mean();
  }

 private:
  BagScore checked_score(std::size_t bag, const detail::Epoch& tracker, std::size_t it) const {
    auto s = score_bag(params_, data_.bags[bag], cfg_.topk_fraction);
    if (!std::isfinite(s.score)) tracker.diverged(it, "non-finite score for bag '" + s.bag_id + "'");
    return s;
  }

  void clear_grad() {
    for (auto block : grad_.blocks()) std::fill(block.begin(), block.end(), 0.0);
  }

  void add_grad(std::size_t bag, const BagScore& s, double upstream) {
    detail::accumulate_bag_gradient(params_, data_.bags[bag], s, upstream, grad_);
  }

  void triplet_epoch(detail::Epoch& tracker) {
    for (std::size_t it = 0; it < sampler_->positives_per_epoch(); ++it) {
      const auto t = sampler_->next(rng_);
      const auto sp = checked_score(t.positive, tracker, it);
      const auto s1 = checked_score(t.negative1, tracker, it);
      const auto s2 = checked_score(t.negative2, tracker, it);
      const auto loss = triplet_ranking_loss(sp.score, s1.score, s2.score, cfg_.loss);
      tracker.record(loss.value, it);
      clear_grad();
      add_grad(t.positive, sp, loss.grads[0]);
      add_grad(t.negative1, s1, loss.grads[1]);
      add_grad(t.negative2, s2, loss.grads[2]);
      opt_.step(params_, grad_);
    }
  }

  void pairwise_epoch(detail::Epoch& tracker) {
    for (std::size_t it = 0; it < sampler_->positives_per_epoch(); ++it) {
      const auto p = sampler_->next_positive(rng_);
      const auto n = sampler_->next_negative(rng_);
      const auto sp = checked_score(p, tracker, it);
      const auto sn = checked_score(n, tracker, it);
      const auto loss = pairwise_ranking_loss(sp.score, sn.score, cfg_.loss);
      tracker.record(loss.value, it);
      clear_grad();
      add_grad(p, sp, loss.grads[0]);
      add_grad(n, sn, loss.grads[1]);
      opt_.step(params_, grad_);
    }
  }

  void single_bag_epoch(detail::Epoch& tracker) {
    rng_.shuffle(order_);
    for (std::size_t it = 0; it < order_.size(); ++it) {
      const auto b = order_[it];
      const auto s = checked_score(b, tracker, it);
      const int y = to_int(data_.bags[b].label);
      const auto loss = cfg_.loss.variant == LossVariant::CrossEntropy ? bag_bce_loss(s.score, y)
                                                                       : bag_mse_loss(s.score, y);
      tracker.record(loss.value, it);
      clear_grad();
      add_grad(b, s, loss.grads[0]);
      opt_.step(params_, grad_);
    }
  }

  const Dataset& data_;
  TrainConfig cfg_;
  ModelParams params_;
  Rng rng_;
  Optimizer opt_;
  ParamGradient grad_;
  std::optional<TripletSampler> sampler_;
  std::vector<std::size_t> order_;
  std::size_t epoch_ = 0;
};

inline TrainReport train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (!val_set.empty() && !train_set.empty() && val_set.dim != train_set.dim) {
    throw DataError("training D=" + std::to_string(train_set.dim) + " but validation D=" +
                    std::to_string(val_set.dim));
  }
  detail::require_classes(val_set, 1, 1, "validation");
  if (train_set.empty()) throw DataError("training set is empty");

  // Initialization and sampling share one stream: init draws first.
  Rng rng(cfg.seed);
  auto init = init_params(train_set.dim, cfg.hidden, rng);
  Trainer trainer(train_set, cfg, std::move(init), std::move(rng));

  TrainReport report;
  report.best_val_auc = -1.0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double loss = trainer.run_epoch();
    const double val_auc = dataset_auc(trainer.params(), val_set, cfg.topk_fraction);
    report.history.push_back({epoch, loss, val_auc});
    if (val_auc > report.best_val_auc) {
      report.best_val_auc = val_auc;
      report.best_epoch = epoch;
      report.params = trainer.params();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return report;
}

/// Training log: header "epoch,train_loss,val_auc", one row per epoch, then
/// "best_epoch,<n>,<auc>". Values use 17 significant digits.
inline std::string format_train_log(const TrainReport& report) {
  std::string out = "epoch,train_loss,val_auc\n";
  char buf[128];
  for (const auto& r : report.history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_auc);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "best_epoch,%zu,%.17g\n", report.best_epoch, report.best_val_auc);
  out += buf;
  return out;
}

}  // namespace rankmil
