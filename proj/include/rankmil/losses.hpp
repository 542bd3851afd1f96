#pragma once

// Ranking losses over bag scores and embeddings, plus the two regression
// style bag objectives. Every function returns the value together with its
// exact (sub)gradient. Hinges use d[z]+/dz = 1 for z > 0 and 0 otherwise,
// including at z == 0.

#include <cmath>
#include <span>
#include <string>
#include <string_view>

#include "rankmil/errors.hpp"
#include "rankmil/numerics.hpp"

namespace rankmil {

enum class LossVariant {
  TripletRanking,
  PairwiseRanking,
  TripletEmbedding,
  Quadruplet,
  CrossEntropy,
  MSE,
};

inline std::string_view to_string(LossVariant v) noexcept {
  switch (v) {
    case LossVariant::TripletRanking: return "triplet-ranking";
    case LossVariant::PairwiseRanking: return "pairwise";
    case LossVariant::TripletEmbedding: return "triplet-embedding";
    case LossVariant::Quadruplet: return "quadruplet";
    case LossVariant::CrossEntropy: return "ce";
    case LossVariant::MSE: return "mse";
  }
  return "unknown";
}

struct LossConfig {
  LossVariant variant = LossVariant::TripletRanking;
  // Inter-class margin: the positive must beat each negative by alpha1.
  double alpha1 = 0.3;
  // Bound on the squared spread of the two negative scores.
  double alpha2 = 0.01;

  void validate() const {
    if (!std::isfinite(alpha1) || alpha1 < 0.0 || !std::isfinite(alpha2) || alpha2 < 0.0) {
      throw InvalidArgument("loss margins must be finite and non-negative (alpha1=" +
                            std::to_string(alpha1) + ", alpha2=" + std::to_string(alpha2) + ")");
    }
  }
};

struct LossOutput {
  double value = 0.0;
  Vector grads;
};

inline constexpr double kBceEpsilon = 1e-7;

namespace detail {

inline double hinge(double z) noexcept { return z > 0.0 ? z : 0.0; }
inline double hinge_slope(double z) noexcept { return z > 0.0 ? 1.0 : 0.0; }

inline void expect_variant(const LossConfig& cfg, LossVariant want, std::string_view op) {
  cfg.validate();
  if (cfg.variant != want) {
    throw InvalidArgument(std::string(op) + ": config variant is '" +
                          std::string(to_string(cfg.variant)) + "', expected '" +
                          std::string(to_string(want)) + "'");
  }
}

inline void expect_finite(std::initializer_list<double> xs, std::string_view op) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

}  // namespace detail

/// Triplet ranking loss over one positive and two negative scores:
///
///   [a1 - (p - n1)]+ + [a1 - (p - n2)]+ + [(n1 - n2)^2 - a2]+
///
/// The first two terms push the positive above both negatives by a1, the
/// third pulls the negatives within sqrt(a2) of each other.
/// grads = {d/dp, d/dn1, d/dn2}.
inline LossOutput triplet_ranking_loss(double x_pos, double x_neg1, double x_neg2,
                                       const LossConfig& cfg) {
  detail::expect_variant(cfg, LossVariant::TripletRanking, "triplet_ranking_loss");
  detail::expect_finite({x_pos, x_neg1, x_neg2}, "triplet_ranking_loss");
  const double z1 = cfg.alpha1 - (x_pos - x_neg1);
  const double z2 = cfg.alpha1 - (x_pos - x_neg2);
  const double spread = x_neg1 - x_neg2;
  const double z3 = spread * spread - cfg.alpha2;

  const double g1 = detail::hinge_slope(z1);
  const double g2 = detail::hinge_slope(z2);
  const double g3 = detail::hinge_slope(z3);
  LossOutput out;
  out.value = detail::hinge(z1) + detail::hinge(z2) + detail::hinge(z3);
  out.grads = {-g1 - g2, g1 + 2.0 * spread * g3, g2 - 2.0 * spread * g3};
  return out;
}

/// [alpha - (p - n)]+ with alpha = cfg.alpha1. grads = {d/dp, d/dn}.
inline LossOutput pairwise_ranking_loss(double x_pos, double x_neg, const LossConfig& cfg) {
  detail::expect_variant(cfg, LossVariant::PairwiseRanking, "pairwise_ranking_loss");
  detail::expect_finite({x_pos, x_neg}, "pairwise_ranking_loss");
  const double z = cfg.alpha1 - (x_pos - x_neg);
  const double g = detail::hinge_slope(z);
  return {detail::hinge(z), {-g, g}};
}

/// Embedding triplet loss [|a - p|^2 - |a - n|^2 + alpha]+ with squared
/// Euclidean distances and alpha = cfg.alpha1. grads is the concatenation
/// {d/da, d/dp, d/dn}, each of length D.
inline LossOutput triplet_embedding_loss(std::span<const double> anchor,
                                         std::span<const double> positive,
                                         std::span<const double> negative, const LossConfig& cfg) {
  detail::expect_variant(cfg, LossVariant::TripletEmbedding, "triplet_embedding_loss");
  const std::size_t d = anchor.size();
  if (positive.size() != d || negative.size() != d) {
    throw InvalidArgument("triplet_embedding_loss: dimension mismatch (" + std::to_string(d) +
                          ", " + std::to_string(positive.size()) + ", " +
                          std::to_string(negative.size()) + ")");
  }
  if (!all_finite(anchor) || !all_finite(positive) || !all_finite(negative)) {
    throw NumericError("triplet_embedding_loss: non-finite input");
  }
  double d_pos = 0.0;
  double d_neg = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double ap = anchor[i] - positive[i];
    const double an = anchor[i] - negative[i];
    d_pos += ap * ap;
    d_neg += an * an;
  }
  const double z = d_pos - d_neg + cfg.alpha1;
  const double g = detail::hinge_slope(z);
  LossOutput out;
  out.value = detail::hinge(z);
  out.grads.assign(3 * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    out.grads[i] = g * 2.0 * (negative[i] - positive[i]);
    out.grads[d + i] = g * -2.0 * (anchor[i] - positive[i]);
    out.grads[2 * d + i] = g * 2.0 * (anchor[i] - negative[i]);
  }
  return out;
}

/// Quadruplet loss over precomputed distances:
///
///   [d_ij^2 - d_ik^2 + a1]+ + [d_ij^2 - d_lk^2 + a2]+
///
/// where (i, j) share a class and k, l come from other classes.
/// grads = {d/d_ij, d/d_ik, d/d_lk}.
inline LossOutput quadruplet_loss(double d_ij, double d_ik, double d_lk, const LossConfig& cfg) {
  detail::expect_variant(cfg, LossVariant::Quadruplet, "quadruplet_loss");
  detail::expect_finite({d_ij, d_ik, d_lk}, "quadruplet_loss");
  if (d_ij < 0.0 || d_ik < 0.0 || d_lk < 0.0) {
    throw InvalidArgument("quadruplet_loss: distances must be non-negative");
  }
  const double z1 = d_ij * d_ij - d_ik * d_ik + cfg.alpha1;
  const double z2 = d_ij * d_ij - d_lk * d_lk + cfg.alpha2;
  const double g1 = detail::hinge_slope(z1);
  const double g2 = detail::hinge_slope(z2);
  return {detail::hinge(z1) + detail::hinge(z2),
          {2.0 * d_ij * (g1 + g2), -2.0 * d_ik * g1, -2.0 * d_lk * g2}};
}

/// Euclidean distance, the default metric feeding quadruplet_loss.
inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("euclidean_distance: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

/// Binary cross-entropy on a bag score clamped to [eps, 1 - eps].
/// grads = {d/ds} evaluated at the clamped score.
inline LossOutput bag_bce_loss(double score, int label) {
  if (label != 0 && label != 1) throw InvalidArgument("bag_bce_loss: label must be 0 or 1");
  if (std::isnan(score)) throw NumericError("bag_bce_loss: NaN score");
  const double s = std::clamp(score, kBceEpsilon, 1.0 - kBceEpsilon);
  const double y = label;
  const double value = -(y * std::log(s) + (1.0 - y) * std::log(1.0 - s));
  return {value, {(s - y) / (s * (1.0 - s))}};
}

/// (s - y)^2. grads = {2 (s - y)}.
inline LossOutput bag_mse_loss(double score, int label) {
  if (label != 0 && label != 1) throw InvalidArgument("bag_mse_loss: label must be 0 or 1");
  if (!std::isfinite(score)) throw NumericError("bag_mse_loss: non-finite score");
  const double r = score - label;
  return {r * r, {2.0 * r}};
}

}  // namespace rankmil
