#pragma once

// Instance scorer and bag aggregation.
//
// Each patch feature vector f is scored by a one-hidden-layer MLP
//   s(f) = sigmoid(w2 . relu(W1 f + b1) + b2)
// and a bag's score is the mean of its top max(1, ceil(fraction * K)) patch
// scores. backward_bag treats the top-K selection as fixed, which is the
// exact gradient wherever the selection is locally constant.
//
// Checkpoint ("MILM"), all little-endian:
//   offset 0   4 bytes  magic "MILM"
//   offset 4   u32      format version (1)
//   offset 8   u32      D
//   offset 12  u32      H
//   offset 16  f64      W1 (H x D, row-major), then b1 (H), w2 (H), b2 (1)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rankmil/data.hpp"
#include "rankmil/detail/bytes.hpp"
#include "rankmil/errors.hpp"
#include "rankmil/numerics.hpp"

namespace rankmil {

struct ModelParams {
  Matrix w1;  // H x D
  Vector b1;  // H
  Vector w2;  // H
  double b2 = 0.0;

  std::size_t dim() const noexcept { return w1.cols(); }
  std::size_t hidden() const noexcept { return w1.rows(); }
  std::size_t size() const noexcept { return w1.data().size() + b1.size() + w2.size() + 1; }

  static ModelParams zeros(std::size_t dim, std::size_t hidden) {
    return {Matrix(hidden, dim), Vector(hidden, 0.0), Vector(hidden, 0.0), 0.0};
  }

  /// Parameter blocks in checkpoint order: W1, b1, w2, b2.
  std::array<std::span<double>, 4> blocks() noexcept {
    return {w1.data(), std::span<double>(b1), std::span<double>(w2), std::span<double>(&b2, 1)};
  }
  std::array<std::span<const double>, 4> blocks() const noexcept {
    return {w1.data(), std::span<const double>(b1), std::span<const double>(w2),
            std::span<const double>(&b2, 1)};
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Gradients have the same shape as the parameters they differentiate.
using ParamGradient = ModelParams;

inline Vector flatten(const ModelParams& p) {
  Vector out;
  out.reserve(p.size());
  for (auto block : p.blocks()) out.insert(out.end(), block.begin(), block.end());
  return out;
}

inline ModelParams unflatten(std::span<const double> flat, std::size_t dim, std::size_t hidden) {
  auto p = ModelParams::zeros(dim, hidden);
  if (flat.size() != p.size()) {
    throw InvalidArgument("unflatten: expected " + std::to_string(p.size()) + " values, got " +
                          std::to_string(flat.size()));
  }
  std::size_t offset = 0;
  for (auto block : p.blocks()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), block.size(), block.begin());
    offset += block.size();
  }
  return p;
}

/// acc += scale * g, block by block.
inline void accumulate(ParamGradient& acc, const ParamGradient& g, double scale = 1.0) {
  auto dst = acc.blocks();
  const auto src = g.blocks();
  for (std::size_t b = 0; b < dst.size(); ++b) {
    if (dst[b].size() != src[b].size()) throw InvalidArgument("accumulate: shape mismatch");
    for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += scale * src[b][i];
  }
}

/// Glorot-uniform weights, zero biases.
inline ModelParams init_params(std::size_t dim, std::size_t hidden, Rng& rng) {
  if (dim == 0 || hidden == 0) throw InvalidArgument("init_params: D and H must be >= 1");
  auto p = ModelParams::zeros(dim, hidden);
  const double bound1 = std::sqrt(6.0 / static_cast<double>(dim + hidden));
  for (auto& w : p.w1.data()) w = rng.uniform(-bound1, bound1);
  const double bound2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
  for (auto& w : p.w2) w = rng.uniform(-bound2, bound2);
  return p;
}

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

inline void check_dim(const ModelParams& p, std::size_t dim, std::string_view op) {
  if (p.dim() != dim) {
    throw InvalidArgument(std::string(op) + ": model expects D=" + std::to_string(p.dim()) +
                          " but input has D=" + std::to_string(dim));
  }
}

/// Forward pass for one patch, keeping the hidden pre-activations.
inline double forward_patch(const ModelParams& p, std::span<const double> f, Vector& pre) {
  pre.resize(p.hidden());
  double out = p.b2;
  for (std::size_t h = 0; h < p.hidden(); ++h) {
    const auto row = p.w1.row(h);
    double z = p.b1[h];
    for (std::size_t c = 0; c < row.size(); ++c) z += row[c] * f[c];
    pre[h] = z;
    if (z > 0.0) out += p.w2[h] * z;
  }
  return sigmoid(out);
}

}  // namespace detail

inline double score_patch(const ModelParams& p, std::span<const double> f) {
  detail::check_dim(p, f.size(), "score_patch");
  Vector pre;
  return detail::forward_patch(p, f, pre);
}

struct TopK {
  double score = 0.0;
  std::vector<std::size_t> indices;  // descending score, ties by lower index
};

/// Mean of the m = max(1, ceil(fraction * K)) largest scores.
inline TopK aggregate_topk(std::span<const double> patch_scores, double fraction) {
  if (patch_scores.empty()) throw InvalidArgument("aggregate_topk: empty score vector");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidArgument("aggregate_topk: fraction must lie in (0, 1]");
  }
  const std::size_t k = patch_scores.size();
  const std::size_t m = std::clamp<std::size_t>(ceil_fraction(fraction, k), 1, k);
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (patch_scores[a] != patch_scores[b]) return patch_scores[a] > patch_scores[b];
                      return a < b;
                    });
  order.resize(m);
  double sum = 0.0;
  for (auto i : order) sum += patch_scores[i];
  return {sum / static_cast<double>(m), std::move(order)};
}

struct BagScore {
  std::string bag_id;
  double score = 0.0;
  Vector patch_scores;
  std::vector<std::size_t> topk_indices;
};

inline BagScore score_bag(const ModelParams& p, const Bag& bag, double fraction) {
  detail::check_dim(p, bag.dim(), "score_bag");
  BagScore out;
  out.bag_id = bag.id;
  out.patch_scores.resize(bag.num_patches());
  Vector pre;
  for (std::size_t r = 0; r < bag.num_patches(); ++r) {
    out.patch_scores[r] = detail::forward_patch(p, bag.features.row(r), pre);
  }
  auto top = aggregate_topk(out.patch_scores, fraction);
  out.score = top.score;
  out.topk_indices = std::move(top.indices);
  return out;
}

namespace detail {

/// Adds the gradient contributed by an already-scored bag into `grad`.
inline void accumulate_bag_gradient(const ModelParams& p, const Bag& bag, const BagScore& scored,
                                    double upstream, ParamGradient& grad) {
  if (upstream == 0.0) return;
  const double per_patch = upstream / static_cast<double>(scored.topk_indices.size());
  Vector pre;
  // Ascending patch order keeps accumulation order independent of ranking.
  auto selected = scored.topk_indices;
  std::sort(selected.begin(), selected.end());
  for (auto r : selected) {
    const auto f = bag.features.row(r);
    const double s = forward_patch(p, f, pre);
    const double d_out = per_patch * s * (1.0 - s);
    grad.b2 += d_out;
    for (std::size_t h = 0; h < p.hidden(); ++h) {
      if (!(pre[h] > 0.0)) continue;
      grad.w2[h] += d_out * pre[h];
      const double d_pre = d_out * p.w2[h];
      grad.b1[h] += d_pre;
      auto row = grad.w1.row(h);
      for (std::size_t c = 0; c < f.size(); ++c) row[c] += d_pre * f[c];
    }
  }
}

}  // namespace detail

/// Gradient of (loss o score_bag) with respect to the parameters, given
/// upstream = d loss / d bag score. Only the selected patches contribute,
/// each weighted 1/m.
inline ParamGradient backward_bag(const ModelParams& p, const Bag& bag, double fraction,
                                  double upstream) {
  detail::check_dim(p, bag.dim(), "backward_bag");
  auto grad = ModelParams::zeros(p.dim(), p.hidden());
  if (upstream == 0.0) return grad;
  detail::accumulate_bag_gradient(p, bag, score_bag(p, bag, fraction), upstream, grad);
  return grad;
}

inline constexpr char kCheckpointMagic[4] = {'M', 'I', 'L', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 16;

inline std::vector<unsigned char> encode_checkpoint(const ModelParams& p) {
  std::vector<unsigned char> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(p.dim()));
  detail::put_u32(out, static_cast<std::uint32_t>(p.hidden()));
  for (auto block : p.blocks()) {
    for (double v : block) detail::put_f64(out, v);
  }
  return out;
}

inline ModelParams decode_checkpoint(std::span<const unsigned char> bytes, const std::string& where) {
  if (bytes.size() < kCheckpointHeaderBytes) {
    throw FormatError(where + ": truncated checkpoint header at byte " + std::to_string(bytes.size()));
  }
  if (!std::equal(std::begin(kCheckpointMagic), std::end(kCheckpointMagic), bytes.begin())) {
    throw FormatError(where + ": bad checkpoint magic at byte 0 (expected \"MILM\")");
  }
  const auto version = detail::get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw FormatError(where + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t dim = detail::get_u32(bytes, 8);
  const std::size_t hidden = detail::get_u32(bytes, 12);
  if (dim == 0 || hidden == 0) throw FormatError(where + ": checkpoint declares D or H of 0");
  auto p = ModelParams::zeros(dim, hidden);
  const std::size_t expected = kCheckpointHeaderBytes + 8 * p.size();
  if (bytes.size() != expected) {
    throw FormatError(where + ": checkpoint is " + std::to_string(bytes.size()) +
                      " bytes, header implies " + std::to_string(expected));
  }
  std::size_t offset = kCheckpointHeaderBytes;
  for (auto block : p.blocks()) {
    for (auto& v : block) {
      v = detail::get_f64(bytes, offset);
      if (!std::isfinite(v)) {
        throw FormatError(where + ": non-finite parameter at byte " + std::to_string(offset));
      }
      offset += 8;
    }
  }
  return p;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& p) {
  detail::write_file(path, encode_checkpoint(p));
}

inline ModelParams load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path), path.string());
}

}  // namespace rankmil
