#pragma once

// Synthetic multiple-instance bags with a controlled witness rate.
//
// One unit direction u is drawn per generator. Negative-bag patches and
// positive-bag background patches are N(0, I); each positive bag holds
// exactly ceil(witness_rate * K) witness patches drawn from N(shift * u, I)
// at random rows. Bag sizes K are uniform in [patches_min, patches_max].

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rankmil/data.hpp"
#include "rankmil/errors.hpp"
#include "rankmil/numerics.hpp"

namespace rankmil {

struct SynthConfig {
  std::size_t dim = 32;
  std::size_t n_pos = 20;
  std::size_t n_neg = 60;
  std::size_t patches_min = 300;
  std::size_t patches_max = 600;
  double witness_rate = 0.1;
  double shift = 1.5;
  std::uint64_t seed = 1;

  void validate() const {
    if (dim == 0) throw InvalidArgument("synth: dim must be >= 1");
    if (patches_min == 0) throw InvalidArgument("synth: patches_min must be >= 1");
    if (patches_min > patches_max) throw InvalidArgument("synth: patches_min > patches_max");
    if (!(witness_rate > 0.0 && witness_rate <= 1.0)) {
      throw InvalidArgument("synth: witness_rate must lie in (0, 1]");
    }
    if (!std::isfinite(shift) || shift < 0.0) throw InvalidArgument("synth: shift must be >= 0");
  }
};

/// Ground truth kept alongside a generated dataset.
struct SynthTruth {
  Vector direction;                                // unit vector u
  std::vector<std::vector<std::size_t>> witnesses;  // per bag, ascending rows; empty for negatives
};

/// Draws successive datasets that share one signal direction, so training,
/// validation and test sets come from the same distribution.
class SynthGenerator {
 public:
  explicit SynthGenerator(const SynthConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    direction_ = gauss_sample(rng_, cfg_.dim);
    double norm = 0.0;
    for (double v : direction_) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : direction_) v /= norm;
  }

  const Vector& direction() const noexcept { return direction_; }
  const SynthConfig& config() const noexcept { return cfg_; }

  /// Positives first, then negatives; ids are "<prefix>pos_NNNN" and
  /// "<prefix>neg_NNNN".
  Dataset draw(std::size_t n_pos, std::size_t n_neg, const std::string& prefix = "",
               SynthTruth* truth = nullptr) {
    Dataset ds{{}, cfg_.dim};
    if (truth) truth->direction = direction_;
    for (std::size_t i = 0; i < n_pos; ++i) {
      std::vector<std::size_t> witnesses;
      add_bag(ds, make_bag(prefix + "pos_" + pad(i), Label::Positive, witnesses));
      if (truth) truth->witnesses.push_back(std::move(witnesses));
    }
    for (std::size_t i = 0; i < n_neg; ++i) {
      std::vector<std::size_t> witnesses;
      add_bag(ds, make_bag(prefix + "neg_" + pad(i), Label::Negative, witnesses));
      if (truth) truth->witnesses.push_back(std::move(witnesses));
    }
    return ds;
  }

 private:
  static std::string pad(std::size_t i) {
    std::string s = std::to_string(i);
    return std::string(s.size() < 4 ? 4 - s.size() : 0, '0') + s;
  }

  Bag make_bag(std::string id, Label label, std::vector<std::size_t>& witnesses) {
    const std::size_t span = cfg_.patches_max - cfg_.patches_min + 1;
    const std::size_t k = cfg_.patches_min + static_cast<std::size_t>(rng_.below(span));
    Matrix features(k, cfg_.dim);
    for (auto& v : features.data()) v = rng_.gauss();
    if (label == Label::Positive) {
      const std::size_t n_wit = std::min(k, ceil_fraction(cfg_.witness_rate, k));
      // Partial Fisher-Yates picks the witness rows.
      std::vector<std::size_t> rows(k);
      for (std::size_t i = 0; i < k; ++i) rows[i] = i;
      for (std::size_t i = 0; i < n_wit; ++i) {
        const auto j = i + static_cast<std::size_t>(rng_.below(k - i));
        std::swap(rows[i], rows[j]);
      }
      witnesses.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_wit));
      std::sort(witnesses.begin(), witnesses.end());
      for (auto r : witnesses) {
        auto row = features.row(r);
        for (std::size_t c = 0; c < cfg_.dim; ++c) row[c] += cfg_.shift * direction_[c];
      }
    }
    return Bag{std::move(id), label, std::move(features)};
  }

  SynthConfig cfg_;
  Rng rng_;
  Vector direction_;
};

inline Dataset generate(const SynthConfig& cfg) {
  SynthGenerator gen(cfg);
  return gen.draw(cfg.n_pos, cfg.n_neg);
}

inline std::pair<Dataset, SynthTruth> generate_with_truth(const SynthConfig& cfg) {
  SynthGenerator gen(cfg);
  SynthTruth truth;
  auto ds = gen.draw(cfg.n_pos, cfg.n_neg, "", &truth);
  return {std::move(ds), std::move(truth)};
}

/// One "<id>.milf" file per bag plus manifest.csv, rows in bag order.
/// Creates the directory if needed.
inline Manifest write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  Manifest manifest;
  for (const auto& bag : ds.bags) {
    const std::string file = bag.id + ".milf";
    write_feature_file(dir / file, bag.features);
    manifest.rows.push_back({bag.id, bag.label, file});
  }
  detail::write_text(dir / "manifest.csv", format_manifest(manifest));
  return manifest;
}

}  // namespace rankmil
