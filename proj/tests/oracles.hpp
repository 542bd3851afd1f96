#pragma once

// Reference implementations used only by tests. Each one follows the plain
// definition of the quantity and shares no code path with the library.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <set>
#include <span>
#include <vector>

namespace rankmil::oracle {

/// O(n^2) Mann-Whitney pair count with half credit for ties.
inline double auc_pairs(std::span<const double> scores, std::span<const int> labels) {
  std::uint64_t twice = 0;
  std::uint64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) twice += 2;
      else if (scores[i] == scores[j]) twice += 1;
    }
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pairs));
}

/// Enumerates every distinct score as a threshold (predict positive when
/// score >= t), counting TP/FP from scratch at each one.
inline double ap_thresholds(std::span<const double> scores, std::span<const int> labels) {
  std::set<double, std::greater<>> thresholds(scores.begin(), scores.end());
  std::size_t n_pos = 0;
  for (int l : labels) n_pos += l == 1;
  double ap = 0.0;
  std::size_t prev_tp = 0;
  for (double t : thresholds) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (labels[i] == 1 ? tp : fp) += 1;
    }
    if (tp > prev_tp) {
      ap += static_cast<double>(tp - prev_tp) / static_cast<double>(n_pos) *
            (static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
    prev_tp = tp;
  }
  return ap;
}

inline double student_t_pdf(double t, double df) {
  const double log_norm = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
                          0.5 * std::log(df * std::numbers::pi);
  return std::exp(log_norm - (df + 1.0) / 2.0 * std::log1p(t * t / df));
}

/// Two-sided tail 1 - 2 * integral_0^|t| pdf, by composite Simpson's rule.
inline double t_two_sided_by_quadrature(double t, double df, int intervals = 200000) {
  const double a = 0.0;
  const double b = std::abs(t);
  const double h = (b - a) / intervals;
  double sum = student_t_pdf(a, df) + student_t_pdf(b, df);
  for (int i = 1; i < intervals; ++i) {
    sum += (i % 2 ? 4.0 : 2.0) * student_t_pdf(a + i * h, df);
  }
  return 1.0 - 2.0 * (h / 3.0 * sum);
}

inline double relu_hinge(double z) { return z > 0.0 ? z : 0.0; }

/// Direct formula evaluations of the ranking losses.
inline double triplet_ranking(double p, double n1, double n2, double a1, double a2) {
  return relu_hinge(a1 - (p - n1)) + relu_hinge(a1 - (p - n2)) +
         relu_hinge((n1 - n2) * (n1 - n2) - a2);
}

inline double pairwise(double p, double n, double a) { return relu_hinge(a - (p - n)); }

inline double quadruplet(double dij, double dik, double dlk, double a1, double a2) {
  return relu_hinge(dij * dij - dik * dik + a1) + relu_hinge(dij * dij - dlk * dlk + a2);
}

/// max(|a - b|) / max(max|a|, max|b|, floor): a relative error on the
/// infinity norm that stays meaningful when some entries are ~0.
inline double relative_error(std::span<const double> a, std::span<const double> b,
                             double floor = 1e-8) {
  double diff = 0.0;
  double scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return diff / scale;
}

}  // namespace rankmil::oracle
