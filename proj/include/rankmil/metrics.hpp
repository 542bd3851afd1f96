#pragma once

// Ranking metrics and correlation statistics.
//
// AUC uses the Mann-Whitney convention: each (positive, negative) pair scores
// 1 if the positive is higher, 1/2 on a tie. Tied scores form one threshold
// in both the ROC and PR curves, and AP is the step-wise sum
// sum_k (R_k - R_{k-1}) P_k over those thresholds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rankmil/detail/bytes.hpp"
#include "rankmil/detail/csv.hpp"
#include "rankmil/errors.hpp"
#include "rankmil/model.hpp"

namespace rankmil {

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

struct EvalReport {
  double auc = 0.0;
  double ap = 0.0;
  std::vector<CurvePoint> roc_points;  // (fpr, tpr), from (0,0) to (1,1)
  std::vector<CurvePoint> pr_points;   // (recall, precision), one per threshold
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

namespace detail {

struct ThresholdGroup {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

/// Groups of tied scores in descending score order.
inline std::vector<ThresholdGroup> descending_groups(std::span<const double> scores,
                                                     std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw InvalidArgument("scores and labels differ in length (" + std::to_string(scores.size()) +
                          " vs " + std::to_string(labels.size()) + ")");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("labels must be 0 or 1");
    if (std::isnan(scores[i])) throw NumericError("NaN score at index " + std::to_string(i));
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<ThresholdGroup> groups;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || scores[order[i]] != scores[order[i - 1]]) groups.emplace_back();
    (labels[order[i]] == 1 ? groups.back().pos : groups.back().neg) += 1;
  }
  return groups;
}

inline std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  return {pos, labels.size() - pos};
}

}  // namespace detail

inline double auc(std::span<const double> scores, std::span<const int> labels) {
  const auto groups = detail::descending_groups(scores, labels);
  const auto [n_pos, n_neg] = detail::class_counts(labels);
  if (n_pos == 0 || n_neg == 0) {
    throw UndefinedMetric("AUC needs both classes (positives=" + std::to_string(n_pos) +
                          ", negatives=" + std::to_string(n_neg) + ")");
  }
  // Twice the Mann-Whitney U so that half credits stay integral.
  std::uint64_t twice_u = 0;
  std::uint64_t neg_below = n_neg;
  for (const auto& g : groups) {
    neg_below -= g.neg;
    twice_u += 2 * g.pos * neg_below + g.pos * g.neg;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

inline double average_precision(std::span<const double> scores, std::span<const int> labels) {
  const auto groups = detail::descending_groups(scores, labels);
  const auto n_pos = detail::class_counts(labels).first;
  if (n_pos == 0) throw UndefinedMetric("average precision needs at least one positive");
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& g : groups) {
    tp += g.pos;
    fp += g.neg;
    if (g.pos == 0) continue;
    const double recall_step = static_cast<double>(g.pos) / static_cast<double>(n_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += recall_step * precision;
  }
  return ap;
}

inline std::vector<CurvePoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  const auto groups = detail::descending_groups(scores, labels);
  const auto [n_pos, n_neg] = detail::class_counts(labels);
  if (n_pos == 0 || n_neg == 0) throw UndefinedMetric("ROC curve needs both classes");
  std::vector<CurvePoint> pts{{0.0, 0.0}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& g : groups) {
    tp += g.pos;
    fp += g.neg;
    pts.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                   static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  return pts;
}

inline std::vector<CurvePoint> pr_curve(std::span<const double> scores, std::span<const int> labels) {
  const auto groups = detail::descending_groups(scores, labels);
  const auto n_pos = detail::class_counts(labels).first;
  if (n_pos == 0) throw UndefinedMetric("PR curve needs at least one positive");
  std::vector<CurvePoint> pts;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& g : groups) {
    tp += g.pos;
    fp += g.neg;
    pts.push_back({static_cast<double>(tp) / static_cast<double>(n_pos),
                   static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return pts;
}

/// Trapezoidal area under a polyline given in increasing x.
inline double trapezoid_area(std::span<const CurvePoint> pts) {
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].x - pts[i - 1].x) * (pts[i].y + pts[i - 1].y) / 2.0;
  }
  return area;
}

inline EvalReport evaluate(std::span<const double> scores, std::span<const int> labels) {
  EvalReport r;
  r.auc = auc(scores, labels);
  r.ap = average_precision(scores, labels);
  r.roc_points = roc_curve(scores, labels);
  r.pr_points = pr_curve(scores, labels);
  std::tie(r.n_pos, r.n_neg) = detail::class_counts(labels);
  return r;
}

// ---------------------------------------------------------------------------
// Correlation

inline constexpr double kBetaTolerance = 1e-12;
inline constexpr int kBetaMaxIterations = 300;

/// Regularized incomplete beta I_x(a, b), continued fraction evaluated with
/// the modified Lentz method. Throws NumericError if the fraction has not
/// converged to kBetaTolerance within kBetaMaxIterations terms.
inline double incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("incomplete_beta: a and b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;

  // The fraction converges quickly only below the mean; use the symmetry
  // I_x(a, b) = 1 - I_{1-x}(b, a) above it.
  if (x > (a + 1.0) / (a + b + 2.0)) return 1.0 - incomplete_beta(1.0 - x, b, a);

  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  constexpr double tiny = 1e-300;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;

    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kBetaTolerance) return std::exp(log_front) * h / a;
  }
  throw NumericError("incomplete_beta: continued fraction did not converge (x=" +
                     std::to_string(x) + ", a=" + std::to_string(a) + ", b=" + std::to_string(b) + ")");
}

/// Two-sided tail probability P(|T| >= |t|) for Student's t with df degrees
/// of freedom.
inline double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw InvalidArgument("student_t_two_sided: df must be > 0");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(df / (df + t * t), df / 2.0, 0.5);
}

struct Correlation {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

inline Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw InvalidArgument("pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()) + ")");
  }
  const std::size_t n = x.size();
  if (n < 3) throw InvalidArgument("pearson: need n >= 3, got " + std::to_string(n));
  if (!all_finite(x) || !all_finite(y)) throw NumericError("pearson: non-finite input");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedMetric("pearson: constant input vector");
  Correlation out;
  out.n = n;
  out.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::abs(out.rho) >= 1.0 - 1e-12) {
    out.p_value = 0.0;
  } else {
    const double df = static_cast<double>(n - 2);
    const double t = out.rho * std::sqrt(df / (1.0 - out.rho * out.rho));
    out.p_value = std::clamp(student_t_two_sided(t, df), 0.0, 1.0);
  }
  return out;
}

/// Covariate table keyed by bag id. A missing (blank) cell excludes that row
/// from that column only.
struct CovariateTable {
  std::vector<std::string> names;
  struct Row {
    std::string bag_id;
    std::vector<std::optional<double>> values;
  };
  std::vector<Row> rows;
};

inline CovariateTable parse_covariates(std::string_view text, const std::string& where) {
  const auto lines = detail::parse_csv(text);
  if (lines.empty() || lines.front().cells.empty() || lines.front().cells[0] != "bag_id" ||
      lines.front().cells.size() < 2) {
    throw FormatError(where + ": line 1: expected header 'bag_id,<name>,...'");
  }
  CovariateTable table;
  table.names.assign(lines.front().cells.begin() + 1, lines.front().cells.end());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (detail::is_blank_line(line)) continue;
    const std::string at = where + ": line " + std::to_string(line.number);
    if (line.cells.size() != table.names.size() + 1) {
      throw FormatError(at + ": expected " + std::to_string(table.names.size() + 1) +
                        " fields, got " + std::to_string(line.cells.size()));
    }
    CovariateTable::Row row{std::string(detail::trim(line.cells[0])), {}};
    for (std::size_t c = 1; c < line.cells.size(); ++c) {
      if (detail::trim(line.cells[c]).empty()) {
        row.values.emplace_back(std::nullopt);
        continue;
      }
      const auto v = detail::parse_double(line.cells[c]);
      if (!v) throw FormatError(at + ": non-numeric value '" + line.cells[c] + "'");
      row.values.emplace_back(*v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline CovariateTable load_covariates(const std::filesystem::path& path) {
  return parse_covariates(detail::read_text(path), path.string());
}

struct NamedCorrelation {
  std::string name;
  Correlation corr;
};

struct CorrelationReport {
  std::vector<NamedCorrelation> entries;  // sorted by |rho| descending, then name
  std::vector<std::pair<std::string, std::string>> excluded;  // (column, reason)
  std::size_t unmatched_rows = 0;
  std::size_t joined_rows = 0;
};

/// Pearson correlation of the bag score against every covariate column.
inline CorrelationReport correlate_table(std::span<const BagScore> scores,
                                         const CovariateTable& table) {
  std::unordered_map<std::string, double> by_id;
  for (const auto& s : scores) by_id.emplace(s.bag_id, s.score);

  CorrelationReport report;
  std::vector<std::pair<double, const CovariateTable::Row*>> joined;
  for (const auto& row : table.rows) {
    const auto it = by_id.find(row.bag_id);
    if (it == by_id.end()) {
      ++report.unmatched_rows;
      continue;
    }
    joined.emplace_back(it->second, &row);
  }
  report.joined_rows = joined.size();
  if (joined.empty()) throw InvalidArgument("correlate_table: no covariate rows match a scored bag");

  for (std::size_t c = 0; c < table.names.size(); ++c) {
    Vector x;
    Vector y;
    for (const auto& [score, row] : joined) {
      if (!row->values[c]) continue;
      x.push_back(score);
      y.push_back(*row->values[c]);
    }
    try {
      report.entries.push_back({table.names[c], pearson(x, y)});
    } catch (const UndefinedMetric& e) {
      report.excluded.emplace_back(table.names[c], e.what());
    } catch (const InvalidArgument& e) {
      report.excluded.emplace_back(table.names[c], e.what());
    }
  }
  std::stable_sort(report.entries.begin(), report.entries.end(),
                   [](const NamedCorrelation& a, const NamedCorrelation& b) {
                     const double ra = std::abs(a.corr.rho);
                     const double rb = std::abs(b.corr.rho);
                     if (ra != rb) return ra > rb;
                     return a.name < b.name;
                   });
  return report;
}

}  // namespace rankmil
