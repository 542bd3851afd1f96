#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rankmil/metrics.hpp"

namespace rankmil {
namespace {

struct Instance {
  Vector scores;
  std::vector<int> labels;
};

// n <= 64 with both classes present; scores drawn from a small grid so ties
// are common.
Instance random_instance(Rng& rng) {
  Instance in;
  const std::size_t n = 2 + rng.below(63);
  const std::size_t levels = 1 + rng.below(12);
  for (std::size_t i = 0; i < n; ++i) {
    in.scores.push_back(static_cast<double>(rng.below(levels)) / static_cast<double>(levels));
    in.labels.push_back(static_cast<int>(rng.below(2)));
  }
  in.labels[0] = 1;
  in.labels[1] = 0;
  return in;
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(Vector{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_EQ(auc(Vector(6, 0.3), std::vector<int>{1, 0, 1, 0, 0, 1}), 0.5);
  EXPECT_EQ(auc(Vector{0.8, 0.3, 0.5, 0.1}, std::vector<int>{1, 1, 0, 0}), 0.75);
}

TEST(Auc, Errors) {
  EXPECT_THROW(auc(Vector{0.1, 0.2}, std::vector<int>{1, 1}), UndefinedMetric);
  EXPECT_THROW(auc(Vector{0.1, 0.2}, std::vector<int>{1}), InvalidArgument);
  EXPECT_THROW(auc(Vector{0.1, 0.2}, std::vector<int>{1, 2}), InvalidArgument);
  EXPECT_THROW(auc(Vector{0.1, std::nan("")}, std::vector<int>{1, 0}), NumericError);
}

TEST(Auc, MatchesPairCountingOracle) {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const auto in = random_instance(rng);
    EXPECT_EQ(auc(in.scores, in.labels), oracle::auc_pairs(in.scores, in.labels));
  }
}

TEST(Auc, MonotoneTransformInvariance) {
  Rng rng(32);
  for (int i = 0; i < 200; ++i) {
    auto in = random_instance(rng);
    for (auto& s : in.scores) s += 0.01;  // strictly positive for the cube
    Vector affine, cube, neg;
    for (double s : in.scores) {
      affine.push_back(2.0 * s + 1.0);
      cube.push_back(s * s * s);
    }
    const double base = auc(in.scores, in.labels);
    EXPECT_EQ(auc(affine, in.labels), base);
    EXPECT_EQ(auc(cube, in.labels), base);
  }
}

TEST(Auc, ComplementWithoutTies) {
  Rng rng(33);
  for (int i = 0; i < 200; ++i) {
    auto in = random_instance(rng);
    for (auto& s : in.scores) s = rng.uniform();
    Vector neg;
    for (double s : in.scores) neg.push_back(-s);
    EXPECT_NEAR(auc(in.scores, in.labels) + auc(neg, in.labels), 1.0, 1e-15);
  }
}

TEST(Auc, EqualsTrapezoidAreaUnderRoc) {
  Rng rng(34);
  for (int i = 0; i < 200; ++i) {
    const auto in = random_instance(rng);
    const auto report = evaluate(in.scores, in.labels);
    EXPECT_NEAR(report.auc, trapezoid_area(report.roc_points), 1e-12);
    EXPECT_EQ(report.roc_points.front().x, 0.0);
    EXPECT_EQ(report.roc_points.front().y, 0.0);
    EXPECT_EQ(report.roc_points.back().x, 1.0);
    EXPECT_EQ(report.roc_points.back().y, 1.0);
    EXPECT_EQ(report.n_pos + report.n_neg, in.scores.size());
  }
}

TEST(AveragePrecision, Examples) {
  EXPECT_EQ(average_precision(Vector{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0}), 1.0);
  EXPECT_NEAR(average_precision(Vector{0.9, 0.4, 0.6, 0.2}, std::vector<int>{1, 1, 0, 0}),
              0.5 * 1.0 + 0.5 * (2.0 / 3.0), 1e-15);
  EXPECT_DOUBLE_EQ(average_precision(Vector(5, 0.1), std::vector<int>{1, 0, 1, 0, 0}), 2.0 / 5.0);
  EXPECT_THROW(average_precision(Vector{0.1, 0.2}, std::vector<int>{0, 0}), UndefinedMetric);
}

TEST(AveragePrecision, MatchesThresholdOracle) {
  Rng rng(35);
  for (int i = 0; i < 200; ++i) {
    const auto in = random_instance(rng);
    EXPECT_NEAR(average_precision(in.scores, in.labels), oracle::ap_thresholds(in.scores, in.labels),
                1e-15);
  }
}

TEST(PrCurve, OnePointPerThreshold) {
  const auto pts = pr_curve(Vector{0.9, 0.4, 0.6, 0.6}, std::vector<int>{1, 1, 0, 1});
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_DOUBLE_EQ(pts[0].x, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(pts[0].y, 1.0);
  EXPECT_DOUBLE_EQ(pts[1].x, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(pts[1].y, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(pts[2].x, 1.0);
  EXPECT_DOUBLE_EQ(pts[2].y, 0.75);
}

TEST(Pearson, Examples) {
  const auto up = pearson(Vector{1, 2, 3}, Vector{2, 4, 6});
  EXPECT_DOUBLE_EQ(up.rho, 1.0);
  EXPECT_EQ(up.p_value, 0.0);
  EXPECT_EQ(up.n, 3u);
  const auto down = pearson(Vector{1, 2, 3}, Vector{6, 4, 2});
  EXPECT_DOUBLE_EQ(down.rho, -1.0);
  EXPECT_EQ(down.p_value, 0.0);
  EXPECT_NEAR(pearson(Vector{1, 2, 3, 4}, Vector{1, 3, 2, 4}).rho, 0.8, 1e-12);
}

TEST(Pearson, Errors) {
  EXPECT_THROW(pearson(Vector{1, 1, 1}, Vector{1, 2, 3}), UndefinedMetric);
  EXPECT_THROW(pearson(Vector{1, 2}, Vector{1, 2}), InvalidArgument);
  EXPECT_THROW(pearson(Vector{1, 2, 3}, Vector{1, 2}), InvalidArgument);
}

TEST(Pearson, SymmetricAndAffineInvariant) {
  Rng rng(36);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 3 + rng.below(60);
    const auto x = gauss_sample(rng, n);
    const auto y = gauss_sample(rng, n);
    const double rho = pearson(x, y).rho;
    EXPECT_EQ(pearson(y, x).rho, rho);
    const double a = rng.uniform(0.1, 10.0), b = rng.uniform(-5.0, 5.0);
    Vector xt;
    for (double v : x) xt.push_back(a * v + b);
    EXPECT_NEAR(pearson(xt, y).rho, rho, 1e-12);
    EXPECT_NEAR(pearson(x, xt).rho, 1.0, 1e-12);
  }
}

TEST(Pearson, PValueDecreasesWithAbsRho) {
  for (double df : {1.0, 3.0, 8.0, 28.0, 98.0}) {
    double prev = 1.0 + 1e-15;
    for (int i = 0; i <= 99; ++i) {
      const double rho = i / 100.0;
      const double t = rho * std::sqrt(df / (1.0 - rho * rho));
      const double p = student_t_two_sided(t, df);
      EXPECT_LT(p, prev) << "df " << df << " rho " << rho;
      EXPECT_EQ(p, student_t_two_sided(-t, df));
      prev = p;
    }
  }
}

TEST(Pearson, PValueMatchesQuadrature) {
  for (double df : {1.0, 5.0, 18.0, 40.0}) {
    for (double t : {0.25, 1.0, 2.5, 4.0}) {
      EXPECT_NEAR(student_t_two_sided(t, df), oracle::t_two_sided_by_quadrature(t, df), 1e-8)
          << "t " << t << " df " << df;
    }
  }
  // n = 20, rho = 0.5
  const double t = 0.5 * std::sqrt(18.0 / 0.75);
  EXPECT_NEAR(student_t_two_sided(t, 18.0), oracle::t_two_sided_by_quadrature(t, 18.0), 1e-8);
}

TEST(IncompleteBeta, KnownValues) {
  EXPECT_EQ(incomplete_beta(0.0, 2.0, 3.0), 0.0);
  EXPECT_EQ(incomplete_beta(1.0, 2.0, 3.0), 1.0);
  EXPECT_NEAR(incomplete_beta(0.3, 1.0, 1.0), 0.3, 1e-14);
  // I_x(a, 1) = x^a
  EXPECT_NEAR(incomplete_beta(0.7, 2.5, 1.0), std::pow(0.7, 2.5), 1e-13);
  EXPECT_NEAR(incomplete_beta(0.4, 3.0, 4.0) + incomplete_beta(0.6, 4.0, 3.0), 1.0, 1e-13);
  EXPECT_THROW(incomplete_beta(1.5, 1.0, 1.0), InvalidArgument);
}

std::vector<BagScore> scores_of(const Vector& s) {
  std::vector<BagScore> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back({"b" + std::to_string(i), s[i], {}, {}});
  return out;
}

TEST(CorrelateTable, Examples) {
  const Vector s{0.1, 0.4, 0.35, 0.8, 0.9};
  std::string csv = "bag_id,zeta,alpha,flat,self\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    csv += "b" + std::to_string(i) + "," + std::to_string(-3.0 * s[i] + 1) + "," +
           std::to_string(2.0 * s[i]) + ",7," + std::to_string(s[i]) + "\n";
  }
  csv += "stranger,1,2,3,4\n";
  const auto table = parse_covariates(csv, "mem");
  const auto scores = scores_of(s);
  const auto report = correlate_table(scores, table);
  ASSERT_EQ(report.entries.size(), 3u);
  EXPECT_EQ(report.entries[0].name, "alpha");
  EXPECT_NEAR(report.entries[0].corr.rho, 1.0, 1e-12);
  EXPECT_EQ(report.entries[1].name, "self");
  EXPECT_NEAR(report.entries[1].corr.rho, 1.0, 1e-12);
  EXPECT_EQ(report.entries[2].name, "zeta");
  EXPECT_NEAR(report.entries[2].corr.rho, -1.0, 1e-12);
  ASSERT_EQ(report.excluded.size(), 1u);
  EXPECT_EQ(report.excluded[0].first, "flat");
  EXPECT_EQ(report.unmatched_rows, 1u);
  EXPECT_EQ(report.joined_rows, 5u);
}

TEST(CorrelateTable, BlankCellsDropRowPerColumn) {
  const auto table = parse_covariates("bag_id,a,b\nb0,1,\nb1,2,5\nb2,3,1\nb3,5,2\n", "mem");
  const auto report = correlate_table(scores_of({0.1, 0.2, 0.3, 0.4}), table);
  ASSERT_EQ(report.entries.size(), 2u);
  for (const auto& e : report.entries) EXPECT_EQ(e.corr.n, e.name == "a" ? 4u : 3u);
}

TEST(CorrelateTable, Errors) {
  const auto table = parse_covariates("bag_id,a\nzz,1\n", "mem");
  EXPECT_THROW(correlate_table(scores_of({0.1, 0.2, 0.3}), table), InvalidArgument);
  EXPECT_THROW(parse_covariates("id,a\n", "mem"), FormatError);
  EXPECT_THROW(parse_covariates("bag_id,a\nb0,x\n", "mem"), FormatError);
  EXPECT_THROW(parse_covariates("bag_id,a\nb0,1,2\n", "mem"), FormatError);
}

}  // namespace
}  // namespace rankmil
