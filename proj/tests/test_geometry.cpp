#include <gtest/gtest.h>

#include "mvpatch/geometry.hpp"
#include "support.hpp"

using namespace mvpatch;
using testsupport::random_homography;

namespace {

std::vector<Correspondence> sample_points(const Homography& h, Rng& rng, int n, double lo = 0.0, double hi = 200.0) {
  std::vector<Correspondence> cs;
  for (int i = 0; i < n; ++i) {
    const Point2 p{uniform(rng, lo, hi), uniform(rng, lo, hi)};
    cs.push_back({p, apply_homography(h, p)});
  }
  return cs;
}

void expect_matrix_near(const Homography& a, const Homography& b, double tol) {
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(a.data()[i], b.data()[i], tol) << "entry " << i;
}

const std::vector<Point2> kSquare{{0, 0}, {1, 0}, {1, 1}, {0, 1}};

}  // namespace

TEST(Homography, ConstructionNormalizesBottomRight) {
  const Homography h({2, 0, 4, 0, 2, 6, 0, 0, 2});
  EXPECT_EQ(h(2, 2), 1.0);
  EXPECT_EQ(h(0, 0), 1.0);
  EXPECT_EQ(h(0, 2), 2.0);
  EXPECT_EQ(h(1, 2), 3.0);
}

TEST(Homography, SingularMatrixRejected) {
  EXPECT_THROW(Homography({1, 2, 3, 2, 4, 6, 0, 0, 1}), Error);
  try {
    Homography({1, 2, 3, 2, 4, 6, 0, 0, 1});
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Singular);
  }
  EXPECT_THROW(Homography({1, 0, 0, 0, 1, 0, 0, 0, 0}), Error);
}

TEST(EstimateHomography, UnitSquareToItselfIsIdentity) {
  std::vector<Correspondence> cs;
  for (const auto& p : kSquare) cs.push_back({p, p});
  expect_matrix_near(estimate_homography(cs), Homography::identity(), 1e-12);
}

TEST(EstimateHomography, PureTranslation) {
  std::vector<Correspondence> cs;
  for (const auto& p : kSquare) cs.push_back({p, {p.x + 10, p.y + 5}});
  const Homography h = estimate_homography(cs);
  EXPECT_NEAR(h(0, 2), 10.0, 1e-9);
  EXPECT_NEAR(h(1, 2), 5.0, 1e-9);
  EXPECT_NEAR(h(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(h(1, 1), 1.0, 1e-12);
  EXPECT_NEAR(h(0, 1), 0.0, 1e-12);
  EXPECT_NEAR(h(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(h(2, 0), 0.0, 1e-12);
  EXPECT_NEAR(h(2, 1), 0.0, 1e-12);
  EXPECT_EQ(h(2, 2), 1.0);
}

TEST(EstimateHomography, RecoversRandomFromEightPoints) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Homography truth = random_homography(rng);
    const auto cs = sample_points(truth, rng, 8);
    expect_matrix_near(estimate_homography(cs), truth, 1e-6);
  }
}

TEST(EstimateHomography, FourPointExactness) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Homography truth = random_homography(rng);
    const std::vector<Point2> ref{{uniform(rng, 0, 40), uniform(rng, 0, 40)},
                                  {uniform(rng, 160, 200), uniform(rng, 0, 40)},
                                  {uniform(rng, 160, 200), uniform(rng, 160, 200)},
                                  {uniform(rng, 0, 40), uniform(rng, 160, 200)}};
    std::vector<Correspondence> cs;
    for (const auto& p : ref) cs.push_back({p, apply_homography(truth, p)});
    const Homography h = estimate_homography(cs);
    for (double e : reprojection_errors(h, cs)) EXPECT_LT(e, 1e-8);
  }
}

TEST(EstimateHomography, NoiseRobustnessWithEighteenPoints) {
  Rng rng(21);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (int trial = 0; trial < 10; ++trial) {
    const Homography truth = random_homography(rng);
    auto cs = sample_points(truth, rng, 18);
    for (auto& c : cs) {
      c.dst.x += noise(rng);
      c.dst.y += noise(rng);
    }
    const auto errs = reprojection_errors(estimate_homography(cs), cs);
    double mean = 0.0;
    for (double e : errs) mean += e;
    EXPECT_LE(mean / errs.size(), 1.5);
  }
}

TEST(EstimateHomography, TooFewPoints) {
  std::vector<Correspondence> cs{{{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}};
  try {
    estimate_homography(cs);
    FAIL() << "expected TooFewPoints";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewPoints);
  }
}

TEST(EstimateHomography, CollinearFourPointsAreDegenerate) {
  std::vector<Correspondence> cs{{{0, 0}, {0, 0}}, {{1, 1}, {1, 1}}, {{2, 2}, {2, 2}}, {{0, 5}, {0, 5}}};
  try {
    estimate_homography(cs);
    FAIL() << "expected DegenerateConfiguration";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateConfiguration);
  }
}

TEST(EstimateHomography, IdenticalPointsAreDegenerate) {
  std::vector<Correspondence> cs(6, Correspondence{{3, 3}, {4, 4}});
  try {
    estimate_homography(cs);
    FAIL() << "expected DegenerateConfiguration";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateConfiguration);
  }
}

TEST(EstimateHomography, AllPointsOnOneLineAreDegenerate) {
  std::vector<Correspondence> cs;
  for (int i = 0; i < 8; ++i) cs.push_back({{double(i), 2.0 * i}, {double(i), 2.0 * i}});
  EXPECT_THROW(estimate_homography(cs), Error);
}

TEST(ApplyHomography, IdentityExact) {
  const Point2 q = apply_homography(Homography::identity(), {3.5, 7.25});
  EXPECT_EQ(q.x, 3.5);
  EXPECT_EQ(q.y, 7.25);
}

TEST(ApplyHomography, TranslationExact) {
  const Point2 q = apply_homography(Homography::translation(10, 5), {0, 0});
  EXPECT_EQ(q.x, 10.0);
  EXPECT_EQ(q.y, 5.0);
}

TEST(ApplyHomography, PerspectiveRatio) {
  const Homography h({1, 0, 0, 0, 1, 0, 0.001, 0, 1});
  const Point2 q = apply_homography(h, {100, 0});
  EXPECT_NEAR(q.x, 100.0 / 1.1, 1e-12);
  EXPECT_EQ(q.y, 0.0);
}

TEST(ApplyHomography, AtInfinity) {
  const Homography h({1, 0, 0, 0, 1, 0, 0.01, 0, 1});
  try {
    apply_homography(h, {-100, 3});
    FAIL() << "expected AtInfinity";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AtInfinity);
  }
}

TEST(Invert, IdentityAndTranslation) {
  expect_matrix_near(invert(Homography::identity()), Homography::identity(), 0.0);
  expect_matrix_near(invert(Homography::translation(10, 5)), Homography::translation(-10, -5), 1e-15);
}

TEST(Invert, RoundTripOnRandomPoints) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Homography h = random_homography(rng);
    const Homography hi = invert(h);
    EXPECT_EQ(hi(2, 2), 1.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Point2 p{uniform(rng, 0, 200), uniform(rng, 0, 200)};
      const Point2 back = apply_homography(hi, apply_homography(h, p));
      worst = std::max({worst, std::abs(back.x - p.x), std::abs(back.y - p.y)});
    }
    EXPECT_LT(worst, 1e-9);
  }
}

TEST(Compose, IdentityIsNeutral) {
  Rng rng(4);
  const Homography h = random_homography(rng);
  expect_matrix_near(compose(Homography::identity(), h), h, 1e-15);
}

TEST(Compose, TranslationsAdd) {
  expect_matrix_near(compose(Homography::translation(1, 2), Homography::translation(3, -7)),
                     Homography::translation(4, -5), 1e-15);
}

TEST(Compose, WithInverseIsIdentity) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Homography h = random_homography(rng);
    expect_matrix_near(compose(h, invert(h)), Homography::identity(), 1e-9);
  }
}

TEST(Compose, MatchesSequentialApplication) {
  Rng rng(9);
  const Homography a = random_homography(rng);
  const Homography b = random_homography(rng);
  const Homography ab = compose(a, b);
  EXPECT_EQ(ab(2, 2), 1.0);
  for (int i = 0; i < 50; ++i) {
    const Point2 p{uniform(rng, 0, 150), uniform(rng, 0, 150)};
    const Point2 x = apply_homography(ab, p);
    const Point2 y = apply_homography(a, apply_homography(b, p));
    EXPECT_NEAR(x.x, y.x, 1e-9);
    EXPECT_NEAR(x.y, y.y, 1e-9);
  }
}
