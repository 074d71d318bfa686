// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mvpatch/error.hpp"

namespace mvpatch {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// A point seen in the reference view and the same scene point in a
/// destination view.
struct Correspondence {
  Point2 ref;
  Point2 dst;
};

inline constexpr double kSingularDetThreshold = 1e-12;
inline constexpr double kAtInfinityThreshold = 1e-12;
inline constexpr double kDegenerateSingularRatio = 1e-10;

/// 3x3 projective transform stored row-major with the bottom-right entry
/// fixed to 1:
///
///   | p11 p12 p13 |
///   | p21 p22 p23 |
///   | p31 p32  1  |
///
/// A point maps as x' = (p11 x + p12 y + p13) / w, y' = (p21 x + p22 y + p23) / w
/// with w = p31 x + p32 y + 1.
class Homography {
 public:
  Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

  /// Builds from nine row-major entries, dividing through by the last one.
  /// Throws Singular when the last entry is ~0 or the matrix is singular.
  explicit Homography(const std::array<double, 9>& raw) : m_(raw) {
    for (double v : m_) {
      if (!std::isfinite(v)) fail(ErrorKind::Singular, "homography has non-finite entries");
    }
    const double s = m_[8];
    if (std::abs(s) <= kSingularDetThreshold) {
      fail(ErrorKind::Singular, "homography bottom-right entry is zero; cannot normalize");
    }
    for (double& v : m_) v /= s;
    m_[8] = 1.0;
    if (std::abs(det()) <= kSingularDetThreshold) {
      fail(ErrorKind::Singular, "homography determinant is below 1e-12");
    }
  }

  static Homography identity() { return Homography(); }
  static Homography translation(double dx, double dy) {
    return Homography({1, 0, dx, 0, 1, dy, 0, 0, 1});
  }

  double operator()(int row, int col) const { return m_[static_cast<std::size_t>(row * 3 + col)]; }
  const std::array<double, 9>& data() const { return m_; }

  double det() const {
    return m_[0] * (m_[4] * m_[8] - m_[5] * m_[7]) - m_[1] * (m_[3] * m_[8] - m_[5] * m_[6]) +
           m_[2] * (m_[3] * m_[7] - m_[4] * m_[6]);
  }

  /// Homogeneous denominator w for the point (x, y).
  double denominator(double x, double y) const { return m_[6] * x + m_[7] * y + m_[8]; }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) os << (c ? " " : "") << (*this)(r, c);
      os << '\n';
    }
    return os.str();
  }

 private:
  std::array<double, 9> m_;
};

/// Maps p through h.  Throws AtInfinity when |w| <= 1e-12.
inline Point2 apply_homography(const Homography& h, Point2 p) {
  const auto& m = h.data();
  const double w = m[6] * p.x + m[7] * p.y + m[8];
  if (!(std::abs(w) > kAtInfinityThreshold)) {
    fail(ErrorKind::AtInfinity, "point maps to the line at infinity");
  }
  return {(m[0] * p.x + m[1] * p.y + m[2]) / w, (m[3] * p.x + m[4] * p.y + m[5]) / w};
}

inline Homography invert(const Homography& h) {
  const auto& m = h.data();
  const double d = h.det();
  if (std::abs(d) <= kSingularDetThreshold) fail(ErrorKind::Singular, "cannot invert a singular homography");
  // Adjugate; the common 1/det factor cancels under normalization.
  std::array<double, 9> adj{
      m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
      m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
      m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
  for (double& v : adj) v /= d;
  return Homography(adj);
}

/// compose(a, b) maps p to a(b(p)).
inline Homography compose(const Homography& a, const Homography& b) {
  const auto& x = a.data();
  const auto& y = b.data();
  std::array<double, 9> out{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += x[static_cast<std::size_t>(r * 3 + k)] * y[static_cast<std::size_t>(k * 3 + c)];
      out[static_cast<std::size_t>(r * 3 + c)] = s;
    }
  }
  return Homography(out);
}

namespace detail {

/// Similarity that moves the centroid to the origin and scales the mean
/// distance from it to sqrt(2).  Returned as (scale, tx, ty): p' = s*p + t.
struct IsotropicNormalizer {
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;

  Point2 operator()(Point2 p) const { return {scale * p.x + tx, scale * p.y + ty}; }
  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d t;
    t << scale, 0, tx, 0, scale, ty, 0, 0, 1;
    return t;
  }
};

template <typename Getter>
IsotropicNormalizer make_normalizer(std::span<const Correspondence> cs, Getter get) {
  double cx = 0.0, cy = 0.0;
  for (const auto& c : cs) {
    cx += get(c).x;
    cy += get(c).y;
  }
  const double n = static_cast<double>(cs.size());
  cx /= n;
  cy /= n;
  double mean_dist = 0.0;
  for (const auto& c : cs) mean_dist += std::hypot(get(c).x - cx, get(c).y - cy);
  mean_dist /= n;
  if (!(mean_dist > 0.0)) {
    fail(ErrorKind::DegenerateConfiguration, "all points coincide");
  }
  const double s = std::sqrt(2.0) / mean_dist;
  return {s, -s * cx, -s * cy};
}

inline bool nearly_collinear(Point2 a, Point2 b, Point2 c) {
  const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  const double scale = std::max({std::hypot(b.x - a.x, b.y - a.y), std::hypot(c.x - a.x, c.y - a.y),
                                 std::hypot(c.x - b.x, c.y - b.y)});
  return std::abs(cross) <= 1e-9 * scale * scale;
}

}  // namespace detail

/// Direct linear transform over n >= 4 correspondences.  Coordinates are
/// isotropically normalized in each view, the 2n x 9 homogeneous system is
/// solved by SVD, and the result is denormalized.  Four exact points are
/// interpolated exactly; more points give the algebraic least-squares fit.
inline Homography estimate_homography(std::span<const Correspondence> cs) {
  if (cs.size() < 4) {
    fail(ErrorKind::TooFewPoints, "need at least 4 correspondences, got " + std::to_string(cs.size()));
  }
  for (const auto& c : cs) {
    if (!c.ref.finite() || !c.dst.finite()) fail(ErrorKind::InvalidArgument, "correspondence has non-finite coordinates");
  }
  if (cs.size() == 4) {
    for (std::size_t skip = 0; skip < 4; ++skip) {
      std::array<Point2, 3> tri{};
      std::size_t k = 0;
      for (std::size_t i = 0; i < 4; ++i) {
        if (i != skip) tri[k++] = cs[i].ref;
      }
      if (detail::nearly_collinear(tri[0], tri[1], tri[2])) {
        fail(ErrorKind::DegenerateConfiguration, "three of the four reference points are collinear");
      }
    }
  }

  const auto norm_ref = detail::make_normalizer(cs, [](const Correspondence& c) { return c.ref; });
  const auto norm_dst = detail::make_normalizer(cs, [](const Correspondence& c) { return c.dst; });

  const auto rows = static_cast<Eigen::Index>(2 * cs.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(rows, 9), 9);
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const Point2 p = norm_ref(cs[i].ref);
    const Point2 q = norm_dst(cs[i].dst);
    const auto r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << p.x, p.y, 1, 0, 0, 0, -q.x * p.x, -q.x * p.y, -q.x;
    a.row(r + 1) << 0, 0, 0, p.x, p.y, 1, -q.y * p.x, -q.y * p.y, -q.y;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // The solution spans the null direction; rank 8 is required for uniqueness.
  if (!(sv(7) >= kDegenerateSingularRatio * sv(0))) {
    fail(ErrorKind::DegenerateConfiguration, "design matrix is rank deficient (singular value ratio below 1e-10)");
  }
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d full = norm_dst.matrix().inverse() * hn * norm_ref.matrix();

  std::array<double, 9> raw{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) raw[static_cast<std::size_t>(r * 3 + c)] = full(r, c);
  }
  if (std::abs(raw[8]) <= kSingularDetThreshold * full.cwiseAbs().maxCoeff()) {
    fail(ErrorKind::DegenerateConfiguration, "estimated transform sends the origin to infinity");
  }
  const double last = raw[8];
  for (double& v : raw) v /= last;
  try {
    return Homography(raw);
  } catch (const Error&) {
    fail(ErrorKind::DegenerateConfiguration, "estimated transform is singular");
  }
}

inline Homography estimate_homography(const std::vector<Correspondence>& cs) {
  return estimate_homography(std::span<const Correspondence>(cs));
}

/// Per-point reprojection distances |h(ref) - dst|.
inline std::vector<double> reprojection_errors(const Homography& h, std::span<const Correspondence> cs) {
  std::vector<double> out;
  out.reserve(cs.size());
  for (const auto& c : cs) {
    const Point2 p = apply_homography(h, c.ref);
    out.push_back(std::hypot(p.x - c.dst.x, p.y - c.dst.y));
  }
  return out;
}

}  // namespace mvpatch
