#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "qlm/minkowski.hpp"

namespace qlm {

/// Point on the hyperboloid model of hyperbolic space with curvature -k^2:
/// { X in R^{n,1} : <X,X> = -1/k^2, t > 0 }.
struct HyperboloidPoint {
  MinkowskiVector X;
  double k = 1.0;
};

/// Polar data (r, Y) about the base point: X = (sinh(kr) Y, cosh(kr)) / k,
/// with Y a unit vector in R^n and r >= 0 the geodesic distance from base.
struct PolarCoords {
  double r = 0.0;
  Eigen::VectorXd Y;
  double k = 1.0;
};

/// Poincare-ball coordinates: x in the open unit ball of R^n.
struct BallPoint {
  Eigen::VectorXd x;
  double k = 1.0;
};

/// Point equipped with a unit spacelike normal tangent to the hyperboloid,
/// the data transported by the normal exponential flow.
struct NormalFramePoint {
  MinkowskiVector X;
  MinkowskiVector N;
  double k = 1.0;
};

namespace detail {
inline void check_curvature(double k, const char* where) {
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw InvalidInput(std::string(where) + ": curvature scale k must be positive");
  }
}
/// Round-off guard: arccosh arguments may dip below 1 by a hair near
/// coincident points; anything further below 1 is corrupt input.
inline double clamp_acosh_arg(double c, const char* where) {
  if (c < 1.0 - 1e-9) {
    throw NumericalFailure(std::string(where) + ": arccosh argument below 1 beyond tolerance");
  }
  return std::max(1.0, c);
}
inline void check_same_k(double k1, double k2, const char* where) {
  if (std::abs(k1 - k2) > 1e-12 * std::max(1.0, std::abs(k1))) {
    throw InvalidInput(std::string(where) + ": mismatched curvature scales");
  }
}
}  // namespace detail

/// Base point o = (0,...,0, 1/k), the center of the polar chart.
inline HyperboloidPoint base_point(int spatial_dim, double k) {
  detail::check_curvature(k, "base_point");
  MinkowskiVector X = MinkowskiVector::zero(spatial_dim);
  X.t() = 1.0 / k;
  return {X, k};
}

/// |k^2 <X,X> + 1|, zero on the hyperboloid.
inline double hyperboloid_residual(const HyperboloidPoint& p) {
  return std::abs(p.k * p.k * lorentz_dot(p.X, p.X) + 1.0);
}

inline HyperboloidPoint from_polar(const PolarCoords& pc) {
  detail::check_curvature(pc.k, "from_polar");
  if (pc.r < 0.0 || !std::isfinite(pc.r)) {
    throw InvalidInput("from_polar: radius must be finite and nonnegative");
  }
  const double ynorm = pc.Y.norm();
  if (std::abs(ynorm - 1.0) > 1e-8) {
    throw InvalidInput("from_polar: direction Y must be a unit vector");
  }
  const int n = static_cast<int>(pc.Y.size());
  MinkowskiVector X = MinkowskiVector::zero(n);
  X.spatial() = (std::sinh(pc.k * pc.r) / pc.k) * (pc.Y / ynorm);
  X.t() = std::cosh(pc.k * pc.r) / pc.k;
  return {X, pc.k};
}

inline PolarCoords to_polar(const HyperboloidPoint& p) {
  detail::check_curvature(p.k, "to_polar");
  const int n = p.X.spatial_dim();
  const double ct = detail::clamp_acosh_arg(p.k * p.X.t(), "to_polar");
  PolarCoords pc;
  pc.k = p.k;
  pc.r = std::acosh(ct) / p.k;
  const double s = std::sinh(p.k * pc.r);
  if (s < 1e-300) {
    pc.Y = Eigen::VectorXd::Unit(n, 0);
  } else {
    pc.Y = (p.k / s) * p.X.spatial();
    pc.Y.normalize();
  }
  return pc;
}

inline HyperboloidPoint ball_to_hyperboloid(const BallPoint& b) {
  detail::check_curvature(b.k, "ball_to_hyperboloid");
  const double r2 = b.x.squaredNorm();
  if (r2 >= 1.0) {
    throw InvalidInput("ball_to_hyperboloid: point must lie in the open unit ball");
  }
  const int n = static_cast<int>(b.x.size());
  MinkowskiVector X = MinkowskiVector::zero(n);
  X.spatial() = (2.0 / (b.k * (1.0 - r2))) * b.x;
  X.t() = (1.0 + r2) / (b.k * (1.0 - r2));
  return {X, b.k};
}

inline BallPoint hyperboloid_to_ball(const HyperboloidPoint& p) {
  detail::check_curvature(p.k, "hyperboloid_to_ball");
  BallPoint b;
  b.k = p.k;
  b.x = (p.k * p.X.spatial()) / (1.0 + p.k * p.X.t());
  return b;
}

/// Geodesic distance via cosh(k d) = -k^2 <X1,X2>.
inline double geodesic_distance(const HyperboloidPoint& p, const HyperboloidPoint& q) {
  detail::check_same_k(p.k, q.k, "geodesic_distance");
  const double c = detail::clamp_acosh_arg(-p.k * p.k * lorentz_dot(p.X, q.X), "geodesic_distance");
  return std::acosh(c) / p.k;
}

/// Transport (X, N) a signed distance rho along the normal geodesic:
///   X(rho) = cosh(k rho) X + sinh(k rho) N / k,
///   N(rho) = k sinh(k rho) X + cosh(k rho) N.
/// Preserves <X,X> = -1/k^2, <N,N> = 1, <X,N> = 0, and composes additively.
inline NormalFramePoint normal_flow(const NormalFramePoint& fp, double rho) {
  detail::check_curvature(fp.k, "normal_flow");
  const double nn = lorentz_dot(fp.N, fp.N);
  const double xn = lorentz_dot(fp.X, fp.N);
  if (std::abs(nn - 1.0) > 1e-8 || std::abs(xn) * fp.k > 1e-8) {
    throw InvalidInput("normal_flow: N must be a unit vector tangent to the hyperboloid");
  }
  const double c = std::cosh(fp.k * rho);
  const double s = std::sinh(fp.k * rho);
  NormalFramePoint out;
  out.k = fp.k;
  out.X = MinkowskiVector(c * fp.X.c + (s / fp.k) * fp.N.c);
  out.N = MinkowskiVector(fp.k * s * fp.X.c + c * fp.N.c);
  return out;
}

}  // namespace qlm
