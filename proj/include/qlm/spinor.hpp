#pragma once

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "qlm/clifford.hpp"
#include "qlm/hyperboloid.hpp"

namespace qlm {

using Spinor = Eigen::VectorXcd;

/// Future-pointing vector extracted from a spinor:
/// zeta_a = (<i c_1 a, a>, ..., <i c_n a, a>, |a|^2), time component last.
inline Eigen::VectorXd zeta_of_a(const CliffordRep& rep, const Spinor& a) {
  if (static_cast<int>(a.size()) != rep.dim()) {
    throw InvalidInput("zeta_of_a: spinor dimension does not match representation");
  }
  Eigen::VectorXd zeta(rep.n + 1);
  for (int j = 0; j < rep.n; ++j) {
    zeta(j) = (detail::I1 * a.dot(rep.c[j] * a)).real();
  }
  zeta(rep.n) = a.squaredNorm();
  return zeta;
}

namespace detail {

// Unit a in C^2 with (<i g1 a,a>, <i g2 a,a>, <-T a,a>) equal to the target
// point on S^2.  Entries: first = |a2|^2-|a1|^2, second = -2 Re(a1 conj(a2)),
// third = 2 Im(a1 conj(a2)).
inline Eigen::Vector2cd hopf_inverse(const Eigen::Vector3d& z) {
  Eigen::Vector2cd a;
  const double m2 = 0.5 * (1.0 + z(0));
  const double a2 = std::sqrt(std::max(0.0, m2));
  if (a2 < 1e-12) {
    a << 1.0, 0.0;
    return a;
  }
  a(1) = a2;
  a(0) = std::complex<double>(-z(1), z(2)) / (2.0 * a2);
  return a;
}

// Unit a in C^2 with the S^1 image (|a2|^2-|a1|^2, -2 Re(a1 conj(a2))).
inline Eigen::Vector2cd circle_inverse(const Eigen::Vector2d& y) {
  const double theta = std::atan2(y(1), y(0));
  Eigen::Vector2cd a;
  a << -std::sin(theta / 2.0), std::cos(theta / 2.0);
  return a;
}

inline Eigen::VectorXcd kron_vec(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) {
  Eigen::VectorXcd out(u.size() * v.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    out.segment(i * v.size(), v.size()) = u(i) * v;
  }
  return out;
}

// Unit spinor whose image under the zeta map has spatial part X (unit vector
// in R^n).  Mirrors the doubling used in build_clifford: the tail of X is
// peeled three (odd chain) or n-2 (even chain) components at a time.
inline Eigen::VectorXcd unit_spinor_for_direction(int n, const Eigen::VectorXd& X) {
  if (n == 2) return circle_inverse(X.head<2>());
  if (n == 3) return hopf_inverse(X.head<3>());
  if (n % 2 == 1) {
    const Eigen::Vector3d w = X.tail<3>();
    const double ylast = w.norm();
    const Eigen::Vector3d z = (ylast > 1e-14) ? Eigen::Vector3d(w / ylast)
                                              : Eigen::Vector3d(0, 0, 1);
    Eigen::VectorXd y(n - 2);
    y.head(n - 3) = X.head(n - 3);
    y(n - 3) = ylast;
    const Eigen::VectorXcd b = unit_spinor_for_direction(n - 2, y);
    const Eigen::Vector2cd a = hopf_inverse(-z);
    return kron_vec(a, b);
  }
  const Eigen::VectorXd w = X.tail(n - 2);
  const double z3 = w.norm();
  Eigen::VectorXd y(n - 2);
  if (z3 > 1e-14) {
    y = w / z3;
  } else {
    y = Eigen::VectorXd::Unit(n - 2, 0);
  }
  const Eigen::Vector2cd b = hopf_inverse(Eigen::Vector3d(X(0), X(1), -z3));
  const Eigen::VectorXcd a = unit_spinor_for_direction(n - 2, y);
  return kron_vec(a, b);
}

}  // namespace detail

/// Invert the zeta map on a future null direction: returns a with
/// zeta_of_a(a) = zeta.  The representative is unique up to a phase.
inline Spinor a_of_null(const CliffordRep& rep, const Eigen::VectorXd& zeta) {
  if (static_cast<int>(zeta.size()) != rep.n + 1) {
    throw InvalidInput("a_of_null: zeta must have n+1 components");
  }
  const double t = zeta(rep.n);
  if (!(t > 0.0)) {
    throw InvalidInput("a_of_null: zeta must be future pointing (t > 0)");
  }
  const double q = lorentz_dot(zeta, zeta);
  if (std::abs(q) > 1e-8 * t * t) {
    throw InvalidInput("a_of_null: zeta is not null");
  }
  Eigen::VectorXd X = zeta.head(rep.n);
  const double xn = X.norm();
  X = (xn > 1e-14) ? Eigen::VectorXd(X / xn) : Eigen::VectorXd::Unit(rep.n, 0);
  Spinor a = detail::unit_spinor_for_direction(rep.n, X);
  return std::sqrt(t) * a;
}

/// Imaginary Killing spinor field on the unit-ball chart of curvature -k^2:
/// phi_a(x) = sqrt(2/(1-|x|^2)) (a - i c(x) a).
inline Spinor killing_spinor(const CliffordRep& rep, const Spinor& a, const Eigen::VectorXd& x) {
  if (static_cast<int>(x.size()) != rep.n) {
    throw InvalidInput("killing_spinor: point dimension does not match representation");
  }
  const double r2 = x.squaredNorm();
  if (r2 >= 1.0) {
    throw InvalidInput("killing_spinor: point must lie in the open unit ball");
  }
  return std::sqrt(2.0 / (1.0 - r2)) * (a - detail::I1 * (clifford_action(rep, x) * a));
}

/// Relative defect of |phi_a(x)|^2 = -2 k <X, zeta_a> with X the hyperboloid
/// image of the ball point.
inline double norm_identity_residual(const CliffordRep& rep, const Spinor& a, const BallPoint& b) {
  const Spinor phi = killing_spinor(rep, a, b.x);
  const double lhs = phi.squaredNorm();
  const HyperboloidPoint X = ball_to_hyperboloid(b);
  const double rhs = -2.0 * b.k * lorentz_dot(X.X.c, zeta_of_a(rep, a));
  return std::abs(lhs - rhs) / lhs;
}

/// Pointwise check of the intrinsic Dirac operator identity on a geodesic
/// sphere of radius r about the chart origin, evaluated at radial direction
/// frame.col(n-1) with tangent frame frame.col(0..n-2):
///   -D^S phi = (H0/2) phi + (i k (n-1)/2) c(e_n) phi,
/// where the surface spinor derivative uses the Killing equation
/// grad_{e_a} phi = -(i k / 2) c(e_a) phi and shape operator k coth(kr) I.
/// Returns the residual relative to |phi|.
inline double dirac_identity_residual(const CliffordRep& rep, const Spinor& a, double k,
                                      double r, const Eigen::MatrixXd& frame) {
  if (frame.rows() != rep.n || frame.cols() != rep.n) {
    throw InvalidInput("dirac_identity_residual: frame must be n x n");
  }
  if (!(k > 0.0) || !(r > 0.0)) {
    throw InvalidInput("dirac_identity_residual: need k > 0 and r > 0");
  }
  const Eigen::VectorXd radial = frame.col(rep.n - 1);
  const Eigen::VectorXd x = std::tanh(k * r / 2.0) * radial;
  const Spinor phi = killing_spinor(rep, a, x);

  const double lam = k / std::tanh(k * r);
  const double H0 = (rep.n - 1) * lam;
  const Eigen::MatrixXcd cn = clifford_action(rep, radial);

  Spinor dirac = Spinor::Zero(rep.dim());
  for (int j = 0; j < rep.n - 1; ++j) {
    const Eigen::MatrixXcd ca = clifford_action(rep, frame.col(j));
    const Spinor cov = -detail::I1 * (0.5 * k) * (ca * phi) + 0.5 * lam * (ca * (cn * phi));
    dirac += -(cn * (ca * cov));
  }
  const Spinor resid =
      -dirac - 0.5 * H0 * phi - detail::I1 * (0.5 * k * (rep.n - 1)) * (cn * phi);
  return resid.norm() / phi.norm();
}

}  // namespace qlm
