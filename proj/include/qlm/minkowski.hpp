#pragma once

#include <Eigen/Dense>

#include "qlm/errors.hpp"

namespace qlm {

/// Vector in Minkowski space R^{n,1} with signature (+,...,+,-).
/// Components are stored spatial-first, time last.
struct MinkowskiVector {
  Eigen::VectorXd c;

  MinkowskiVector() = default;
  explicit MinkowskiVector(Eigen::VectorXd v) : c(std::move(v)) {}

  static MinkowskiVector zero(int spatial_dim) {
    return MinkowskiVector(Eigen::VectorXd::Zero(spatial_dim + 1));
  }

  int spatial_dim() const { return static_cast<int>(c.size()) - 1; }

  double t() const { return c(c.size() - 1); }
  double& t() { return c(c.size() - 1); }

  auto spatial() const { return c.head(c.size() - 1); }
  auto spatial() { return c.head(c.size() - 1); }
};

inline MinkowskiVector operator+(const MinkowskiVector& a, const MinkowskiVector& b) {
  return MinkowskiVector(a.c + b.c);
}
inline MinkowskiVector operator-(const MinkowskiVector& a, const MinkowskiVector& b) {
  return MinkowskiVector(a.c - b.c);
}
inline MinkowskiVector operator*(double s, const MinkowskiVector& a) {
  return MinkowskiVector(s * a.c);
}

/// <u,v> = sum_i u_i v_i - u_t v_t.
inline double lorentz_dot(const MinkowskiVector& u, const MinkowskiVector& v) {
  if (u.c.size() != v.c.size()) {
    throw InvalidInput("lorentz_dot: dimension mismatch");
  }
  const auto m = u.c.size() - 1;
  return u.c.head(m).dot(v.c.head(m)) - u.c(m) * v.c(m);
}

/// Same pairing on raw coordinate vectors (spatial-first, time last).
inline double lorentz_dot(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) {
    throw InvalidInput("lorentz_dot: dimension mismatch");
  }
  const auto m = u.size() - 1;
  return u.head(m).dot(v.head(m)) - u(m) * v(m);
}

}  // namespace qlm
