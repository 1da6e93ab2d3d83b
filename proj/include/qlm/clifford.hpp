#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "qlm/errors.hpp"

namespace qlm {

/// Irreducible complex Clifford representation of R^n with c_i c_j + c_j c_i =
/// -2 delta_ij I on spinor space C^{2^floor(n/2)}.  All generators are
/// anti-Hermitian, so i c_j is Hermitian.  The timelike direction acts as
/// c(e_0) = i I and is not stored.
struct CliffordRep {
  int n = 0;
  std::vector<Eigen::MatrixXcd> c;

  int dim() const { return c.empty() ? 0 : static_cast<int>(c[0].rows()); }
};

namespace detail {

inline const std::complex<double> I1{0.0, 1.0};

inline Eigen::Matrix2cd gen_g1() {
  Eigen::Matrix2cd m;
  m << I1, 0.0, 0.0, -I1;
  return m;
}
inline Eigen::Matrix2cd gen_g2() {
  Eigen::Matrix2cd m;
  m << 0.0, I1, I1, 0.0;
  return m;
}
inline Eigen::Matrix2cd gen_T() {
  Eigen::Matrix2cd m;
  m << 0.0, -I1, I1, 0.0;
  return m;
}

}  // namespace detail

/// Build the representation by doubling: the even chain grows 2 -> 4 -> 6 ...
/// and the odd chain 3 -> 5 -> 7 ..., each step taking Kronecker products of
/// the previous generators with the three 2x2 seed matrices.
inline CliffordRep build_clifford(int n) {
  if (n < 2) {
    throw InvalidInput("build_clifford: need spatial dimension n >= 2");
  }
  if (n > 16) {
    throw InvalidInput("build_clifford: spinor dimension overflow, n capped at 16");
  }
  const Eigen::Matrix2cd g1 = detail::gen_g1();
  const Eigen::Matrix2cd g2 = detail::gen_g2();
  const Eigen::Matrix2cd T = detail::gen_T();

  CliffordRep rep;
  rep.n = n;
  if (n == 2) {
    rep.c = {g1, g2};
    return rep;
  }
  if (n == 3) {
    rep.c = {g1, g2, detail::I1 * T};
    return rep;
  }

  const CliffordRep prev = build_clifford(n - 2);
  const int pd = prev.dim();
  rep.c.reserve(n);
  if (n % 2 == 1) {
    const Eigen::MatrixXcd& last = prev.c.back();
    const Eigen::Matrix2cd id2 = Eigen::Matrix2cd::Identity();
    for (int j = 0; j + 1 < prev.n; ++j) {
      rep.c.push_back(Eigen::kroneckerProduct(id2, prev.c[j]).eval());
    }
    rep.c.push_back((-detail::I1 * Eigen::kroneckerProduct(g1, last)).eval());
    rep.c.push_back((-detail::I1 * Eigen::kroneckerProduct(g2, last)).eval());
    rep.c.push_back(Eigen::kroneckerProduct(T, last).eval());
  } else {
    const Eigen::MatrixXcd idp = Eigen::MatrixXcd::Identity(pd, pd);
    rep.c.push_back(Eigen::kroneckerProduct(idp, g1).eval());
    rep.c.push_back(Eigen::kroneckerProduct(idp, g2).eval());
    for (int j = 0; j < prev.n; ++j) {
      rep.c.push_back(Eigen::kroneckerProduct(prev.c[j], T).eval());
    }
  }
  return rep;
}

/// Clifford action of a spatial vector, c(v) = sum_j v_j c_j.
inline Eigen::MatrixXcd clifford_action(const CliffordRep& rep, const Eigen::VectorXd& v) {
  if (static_cast<int>(v.size()) != rep.n) {
    throw InvalidInput("clifford_action: vector dimension does not match representation");
  }
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(rep.dim(), rep.dim());
  for (int j = 0; j < rep.n; ++j) m += v(j) * rep.c[j];
  return m;
}

/// max_{i<=j} |c_i c_j + c_j c_i + 2 delta_ij I|_max.
inline double anticommutation_residual(const CliffordRep& rep) {
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(rep.dim(), rep.dim());
  double worst = 0.0;
  for (int i = 0; i < rep.n; ++i) {
    for (int j = i; j < rep.n; ++j) {
      Eigen::MatrixXcd r = rep.c[i] * rep.c[j] + rep.c[j] * rep.c[i];
      if (i == j) r += 2.0 * id;
      worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

/// max_j |c_j + c_j^H|_max; zero iff every i c_j is Hermitian.
inline double skew_adjoint_residual(const CliffordRep& rep) {
  double worst = 0.0;
  for (const auto& m : rep.c) {
    worst = std::max(worst, (m + m.adjoint()).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace qlm
