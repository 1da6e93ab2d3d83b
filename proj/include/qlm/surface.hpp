#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlm/hyperboloid.hpp"
#include "qlm/minkowski.hpp"

namespace qlm {

/// Chart used to discretize a closed star-shaped hypersurface in H^n:
/// either a 1D meridian profile with an S^{n-2} rotational factor (any n),
/// or a full latitude-longitude grid over S^2 (n = 3 only).
enum class ChartMode { axisymmetric, full2sphere };

struct GridSpec {
  int n_theta = 256;
  int n_phi = 0;  // full2sphere only; must be even for the pole ghosts
};

/// Radial graph r(.) over the unit sphere defining the initial surface.
struct ProfileSpec {
  enum class Type { sphere, perturbed_sphere, offset_sphere, table };
  Type type = Type::sphere;
  double r0 = 1.0;       // sphere, perturbed_sphere: base radius
  double epsilon = 0.0;  // perturbed_sphere: r = r0 (1 + eps cos^2 theta)
  double radius = 1.0;   // offset_sphere: geodesic radius about the shifted center
  double offset = 0.0;   // offset_sphere: center distance along the polar axis
  std::vector<double> r_values;  // table: per-node radii, row-major for full grids

  static ProfileSpec sphere_of(double r0) {
    ProfileSpec p;
    p.type = Type::sphere;
    p.r0 = r0;
    return p;
  }
  static ProfileSpec perturbed(double r0, double eps) {
    ProfileSpec p;
    p.type = Type::perturbed_sphere;
    p.r0 = r0;
    p.epsilon = eps;
    return p;
  }
  static ProfileSpec offset_sphere_of(double radius, double offset) {
    ProfileSpec p;
    p.type = Type::offset_sphere;
    p.radius = radius;
    p.offset = offset;
    return p;
  }
  static ProfileSpec table_of(std::vector<double> values) {
    ProfileSpec p;
    p.type = Type::table;
    p.r_values = std::move(values);
    return p;
  }
};

struct SurfaceSpec {
  int n = 3;
  double k = 1.0;
  ChartMode mode = ChartMode::axisymmetric;
  GridSpec grid;
  ProfileSpec profile;
};

/// One leaf of the normal-exponential foliation: embedded nodes with their
/// outward unit normals, the chart metric, the shape operator in the chart
/// basis, mean curvature, and midpoint quadrature weights that sum to area.
///
/// Axisymmetric charts store the meridian in Minkowski components (0, 1, n):
/// X = (sinh(kr)cos(theta), sinh(kr)sin(theta), 0, ..., cosh(kr))/k. The
/// metric is diag(g11, g22 * round S^{n-2}) with g22 = X_1^2; s11 and s22 are
/// the meridian and rotational principal curvatures (s22 has multiplicity
/// n-2); g12, s12, s21 stay zero. Full charts store the 2x2 chart tensors.
struct SurfaceLeaf {
  int n = 3;
  double k = 1.0;
  double rho = 0.0;
  ChartMode mode = ChartMode::axisymmetric;
  GridSpec grid;

  Eigen::MatrixXd X;  // (n+1) x m embedding
  Eigen::MatrixXd N;  // (n+1) x m outward unit normal
  Eigen::MatrixXd Y;  // n x m unit radial direction
  Eigen::ArrayXd r;   // polar radius per node

  Eigen::ArrayXd g11, g12, g22;
  Eigen::ArrayXd s11, s12, s21, s22;
  Eigen::ArrayXd lam_min, lam_max;
  Eigen::ArrayXd H0, A2;
  Eigen::ArrayXd w;

  bool mean_convex = false;
  bool convex = false;

  int nodes() const { return static_cast<int>(X.cols()); }
  double h_theta() const { return M_PI / grid.n_theta; }
  double h_phi() const { return 2.0 * M_PI / std::max(1, grid.n_phi); }
  int col(int i, int j) const { return i * grid.n_phi + j; }
};

/// Volume of the unit sphere S^m.
inline double unit_sphere_volume(int m) {
  if (m < 0) {
    throw InvalidInput("unit_sphere_volume: dimension must be nonnegative");
  }
  return 2.0 * std::pow(M_PI, 0.5 * (m + 1)) / std::tgamma(0.5 * (m + 1));
}

/// Radius of the profile graph at polar angle theta (table profiles are
/// resolved per node by build_leaf instead).
inline double profile_radius(const ProfileSpec& p, double k, double cos_theta) {
  switch (p.type) {
    case ProfileSpec::Type::sphere:
      return p.r0;
    case ProfileSpec::Type::perturbed_sphere:
      return p.r0 * (1.0 + p.epsilon * cos_theta * cos_theta);
    case ProfileSpec::Type::offset_sphere: {
      const double a = std::cosh(k * p.offset);
      const double b = -std::sinh(k * p.offset) * cos_theta;
      const double c = std::cosh(k * p.radius);
      const double root = std::sqrt(a * a - b * b);
      return (std::acosh(std::max(1.0, c / root)) - std::atanh(b / a)) / k;
    }
    case ProfileSpec::Type::table:
      throw InvalidInput("profile_radius: table profiles have no closed form");
  }
  throw InvalidInput("profile_radius: unknown profile type");
}

namespace detail {

/// Lorentz-orthogonal projection onto the hyperboloid tangent space at X.
inline Eigen::VectorXd tangent_project(const Eigen::VectorXd& v, const Eigen::VectorXd& x,
                                       double k) {
  return v + (k * k * lorentz_dot(v, x)) * x;
}

/// Meridian ghost value across a pole: theta -> -theta flips the sin(theta)
/// component (index 1) and fixes the rest.
inline Eigen::VectorXd axi_ghost(const Eigen::MatrixXd& X, int i) {
  const int m = static_cast<int>(X.cols());
  Eigen::VectorXd v = X.col(i < 0 ? 0 : m - 1);
  v(1) = -v(1);
  return v;
}

/// Node column reached by stepping the lat-long grid across a pole (the
/// antipodal meridian) or around the periodic seam. Exact, not extrapolated.
inline int wrap_col(int i, int j, int n_theta, int n_phi) {
  if (i < 0) {
    i = -1 - i;
    j += n_phi / 2;
  } else if (i >= n_theta) {
    i = 2 * n_theta - 1 - i;
    j += n_phi / 2;
  }
  j = ((j % n_phi) + n_phi) % n_phi;
  return i * n_phi + j;
}

inline void check_spd_2x2(double a11, double a12, double a22, const char* where) {
  const double det = a11 * a22 - a12 * a12;
  if (!(a11 > 0.0) || !(det > 0.0)) {
    throw NumericalFailure(std::string(where) + ": chart metric is not positive definite");
  }
  const double tr = a11 + a22;
  const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
  const double lo = 0.5 * (tr - disc);
  if (lo <= 0.0 || (0.5 * (tr + disc)) / lo > 1e8) {
    throw NumericalFailure(std::string(where) + ": chart metric is degenerate");
  }
}

/// Radial unit tangent at X (the direction of increasing r), exact in the
/// node values: V = (k coth(kr) x, k tanh(kr) t).
inline Eigen::VectorXd radial_tangent(const Eigen::VectorXd& x, int n, double k, double rr) {
  Eigen::VectorXd v = x;
  const double cth = 1.0 / std::tanh(k * rr);
  v.head(n) *= k * cth;
  v(n) *= k * std::tanh(k * rr);
  return v;
}

inline void polar_data(SurfaceLeaf& leaf) {
  const int m = leaf.nodes();
  const int n = leaf.n;
  leaf.r.resize(m);
  leaf.Y.resize(n, m);
  for (int p = 0; p < m; ++p) {
    const double ct = clamp_acosh_arg(leaf.k * leaf.X(n, p), "surface polar radius");
    leaf.r(p) = std::acosh(ct) / leaf.k;
    const double s = std::sinh(leaf.k * leaf.r(p));
    if (!(s > 1e-12)) {
      throw NumericalFailure("surface polar radius: node at the chart origin");
    }
    leaf.Y.col(p) = (leaf.k / s) * leaf.X.col(p).head(n);
  }
}

inline void curvature_summary(SurfaceLeaf& leaf) {
  const int m = leaf.nodes();
  leaf.lam_min.resize(m);
  leaf.lam_max.resize(m);
  if (leaf.mode == ChartMode::axisymmetric) {
    leaf.H0 = leaf.s11 + (leaf.n - 2) * leaf.s22;
    leaf.A2 = leaf.s11.square() + (leaf.n - 2) * leaf.s22.square();
    leaf.lam_min = leaf.s11.min(leaf.s22);
    leaf.lam_max = leaf.s11.max(leaf.s22);
  } else {
    leaf.H0 = leaf.s11 + leaf.s22;
    leaf.A2 = leaf.s11.square() + 2.0 * leaf.s12 * leaf.s21 + leaf.s22.square();
    for (int p = 0; p < m; ++p) {
      const double tr = leaf.s11(p) + leaf.s22(p);
      const double det = leaf.s11(p) * leaf.s22(p) - leaf.s12(p) * leaf.s21(p);
      const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
      leaf.lam_min(p) = 0.5 * (tr - disc);
      leaf.lam_max(p) = 0.5 * (tr + disc);
    }
  }
  leaf.mean_convex = leaf.H0.minCoeff() > 0.0;
  leaf.convex = leaf.lam_min.minCoeff() > 0.0;
}

/// First-fundamental-form measurement off the embedded nodes: chart metric,
/// quadrature weights, polar data. With with_shape set, also rebuilds the
/// normal by Lorentz Gram-Schmidt against the chart tangents and measures the
/// shape operator from second differences.
inline void measure(SurfaceLeaf& leaf, bool with_shape) {
  const int n = leaf.n;
  const double k = leaf.k;
  const int m = leaf.nodes();
  polar_data(leaf);
  leaf.g11.resize(m);
  leaf.g12 = Eigen::ArrayXd::Zero(m);
  leaf.g22.resize(m);
  leaf.w.resize(m);
  if (with_shape) {
    leaf.N.resize(n + 1, m);
    leaf.s11.resize(m);
    leaf.s12 = Eigen::ArrayXd::Zero(m);
    leaf.s21 = Eigen::ArrayXd::Zero(m);
    leaf.s22.resize(m);
  }

  if (leaf.mode == ChartMode::axisymmetric) {
    const double h = leaf.h_theta();
    const double transverse = unit_sphere_volume(n - 2);
    for (int i = 0; i < m; ++i) {
      const Eigen::VectorXd xm = (i == 0) ? axi_ghost(leaf.X, -1) : Eigen::VectorXd(leaf.X.col(i - 1));
      const Eigen::VectorXd xp = (i == m - 1) ? axi_ghost(leaf.X, m) : Eigen::VectorXd(leaf.X.col(i + 1));
      const Eigen::VectorXd xc = leaf.X.col(i);
      const Eigen::VectorXd xt = tangent_project((xp - xm) / (2.0 * h), xc, k);
      leaf.g11(i) = lorentz_dot(xt, xt);
      if (!(leaf.X(1, i) > 0.0)) {
        throw NumericalFailure("surface measure: meridian touches the symmetry axis");
      }
      leaf.g22(i) = leaf.X(1, i) * leaf.X(1, i);
      check_spd_2x2(leaf.g11(i), 0.0, leaf.g22(i), "surface measure");
      leaf.w(i) = std::sqrt(leaf.g11(i)) * std::pow(leaf.X(1, i), n - 2) * h * transverse;
      if (with_shape) {
        const Eigen::VectorXd v = radial_tangent(xc, n, k, leaf.r(i));
        Eigen::VectorXd nor = v - (lorentz_dot(v, xt) / leaf.g11(i)) * xt;
        nor = tangent_project(nor, xc, k);
        const double nn = lorentz_dot(nor, nor);
        if (!(nn > 1e-12)) {
          throw NumericalFailure("surface measure: degenerate normal");
        }
        nor /= std::sqrt(nn);
        leaf.N.col(i) = nor;
        const Eigen::VectorXd xtt = (xp - 2.0 * xc + xm) / (h * h);
        leaf.s11(i) = -lorentz_dot(xtt, nor) / leaf.g11(i);
        leaf.s22(i) = nor(1) / leaf.X(1, i);
      }
    }
  } else {
    const int nt = leaf.grid.n_theta;
    const int np = leaf.grid.n_phi;
    const double ht = leaf.h_theta();
    const double hp = leaf.h_phi();
    for (int i = 0; i < nt; ++i) {
      for (int j = 0; j < np; ++j) {
        const int p = leaf.col(i, j);
        const Eigen::VectorXd xc = leaf.X.col(p);
        const Eigen::VectorXd xtm = leaf.X.col(wrap_col(i - 1, j, nt, np));
        const Eigen::VectorXd xtp = leaf.X.col(wrap_col(i + 1, j, nt, np));
        const Eigen::VectorXd xpm = leaf.X.col(wrap_col(i, j - 1, nt, np));
        const Eigen::VectorXd xpp = leaf.X.col(wrap_col(i, j + 1, nt, np));
        const Eigen::VectorXd xt = tangent_project((xtp - xtm) / (2.0 * ht), xc, k);
        const Eigen::VectorXd xf = tangent_project((xpp - xpm) / (2.0 * hp), xc, k);
        leaf.g11(p) = lorentz_dot(xt, xt);
        leaf.g12(p) = lorentz_dot(xt, xf);
        leaf.g22(p) = lorentz_dot(xf, xf);
        check_spd_2x2(leaf.g11(p), leaf.g12(p), leaf.g22(p), "surface measure");
        const double det = leaf.g11(p) * leaf.g22(p) - leaf.g12(p) * leaf.g12(p);
        leaf.w(p) = std::sqrt(det) * ht * hp;
        if (with_shape) {
          const Eigen::VectorXd v = radial_tangent(xc, n, k, leaf.r(p));
          const double vt = lorentz_dot(v, xt);
          const double vf = lorentz_dot(v, xf);
          const double a = (leaf.g22(p) * vt - leaf.g12(p) * vf) / det;
          const double b = (leaf.g11(p) * vf - leaf.g12(p) * vt) / det;
          Eigen::VectorXd nor = v - a * xt - b * xf;
          nor = tangent_project(nor, xc, k);
          const double nn = lorentz_dot(nor, nor);
          if (!(nn > 1e-12)) {
            throw NumericalFailure("surface measure: degenerate normal");
          }
          nor /= std::sqrt(nn);
          leaf.N.col(p) = nor;
          const Eigen::VectorXd xtt =
              (xtp - 2.0 * xc + xtm) / (ht * ht);
          const Eigen::VectorXd xff =
              (xpp - 2.0 * xc + xpm) / (hp * hp);
          const Eigen::VectorXd xtf =
              (leaf.X.col(wrap_col(i + 1, j + 1, nt, np)) - leaf.X.col(wrap_col(i + 1, j - 1, nt, np)) -
               leaf.X.col(wrap_col(i - 1, j + 1, nt, np)) + leaf.X.col(wrap_col(i - 1, j - 1, nt, np))) /
              (4.0 * ht * hp);
          const double h11 = -lorentz_dot(xtt, nor);
          const double h12 = -lorentz_dot(xtf, nor);
          const double h22 = -lorentz_dot(xff, nor);
          leaf.s11(p) = (leaf.g22(p) * h11 - leaf.g12(p) * h12) / det;
          leaf.s12(p) = (leaf.g22(p) * h12 - leaf.g12(p) * h22) / det;
          leaf.s21(p) = (leaf.g11(p) * h12 - leaf.g12(p) * h11) / det;
          leaf.s22(p) = (leaf.g11(p) * h22 - leaf.g12(p) * h12) / det;
        }
      }
    }
  }
  if (with_shape) {
    curvature_summary(leaf);
  }
}

/// Conductance of the meridian face between cells i and i+1. Face values of
/// the linearly vanishing transverse radius and of the meridian metric are
/// averaged separately: averaging the assembled product would lose an order
/// of accuracy per power of the radius at the degenerate pole faces.
inline double axi_face_coef(const SurfaceLeaf& leaf, int i) {
  const double x1f = 0.5 * (leaf.X(1, i) + leaf.X(1, i + 1));
  const double g11f = 0.5 * (leaf.g11(i) + leaf.g11(i + 1));
  return std::pow(x1f, leaf.n - 2) / std::sqrt(g11f);
}

inline void validate_spec(const SurfaceSpec& spec) {
  if (spec.n < 3) {
    throw InvalidInput("SurfaceSpec: ambient dimension must be at least 3");
  }
  if (!(spec.k > 0.0) || !std::isfinite(spec.k)) {
    throw InvalidInput("SurfaceSpec: curvature scale k must be positive");
  }
  if (spec.grid.n_theta < 4) {
    throw InvalidInput("SurfaceSpec: n_theta must be at least 4");
  }
  if (spec.mode == ChartMode::full2sphere) {
    if (spec.n != 3) {
      throw InvalidInput("SurfaceSpec: full2sphere charts require n = 3");
    }
    if (spec.grid.n_phi < 8 || spec.grid.n_phi % 2 != 0) {
      throw InvalidInput("SurfaceSpec: full2sphere charts need an even n_phi >= 8");
    }
  }
  const auto& p = spec.profile;
  switch (p.type) {
    case ProfileSpec::Type::sphere:
      if (!(p.r0 > 0.0)) throw InvalidInput("SurfaceSpec: sphere radius must be positive");
      break;
    case ProfileSpec::Type::perturbed_sphere:
      if (!(p.r0 > 0.0) || !(1.0 + std::min(0.0, p.epsilon) > 0.0)) {
        throw InvalidInput("SurfaceSpec: perturbed sphere must keep r positive");
      }
      break;
    case ProfileSpec::Type::offset_sphere:
      if (!(p.radius > 0.0) || p.offset < 0.0 || !(p.offset < p.radius)) {
        throw InvalidInput("SurfaceSpec: offset sphere needs 0 <= offset < radius");
      }
      break;
    case ProfileSpec::Type::table: {
      const size_t want = spec.mode == ChartMode::axisymmetric
                              ? static_cast<size_t>(spec.grid.n_theta)
                              : static_cast<size_t>(spec.grid.n_theta) * spec.grid.n_phi;
      if (p.r_values.size() != want) {
        throw InvalidInput("SurfaceSpec: table size must match the grid");
      }
      for (double v : p.r_values) {
        if (!(v > 0.0) || !std::isfinite(v)) {
          throw InvalidInput("SurfaceSpec: table radii must be positive and finite");
        }
      }
      break;
    }
  }
}

}  // namespace detail

/// Discretize the profile at cell-centered angles and measure the full
/// first/second fundamental forms from the embedding. Nonconvex or
/// non-mean-convex data is flagged on the leaf, not rejected.
inline SurfaceLeaf build_leaf(const SurfaceSpec& spec) {
  detail::validate_spec(spec);
  SurfaceLeaf leaf;
  leaf.n = spec.n;
  leaf.k = spec.k;
  leaf.rho = 0.0;
  leaf.mode = spec.mode;
  leaf.grid = spec.grid;

  const double k = spec.k;
  if (spec.mode == ChartMode::axisymmetric) {
    const int m = spec.grid.n_theta;
    leaf.grid.n_phi = 0;
    leaf.X = Eigen::MatrixXd::Zero(spec.n + 1, m);
    const double h = M_PI / m;
    for (int i = 0; i < m; ++i) {
      const double th = (i + 0.5) * h;
      const double rr = spec.profile.type == ProfileSpec::Type::table
                            ? spec.profile.r_values[i]
                            : profile_radius(spec.profile, k, std::cos(th));
      const double sr = std::sinh(k * rr) / k;
      leaf.X(0, i) = sr * std::cos(th);
      leaf.X(1, i) = sr * std::sin(th);
      leaf.X(spec.n, i) = std::cosh(k * rr) / k;
    }
  } else {
    const int nt = spec.grid.n_theta;
    const int np = spec.grid.n_phi;
    leaf.X = Eigen::MatrixXd::Zero(4, nt * np);
    const double ht = M_PI / nt;
    const double hp = 2.0 * M_PI / np;
    for (int i = 0; i < nt; ++i) {
      const double th = (i + 0.5) * ht;
      for (int j = 0; j < np; ++j) {
        const double ph = (j + 0.5) * hp;
        const int p = i * np + j;
        const double rr = spec.profile.type == ProfileSpec::Type::table
                              ? spec.profile.r_values[p]
                              : profile_radius(spec.profile, k, std::cos(th));
        const double sr = std::sinh(k * rr) / k;
        leaf.X(0, p) = sr * std::sin(th) * std::cos(ph);
        leaf.X(1, p) = sr * std::sin(th) * std::sin(ph);
        leaf.X(2, p) = sr * std::cos(th);
        leaf.X(3, p) = std::cosh(k * rr) / k;
      }
    }
  }
  detail::measure(leaf, true);
  return leaf;
}

/// Re-derive every measured field from the node positions alone, discarding
/// transported values. Cross-validates the closed-form curvature evolution.
inline SurfaceLeaf remeasure(const SurfaceLeaf& leaf) {
  SurfaceLeaf out = leaf;
  detail::measure(out, true);
  return out;
}

/// Advance the leaf a signed distance drho along its normal geodesics.
/// Node positions and normals move by the exact flow; the shape operator is
/// transported by its closed-form Riccati solution (the Moebius map
/// lambda -> k (k sinh + lambda cosh)/(k cosh + lambda sinh) on principal
/// curvatures, applied as a matrix function in the chart basis); the metric
/// and quadrature weights are remeasured from the new embedding.
inline SurfaceLeaf advance_leaf(const SurfaceLeaf& leaf, double drho) {
  if (!std::isfinite(drho)) {
    throw InvalidInput("advance_leaf: step must be finite");
  }
  const double k = leaf.k;
  const double c = std::cosh(k * drho);
  const double s = std::sinh(k * drho);

  SurfaceLeaf out = leaf;
  out.rho = leaf.rho + drho;
  out.X = c * leaf.X + (s / k) * leaf.N;
  out.N = (k * s) * leaf.X + c * leaf.N;

  const int m = leaf.nodes();
  if (leaf.mode == ChartMode::axisymmetric) {
    const Eigen::ArrayXd m1 = c + (s / k) * leaf.s11;
    const Eigen::ArrayXd m2 = c + (s / k) * leaf.s22;
    if (m1.minCoeff() <= 1e-12 || m2.minCoeff() <= 1e-12) {
      throw NumericalFailure("advance_leaf: focal point reached");
    }
    out.s11 = (k * s + c * leaf.s11) / m1;
    out.s22 = (k * s + c * leaf.s22) / m2;
  } else {
    for (int p = 0; p < m; ++p) {
      const double m11 = c + (s / k) * leaf.s11(p);
      const double m12 = (s / k) * leaf.s12(p);
      const double m21 = (s / k) * leaf.s21(p);
      const double m22 = c + (s / k) * leaf.s22(p);
      const double det = m11 * m22 - m12 * m21;
      if (det <= 1e-12) {
        throw NumericalFailure("advance_leaf: focal point reached");
      }
      const double t11 = k * s + c * leaf.s11(p);
      const double t12 = c * leaf.s12(p);
      const double t21 = c * leaf.s21(p);
      const double t22 = k * s + c * leaf.s22(p);
      out.s11(p) = (t11 * m22 - t12 * m21) / det;
      out.s12(p) = (t12 * m11 - t11 * m12) / det;
      out.s21(p) = (t21 * m22 - t22 * m21) / det;
      out.s22(p) = (t22 * m11 - t21 * m12) / det;
    }
  }
  detail::measure(out, false);
  detail::curvature_summary(out);
  return out;
}

/// Flux-form Laplace-Beltrami operator on node fields. Conservative by
/// construction: the quadrature-weighted sum of the result telescopes to the
/// boundary fluxes, which vanish (poles are degenerate cell faces; the
/// longitude direction is periodic), so constants map to exactly zero and
/// the discrete divergence theorem holds to round-off.
inline Eigen::ArrayXd laplace_beltrami(const SurfaceLeaf& leaf, const Eigen::ArrayXd& f) {
  const int m = leaf.nodes();
  if (static_cast<int>(f.size()) != m) {
    throw InvalidInput("laplace_beltrami: field size must match the leaf");
  }
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(m);

  if (leaf.mode == ChartMode::axisymmetric) {
    const double h = leaf.h_theta();
    const Eigen::ArrayXd dens = leaf.w / (h * unit_sphere_volume(leaf.n - 2));
    double flux_lo = 0.0;
    for (int i = 0; i < m; ++i) {
      const double flux_hi =
          (i == m - 1) ? 0.0 : detail::axi_face_coef(leaf, i) * (f(i + 1) - f(i)) / h;
      out(i) = (flux_hi - flux_lo) / (h * dens(i));
      flux_lo = flux_hi;
    }
    return out;
  }

  const int nt = leaf.grid.n_theta;
  const int np = leaf.grid.n_phi;
  const double ht = leaf.h_theta();
  const double hp = leaf.h_phi();
  const Eigen::ArrayXd dens = leaf.w / (ht * hp);
  const Eigen::ArrayXd ca = leaf.g22 / dens;   // dens * g^{theta theta}
  const Eigen::ArrayXd cb = -leaf.g12 / dens;  // dens * g^{theta phi}
  const Eigen::ArrayXd cc = leaf.g11 / dens;   // dens * g^{phi phi}

  auto at = [&](int i, int j) { return f(detail::wrap_col(i, j, nt, np)); };
  auto df_phi = [&](int i, int j) { return (at(i, j + 1) - at(i, j - 1)) / (2.0 * hp); };
  auto df_theta = [&](int i, int j) { return (at(i + 1, j) - at(i - 1, j)) / (2.0 * ht); };

  for (int i = 0; i < nt; ++i) {
    for (int j = 0; j < np; ++j) {
      const int p = leaf.col(i, j);
      double div = 0.0;
      if (i + 1 < nt) {
        const int q = leaf.col(i + 1, j);
        div += (0.5 * (ca(p) + ca(q)) * (f(q) - f(p)) / ht +
                0.5 * (cb(p) + cb(q)) * 0.5 * (df_phi(i, j) + df_phi(i + 1, j))) /
               ht;
      }
      if (i > 0) {
        const int q = leaf.col(i - 1, j);
        div -= (0.5 * (ca(p) + ca(q)) * (f(p) - f(q)) / ht +
                0.5 * (cb(p) + cb(q)) * 0.5 * (df_phi(i - 1, j) + df_phi(i, j))) /
               ht;
      }
      const int jr = leaf.col(i, (j + 1) % np);
      const int jl = leaf.col(i, (j - 1 + np) % np);
      div += (0.5 * (cc(p) + cc(jr)) * (f(jr) - f(p)) / hp +
              0.5 * (cb(p) + cb(jr)) * 0.5 * (df_theta(i, j) + df_theta(i, (j + 1) % np))) /
             hp;
      div -= (0.5 * (cc(p) + cc(jl)) * (f(p) - f(jl)) / hp +
              0.5 * (cb(p) + cb(jl)) * 0.5 * (df_theta(i, (j - 1 + np) % np) + df_theta(i, j))) /
             hp;
      out(p) = div / dens(p);
    }
  }
  return out;
}

/// Intrinsic scalar curvature of the leaf from the Gauss equation:
/// R = -(n-1)(n-2) k^2 + H0^2 - |A|^2.
inline Eigen::ArrayXd scalar_curvature(const SurfaceLeaf& leaf) {
  const double nn = static_cast<double>(leaf.n);
  return -(nn - 1.0) * (nn - 2.0) * leaf.k * leaf.k + leaf.H0.square() - leaf.A2;
}

/// Per-node Lorentz norm of Delta W + H0 dW/drho - (n-1) k^2 W for the
/// position-type vector field W = (x_1, ..., x_n, alpha t), which vanishes
/// identically in the continuum (alpha = 1 gives the position vector itself).
/// In the axisymmetric chart the rotational components X_1 * omega carry the
/// first S^{n-2} harmonic, whose eigenvalue enters as -(n-2)/g22.
inline Eigen::ArrayXd position_laplacian_residual(const SurfaceLeaf& leaf, double alpha = 1.0) {
  const int n = leaf.n;
  const double lead = (n - 1.0) * leaf.k * leaf.k;
  auto component_residual = [&](int comp) {
    const Eigen::ArrayXd xc = leaf.X.row(comp).transpose().array();
    const Eigen::ArrayXd nc = leaf.N.row(comp).transpose().array();
    Eigen::ArrayXd rc = laplace_beltrami(leaf, xc) + leaf.H0 * nc - lead * xc;
    if (leaf.mode == ChartMode::axisymmetric && comp == 1) {
      rc -= (n - 2.0) / xc;
    }
    return rc;
  };
  Eigen::ArrayXd sq = Eigen::ArrayXd::Zero(leaf.nodes());
  if (leaf.mode == ChartMode::axisymmetric) {
    sq = component_residual(0).square() + component_residual(1).square() -
         (alpha * component_residual(n)).square();
  } else {
    for (int comp = 0; comp < n; ++comp) {
      sq += component_residual(comp).square();
    }
    sq -= (alpha * component_residual(n)).square();
  }
  return sq.abs().sqrt();
}

/// Relative size of the position-identity residual in the integral norm
/// L1(dSigma), normalized by the mean-curvature term that dominates the
/// identity. The integral norm is the natural one for the flux-form
/// operator: its fluxes are uniformly second-order accurate, but the
/// degenerate pole cells compare a cell average against a point value, a
/// defect of fixed size on a cell of vanishing measure. That defect is
/// invisible to the residual mass yet caps pointwise-flavored norms.
inline double position_identity_rel_l1(const SurfaceLeaf& leaf, double alpha = 1.0) {
  const Eigen::ArrayXd res = position_laplacian_residual(leaf, alpha);
  const double num = (leaf.w * res).sum();
  const double den = (leaf.w * (leaf.H0 * std::max(1.0, std::abs(alpha))).abs()).sum();
  return num / den;
}

inline double area(const SurfaceLeaf& leaf) { return leaf.w.sum(); }

/// Per-node diagonal of the negated flux Laplacian, built from the same
/// face conductances the operator uses. This is the quantity that controls
/// explicit stability: 1/(g11 h^2) style mesh heuristics undershoot it by a
/// factor 2^{n-2} at the pole cells, where a single face drains a cell of
/// nearly vanishing mass. The explicit step bound is
/// drho <= H0 / (2 u^2 K) per node (Gershgorin row bound with margin two).
inline Eigen::ArrayXd stability_coefficient(const SurfaceLeaf& leaf) {
  const int m = leaf.nodes();
  const double ht = leaf.h_theta();
  Eigen::ArrayXd diag(m);
  if (leaf.mode == ChartMode::axisymmetric) {
    const Eigen::ArrayXd dens = leaf.w / (ht * unit_sphere_volume(leaf.n - 2));
    for (int i = 0; i < m; ++i) {
      double faces = 0.0;
      if (i > 0) faces += detail::axi_face_coef(leaf, i - 1);
      if (i < m - 1) faces += detail::axi_face_coef(leaf, i);
      diag(i) = faces / (ht * ht * dens(i));
    }
    return diag;
  }
  const int nt = leaf.grid.n_theta;
  const int np = leaf.grid.n_phi;
  const double hp = leaf.h_phi();
  const Eigen::ArrayXd dens = leaf.w / (ht * hp);
  const Eigen::ArrayXd ca = leaf.g22 / dens;
  const Eigen::ArrayXd cb = leaf.g12.abs() / dens;
  const Eigen::ArrayXd cc = leaf.g11 / dens;
  for (int i = 0; i < nt; ++i) {
    for (int j = 0; j < np; ++j) {
      const int p = leaf.col(i, j);
      double faces = 0.0;
      double mixed = 0.0;
      if (i + 1 < nt) {
        const int q = leaf.col(i + 1, j);
        faces += 0.5 * (ca(p) + ca(q)) / (ht * ht);
        mixed += 0.5 * (cb(p) + cb(q)) / (ht * hp);
      }
      if (i > 0) {
        const int q = leaf.col(i - 1, j);
        faces += 0.5 * (ca(p) + ca(q)) / (ht * ht);
        mixed += 0.5 * (cb(p) + cb(q)) / (ht * hp);
      }
      const int jr = leaf.col(i, (j + 1) % np);
      const int jl = leaf.col(i, (j - 1 + np) % np);
      faces += 0.5 * (cc(p) + cc(jr)) / (hp * hp);
      faces += 0.5 * (cc(p) + cc(jl)) / (hp * hp);
      mixed += 0.5 * (cb(p) + cb(jr)) / (ht * hp);
      mixed += 0.5 * (cb(p) + cb(jl)) / (ht * hp);
      diag(p) = (faces + mixed) / dens(p);
    }
  }
  return diag;
}

}  // namespace qlm
