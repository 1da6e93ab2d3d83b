#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "qlm/flow.hpp"
#include "qlm/minkowski.hpp"

namespace qlm {

/// Radial bracket of the initial leaf about the foliation center and the
/// constants derived from it. mu bounds the angular drift rate of the
/// normal flow, |dphi/drho| <= mu k dr/drho, and alpha = coth(k R1) + mu
/// weights the time component of the position pairing so that the pairing
/// integrand stays one-signed.
struct MassContext {
  int n = 3;
  double k = 1.0;
  double R1 = 0.0;
  double R2 = 0.0;
  double mu = 0.0;
  double alpha = 0.0;
};

inline MassContext compute_context(const SurfaceLeaf& leaf0) {
  MassContext ctx;
  ctx.n = leaf0.n;
  ctx.k = leaf0.k;
  ctx.R1 = leaf0.r.minCoeff();
  ctx.R2 = leaf0.r.maxCoeff();
  const double s1 = std::sinh(ctx.k * ctx.R1);
  const double s2 = std::sinh(ctx.k * ctx.R2);
  ctx.mu = std::sqrt(std::max(0.0, (s2 / s1) * (s2 / s1) - 1.0)) / s1;
  ctx.alpha = std::cosh(ctx.k * ctx.R1) / s1 + ctx.mu;
  return ctx;
}

enum class CausalClass { future_nonspacelike, spacelike, past };

inline const char* causal_class_name(CausalClass c) {
  switch (c) {
    case CausalClass::future_nonspacelike:
      return "future-nonspacelike";
    case CausalClass::spacelike:
      return "spacelike";
    default:
      return "past";
  }
}

/// Causal character of a Minkowski vector with tolerance 1e-8 ||m||_2.
/// The zero vector counts as future-nonspacelike.
inline CausalClass classify_causal(const Eigen::VectorXd& m) {
  const double tol = 1e-8 * m.norm();
  if (lorentz_dot(m, m) > tol) {
    return CausalClass::spacelike;
  }
  return m(m.size() - 1) >= -tol ? CausalClass::future_nonspacelike : CausalClass::past;
}

namespace detail {

/// Inverse of the standard normal CDF, Acklam's rational approximation
/// (relative error below 1.2e-9, ample for direction sampling).
inline double inverse_normal_cdf(double p) {
  p = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  if (p < p_low || p > 1.0 - p_low) {
    const double tail = p < p_low ? p : 1.0 - p;
    const double q = std::sqrt(-2.0 * std::log(tail));
    const double x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
                     ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    return p < p_low ? x : -x;
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

/// Root of x^{d+1} = x + 1, the base of the d-dimensional Kronecker
/// low-discrepancy sequence (d = 1 gives the golden ratio).
inline double kronecker_base(int d) {
  double x = 2.0;
  for (int it = 0; it < 64; ++it) {
    const double f = std::pow(x, d + 1) - x - 1.0;
    const double fp = (d + 1) * std::pow(x, d) - 1.0;
    x -= f / fp;
  }
  return x;
}

}  // namespace detail

/// count future null directions (t component 1, unit spatial part) as
/// columns of an (n+1) x count matrix. The first column is the reference
/// direction (1, 0, ..., 0, 1); the rest come from a Kronecker sequence on
/// the unit cube pushed through the normal inverse CDF and normalized, a
/// low-discrepancy analogue of Gaussian sphere sampling. seed shifts the
/// sequence so independent sets can be drawn deterministically.
inline Eigen::MatrixXd null_direction_set(int n, int count, long seed = 0) {
  if (n < 2 || count < 1) {
    throw InvalidInput("null_direction_set: need n >= 2 and count >= 1");
  }
  Eigen::MatrixXd dirs = Eigen::MatrixXd::Zero(n + 1, count);
  dirs(0, 0) = 1.0;
  dirs(n, 0) = 1.0;
  const double base = detail::kronecker_base(n);
  Eigen::VectorXd alpha(n);
  for (int j = 0; j < n; ++j) {
    alpha(j) = std::pow(base, -(j + 1));
  }
  long index = seed;
  for (int col = 1; col < count; ++col) {
    Eigen::VectorXd y(n);
    do {
      ++index;
      for (int j = 0; j < n; ++j) {
        double x = 0.5 + static_cast<double>(index) * alpha(j);
        y(j) = detail::inverse_normal_cdf(x - std::floor(x));
      }
    } while (y.norm() < 1e-8);
    dirs.col(col).head(n) = y / y.norm();
    dirs(n, col) = 1.0;
  }
  return dirs;
}

/// Evenly spaced future null directions whose spatial parts lie in the
/// plane of the first two spatial axes. On a rotationally symmetric chart
/// every null direction is equivalent to one of these, and the fan contains
/// each direction's mirror, which is what pointwise audits need: the audit
/// integrands are affine or convex along a symmetry orbit, so their
/// extremes over the orbit are attained at the two meridian-plane points,
/// reached by the direction and its mirror.
inline Eigen::MatrixXd meridian_null_fan(int n, int count) {
  if (n < 2 || count < 1) {
    throw InvalidInput("meridian_null_fan: need n >= 2 and count >= 1");
  }
  Eigen::MatrixXd dirs = Eigen::MatrixXd::Zero(n + 1, count);
  for (int col = 0; col < count; ++col) {
    const double beta = 2.0 * M_PI * col / count;
    dirs(0, col) = std::cos(beta);
    dirs(1, col) = std::sin(beta);
    dirs(n, col) = 1.0;
  }
  return dirs;
}

/// The mass vector integrates the mean-curvature deficit against the
/// position field with a time component weighted by alpha:
///   m = Int (H0 - H) (x_1, ..., x_n, alpha t) dSigma,   H = H0 / u.
/// On the rotationally symmetric chart the components transverse to the
/// symmetry axis vanish by the orbit average and are returned as exact
/// zeros.
inline Eigen::VectorXd mass_vector(const FlowState& state, const MassContext& ctx) {
  const SurfaceLeaf& leaf = state.leaf;
  const int n = leaf.n;
  const Eigen::ArrayXd cell = leaf.w * leaf.H0 * (1.0 - 1.0 / state.u);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n + 1);
  if (leaf.mode == ChartMode::axisymmetric) {
    m(0) = (cell * leaf.X.row(0).transpose().array()).sum();
  } else {
    for (int comp = 0; comp < n; ++comp) {
      m(comp) = (cell * leaf.X.row(comp).transpose().array()).sum();
    }
  }
  m(n) = ctx.alpha * (cell * leaf.X.row(n).transpose().array()).sum();
  return m;
}

/// Quadrature of (H0 - H) cosh(k r); cosh(k r) = k t, so this is the mass
/// pairing with the static time translation and needs no alpha.
inline double cosh_mass(const FlowState& state) {
  const SurfaceLeaf& leaf = state.leaf;
  const Eigen::ArrayXd cell = leaf.w * leaf.H0 * (1.0 - 1.0 / state.u);
  return leaf.k * (cell * leaf.X.row(leaf.n).transpose().array()).sum();
}

namespace detail {

/// Per-node radial and angular rates of the unit normal flow, exact from
/// the leaf normal: r' = N_t / sinh(k r), phi = <Y, zeta_spatial>, and
/// phi' = k (<N_spatial, zeta> - cosh(k r) r' phi) / sinh(k r).
struct RadialRates {
  Eigen::ArrayXd sh, ch;  // sinh(k r), cosh(k r)
  Eigen::ArrayXd r_rate;
  Eigen::ArrayXd phi, phi_rate;
};

inline RadialRates radial_rates(const SurfaceLeaf& leaf, const Eigen::VectorXd& zeta) {
  RadialRates out;
  out.sh = (leaf.k * leaf.r).sinh();
  out.ch = (leaf.k * leaf.r).cosh();
  out.r_rate = leaf.N.row(leaf.n).transpose().array() / out.sh;
  out.phi = (leaf.Y.transpose() * zeta.head(leaf.n)).array();
  const Eigen::ArrayXd n_dot = (leaf.N.topRows(leaf.n).transpose() * zeta.head(leaf.n)).array();
  out.phi_rate = leaf.k * (n_dot - out.ch * out.r_rate * out.phi) / out.sh;
  return out;
}

/// Integrals on the rotationally symmetric chart see only the orbit
/// average of the direction: a meridian node stands for a whole symmetry
/// orbit, the transverse components of any vector field pair with first
/// orbit harmonics, and their average over the orbit vanishes. Pointwise
/// audits keep the original direction; only quadratures project it.
inline Eigen::VectorXd orbit_average_direction(ChartMode mode, const Eigen::VectorXd& zeta) {
  if (mode != ChartMode::axisymmetric) {
    return zeta;
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(zeta.size());
  out(0) = zeta(0);
  out(zeta.size() - 1) = zeta(zeta.size() - 1);
  return out;
}

}  // namespace detail

/// Per-node integrand of the mass-pairing derivative,
///   B = (H0^2 - |A|^2)(phi sinh kr - alpha cosh kr) / 2
///     + H0 (phi' sinh kr + k r' (phi cosh kr - alpha sinh kr)),
/// which is nonpositive on mean-convex leaves whose radial bracket defines
/// alpha. The rates r' and phi' are exact per-node values from the normal.
inline Eigen::ArrayXd integrand_B(const FlowState& state, const MassContext& ctx,
                                  const Eigen::VectorXd& zeta) {
  const SurfaceLeaf& leaf = state.leaf;
  const detail::RadialRates rr = detail::radial_rates(leaf, zeta);
  return 0.5 * (leaf.H0.square() - leaf.A2) * (rr.phi * rr.sh - ctx.alpha * rr.ch) +
         leaf.H0 * (rr.phi_rate * rr.sh + leaf.k * rr.r_rate * (rr.phi * rr.ch - ctx.alpha * rr.sh));
}

/// d(m . zeta)/drho = -(1/k) Int u^{-1} (u - 1)^2 B dSigma. Nonnegative
/// because B <= 0; exactly zero at the fixed point u == 1. B is affine in
/// (phi, phi'), so on the rotationally symmetric chart the orbit average
/// of the integrand equals the integrand of the orbit-averaged direction.
inline double mass_derivative_analytic(const FlowState& state, const MassContext& ctx,
                                       const Eigen::VectorXd& zeta) {
  const Eigen::ArrayXd b =
      integrand_B(state, ctx, detail::orbit_average_direction(state.leaf.mode, zeta));
  const Eigen::ArrayXd cell = state.leaf.w * (state.u - 1.0).square() / state.u;
  return -(cell * b).sum() / state.leaf.k;
}

/// Finite-difference slacks of the radial-rate inequalities between two
/// leaves of the same foliation:
///   radial_slack  = min dr/drho - sinh(k R1)/sinh(k R2)
///   angular_slack = min (mu k dr/drho - |dphi/drho|)
///   speed_slack   = min ((1 - phi^2) k^2 / sinh^2(k r) - (dphi/drho)^2)
/// The first two hold node by node for the exact normal flow (the mean
/// value theorem transfers them to finite differences); the third is the
/// kinematic bound on the angular speed, evaluated at midpoint values and
/// reported for reference.
struct GeodesicReport {
  double min_radial_rate = 0.0;
  double radial_slack = 0.0;
  double angular_slack = 0.0;
  double speed_slack = 0.0;
};

inline GeodesicReport check_geodesic_inequalities(const SurfaceLeaf& before,
                                                  const SurfaceLeaf& after,
                                                  const MassContext& ctx,
                                                  const Eigen::VectorXd& zeta) {
  const double drho = after.rho - before.rho;
  if (!(drho > 0.0)) {
    throw InvalidInput("check_geodesic_inequalities: leaves must be ordered in rho");
  }
  const double k = ctx.k;
  const Eigen::ArrayXd r_rate = (after.r - before.r) / drho;
  const Eigen::ArrayXd phi_a = (before.Y.transpose() * zeta.head(before.n)).array();
  const Eigen::ArrayXd phi_b = (after.Y.transpose() * zeta.head(after.n)).array();
  const Eigen::ArrayXd phi_rate = (phi_b - phi_a) / drho;
  const Eigen::ArrayXd phi_mid = 0.5 * (phi_a + phi_b);
  const Eigen::ArrayXd r_mid = 0.5 * (before.r + after.r);

  GeodesicReport rep;
  rep.min_radial_rate = r_rate.minCoeff();
  rep.radial_slack = rep.min_radial_rate - std::sinh(k * ctx.R1) / std::sinh(k * ctx.R2);
  rep.angular_slack = (ctx.mu * k * r_rate - phi_rate.abs()).minCoeff();
  rep.speed_slack =
      ((1.0 - phi_mid.square()) * k * k / (k * r_mid).sinh().square() - phi_rate.square())
          .minCoeff();
  return rep;
}

/// Pairing of the mean-curvature deficit against -2k <X, zeta>, the scalar
/// whose large-rho limit the asymptotic mass formula reproduces.
inline double trace_tail_pairing(const FlowState& state, const Eigen::VectorXd& zeta) {
  const SurfaceLeaf& leaf = state.leaf;
  const Eigen::VectorXd z = detail::orbit_average_direction(leaf.mode, zeta);
  const Eigen::ArrayXd cell = leaf.w * leaf.H0 * (1.0 - 1.0 / state.u);
  const Eigen::ArrayXd x_dot = (leaf.X.transpose() * z).array() -
                               2.0 * leaf.X.row(leaf.n).transpose().array() * z(leaf.n);
  return -2.0 * leaf.k * (cell * x_dot).sum();
}

/// Closed-form limit of the trace tail from the extracted flow limits:
/// -(n-1) k^2 Int v <gamma, zeta> dmu. The generator gamma is normalized
/// as X + N/k, twice the decay limit of e^{-k rho} X, which absorbs a
/// factor 2 into the prefactor.
inline double limit_mass_formula(const FlowTrace& trace, const LimitData& lim,
                                 const Eigen::VectorXd& zeta) {
  const double k = trace.k;
  const Eigen::VectorXd z = detail::orbit_average_direction(trace.initial_leaf.mode, zeta);
  const Eigen::ArrayXd g_dot = (lim.gamma.transpose() * z).array() -
                               2.0 * lim.gamma.row(trace.n).transpose().array() * z(trace.n);
  return -(trace.n - 1.0) * k * k * (lim.v * g_dot * lim.dmu).sum();
}

/// Flow observer that audits the mass functional along a run: fills the
/// mass columns of each row and accumulates the quantities the positivity
/// statements quantify over (pairing monotonicity for a direction set, the
/// sign of B at every node, the radial-rate slacks between consecutive
/// records, and the finite-difference consistency of the analytic
/// derivative). Invoke via std::ref, the observer is stateful.
class MassAudit {
 public:
  explicit MassAudit(const SurfaceLeaf& leaf0, int direction_count = 32, long seed = 0)
      : ctx_(compute_context(leaf0)),
        dirs_(leaf0.mode == ChartMode::axisymmetric
                  ? meridian_null_fan(leaf0.n, direction_count)
                  : null_direction_set(leaf0.n, direction_count, seed)) {}

  void operator()(const FlowState& state, FlowRow& row) {
    const int d = static_cast<int>(dirs_.cols());
    const Eigen::VectorXd m = mass_vector(state, ctx_);
    row.mass = m;
    row.cosh_mass = cosh_mass(state);

    Eigen::VectorXd pair(d), ana(d);
    for (int j = 0; j < d; ++j) {
      pair(j) = lorentz_dot(m, Eigen::VectorXd(dirs_.col(j)));
      ana(j) = mass_derivative_analytic(state, ctx_, dirs_.col(j));
      const Eigen::ArrayXd b = integrand_B(state, ctx_, dirs_.col(j));
      max_b_ = std::max(max_b_, b.maxCoeff());
      b_scale_ = std::max(b_scale_, b.abs().maxCoeff());
    }
    row.dmass_analytic = ana(0);
    row.dmass_fd = 0.0;
    min_analytic_ = std::min(min_analytic_, ana.minCoeff());

    if (have_prev_) {
      const double drho = state.rho - prev_rho_;
      const Eigen::VectorXd fd = (pair - prev_pair_) / drho;
      row.dmass_fd = fd(0);
      min_slope_ = std::min(min_slope_, fd.minCoeff());
      for (int j = 0; j < d; ++j) {
        const double trap = 0.5 * (ana(j) + prev_ana_(j));
        max_mismatch_(j) = std::max(max_mismatch_(j), std::abs(fd(j) - trap));
        const GeodesicReport rep =
            check_geodesic_inequalities(prev_leaf_, state.leaf, ctx_, dirs_.col(j));
        min_radial_slack_ = std::min(min_radial_slack_, rep.radial_slack);
        min_angular_slack_ = std::min(min_angular_slack_, rep.angular_slack);
        min_speed_slack_ = std::min(min_speed_slack_, rep.speed_slack);
      }
    } else {
      max_mismatch_ = Eigen::VectorXd::Zero(d);
      max_ana_ = Eigen::VectorXd::Zero(d);
      initial_pairing_max_ = pair.maxCoeff();
      first_pairing_ = pair;
    }
    max_ana_ = have_prev_ ? max_ana_.cwiseMax(ana.cwiseAbs()).eval() : ana.cwiseAbs().eval();
    pairing_scale_ = std::max(pairing_scale_, pair.cwiseAbs().maxCoeff());

    rho_series_.push_back(state.rho);
    pairing_series_.push_back(pair);
    prev_rho_ = state.rho;
    prev_pair_ = pair;
    prev_ana_ = ana;
    prev_leaf_ = state.leaf;
    have_prev_ = true;
    last_state_ = state;
  }

  const MassContext& context() const { return ctx_; }
  const Eigen::MatrixXd& directions() const { return dirs_; }
  const FlowState& last_state() const { return last_state_; }
  const std::vector<double>& rho_series() const { return rho_series_; }
  const std::vector<Eigen::VectorXd>& pairing_series() const { return pairing_series_; }

  /// Largest |m . zeta| seen over the run, the scale for slope tolerances.
  double pairing_scale() const { return pairing_scale_; }
  /// Most negative analytic derivative over rows and directions. This is
  /// the monotonicity statement proper: the derivative is a quadrature of
  /// one-signed terms, so any negative excursion is pure round-off.
  double min_analytic_derivative() const { return min_analytic_; }
  /// Most negative finite-difference slope of m . zeta over rows and
  /// directions. Unlike the analytic derivative this carries the raw
  /// quadrature error of the pairing itself: once (u - 1)^2 decays below
  /// the O(h^2) measurement floor of the grown leaves, the recorded
  /// pairing drifts at a rate of order h^2 * scale per unit rho, so slope
  /// tolerances must include that envelope.
  double min_monotonicity_slope() const { return min_slope_; }
  /// Largest |FD slope - trapezoid analytic| relative to the peak analytic
  /// magnitude of the same direction.
  double max_derivative_mismatch() const {
    double worst = 0.0;
    for (int j = 0; j < max_mismatch_.size(); ++j) {
      worst = std::max(worst, max_mismatch_(j) / std::max(max_ana_(j), 1e-300));
    }
    return worst;
  }
  double max_B() const { return max_b_; }
  double B_scale() const { return b_scale_; }
  double min_radial_slack() const { return min_radial_slack_; }
  double min_angular_slack() const { return min_angular_slack_; }
  double min_speed_slack() const { return min_speed_slack_; }
  /// Largest m . zeta over directions at the first record.
  double initial_pairing_max() const { return initial_pairing_max_; }
  const Eigen::VectorXd& initial_pairing() const { return first_pairing_; }

 private:
  MassContext ctx_;
  Eigen::MatrixXd dirs_;
  bool have_prev_ = false;
  double prev_rho_ = 0.0;
  Eigen::VectorXd prev_pair_, prev_ana_;
  SurfaceLeaf prev_leaf_;
  FlowState last_state_;
  std::vector<double> rho_series_;
  std::vector<Eigen::VectorXd> pairing_series_;
  Eigen::VectorXd max_mismatch_, max_ana_;
  Eigen::VectorXd first_pairing_;
  double pairing_scale_ = 0.0;
  double min_analytic_ = std::numeric_limits<double>::infinity();
  double min_slope_ = std::numeric_limits<double>::infinity();
  double max_b_ = -std::numeric_limits<double>::infinity();
  double b_scale_ = 0.0;
  double min_radial_slack_ = std::numeric_limits<double>::infinity();
  double min_angular_slack_ = std::numeric_limits<double>::infinity();
  double min_speed_slack_ = std::numeric_limits<double>::infinity();
  double initial_pairing_max_ = 0.0;
};

}  // namespace qlm
