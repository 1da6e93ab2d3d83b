#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlm/surface.hpp"

namespace qlm {

/// One point of the parabolic flow: the leaf at distance rho along the
/// foliation together with the conformal lapse field u on its nodes. The
/// physical mean curvature carried by the flow is H = H0/u.
struct FlowState {
  double rho = 0.0;
  SurfaceLeaf leaf;
  Eigen::ArrayXd u;
};

struct FlowConfig {
  double rho_max = 0.0;
  double safety = 0.9;           // fraction of the explicit stability bound
  double stride = 0.0;           // spacing of recorded rows
  double extract_spacing = 0.0;  // spacing of the lapse snapshots used by extract_v
  double divergence_tol = 1e3;   // abort when u leaves [1/tol, tol]

  static FlowConfig defaults_for(double k) {
    FlowConfig c;
    c.rho_max = 6.0 / k;
    c.stride = 0.02 / k;
    // Snapshots much closer than 1/k would make the extrapolation weight
    // q/(1-q) large and amplify round-off in u - 1, so the extraction
    // cadence is kept coarser than the row stride.
    c.extract_spacing = 0.5 / k;
    return c;
  }
};

/// One recorded row of a flow run. The u statistics are filled by run();
/// the mass columns are filled by an observer so the flow itself stays
/// independent of the functional being audited.
struct FlowRow {
  double rho = 0.0;
  double u_min = 0.0;
  double u_max = 0.0;
  double sup_u_minus_1 = 0.0;
  Eigen::VectorXd mass;
  double cosh_mass = 0.0;
  double dmass_fd = 0.0;
  double dmass_analytic = 0.0;
};

using FlowObserver = std::function<void(const FlowState&, FlowRow&)>;

/// Complete record of a flow run: diagnostic rows, the data needed for the
/// limit extraction (the last three recorded lapse fields), and the exact
/// null generator gamma = X + N/k evaluated on the initial leaf.
struct FlowTrace {
  int n = 3;
  double k = 1.0;
  std::vector<FlowRow> rows;
  SurfaceLeaf initial_leaf;
  SurfaceLeaf final_leaf;
  Eigen::MatrixXd gamma;
  std::vector<double> snap_rho;
  std::vector<Eigen::ArrayXd> snap_u;
};

/// Limit data of the flow: v = lim e^{n k rho}(u - 1) by two-point
/// Richardson extrapolation in e^{-2k rho}, the boundary measure weights
/// dmu = lim e^{-(n-1)k rho} dSigma, and the rescaled metric factors.
struct LimitData {
  Eigen::ArrayXd v;
  bool converged = true;
  double richardson_gap = 0.0;
  Eigen::MatrixXd gamma;
  Eigen::ArrayXd dmu;
  Eigen::ArrayXd g_inf_11, g_inf_12, g_inf_22;
};

inline FlowState init_u(const SurfaceLeaf& leaf, const Eigen::ArrayXd& H) {
  if (static_cast<int>(H.size()) != leaf.nodes()) {
    throw InvalidInput("init_u: H size must match the leaf");
  }
  if (!(H.minCoeff() > 0.0) || !H.isFinite().all()) {
    throw InvalidInput("init_u: prescribed mean curvature must be positive");
  }
  if (!(leaf.H0.minCoeff() > 0.0)) {
    throw InvalidInput("init_u: leaf mean curvature must be positive");
  }
  FlowState state;
  state.rho = leaf.rho;
  state.leaf = leaf;
  state.u = leaf.H0 / H;
  return state;
}

namespace detail {

/// Right-hand side of the lapse equation
///   du/drho = u^2 Delta u / H0 + (u - u^3)(R + n(n-1)k^2) / (2 H0).
/// Both terms vanish identically at u == 1, making it an exact fixed point
/// of the discrete update as well.
inline Eigen::ArrayXd flow_rhs(const SurfaceLeaf& leaf, const Eigen::ArrayXd& u) {
  const double nn = static_cast<double>(leaf.n);
  const Eigen::ArrayXd reactive = scalar_curvature(leaf) + nn * (nn - 1.0) * leaf.k * leaf.k;
  return u.square() * laplace_beltrami(leaf, u) / leaf.H0 +
         (u - u.cube()) * reactive / (2.0 * leaf.H0);
}

inline void check_flow_field(const Eigen::ArrayXd& u, double rho, const char* what) {
  if (!u.isFinite().all()) {
    throw NumericalFailure(std::string(what) + ": divergence (non-finite u) at rho = " +
                           std::to_string(rho));
  }
  if (!(u.minCoeff() > 0.0)) {
    throw NumericalFailure(std::string(what) + ": flow breakdown (u <= 0) at rho = " +
                           std::to_string(rho));
  }
}

}  // namespace detail

/// One Heun step: slope on the current leaf, predictor carried to the leaf
/// advanced by the exact normal flow, average of the two slopes. The leaf
/// motion itself is exact in drho, so the step error is purely in u.
inline FlowState step(const FlowState& state, double drho) {
  if (!(drho > 0.0) || !std::isfinite(drho)) {
    throw InvalidInput("step: drho must be positive and finite");
  }
  const Eigen::ArrayXd f1 = detail::flow_rhs(state.leaf, state.u);
  FlowState out;
  out.leaf = advance_leaf(state.leaf, drho);
  out.rho = state.rho + drho;
  const Eigen::ArrayXd predictor = state.u + drho * f1;
  detail::check_flow_field(predictor, out.rho, "step");
  const Eigen::ArrayXd f2 = detail::flow_rhs(out.leaf, predictor);
  out.u = state.u + 0.5 * drho * (f1 + f2);
  detail::check_flow_field(out.u, out.rho, "step");
  return out;
}

/// Largest stable explicit step at the current state, before the safety
/// factor: min over nodes of H0 / (2 u^2 K) with K the squared inverse
/// metric mesh width. Grows like e^{2 k rho} along the flow.
inline double stability_bound(const FlowState& state) {
  const Eigen::ArrayXd bound =
      state.leaf.H0 / (2.0 * state.u.square() * stability_coefficient(state.leaf));
  return bound.minCoeff();
}

/// March the flow to rho_max with the adaptive explicit step, recording a
/// row every config.stride (and at rho = 0 and rho_max). The observer, when
/// set, fills the functional columns of each row as it is recorded.
inline FlowTrace run(const FlowState& state0, const FlowConfig& config,
                     const FlowObserver& observer = {}) {
  if (!(config.rho_max > 0.0) || !std::isfinite(config.rho_max)) {
    throw InvalidInput("run: rho_max must be positive");
  }
  if (!(config.safety > 0.0) || config.safety > 1.0) {
    throw InvalidInput("run: safety factor must lie in (0, 1]");
  }
  if (!(config.stride > 0.0) || config.stride > config.rho_max) {
    throw InvalidInput("run: stride must lie in (0, rho_max]");
  }
  if (!(config.extract_spacing > 0.0)) {
    throw InvalidInput("run: extract spacing must be positive");
  }
  if (!(config.divergence_tol > 1.0)) {
    throw InvalidInput("run: divergence tolerance must exceed 1");
  }

  FlowTrace trace;
  trace.n = state0.leaf.n;
  trace.k = state0.leaf.k;
  trace.initial_leaf = state0.leaf;
  trace.gamma = state0.leaf.X + state0.leaf.N / state0.leaf.k;

  FlowState state = state0;
  detail::check_flow_field(state.u, state.rho, "run");

  auto record = [&](const FlowState& s) {
    const double lo = 1.0 / config.divergence_tol;
    if (s.u.minCoeff() < lo || s.u.maxCoeff() > config.divergence_tol) {
      throw NumericalFailure("run: u left the divergence window at rho = " +
                             std::to_string(s.rho));
    }
    FlowRow row;
    row.rho = s.rho;
    row.u_min = s.u.minCoeff();
    row.u_max = s.u.maxCoeff();
    row.sup_u_minus_1 = (s.u - 1.0).abs().maxCoeff();
    if (observer) {
      observer(s, row);
    }
    trace.rows.push_back(std::move(row));
    const bool due = trace.snap_rho.empty() ||
                     s.rho >= trace.snap_rho.back() + (1.0 - 1e-9) * config.extract_spacing;
    if (due) {
      trace.snap_rho.push_back(s.rho);
      trace.snap_u.push_back(s.u);
      if (trace.snap_rho.size() > 3) {
        trace.snap_rho.erase(trace.snap_rho.begin());
        trace.snap_u.erase(trace.snap_u.begin());
      }
    }
  };

  record(state);
  int next_record = 1;
  const double start_rho = state.rho;
  while (state.rho < start_rho + config.rho_max - 1e-12 * config.rho_max) {
    const double target =
        std::min(start_rho + next_record * config.stride, start_rho + config.rho_max);
    const double dt = std::min(config.safety * stability_bound(state), target - state.rho);
    if (!(dt > 0.0) || !std::isfinite(dt)) {
      throw NumericalFailure("run: step size collapsed at rho = " + std::to_string(state.rho));
    }
    state = step(state, dt);
    if (state.rho >= target - 1e-9 * config.stride) {
      record(state);
      ++next_record;
    }
  }
  // The extraction always needs the terminal field, whether or not the
  // cadence landed on it.
  if (state.rho > trace.snap_rho.back() + 1e-12) {
    trace.snap_rho.push_back(state.rho);
    trace.snap_u.push_back(state.u);
    if (trace.snap_rho.size() > 3) {
      trace.snap_rho.erase(trace.snap_rho.begin());
      trace.snap_u.erase(trace.snap_u.begin());
    }
  }
  trace.final_leaf = state.leaf;
  return trace;
}

/// Extract the limit field v and the boundary-at-infinity data. Uses the
/// last two recorded lapse fields for the Richardson step and the third for
/// the convergence check; needs the run to have reached at least 4/k.
inline LimitData extract_v(const FlowTrace& trace) {
  if (trace.snap_rho.size() < 3) {
    throw InvalidInput("extract_v: trace has too few recorded rows");
  }
  const double k = trace.k;
  const double reach = trace.snap_rho.back() - trace.rows.front().rho;
  if (reach < 4.0 / k - 1e-9) {
    throw InvalidInput("extract_v: flow must reach rho_max >= 4/k");
  }
  const double nn = static_cast<double>(trace.n);

  auto richardson = [&](int hi) {
    const double r1 = trace.snap_rho[hi - 1];
    const double r2 = trace.snap_rho[hi];
    const Eigen::ArrayXd v1 = std::exp(nn * k * r1) * (trace.snap_u[hi - 1] - 1.0);
    const Eigen::ArrayXd v2 = std::exp(nn * k * r2) * (trace.snap_u[hi] - 1.0);
    const double q = std::exp(-2.0 * k * (r2 - r1));
    return Eigen::ArrayXd(v2 + (v2 - v1) * q / (1.0 - q));
  };

  LimitData out;
  out.v = richardson(2);
  const Eigen::ArrayXd prev = richardson(1);
  const double scale = std::max(out.v.abs().maxCoeff(), 1e-300);
  out.richardson_gap = (out.v - prev).abs().maxCoeff() / scale;
  out.converged = out.richardson_gap <= 0.05;

  out.gamma = trace.gamma;
  const double rho_end = trace.final_leaf.rho;
  out.dmu = std::exp(-(nn - 1.0) * k * rho_end) * trace.final_leaf.w;
  const double squeeze = std::exp(-2.0 * k * rho_end);
  out.g_inf_11 = squeeze * trace.final_leaf.g11;
  out.g_inf_12 = squeeze * trace.final_leaf.g12;
  out.g_inf_22 = squeeze * trace.final_leaf.g22;
  return out;
}

/// Least-squares decay exponent of sup|u - 1| over the rows with
/// rho >= rho_min, as the positive rate lambda in sup|u - 1| ~ C e^{-lambda
/// rho}. Returns NaN when fewer than two usable rows remain or the lapse
/// has already hit the round-off floor (sup below 1e-250), which is the
/// u == 1 fixed point in practice.
inline double fit_decay_exponent(const FlowTrace& trace, double rho_min) {
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int count = 0;
  for (const FlowRow& row : trace.rows) {
    if (row.rho < rho_min || row.sup_u_minus_1 < 1e-250) {
      continue;
    }
    const double y = std::log(row.sup_u_minus_1);
    sx += row.rho;
    sy += y;
    sxx += row.rho * row.rho;
    sxy += row.rho * y;
    ++count;
  }
  if (count < 2) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return -(count * sxy - sx * sy) / (count * sxx - sx * sx);
}

}  // namespace qlm
