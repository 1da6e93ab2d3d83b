#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qlm/io.hpp"
#include "qlm/spinor.hpp"

using namespace qlm;

namespace {

// Exit-code contract: 0 all checks pass, 1 invalid input, 2 numerical
// failure, 3 check violation.
constexpr int kPass = 0;
constexpr int kInvalidInput = 1;
constexpr int kNumericalFailure = 2;
constexpr int kViolation = 3;

bool report_check(const char* name, double value, double tol, bool ok,
                  std::FILE* sink = stdout) {
  std::fprintf(sink, "check %-28s %c %13.6e  (tol %.1e)  %s\n", name, ok ? ' ' : '!', value,
               tol, ok ? "pass" : "FAIL");
  return ok;
}

Spinor random_spinor(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Spinor a(dim);
  for (int i = 0; i < dim; ++i) {
    a(i) = std::complex<double>(nd(rng), nd(rng));
  }
  return a / a.norm();
}

Eigen::VectorXd random_unit(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd v(n);
  do {
    for (int i = 0; i < n; ++i) {
      v(i) = nd(rng);
    }
  } while (v.norm() < 1e-8);
  return v / v.norm();
}

Eigen::MatrixXd random_orthonormal_frame(int n, std::mt19937_64& rng) {
  Eigen::MatrixXd m(n, n);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      m(i, j) = nd(rng);
    }
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  if (q.determinant() < 0.0) {
    q.col(0) *= -1.0;
  }
  return q;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw InvalidInput("cannot write " + path.string());
  }
  out << text;
}

int cmd_clifford_verify(int n_min, int n_max) {
  if (n_min < 2) {
    throw InvalidInput("clifford-verify: representations start at n = 2");
  }
  if (n_max < n_min) {
    throw InvalidInput("clifford-verify: n-max must be at least n-min");
  }
  bool ok = true;
  for (int n = n_min; n <= n_max; ++n) {
    const CliffordRep rep = build_clifford(n);
    const double anti = anticommutation_residual(rep);
    const double skew = skew_adjoint_residual(rep);
    const bool pass = anti < 1e-13 && skew < 1e-13;
    ok = ok && pass;
    std::printf("n=%d anticommutation=%.3e skew_adjoint=%.3e %s\n", n, anti, skew,
                pass ? "pass" : "FAIL");
  }
  return ok ? kPass : kViolation;
}

int cmd_null_decompose(const std::string& zeta_text) {
  const nlohmann::json jz = parse_json_text(zeta_text, "null-decompose");
  if (!jz.is_array() || jz.size() < 3) {
    throw InvalidInput("null-decompose: zeta must be a JSON array of at least 3 numbers");
  }
  Eigen::VectorXd zeta(jz.size());
  for (size_t i = 0; i < jz.size(); ++i) {
    if (!jz[i].is_number()) {
      throw InvalidInput("null-decompose: zeta entries must be numbers");
    }
    zeta(static_cast<int>(i)) = jz[i].get<double>();
  }
  const int n = static_cast<int>(zeta.size()) - 1;
  const CliffordRep rep = build_clifford(n);
  const Spinor a = a_of_null(rep, zeta);
  const double residual = (zeta_of_a(rep, a) - zeta).norm();

  nlohmann::json out;
  out["schema"] = "qlm-null-decompose/1";
  out["n"] = n;
  nlohmann::json ja = nlohmann::json::array();
  for (int i = 0; i < a.size(); ++i) {
    ja.push_back({a(i).real(), a(i).imag()});
  }
  out["a"] = std::move(ja);
  out["residual"] = residual;
  std::cout << out.dump(2) << "\n";
  return residual < 1e-10 ? kPass : kViolation;
}

int cmd_spinor_verify(int n_min, int n_max, int samples, unsigned long long seed) {
  if (n_min < 2 || n_max < n_min) {
    throw InvalidInput("spinor-verify: need 2 <= n-min <= n-max");
  }
  if (samples < 1) {
    throw InvalidInput("spinor-verify: samples must be positive");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> radius(0.0, 0.95);
  std::uniform_real_distribution<double> curvature(0.5, 2.0);
  bool ok = true;

  for (int n = n_min; n <= n_max; ++n) {
    const CliffordRep rep = build_clifford(n);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
      BallPoint b;
      b.k = curvature(rng);
      b.x = radius(rng) * random_unit(n, rng);
      worst = std::max(worst, norm_identity_residual(rep, random_spinor(rep.dim(), rng), b));
    }
    const bool pass = worst < 1e-11;
    ok = ok && pass;
    std::printf("n=%d norm_identity=%.3e %s\n", n, worst, pass ? "pass" : "FAIL");
  }

  for (int n = std::max(3, n_min); n <= std::min(5, n_max); ++n) {
    const CliffordRep rep = build_clifford(n);
    double worst = 0.0;
    for (double k : {0.5, 1.0}) {
      for (double r : {0.5, 1.0, 2.0}) {
        for (int s = 0; s < samples; ++s) {
          const Eigen::MatrixXd frame = random_orthonormal_frame(n, rng);
          worst = std::max(
              worst, dirac_identity_residual(rep, random_spinor(rep.dim(), rng), k, r, frame));
        }
      }
    }
    const bool pass = worst < 1e-12;
    ok = ok && pass;
    std::printf("n=%d dirac_identity=%.3e %s\n", n, worst, pass ? "pass" : "FAIL");
  }
  return ok ? kPass : kViolation;
}

// For closed-form profiles the discrete position identities must converge
// at second order under grid refinement; tables cannot be refined, so they
// get an absolute residual gate at the given resolution instead.
int cmd_geometry_verify(const std::string& config_path) {
  const nlohmann::json doc = load_json_file(config_path);
  const SurfaceSpec base =
      surface_spec_from_json(doc.contains("surface") ? doc.at("surface") : doc);

  auto residuals = [](const SurfaceSpec& spec) {
    const SurfaceLeaf leaf = build_leaf(spec);
    const double alpha = compute_context(leaf).alpha;
    return std::pair<double, double>(position_identity_rel_l1(leaf, 1.0),
                                     position_identity_rel_l1(leaf, alpha));
  };

  const SurfaceLeaf leaf = build_leaf(base);
  std::printf("n=%d k=%g mode=%s nodes=%d area=%.12g H0_min=%.6g H0_max=%.6g\n", base.n,
              base.k, base.mode == ChartMode::axisymmetric ? "axisymmetric" : "full2sphere",
              leaf.nodes(), area(leaf), leaf.H0.minCoeff(), leaf.H0.maxCoeff());
  bool ok = report_check("mean_convexity", leaf.H0.minCoeff(), 0.0, leaf.H0.minCoeff() > 0.0);

  if (base.profile.type == ProfileSpec::Type::table) {
    const auto [pos, wpos] = residuals(base);
    ok = report_check("position_identity", pos, 2e-2, pos < 2e-2) && ok;
    ok = report_check("weighted_identity", wpos, 2e-2, wpos < 2e-2) && ok;
    return ok ? kPass : kViolation;
  }

  SurfaceSpec mid = base;
  mid.grid.n_theta *= 2;
  mid.grid.n_phi *= 2;
  SurfaceSpec fine = mid;
  fine.grid.n_theta *= 2;
  fine.grid.n_phi *= 2;
  const auto [p0, w0] = residuals(base);
  const auto [p1, w1] = residuals(mid);
  const auto [p2, w2] = residuals(fine);
  const double order_p = std::log2(p0 / p1);
  const double order_p2 = std::log2(p1 / p2);
  const double order_w = std::log2(w0 / w1);
  const double order_w2 = std::log2(w1 / w2);
  std::printf("position_identity residuals: %.3e %.3e %.3e\n", p0, p1, p2);
  std::printf("weighted_identity residuals: %.3e %.3e %.3e\n", w0, w1, w2);
  ok = report_check("position_order_1", order_p, 1.5, order_p >= 1.5) && ok;
  ok = report_check("position_order_2", order_p2, 1.5, order_p2 >= 1.5) && ok;
  ok = report_check("weighted_order_1", order_w, 1.5, order_w >= 1.5) && ok;
  ok = report_check("weighted_order_2", order_w2, 1.5, order_w2 >= 1.5) && ok;
  return ok ? kPass : kViolation;
}

struct AuditedRun {
  MassContext ctx;
  FlowTrace trace;
  MassAudit audit;
};

AuditedRun run_audited(const RunConfig& cfg, unsigned long long seed) {
  const SurfaceLeaf leaf = build_leaf(cfg.surface);
  MassAudit audit(leaf, cfg.directions, static_cast<long>(seed));
  const FlowState start = init_u(leaf, initial_mean_curvature(cfg.init, leaf));
  FlowTrace trace = run(start, cfg.flow, std::ref(audit));
  return {audit.context(), std::move(trace), std::move(audit)};
}

int cmd_flow(const std::string& config_path, const std::string& out_dir,
             unsigned long long seed) {
  const RunConfig cfg = run_config_from_json(load_json_file(config_path));
  AuditedRun r = run_audited(cfg, seed);

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "trace.csv", std::ios::binary);
    if (!csv) {
      throw InvalidInput("cannot write " + (dir / "trace.csv").string());
    }
    write_trace_csv(csv, r.trace);
  }

  const double k = cfg.surface.k;
  const double reach = r.trace.rows.back().rho - r.trace.rows.front().rho;
  if (reach >= 4.0 / k - 1e-9) {
    const LimitData lim = extract_v(r.trace);
    write_text_file(dir / "limit.json", limit_json(r.trace, lim).dump(2) + "\n");
  }

  bool ok = true;
  const double scale = r.audit.pairing_scale();
  ok = report_check("monotonicity", r.audit.min_analytic_derivative(), 1e-8 * scale,
                    r.audit.min_analytic_derivative() >= -1e-8 * scale) &&
       ok;
  const double lambda = fit_decay_exponent(r.trace, 2.0 / k);
  if (std::isfinite(lambda) && reach >= 4.0 / k - 1e-9) {
    const double nk = cfg.surface.n * k;
    ok = report_check("decay_exponent", lambda, 0.1 * nk, std::abs(lambda - nk) <= 0.1 * nk) &&
         ok;
  }
  std::printf("rows=%zu rho_end=%.6g sup_u_minus_1=%.6e\n", r.trace.rows.size(),
              r.trace.rows.back().rho, r.trace.rows.back().sup_u_minus_1);
  return ok ? kPass : kViolation;
}

int cmd_mass(const std::string& config_path, const std::string& out_dir,
             unsigned long long seed) {
  const RunConfig cfg = run_config_from_json(load_json_file(config_path));
  AuditedRun r = run_audited(cfg, seed);
  const nlohmann::json report = mass_report_json(r.trace, r.ctx);
  std::cout << report.dump(2) << "\n";
  if (!out_dir.empty()) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_text_file(dir / "mass_report.json", report.dump(2) + "\n");
  }

  bool ok = true;
  const double scale = r.audit.pairing_scale();
  ok = report_check("monotonicity", r.audit.min_analytic_derivative(), 1e-8 * scale,
                    r.audit.min_analytic_derivative() >= -1e-8 * scale, stderr) &&
       ok;
  ok = report_check("integrand_sign", r.audit.max_B(), 1e-10 * r.audit.B_scale(),
                    r.audit.max_B() <= 1e-10 * r.audit.B_scale(), stderr) &&
       ok;
  ok = report_check("radial_slack", r.audit.min_radial_slack(), 1e-6,
                    r.audit.min_radial_slack() >= -1e-6, stderr) &&
       ok;
  ok = report_check("angular_slack", r.audit.min_angular_slack(), 1e-6,
                    r.audit.min_angular_slack() >= -1e-6, stderr) &&
       ok;
  ok = report_check("derivative_consistency", r.audit.max_derivative_mismatch(), 1e-2,
                    r.audit.max_derivative_mismatch() < 1e-2, stderr) &&
       ok;
  if (r.trace.rows.front().u_min >= 1.0 - 1e-12) {
    const CausalClass cls = classify_causal(r.trace.rows.back().mass);
    ok = report_check("future_limit", static_cast<double>(cls == CausalClass::future_nonspacelike),
                      1.0, cls == CausalClass::future_nonspacelike, stderr) &&
         ok;
    ok = report_check("initial_pairing", r.audit.initial_pairing_max(), 1e-8 * scale,
                      r.audit.initial_pairing_max() <= 1e-8 * scale, stderr) &&
         ok;
  }
  return ok ? kPass : kViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quasi-local mass toolkit on hyperbolic foliations"};
  app.require_subcommand(1);

  int n_min = 2, n_max = 9;
  int sp_n_min = 2, sp_n_max = 8, samples = 50;
  std::string zeta_text, config_path, out_dir = ".";
  std::string mass_out;
  unsigned long long seed = 0;

  CLI::App* cv = app.add_subcommand("clifford-verify", "anticommutation and adjointness sweeps");
  cv->add_option("--n-min", n_min, "lowest spatial dimension");
  cv->add_option("--n-max", n_max, "highest spatial dimension");

  CLI::App* nd = app.add_subcommand("null-decompose", "spinor representative of a null vector");
  nd->add_option("--zeta", zeta_text, "future null vector as a JSON array, time last")
      ->required();

  CLI::App* sv = app.add_subcommand("spinor-verify", "norm and Dirac identity sweeps");
  sv->add_option("--n-min", sp_n_min, "lowest spatial dimension");
  sv->add_option("--n-max", sp_n_max, "highest spatial dimension");
  sv->add_option("--samples", samples, "samples per configuration");
  sv->add_option("--seed", seed, "sampling seed");

  CLI::App* gv = app.add_subcommand("geometry-verify", "surface identity convergence checks");
  gv->add_option("--config", config_path, "surface JSON document")->required();

  CLI::App* fl = app.add_subcommand("flow", "integrate the lapse flow and emit the trace");
  fl->add_option("--config", config_path, "run configuration JSON")->required();
  fl->add_option("--out", out_dir, "output directory for trace.csv and limit.json");
  fl->add_option("--seed", seed, "direction-set seed on non-symmetric charts");

  CLI::App* ms = app.add_subcommand("mass", "flow plus mass functional report");
  ms->add_option("--config", config_path, "run configuration JSON")->required();
  ms->add_option("--out", mass_out, "optional output directory for mass_report.json");
  ms->add_option("--seed", seed, "direction-set seed on non-symmetric charts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidInput;
  }

  try {
    if (cv->parsed()) {
      return cmd_clifford_verify(n_min, n_max);
    }
    if (nd->parsed()) {
      return cmd_null_decompose(zeta_text);
    }
    if (sv->parsed()) {
      return cmd_spinor_verify(sp_n_min, sp_n_max, samples, seed);
    }
    if (gv->parsed()) {
      return cmd_geometry_verify(config_path);
    }
    if (fl->parsed()) {
      return cmd_flow(config_path, out_dir, seed);
    }
    if (ms->parsed()) {
      return cmd_mass(config_path, mass_out, seed);
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalidInput;
  } catch (const NumericalFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumericalFailure;
  }
  return kInvalidInput;
}
