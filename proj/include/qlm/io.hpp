#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qlm/mass.hpp"

namespace qlm {

namespace detail {

inline const nlohmann::json& json_field(const nlohmann::json& j, const char* key,
                                        const char* where) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw InvalidInput(std::string(where) + ": missing field \"" + key + "\"");
  }
  return *it;
}

inline double json_number(const nlohmann::json& j, const char* key, const char* where) {
  const nlohmann::json& f = json_field(j, key, where);
  if (!f.is_number()) {
    throw InvalidInput(std::string(where) + ": field \"" + key + "\" must be a number");
  }
  return f.get<double>();
}

inline double json_number_or(const nlohmann::json& j, const char* key, double fallback,
                             const char* where) {
  return j.contains(key) ? json_number(j, key, where) : fallback;
}

inline int json_int(const nlohmann::json& j, const char* key, const char* where) {
  const nlohmann::json& f = json_field(j, key, where);
  if (!f.is_number_integer()) {
    throw InvalidInput(std::string(where) + ": field \"" + key + "\" must be an integer");
  }
  return f.get<int>();
}

inline int json_int_or(const nlohmann::json& j, const char* key, int fallback,
                       const char* where) {
  return j.contains(key) ? json_int(j, key, where) : fallback;
}

inline std::string json_string(const nlohmann::json& j, const char* key, const char* where) {
  const nlohmann::json& f = json_field(j, key, where);
  if (!f.is_string()) {
    throw InvalidInput(std::string(where) + ": field \"" + key + "\" must be a string");
  }
  return f.get<std::string>();
}

inline std::vector<double> json_number_list(const nlohmann::json& j, const char* key,
                                            const char* where) {
  const nlohmann::json& f = json_field(j, key, where);
  if (!f.is_array() || f.empty()) {
    throw InvalidInput(std::string(where) + ": field \"" + key +
                       "\" must be a nonempty array of numbers");
  }
  std::vector<double> out;
  out.reserve(f.size());
  for (const nlohmann::json& v : f) {
    if (!v.is_number()) {
      throw InvalidInput(std::string(where) + ": field \"" + key +
                         "\" must contain numbers only");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace detail

inline ChartMode chart_mode_from_string(const std::string& mode) {
  if (mode == "axisymmetric") {
    return ChartMode::axisymmetric;
  }
  if (mode == "full2sphere") {
    return ChartMode::full2sphere;
  }
  throw InvalidInput("surface: mode must be \"axisymmetric\" or \"full2sphere\", got \"" +
                     mode + "\"");
}

inline ProfileSpec profile_from_json(const nlohmann::json& j) {
  const std::string type = detail::json_string(j, "type", "profile");
  if (type == "sphere") {
    return ProfileSpec::sphere_of(detail::json_number(j, "r0", "profile"));
  }
  if (type == "perturbed_sphere") {
    return ProfileSpec::perturbed(detail::json_number(j, "r0", "profile"),
                                  detail::json_number(j, "epsilon", "profile"));
  }
  if (type == "offset_sphere") {
    return ProfileSpec::offset_sphere_of(detail::json_number(j, "radius", "profile"),
                                         detail::json_number(j, "offset", "profile"));
  }
  if (type == "table") {
    return ProfileSpec::table_of(detail::json_number_list(j, "r_values", "profile"));
  }
  throw InvalidInput("profile: unknown type \"" + type + "\"");
}

inline SurfaceSpec surface_spec_from_json(const nlohmann::json& j) {
  SurfaceSpec spec;
  spec.n = detail::json_int(j, "n", "surface");
  spec.k = detail::json_number(j, "k", "surface");
  spec.mode = chart_mode_from_string(detail::json_string(j, "mode", "surface"));
  const nlohmann::json& grid = detail::json_field(j, "grid", "surface");
  spec.grid.n_theta = detail::json_int(grid, "n_theta", "grid");
  spec.grid.n_phi = detail::json_int_or(grid, "n_phi", 0, "grid");
  spec.profile = profile_from_json(detail::json_field(j, "profile", "surface"));
  return spec;
}

/// Initial data for the flow, as prescribed mean curvature or as the
/// equivalent initial lapse u0 = H0 / H. The axis profile form
/// u0 = base + axis_coef * Y0^2 covers the perturbed acceptance runs.
struct InitSpec {
  enum class Type { constant_u, constant_H, axis_profile, u_table, H_table };
  Type type = Type::constant_u;
  double value = 1.0;
  double base = 1.0;
  double axis_coef = 0.0;
  std::vector<double> values;
};

inline InitSpec init_spec_from_json(const nlohmann::json& j) {
  InitSpec init;
  const std::string type = detail::json_string(j, "type", "init");
  if (type == "constant_u") {
    init.type = InitSpec::Type::constant_u;
    init.value = detail::json_number(j, "value", "init");
  } else if (type == "constant_H") {
    init.type = InitSpec::Type::constant_H;
    init.value = detail::json_number(j, "value", "init");
  } else if (type == "axis_profile") {
    init.type = InitSpec::Type::axis_profile;
    init.base = detail::json_number(j, "base", "init");
    init.axis_coef = detail::json_number(j, "axis_coef", "init");
  } else if (type == "u_table") {
    init.type = InitSpec::Type::u_table;
    init.values = detail::json_number_list(j, "values", "init");
  } else if (type == "H_table") {
    init.type = InitSpec::Type::H_table;
    init.values = detail::json_number_list(j, "values", "init");
  } else {
    throw InvalidInput("init: unknown type \"" + type + "\"");
  }
  return init;
}

/// Resolve the initial data to the prescribed mean curvature field on the
/// given leaf. Lapse forms must be positive; curvature positivity is
/// enforced by init_u.
inline Eigen::ArrayXd initial_mean_curvature(const InitSpec& init, const SurfaceLeaf& leaf) {
  const int m = leaf.nodes();
  auto from_u = [&](const Eigen::ArrayXd& u0) {
    if (!(u0.minCoeff() > 0.0)) {
      throw InvalidInput("init: initial lapse must be positive everywhere");
    }
    return Eigen::ArrayXd(leaf.H0 / u0);
  };
  switch (init.type) {
    case InitSpec::Type::constant_u:
      return from_u(Eigen::ArrayXd::Constant(m, init.value));
    case InitSpec::Type::constant_H:
      return Eigen::ArrayXd::Constant(m, init.value);
    case InitSpec::Type::axis_profile:
      return from_u(init.base + init.axis_coef * leaf.Y.row(0).transpose().array().square());
    case InitSpec::Type::u_table:
    case InitSpec::Type::H_table: {
      if (static_cast<int>(init.values.size()) != m) {
        throw InvalidInput("init: table has " + std::to_string(init.values.size()) +
                           " values for a leaf of " + std::to_string(m) + " nodes");
      }
      Eigen::ArrayXd field = Eigen::Map<const Eigen::ArrayXd>(init.values.data(), m);
      return init.type == InitSpec::Type::u_table ? from_u(field) : field;
    }
  }
  throw InvalidInput("init: unhandled type");
}

inline FlowConfig flow_config_from_json(const nlohmann::json& j, double k) {
  FlowConfig cfg = FlowConfig::defaults_for(k);
  cfg.rho_max = detail::json_number_or(j, "rho_max", cfg.rho_max, "flow");
  cfg.safety = detail::json_number_or(j, "safety", cfg.safety, "flow");
  cfg.stride = detail::json_number_or(j, "stride", cfg.stride, "flow");
  cfg.extract_spacing =
      detail::json_number_or(j, "extract_spacing", cfg.extract_spacing, "flow");
  cfg.divergence_tol =
      detail::json_number_or(j, "divergence_tol", cfg.divergence_tol, "flow");
  return cfg;
}

/// One end-to-end run: surface, initial data, flow parameters, and the size
/// of the null direction set audited along the way.
struct RunConfig {
  SurfaceSpec surface;
  InitSpec init;
  FlowConfig flow;
  int directions = 32;
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.surface = surface_spec_from_json(detail::json_field(j, "surface", "config"));
  cfg.init = init_spec_from_json(detail::json_field(j, "init", "config"));
  cfg.flow = flow_config_from_json(j.contains("flow") ? j.at("flow") : nlohmann::json::object(),
                                   cfg.surface.k);
  cfg.directions = detail::json_int_or(j, "directions", 32, "config");
  if (cfg.directions < 1) {
    throw InvalidInput("config: directions must be positive");
  }
  return cfg;
}

inline nlohmann::json parse_json_text(const std::string& text, const char* where) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string(where) + ": " + e.what());
  }
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidInput("cannot open config file: " + path);
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

namespace detail {

inline void append_number(std::string& line, double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  line += buf;
}

inline nlohmann::json json_array(const Eigen::ArrayXd& a) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < a.size(); ++i) {
    out.push_back(a(i));
  }
  return out;
}

inline nlohmann::json json_vector(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) {
    out.push_back(v(i));
  }
  return out;
}

inline nlohmann::json json_columns(const Eigen::MatrixXd& m) {
  nlohmann::json out = nlohmann::json::array();
  for (int col = 0; col < m.cols(); ++col) {
    out.push_back(json_vector(m.col(col)));
  }
  return out;
}

}  // namespace detail

/// Frozen trace CSV: one row per recorded rho with the lapse statistics,
/// the mass vector, and the derivative diagnostics. Mass columns are zero
/// when the run carried no observer.
inline void write_trace_csv(std::ostream& out, const FlowTrace& trace) {
  std::string line = "rho,u_min,u_max,sup_u_minus_1";
  for (int comp = 0; comp <= trace.n; ++comp) {
    line += ",mass_" + std::to_string(comp);
  }
  line += ",cosh_mass,dmass_fd,dmass_analytic\n";
  out << line;
  for (const FlowRow& row : trace.rows) {
    line.clear();
    detail::append_number(line, row.rho);
    for (double x : {row.u_min, row.u_max, row.sup_u_minus_1}) {
      line += ',';
      detail::append_number(line, x);
    }
    for (int comp = 0; comp <= trace.n; ++comp) {
      line += ',';
      detail::append_number(line, row.mass.size() > comp ? row.mass(comp) : 0.0);
    }
    for (double x : {row.cosh_mass, row.dmass_fd, row.dmass_analytic}) {
      line += ',';
      detail::append_number(line, x);
    }
    line += '\n';
    out << line;
  }
}

/// Terminal fields of a run as JSON: the limit lapse field v, the null
/// generator, the boundary measure weights, and the rescaled metric.
inline nlohmann::json limit_json(const FlowTrace& trace, const LimitData& lim) {
  nlohmann::json j;
  j["schema"] = "qlm-flow-limit/1";
  j["n"] = trace.n;
  j["k"] = trace.k;
  j["mode"] = trace.initial_leaf.mode == ChartMode::axisymmetric ? "axisymmetric"
                                                                 : "full2sphere";
  j["converged"] = lim.converged;
  j["richardson_gap"] = lim.richardson_gap;
  j["v"] = detail::json_array(lim.v);
  j["gamma"] = detail::json_columns(lim.gamma);
  j["dmu"] = detail::json_array(lim.dmu);
  j["g_inf"] = {{"g11", detail::json_array(lim.g_inf_11)},
                {"g12", detail::json_array(lim.g_inf_12)},
                {"g22", detail::json_array(lim.g_inf_22)}};
  return j;
}

/// Mass report: the radial bracket context, the per-row mass diagnostics,
/// and the end-of-flow mass vector with its causal classification.
inline nlohmann::json mass_report_json(const FlowTrace& trace, const MassContext& ctx) {
  nlohmann::json j;
  j["schema"] = "qlm-mass-report/1";
  j["context"] = {{"n", ctx.n},   {"k", ctx.k},   {"R1", ctx.R1},
                  {"R2", ctx.R2}, {"mu", ctx.mu}, {"alpha", ctx.alpha}};
  nlohmann::json rows = nlohmann::json::array();
  for (const FlowRow& row : trace.rows) {
    rows.push_back({{"rho", row.rho},
                    {"u_min", row.u_min},
                    {"u_max", row.u_max},
                    {"sup_u_minus_1", row.sup_u_minus_1},
                    {"mass", detail::json_vector(row.mass)},
                    {"cosh_mass", row.cosh_mass},
                    {"dmass_fd", row.dmass_fd},
                    {"dmass_analytic", row.dmass_analytic}});
  }
  j["rows"] = std::move(rows);
  const Eigen::VectorXd& m_end = trace.rows.back().mass;
  j["limit"] = {{"vector", detail::json_vector(m_end)},
                {"classification", causal_class_name(classify_causal(m_end))},
                {"cosh_mass", trace.rows.back().cosh_mass}};
  return j;
}

}  // namespace qlm
