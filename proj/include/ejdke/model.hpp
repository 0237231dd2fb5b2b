#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ejdke/error.hpp"
#include "ejdke/levy.hpp"
#include "ejdke/numeric.hpp"
#include "ejdke/rng.hpp"

namespace ejdke {

using json = nlohmann::json;

/// x -> out, both of length d.
using VectorField = std::function<void(std::span<const double>, std::span<double>)>;
/// x -> out, out is a row-major d x d matrix.
using MatrixField = std::function<void(std::span<const double>, std::span<double>)>;

/// Constants the assumption checks compare against. They are declared with
/// the model, not inferred from it.
struct ModelMetadata {
  double ellipticity_c = 1.0;  // c^{-1} I <= a(x) <= c I
  double drift_bound = std::numeric_limits<double>::infinity();
  double lipschitz_bound = std::numeric_limits<double>::infinity();
  double rho_tilde = 1.0;  // drift condition radius
  double C_tilde = 1.0;    // drift condition strength
  double gamma_max = std::numeric_limits<double>::infinity();
};

struct ModelSpec {
  std::size_t dim = 0;
  VectorField drift;
  MatrixField diffusion;
  MatrixField jump_coeff;
  std::optional<LevySpec> levy;  // empty: pure diffusion
  std::string label;
  ModelMetadata meta;
  /// Closed-form invariant density, when one is known.
  std::function<double(std::span<const double>)> stationary_density;
  /// Normalized configuration this model was built from.
  json config;

  bool has_jumps() const noexcept { return levy.has_value(); }
};

// ---------------------------------------------------------------------------
// Construction

namespace detail {

inline double json_real(const json& j, const char* key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  const json& v = j.at(key);
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    throw ConfigError(std::string("expected a number for '") + key + "', got \"" + s + "\"");
  }
  if (!v.is_number()) throw ConfigError(std::string("expected a number for '") + key + "'");
  return v.get<double>();
}

inline json real_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

inline std::vector<double> matrix_from_json(const json& j, std::size_t d, const char* what) {
  if (!j.is_array() || j.size() != d)
    throw DimensionMismatch(std::string(what) + ": matrix must have " + std::to_string(d) + " rows");
  std::vector<double> m;
  for (const json& row : j) {
    if (!row.is_array() || row.size() != d)
      throw DimensionMismatch(std::string(what) + ": every row must have " + std::to_string(d) +
                              " entries");
    for (const json& v : row) m.push_back(v.get<double>());
  }
  return m;
}

/// Builds a constant matrix field from {"type": scaled-identity|diagonal|constant}.
inline std::vector<double> constant_matrix(const json& j, std::size_t d, const char* what,
                                           const char* scalar_key) {
  const std::string type = j.value("type", std::string("scaled-identity"));
  std::vector<double> m(d * d, 0.0);
  if (type == "scaled-identity") {
    const double s = json_real(j, scalar_key, 1.0);
    for (std::size_t i = 0; i < d; ++i) m[i * d + i] = s;
  } else if (type == "diagonal") {
    const json& vals = j.at("values");
    if (!vals.is_array() || vals.size() != d)
      throw DimensionMismatch(std::string(what) + ": diagonal needs " + std::to_string(d) +
                              " values, got " + std::to_string(vals.size()));
    for (std::size_t i = 0; i < d; ++i) m[i * d + i] = vals[i].get<double>();
  } else if (type == "constant") {
    m = matrix_from_json(j.at("matrix"), d, what);
  } else {
    throw ConfigError(std::string(what) + ": unknown type '" + type + "'");
  }
  return m;
}

inline Eigen::MatrixXd to_eigen(std::span<const double> m, std::size_t d) {
  Eigen::MatrixXd a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(i, j) = m[i * d + j];
  return a;
}

inline double operator_norm(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()(0);
}

inline double stationary_tanh_1d(double x, double C, double sigma) {
  const double p = 2.0 * C / (sigma * sigma);
  // integral of cosh(x)^{-p} over R equals B(p/2, 1/2)
  const double z = std::exp(std::lgamma(0.5 * p) + std::lgamma(0.5) - std::lgamma(0.5 * p + 0.5));
  return std::exp(-p * std::log(std::cosh(x))) / z;
}

}  // namespace detail

/// Expands a preset name into the inline configuration it stands for.
/// Known presets: "radial-pushback-<d>" and "smooth-1d". Keys other than
/// "preset" in `overrides` adjust the preset parameters.
inline json expand_preset(const std::string& name, const json& overrides = json::object()) {
  const std::string radial_prefix = "radial-pushback-";
  json cfg;
  json levy = {{"alpha", 0.5}, {"intensity", 0.05}, {"trunc_low", 1e-2},
               {"trunc_high", 3.0}, {"taper", 0.0},   {"skew", 0.0}};
  if (overrides.contains("levy") && overrides.at("levy").is_object())
    for (auto& [k, v] : overrides.at("levy").items()) levy[k] = v;

  if (name.rfind(radial_prefix, 0) == 0) {
    const std::string suffix = name.substr(radial_prefix.size());
    std::size_t d = 0;
    try {
      std::size_t used = 0;
      const long v = std::stol(suffix, &used);
      if (used != suffix.size() || v < 1) throw 0;
      d = static_cast<std::size_t>(v);
    } catch (...) {
      throw ConfigError("unknown preset '" + name + "'");
    }
    const double C = detail::json_real(overrides, "C_tilde", 1.0);
    const double sigma = detail::json_real(overrides, "sigma", 1.0);
    const double gamma0 = detail::json_real(overrides, "gamma0", 0.5);
    cfg = {{"label", name},
           {"dim", d},
           {"drift", {{"type", "radial-pushback"}, {"C", C}}},
           {"diffusion", {{"type", "scaled-identity"}, {"sigma", sigma}}},
           {"jump_coeff", {{"type", "scaled-identity"}, {"gamma", gamma0}}},
           {"levy", gamma0 == 0.0 ? json(nullptr) : levy},
           {"metadata",
            {{"ellipticity_c", std::max(sigma, 1.0 / sigma)},
             {"drift_bound", C},
             {"lipschitz_bound", C},
             {"rho_tilde", 1.0},
             {"C_tilde", C},
             {"gamma_max", std::abs(gamma0)}}}};
  } else if (name == "smooth-1d") {
    const double C = detail::json_real(overrides, "C", 1.0);
    const double sigma = detail::json_real(overrides, "sigma", 1.0);
    const double gamma0 = detail::json_real(overrides, "gamma0", 0.0);
    cfg = {{"label", name},
           {"dim", 1},
           {"drift", {{"type", "tanh"}, {"C", C}}},
           {"diffusion", {{"type", "scaled-identity"}, {"sigma", sigma}}},
           {"jump_coeff", {{"type", "scaled-identity"}, {"gamma", gamma0}}},
           {"levy", gamma0 == 0.0 ? json(nullptr) : levy},
           {"metadata",
            {{"ellipticity_c", std::max(sigma, 1.0 / sigma)},
             {"drift_bound", C},
             {"lipschitz_bound", C},
             {"rho_tilde", 1.0},
             {"C_tilde", C * std::tanh(1.0)},
             {"gamma_max", std::abs(gamma0)}}}};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return cfg;
}

inline LevySpec levy_from_json(const json& j) {
  LevySpec l;
  l.alpha = detail::json_real(j, "alpha", l.alpha);
  l.intensity = detail::json_real(j, "intensity", l.intensity);
  l.trunc_low = detail::json_real(j, "trunc_low", l.trunc_low);
  l.trunc_high = detail::json_real(j, "trunc_high", l.trunc_high);
  l.taper = detail::json_real(j, "taper", l.taper);
  l.skew = detail::json_real(j, "skew", l.skew);
  if (j.contains("symmetric") && j.at("symmetric").get<bool>() && l.skew != 0.0)
    throw ConfigError("levy: symmetric = true contradicts a nonzero skew");
  return l;
}

inline json levy_to_json(const LevySpec& l) {
  return {{"alpha", l.alpha},
          {"intensity", l.intensity},
          {"trunc_low", l.trunc_low},
          {"trunc_high", detail::real_to_json(l.trunc_high)},
          {"taper", l.taper},
          {"skew", l.skew},
          {"symmetric", l.symmetric()}};
}

/// Builds a model from a preset reference ({"preset": name, ...overrides}) or
/// an inline specification. Rejects unknown presets, dimension mismatches
/// among drift, diffusion and jump coefficient, and diffusion matrices outside
/// the declared ellipticity band.
inline ModelSpec build_model(const json& config_in) {
  json config = config_in;
  if (config.contains("preset")) config = expand_preset(config.at("preset").get<std::string>(), config_in);

  if (!config.contains("dim")) throw ConfigError("model config lacks 'dim'");
  const long dim_signed = config.at("dim").get<long>();
  if (dim_signed < 1) throw InvalidArgument("model dim must be at least 1");
  const auto d = static_cast<std::size_t>(dim_signed);

  ModelSpec m;
  m.dim = d;
  m.label = config.value("label", std::string("inline-model"));

  // Drift.
  const json drift = config.value("drift", json{{"type", "zero"}});
  const std::string drift_type = drift.value("type", std::string("zero"));
  double drift_bound = 0.0, drift_lip = 0.0, c_tilde = 1.0;
  if (drift_type == "radial-pushback") {
    const double C = detail::json_real(drift, "C", 1.0);
    m.drift = [C](std::span<const double> x, std::span<double> out) {
      double r2 = 0.0;
      for (double v : x) r2 += v * v;
      const double scale = -C / std::max(std::sqrt(r2), 1.0);
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = scale * x[i];
    };
    drift_bound = std::abs(C);
    drift_lip = std::abs(C);
    c_tilde = C;
  } else if (drift_type == "tanh") {
    const double C = detail::json_real(drift, "C", 1.0);
    m.drift = [C](std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = -C * std::tanh(x[i]);
    };
    drift_bound = std::abs(C) * std::sqrt(static_cast<double>(d));
    drift_lip = std::abs(C);
    c_tilde = C * std::tanh(1.0) / std::sqrt(static_cast<double>(d));
  } else if (drift_type == "linear") {
    const double s = detail::json_real(drift, "scale", -1.0);
    m.drift = [s](std::span<const double> x, std::span<double> out) {
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
    };
    drift_bound = std::numeric_limits<double>::infinity();
    drift_lip = std::abs(s);
    c_tilde = s < 0 ? -s : 1.0;
  } else if (drift_type == "zero") {
    m.drift = [](std::span<const double>, std::span<double> out) {
      std::fill(out.begin(), out.end(), 0.0);
    };
  } else {
    throw ConfigError("drift: unknown type '" + drift_type + "'");
  }

  // Diffusion and jump coefficient (constant matrices).
  const std::vector<double> a =
      detail::constant_matrix(config.value("diffusion", json{{"type", "scaled-identity"}}), d,
                              "diffusion", "sigma");
  const std::vector<double> g =
      detail::constant_matrix(config.value("jump_coeff", json{{"type", "scaled-identity"}}), d,
                              "jump_coeff", "gamma");
  m.diffusion = [a](std::span<const double>, std::span<double> out) {
    std::copy(a.begin(), a.end(), out.begin());
  };
  m.jump_coeff = [g](std::span<const double>, std::span<double> out) {
    std::copy(g.begin(), g.end(), out.begin());
  };

  if (config.contains("levy") && !config.at("levy").is_null()) {
    m.levy = levy_from_json(config.at("levy"));
    m.levy->validate();
  }

  // Metadata: derived defaults, then explicit overrides.
  const Eigen::MatrixXd A = detail::to_eigen(a, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (A + A.transpose()));
  const double lmin = eig.eigenvalues().minCoeff(), lmax = eig.eigenvalues().maxCoeff();
  m.meta.ellipticity_c = lmin > 0 ? std::max(lmax, 1.0 / lmin) : std::numeric_limits<double>::infinity();
  m.meta.drift_bound = drift_bound;
  m.meta.lipschitz_bound = drift_lip;
  m.meta.C_tilde = c_tilde;
  m.meta.rho_tilde = 1.0;
  m.meta.gamma_max = detail::operator_norm(detail::to_eigen(g, d));
  if (config.contains("metadata")) {
    const json& md = config.at("metadata");
    m.meta.ellipticity_c = detail::json_real(md, "ellipticity_c", m.meta.ellipticity_c);
    m.meta.drift_bound = detail::json_real(md, "drift_bound", m.meta.drift_bound);
    m.meta.lipschitz_bound = detail::json_real(md, "lipschitz_bound", m.meta.lipschitz_bound);
    m.meta.rho_tilde = detail::json_real(md, "rho_tilde", m.meta.rho_tilde);
    m.meta.C_tilde = detail::json_real(md, "C_tilde", m.meta.C_tilde);
    m.meta.gamma_max = detail::json_real(md, "gamma_max", m.meta.gamma_max);
  }

  // Ellipticity is a construction invariant: probe the origin and +-3 e_i.
  {
    const double c = m.meta.ellipticity_c;
    std::vector<double> x(d, 0.0), out(d * d);
    for (std::size_t p = 0; p <= 2 * d; ++p) {
      std::fill(x.begin(), x.end(), 0.0);
      if (p > 0) x[(p - 1) / 2] = (p % 2 ? 3.0 : -3.0);
      m.diffusion(x, out);
      const Eigen::MatrixXd ax = detail::to_eigen(out, d);
      if ((ax - ax.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw InvalidArgument("diffusion matrix is not symmetric");
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e(ax);
      const double lo = e.eigenvalues().minCoeff(), hi = e.eigenvalues().maxCoeff();
      if (!(lo > 0.0) || lo < 1.0 / c * (1 - 1e-12) || hi > c * (1 + 1e-12))
        throw InvalidArgument("diffusion violates ellipticity: eigenvalues [" + std::to_string(lo) +
                              ", " + std::to_string(hi) + "] outside [1/c, c] with c = " +
                              std::to_string(c));
    }
  }

  // Closed-form invariant density: coordinate-wise tanh drift, scaled-identity
  // diffusion, no jumps.
  const json diff_cfg = config.value("diffusion", json{{"type", "scaled-identity"}});
  if (drift_type == "tanh" && !m.levy && diff_cfg.value("type", std::string("scaled-identity")) == "scaled-identity") {
    const double C = detail::json_real(drift, "C", 1.0);
    const double sigma = detail::json_real(diff_cfg, "sigma", 1.0);
    m.stationary_density = [C, sigma](std::span<const double> x) {
      double p = 1.0;
      for (double v : x) p *= detail::stationary_tanh_1d(v, C, sigma);
      return p;
    };
  }

  config["label"] = m.label;
  m.config = config;
  return m;
}

inline ModelSpec build_model(const std::string& preset) {
  return build_model(json{{"preset", preset}});
}

inline ModelSpec build_model(const char* preset) { return build_model(std::string(preset)); }

// ---------------------------------------------------------------------------
// Assumption checks

struct CheckConfig {
  double tolerance = 1e-8;
  std::map<std::string, double> tolerance_overrides;
  double lipschitz_step = 1e-4;
  double exp_moment_eps = 0.1;
  std::size_t tail_radial_points = 200;
  LevyQuadratureConfig quad;
  std::uint64_t seed = 12345;

  double tolerance_for(const std::string& name) const {
    auto it = tolerance_overrides.find(name);
    return it == tolerance_overrides.end() ? tolerance : it->second;
  }
};

struct CheckResult {
  std::string name;
  bool applicable = true;
  bool passed = true;
  double worst_violation = 0.0;
  std::vector<double> worst_point;
  std::optional<double> value;
  double tolerance = 0.0;
  std::size_t probes = 0;
  std::string note;
};

struct AssumptionReport {
  std::string model_label;
  std::size_t dim = 0;
  std::size_t probe_count = 0;
  std::optional<LevySpec> levy;
  std::vector<CheckResult> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
  const CheckResult& at(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw InvalidArgument("no check named '" + name + "'");
  }
  std::vector<std::string> failed() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
      if (!c.passed) out.push_back(c.name);
    return out;
  }
};

/// Uniform probe points in the ball of the given radius.
inline std::vector<std::vector<double>> random_ball_probes(std::size_t d, std::size_t n,
                                                           double radius, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  std::vector<std::vector<double>> pts(n, std::vector<double>(d));
  for (auto& p : pts) {
    double r2 = 0.0;
    for (double& v : p) { v = normal(rng); r2 += v * v; }
    const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(d)) / std::sqrt(r2);
    for (double& v : p) v *= r;
  }
  return pts;
}

namespace detail {

class CheckAccumulator {
 public:
  CheckAccumulator(std::string name, double tol) { r_.name = std::move(name); r_.tolerance = tol; }

  void observe(double violation, std::span<const double> x) {
    ++r_.probes;
    if (std::isnan(violation)) violation = std::numeric_limits<double>::infinity();
    violation = std::max(violation, 0.0);
    if (r_.worst_point.empty() || violation > r_.worst_violation) {
      r_.worst_violation = violation;
      r_.worst_point.assign(x.begin(), x.end());
    }
  }
  CheckResult finish(std::string note = {}) {
    r_.passed = r_.worst_violation <= r_.tolerance;
    r_.note = std::move(note);
    return r_;
  }
  CheckResult& raw() { return r_; }

 private:
  CheckResult r_;
};

inline CheckResult not_applicable(const std::string& name, double tol, const std::string& why) {
  CheckResult r;
  r.name = name;
  r.applicable = false;
  r.passed = true;
  r.tolerance = tol;
  r.note = why;
  return r;
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace detail

/// Evaluates the model's standing assumptions at every probe point. Failures
/// are reported, never thrown; non-finite function values fail the
/// "finite_values" check.
inline AssumptionReport check_assumptions(const ModelSpec& model,
                                          const std::vector<std::vector<double>>& probes,
                                          const CheckConfig& cfg = {}) {
  if (probes.empty()) throw InvalidArgument("check_assumptions: probe_points is empty");
  if (!(cfg.tolerance > 0.0)) throw InvalidArgument("check_assumptions: tolerance must be positive");
  const std::size_t d = model.dim;
  for (const auto& p : probes)
    if (p.size() != d) throw DimensionMismatch("probe point dimension differs from model dim");

  AssumptionReport rep;
  rep.model_label = model.label;
  rep.dim = d;
  rep.probe_count = probes.size();
  rep.levy = model.levy;

  using detail::CheckAccumulator;
  auto tol = [&](const char* n) { return cfg.tolerance_for(n); };
  CheckAccumulator finite("finite_values", tol("finite_values"));
  CheckAccumulator bounded("A1.drift_bounded", tol("A1.drift_bounded"));
  CheckAccumulator ellip("A1.ellipticity", tol("A1.ellipticity"));
  CheckAccumulator lip_b("A1.lipschitz_drift", tol("A1.lipschitz_drift"));
  CheckAccumulator lip_a("A1.lipschitz_diffusion", tol("A1.lipschitz_diffusion"));
  CheckAccumulator lip_g("A1.lipschitz_jump", tol("A1.lipschitz_jump"));
  CheckAccumulator drift_cond("A2.drift_condition", tol("A2.drift_condition"));
  CheckAccumulator jump_bounded("A3.3.jump_bounded", tol("A3.3.jump_bounded"));
  CheckAccumulator jump_inv("A3.3.jump_invertible", tol("A3.3.jump_invertible"));

  Rng rng = make_rng(cfg.seed);
  std::normal_distribution<double> normal;
  std::vector<double> b(d), b2(d), a(d * d), a2(d * d), g(d * d), g2(d * d), xs(d), delta(d);
  const double c = model.meta.ellipticity_c;

  for (const auto& x : probes) {
    model.drift(x, b);
    model.diffusion(x, a);
    model.jump_coeff(x, g);
    const bool ok = detail::all_finite(b) && detail::all_finite(a) && detail::all_finite(g);
    finite.observe(ok ? 0.0 : std::numeric_limits<double>::infinity(), x);
    if (!ok) continue;

    double bn = 0.0, xb = 0.0, xn = 0.0;
    for (std::size_t i = 0; i < d; ++i) { bn += b[i] * b[i]; xb += x[i] * b[i]; xn += x[i] * x[i]; }
    bn = std::sqrt(bn);
    xn = std::sqrt(xn);
    bounded.observe(bn - model.meta.drift_bound, x);

    const Eigen::MatrixXd A = detail::to_eigen(a, d);
    const double asym = (A - A.transpose()).cwiseAbs().maxCoeff();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (A + A.transpose()));
    const double lmin = eig.eigenvalues().minCoeff(), lmax = eig.eigenvalues().maxCoeff();
    ellip.observe(std::max({asym, 1.0 / c - lmin, lmax - c}), x);

    // Sampled Lipschitz quotients along a random direction.
    double dn = 0.0;
    for (double& v : delta) { v = normal(rng); dn += v * v; }
    dn = std::sqrt(dn);
    for (std::size_t i = 0; i < d; ++i) {
      delta[i] *= cfg.lipschitz_step / dn;
      xs[i] = x[i] + delta[i];
    }
    model.drift(xs, b2);
    model.diffusion(xs, a2);
    model.jump_coeff(xs, g2);
    auto quotient = [&](std::span<const double> u, std::span<const double> v) {
      double s = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - v[i]) * (u[i] - v[i]);
      return std::sqrt(s) / cfg.lipschitz_step;
    };
    lip_b.observe(quotient(b2, b) - model.meta.lipschitz_bound, x);
    lip_a.observe(quotient(a2, a) - model.meta.lipschitz_bound, x);
    lip_g.observe(quotient(g2, g) - model.meta.lipschitz_bound, x);

    if (xn >= model.meta.rho_tilde) drift_cond.observe(xb + model.meta.C_tilde * xn, x);

    if (model.has_jumps()) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(detail::to_eigen(g, d));
      const auto sv = svd.singularValues();
      const double smax = sv(0), smin = sv(static_cast<Eigen::Index>(d) - 1);
      jump_bounded.observe(smax - model.meta.gamma_max, x);
      const double rel = smax > 0 ? smin / smax : 0.0;
      jump_inv.observe(rel <= jump_inv.raw().tolerance ? 1.0 - rel : 0.0, x);
    }
  }

  rep.checks.push_back(finite.finish());
  rep.checks.push_back(bounded.finish());
  rep.checks.push_back(ellip.finish());
  rep.checks.push_back(lip_b.finish("sampled finite-difference estimate"));
  rep.checks.push_back(lip_a.finish("sampled finite-difference estimate"));
  rep.checks.push_back(lip_g.finish("sampled finite-difference estimate"));
  rep.checks.push_back(drift_cond.finish());

  if (!model.has_jumps()) {
    const char* why = "model has no jump component";
    for (const char* n : {"A3.2.tail_bound", "A3.3.jump_bounded", "A3.3.jump_invertible",
                          "A3.4.compensator_symmetry", "A3.5.exponential_moment"})
      rep.checks.push_back(detail::not_applicable(n, tol(n), why));
    return rep;
  }

  const LevySpec& levy = *model.levy;
  const std::string trunc_note = "truncated support [" + std::to_string(levy.trunc_low) + ", " +
                                 std::to_string(levy.trunc_high) + "]";

  // Tail bound on a log-spaced radial grid along +-e_i and random directions.
  {
    CheckAccumulator tail("A3.2.tail_bound", tol("A3.2.tail_bound"));
    const double r_lo = 0.5 * levy.trunc_low;
    const double r_hi = std::isinf(levy.trunc_high) ? 100.0 / std::max(levy.taper, 1e-3) + levy.trunc_low
                                                    : 2.0 * levy.trunc_high;
    std::vector<std::vector<double>> dirs;
    for (std::size_t i = 0; i < d; ++i)
      for (double s : {1.0, -1.0}) {
        std::vector<double> u(d, 0.0);
        u[i] = s;
        dirs.push_back(u);
      }
    for (int k = 0; k < 8; ++k) {
      std::vector<double> u(d);
      double n2 = 0.0;
      for (double& v : u) { v = normal(rng); n2 += v * v; }
      for (double& v : u) v /= std::sqrt(n2);
      dirs.push_back(u);
    }
    std::vector<double> z(d);
    for (std::size_t k = 0; k < cfg.tail_radial_points; ++k) {
      const double r = r_lo * std::pow(r_hi / r_lo, static_cast<double>(k) /
                                                        static_cast<double>(cfg.tail_radial_points - 1));
      for (const auto& u : dirs) {
        for (std::size_t i = 0; i < d; ++i) z[i] = r * u[i];
        const double scaled = levy.density(z) * std::pow(r, static_cast<double>(d) + levy.alpha);
        tail.observe(scaled - levy.intensity, z);
      }
    }
    rep.checks.push_back(tail.finish(trunc_note));
  }

  rep.checks.push_back(jump_bounded.finish());
  rep.checks.push_back(jump_inv.finish());

  // Zero-mean jumps on every shell when alpha = 1, checked on the full
  // d-dimensional quadrature of z F(z).
  if (levy.alpha == 1.0) {
    CheckAccumulator sym("A3.4.compensator_symmetry", tol("A3.4.compensator_symmetry"));
    try {
      const LevyIntegral mean = levy_integral(
          levy, d, d,
          [](std::span<const double> z, std::span<double> out) { std::copy(z.begin(), z.end(), out.begin()); },
          cfg.quad);
      double n = 0.0;
      for (double v : mean.value) n += v * v;
      sym.observe(std::sqrt(n), mean.value);
      sym.raw().value = std::sqrt(n);
    } catch (const NumericalError& e) {
      sym.observe(std::numeric_limits<double>::infinity(), std::vector<double>(d, 0.0));
    }
    rep.checks.push_back(sym.finish(trunc_note));
  } else {
    rep.checks.push_back(detail::not_applicable("A3.4.compensator_symmetry",
                                                tol("A3.4.compensator_symmetry"), "alpha != 1"));
  }

  {
    CheckResult r;
    r.name = "A3.5.exponential_moment";
    r.tolerance = tol("A3.5.exponential_moment");
    r.probes = 1;
    try {
      r.value = levy_exponential_moment(levy, d, cfg.exp_moment_eps, cfg.quad);
      r.worst_violation = 0.0;
      r.passed = std::isfinite(*r.value);
    } catch (const NumericalError& e) {
      r.worst_violation = std::isfinite(e.residual) ? std::max(e.residual, r.tolerance * 2)
                                                    : std::numeric_limits<double>::infinity();
      r.passed = false;
    }
    r.note = "eps = " + std::to_string(cfg.exp_moment_eps) + ", " + trunc_note;
    rep.checks.push_back(r);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Generator

/// A C^2 scalar function; gradient and Hessian fall back to central finite
/// differences when not supplied.
struct ScalarField {
  std::function<double(std::span<const double>)> value;
  std::function<void(std::span<const double>, std::span<double>)> gradient;
  std::function<void(std::span<const double>, std::span<double>)> hessian;  // row-major d x d
};

inline LevyQuadratureConfig generator_quadrature_default() {
  // The compensated integrand cancels to O(|z|^2) near the origin and may have
  // kinks where x + g z crosses a singular point of f, so the tolerance is
  // looser and refinement deeper than for plain moments.
  LevyQuadratureConfig q;
  q.rel_tol = 1e-8;
  q.abs_tol = 1e-12;
  q.max_level = 3;
  return q;
}

struct GeneratorConfig {
  LevyQuadratureConfig quad = generator_quadrature_default();
  double gradient_step = 1e-5;
  double hessian_step = 1e-4;
};

struct GeneratorValue {
  double continuous = 0.0;
  double jump = 0.0;
  double total = 0.0;
  double residual = 0.0;  // quadrature residual of the jump part
};

namespace detail {

inline void fd_gradient(const ScalarField& f, std::span<const double> x, double h, std::span<double> out) {
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const double fp = f.value(y);
    y[i] = x[i] - h;
    const double fm = f.value(y);
    y[i] = x[i];
    out[i] = (fp - fm) / (2.0 * h);
  }
}

inline void fd_hessian(const ScalarField& f, std::span<const double> x, double h, std::span<double> out) {
  const std::size_t d = x.size();
  std::vector<double> y(x.begin(), x.end());
  const double f0 = f.value(x);
  for (std::size_t i = 0; i < d; ++i) {
    y[i] = x[i] + h;
    const double fp = f.value(y);
    y[i] = x[i] - h;
    const double fm = f.value(y);
    y[i] = x[i];
    out[i * d + i] = (fp - 2.0 * f0 + fm) / (h * h);
    for (std::size_t j = i + 1; j < d; ++j) {
      double s = 0.0;
      for (int si : {1, -1})
        for (int sj : {1, -1}) {
          y[i] = x[i] + si * h;
          y[j] = x[j] + sj * h;
          s += si * sj * f.value(y);
        }
      y[i] = x[i];
      y[j] = x[j];
      out[i * d + j] = out[j * d + i] = s / (4.0 * h * h);
    }
  }
}

}  // namespace detail

/// Applies the jump-diffusion generator to f at x:
///   continuous part  1/2 sum_ij (a a^T)_ij d_ij f + sum_i b_i d_i f,
///   jump part        integral of f(x + g z) - f(x) - (g z) . grad f(x) against F(z) dz.
inline GeneratorValue generator_apply(const ModelSpec& model, const ScalarField& f,
                                      std::span<const double> x, const GeneratorConfig& cfg = {}) {
  const std::size_t d = model.dim;
  if (x.size() != d) throw DimensionMismatch("generator_apply: x has wrong dimension");
  std::vector<double> grad(d), hess(d * d), b(d), a(d * d), g(d * d);
  if (f.gradient) f.gradient(x, grad); else detail::fd_gradient(f, x, cfg.gradient_step, grad);
  if (f.hessian) f.hessian(x, hess); else detail::fd_hessian(f, x, cfg.hessian_step, hess);
  model.drift(x, b);
  model.diffusion(x, a);

  GeneratorValue out;
  double second = 0.0, first = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    first += b[i] * grad[i];
    for (std::size_t j = 0; j < d; ++j) {
      double aat = 0.0;
      for (std::size_t k = 0; k < d; ++k) aat += a[i * d + k] * a[j * d + k];
      second += aat * hess[i * d + j];
    }
  }
  out.continuous = 0.5 * second + first;

  if (model.has_jumps()) {
    model.jump_coeff(x, g);
    const double f0 = f.value(x);
    std::vector<double> gz(d), y(d);
    const LevyIntegral li = levy_integral(
        *model.levy, d, 1,
        [&](std::span<const double> z, std::span<double> res) {
          double lin = 0.0;
          for (std::size_t i = 0; i < d; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) s += g[i * d + k] * z[k];
            gz[i] = s;
            y[i] = x[i] + s;
            lin += s * grad[i];
          }
          res[0] = f.value(y) - f0 - lin;
        },
        cfg.quad);
    out.jump = li.value[0];
    out.residual = li.residual;
  }
  out.total = out.continuous + out.jump;
  return out;
}

struct LyapunovReport {
  double eps = 0.0;
  std::vector<double> radii;
  std::vector<double> max_ratio;  // max over rays of A f*(x) / f*(x) at each radius
  std::size_t rays = 0;
  double max_residual = 0.0;  // largest jump quadrature residual seen
  bool found = false;
  double R0 = std::numeric_limits<double>::quiet_NaN();
  double c1 = std::numeric_limits<double>::quiet_NaN();
};

/// The exponential Lyapunov candidate f*(x) = exp(eps |x|) with its analytic
/// derivatives.
inline ScalarField exponential_lyapunov(double eps) {
  ScalarField f;
  f.value = [eps](std::span<const double> x) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    return std::exp(eps * std::sqrt(r2));
  };
  f.gradient = [eps](std::span<const double> x, std::span<double> out) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    const double r = std::sqrt(r2), e = std::exp(eps * r);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = eps * e * x[i] / r;
  };
  f.hessian = [eps](std::span<const double> x, std::span<double> out) {
    const std::size_t d = x.size();
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    const double r = std::sqrt(r2), e = std::exp(eps * r);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        out[i * d + j] = eps * x[i] * x[j] / r2 * e * (eps - 1.0 / r) + (i == j ? eps * e / r : 0.0);
  };
  return f;
}

/// Evaluates A f* / f* along the coordinate rays and the main diagonals. The
/// report gives the smallest tested radius R0 from which the ratio stays
/// negative at every larger tested radius, with c1 = -max ratio beyond R0.
/// Quadrature failures (e.g. eps beyond the exponential-moment threshold)
/// propagate as NumericalError.
inline GeneratorConfig lyapunov_generator_default() {
  // f* has a gradient kink at the origin; rays through |x| < gamma R see it
  // inside the jump integral, where refinement converges only algebraically.
  GeneratorConfig g;
  g.quad.rel_tol = 1e-5;
  g.quad.abs_tol = 1e-10;
  return g;
}

inline LyapunovReport lyapunov_probe(const ModelSpec& model, double eps, std::vector<double> radii,
                                     const GeneratorConfig& cfg = lyapunov_generator_default()) {
  if (!(eps > 0.0)) throw InvalidArgument("lyapunov_probe: eps must be positive");
  if (radii.empty()) throw InvalidArgument("lyapunov_probe: radii is empty");
  std::sort(radii.begin(), radii.end());
  if (!(radii.front() > 0.0)) throw InvalidArgument("lyapunov_probe: radii must be positive");
  const std::size_t d = model.dim;

  std::vector<std::vector<double>> rays;
  for (std::size_t i = 0; i < d; ++i)
    for (double s : {1.0, -1.0}) {
      std::vector<double> u(d, 0.0);
      u[i] = s;
      rays.push_back(u);
    }
  if (d > 1)
    for (double s : {1.0, -1.0}) rays.push_back(std::vector<double>(d, s / std::sqrt(static_cast<double>(d))));

  const ScalarField f = exponential_lyapunov(eps);
  LyapunovReport rep;
  rep.eps = eps;
  rep.radii = radii;
  rep.rays = rays.size();
  std::vector<double> x(d);
  for (double r : radii) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& u : rays) {
      for (std::size_t i = 0; i < d; ++i) x[i] = r * u[i];
      const GeneratorValue gv = generator_apply(model, f, x, cfg);
      worst = std::max(worst, gv.total / f.value(x));
      rep.max_residual = std::max(rep.max_residual, gv.residual / f.value(x));
    }
    rep.max_ratio.push_back(worst);
  }
  // Walk inward from the largest radius while the ratio stays negative.
  std::size_t k = radii.size();
  while (k > 0 && rep.max_ratio[k - 1] < 0.0) --k;
  if (k < radii.size()) {
    rep.found = true;
    rep.R0 = radii[k];
    rep.c1 = -*std::max_element(rep.max_ratio.begin() + static_cast<std::ptrdiff_t>(k), rep.max_ratio.end());
  }
  return rep;
}

}  // namespace ejdke
