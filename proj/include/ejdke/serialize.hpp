#pragma once

#include <charconv>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ejdke/adaptive.hpp"
#include "ejdke/estimator.hpp"
#include "ejdke/kernel.hpp"
#include "ejdke/model.hpp"
#include "ejdke/rates.hpp"
#include "ejdke/reference.hpp"

namespace ejdke {

/// Shortest round-trip decimal form; identical bits give identical text.
inline std::string fmt_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline json vec_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(detail::real_to_json(x));
  return a;
}

/// First line of every CSV artifact: the configuration that produced it.
inline void write_config_line(std::ostream& out, const json& config) {
  out << "# config: " << config.dump() << '\n';
}

inline json to_json(const CheckResult& c) {
  json j = {{"name", c.name},
            {"applicable", c.applicable},
            {"passed", c.passed},
            {"worst_violation", detail::real_to_json(c.worst_violation)},
            {"worst_point", vec_json(c.worst_point)},
            {"tolerance", c.tolerance},
            {"probes", c.probes}};
  if (c.value) j["value"] = detail::real_to_json(*c.value);
  if (!c.note.empty()) j["note"] = c.note;
  return j;
}

inline json to_json(const AssumptionReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back(to_json(c));
  json j = {{"model", r.model_label},
            {"dim", r.dim},
            {"probe_count", r.probe_count},
            {"all_passed", r.all_passed()},
            {"failed", r.failed()},
            {"checks", checks}};
  if (r.levy) {
    j["levy"] = levy_to_json(*r.levy);
    j["truncation"] = {{"low", r.levy->trunc_low}, {"high", detail::real_to_json(r.levy->trunc_high)}};
  } else {
    j["levy"] = nullptr;
  }
  return j;
}

inline json to_json(const Kernel& k) {
  return {{"order", k.order()},
          {"even_power_coeffs", k.even_coeffs()},
          {"legendre_coeffs", k.legendre_coeffs()},
          {"sup_norm", k.sup_norm()},
          {"l1_norm", k.l1_norm()}};
}

inline json to_json(const EvalGrid& g) {
  return {{"lo", g.lo()}, {"hi", g.hi()}, {"nodes", g.nodes()}, {"cell_volume", g.cell_volume()}};
}

inline EvalGrid eval_grid_from_json(const json& j, std::size_t d) {
  auto axis = [&](const char* key) {
    const json& v = j.at(key);
    if (v.is_number()) return std::vector<double>(d, v.get<double>());
    auto out = v.get<std::vector<double>>();
    if (out.size() != d) throw DimensionMismatch(std::string("eval.") + key + " has wrong dimension");
    return out;
  };
  std::vector<std::size_t> nodes;
  if (j.at("nodes").is_number()) nodes.assign(d, j.at("nodes").get<std::size_t>());
  else nodes = j.at("nodes").get<std::vector<std::size_t>>();
  if (nodes.size() != d) throw DimensionMismatch("eval.nodes has wrong dimension");
  return EvalGrid(axis("lo"), axis("hi"), nodes);
}

inline json to_json(const BandwidthGrid& g) {
  return {{"T", g.T},
          {"d", g.d},
          {"mode", to_string(g.mode)},
          {"k_max", g.k_max},
          {"lower_bound", g.lower},
          {"upper_bound", g.upper},
          {"size", g.size()},
          {"growth_exponent", g.growth_exponent}};
}

inline json to_json(const AdaptiveSelection& s) {
  json table = json::array();
  for (std::size_t i = 0; i < s.members.size(); ++i)
    table.push_back({{"h", s.members[i]}, {"A", s.A[i]}, {"V", s.V[i]}, {"A_plus_V", s.score[i]}, {"selected", i == s.selected}});
  return {{"h_tilde", s.h_tilde},
          {"selected_index", s.selected},
          {"k", s.k},
          {"T", s.T},
          {"kernel_order", s.kernel_order},
          {"grid", to_json(s.grid)},
          {"table", table}};
}

inline void write_selection_csv(std::ostream& out, const AdaptiveSelection& s, const json& config) {
  write_config_line(out, config);
  const std::size_t d = s.members.empty() ? 0 : s.members[0].size();
  for (std::size_t m = 0; m < d; ++m) out << "h" << (m + 1) << ',';
  out << "A,V,A_plus_V,selected\n";
  for (std::size_t i = 0; i < s.members.size(); ++i) {
    for (double v : s.members[i]) out << fmt_real(v) << ',';
    out << fmt_real(s.A[i]) << ',' << fmt_real(s.V[i]) << ',' << fmt_real(s.score[i]) << ','
        << (i == s.selected ? 1 : 0) << '\n';
  }
}

inline json to_json(const DensityEstimate& e) {
  json j = {{"grid", to_json(e.grid)},
            {"h", e.h},
            {"model", e.model_label},
            {"T", e.T},
            {"dt", e.dt},
            {"seed", e.seed},
            {"integral_over_grid", grid_integral(e.values, e.grid)}};
  if (e.eta) j["eta"] = *e.eta;
  return j;
}

inline void write_density_csv(std::ostream& out, const DensityEstimate& e, const json& config) {
  write_config_line(out, config);
  for (std::size_t m = 0; m < e.grid.dim(); ++m) out << 'x' << (m + 1) << ',';
  out << "value\n";
  for (std::size_t i = 0; i < e.grid.size(); ++i) {
    for (double v : e.grid.node(i)) out << fmt_real(v) << ',';
    out << fmt_real(e.values[i]) << '\n';
  }
}

inline json to_json(const RateReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"T", row.T}, {"h", row.h}, {"median", row.median}, {"q25", row.q25}, {"q75", row.q75}, {"n", row.n}});
  return {{"rows", rows},
          {"slope", r.fit.slope},
          {"slope_stderr", r.fit.slope_stderr},
          {"intercept", r.fit.intercept},
          {"target_slope", r.target_slope},
          {"tolerance", r.tolerance},
          {"pass", r.pass},
          {"rule", r.rule},
          {"reference", {{"source", r.reference_source}, {"T", r.reference_T}}}};
}

inline void write_rate_csv(std::ostream& out, const RateReport& r, const json& config) {
  write_config_line(out, config);
  out << "T,median,q25,q75,n\n";
  for (const auto& row : r.rows)
    out << fmt_real(row.T) << ',' << fmt_real(row.median) << ',' << fmt_real(row.q25) << ',' << fmt_real(row.q75)
        << ',' << row.n << '\n';
}

inline void write_rate_plot_csv(std::ostream& out, const RateReport& r, const json& config) {
  write_config_line(out, config);
  out << "log_T,log_median\n";
  for (const auto& row : r.rows) out << fmt_real(std::log(row.T)) << ',' << fmt_real(std::log(row.median)) << '\n';
}

inline json to_json(const VarianceReport& r) {
  return {{"sizes", r.sizes},
          {"variance", r.variance},
          {"mean_occupation", r.mean},
          {"control_variance", r.control_variance},
          {"slope", r.fit.slope},
          {"slope_stderr", r.fit.slope_stderr},
          {"intercept", r.fit.intercept},
          {"target_slope", r.target_slope},
          {"tolerance", r.tolerance},
          {"pass", r.pass}};
}

inline void write_variance_csv(std::ostream& out, const VarianceReport& r, const json& config) {
  write_config_line(out, config);
  out << "s,variance,mean_occupation\n";
  for (std::size_t i = 0; i < r.sizes.size(); ++i)
    out << fmt_real(r.sizes[i]) << ',' << fmt_real(r.variance[i]) << ',' << fmt_real(r.mean[i]) << '\n';
}

inline json to_json(const CalibrationReport& r) {
  return {{"k_grid", r.k_grid},
          {"median_risk", r.median_risk},
          {"q25", r.q25},
          {"q75", r.q75},
          {"chosen_k", r.chosen_k},
          {"flat", r.flat},
          {"rule", r.rule}};
}

inline void write_calibration_csv(std::ostream& out, const CalibrationReport& r, const json& config) {
  write_config_line(out, config);
  out << "k,median_risk,q25,q75,chosen\n";
  for (std::size_t i = 0; i < r.k_grid.size(); ++i)
    out << fmt_real(r.k_grid[i]) << ',' << fmt_real(r.median_risk[i]) << ',' << fmt_real(r.q25[i]) << ','
        << fmt_real(r.q75[i]) << ',' << (i == r.chosen_index ? 1 : 0) << '\n';
}

inline json to_json(const OracleRiskReport& r) {
  return {{"k", r.k},
          {"median_selected_risk", r.median_selected},
          {"median_oracle_risk", r.median_oracle},
          {"ratio", r.ratio},
          {"factor_limit", r.factor_limit},
          {"argmin_exact", r.argmin_exact},
          {"pass", r.pass},
          {"grid", to_json(r.grid)},
          {"selected_risk", r.selected_risk},
          {"oracle_risk", r.oracle_risk}};
}

}  // namespace ejdke
