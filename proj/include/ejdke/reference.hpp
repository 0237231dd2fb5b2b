#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ejdke/error.hpp"
#include "ejdke/estimator.hpp"
#include "ejdke/model.hpp"
#include "ejdke/simulate.hpp"

namespace ejdke {

/// Invariant density on the nodes of an evaluation grid.
struct ReferenceDensity {
  EvalGrid grid;
  std::vector<double> values;
  std::string source;  // "closed-form" or "histogram"
  double oracle_T = 0.0;
  double oracle_dt = 0.0;
  std::uint64_t oracle_seed = 0;
  double cell_width = 0.0;  // largest histogram cell side, 0 for closed form
};

inline ReferenceDensity closed_form_reference(const ModelSpec& model, const EvalGrid& grid) {
  if (!model.stationary_density)
    throw InvalidArgument("model '" + model.label + "' has no closed-form invariant density");
  if (grid.dim() != model.dim) throw DimensionMismatch("reference grid dimension differs from model");
  ReferenceDensity ref;
  ref.grid = grid;
  ref.source = "closed-form";
  ref.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) ref.values[i] = model.stationary_density(grid.node(i));
  return ref;
}

struct HistogramOracleConfig {
  double T = 1e5;
  double dt = 0.01;
  std::optional<double> burn_in;
  std::uint64_t seed = 20240601;
  std::size_t substeps = 1;
};

/// Occupation-time histogram of one long trajectory with cells centred on the
/// grid nodes (the grid cells themselves), divided by T and the cell volume.
/// Its bias against the point value is of order (cell width)^2.
inline ReferenceDensity histogram_reference(const ModelSpec& model, const EvalGrid& grid,
                                            const HistogramOracleConfig& cfg) {
  if (grid.dim() != model.dim) throw DimensionMismatch("reference grid dimension differs from model");
  const std::size_t d = model.dim;
  std::vector<double> counts(grid.size(), 0.0);
  SimulationOptions opt;
  opt.T = cfg.T;
  opt.dt = cfg.dt;
  opt.burn_in = cfg.burn_in;
  opt.seed = cfg.seed;
  opt.substeps = cfg.substeps;
  std::size_t n = 0;
  simulate_stream(model, opt, [&](std::size_t, std::span<const double> x) {
    ++n;
    std::size_t flat = 0;
    for (std::size_t m = 0; m < d; ++m) {
      const double u = (x[m] - grid.lo()[m]) / grid.step(m);
      if (!(u >= 0.0) || u >= static_cast<double>(grid.nodes()[m])) return;
      flat = flat * grid.nodes()[m] + static_cast<std::size_t>(u);
    }
    counts[flat] += 1.0;
  });
  ReferenceDensity ref;
  ref.grid = grid;
  ref.source = "histogram";
  ref.oracle_T = cfg.T;
  ref.oracle_dt = cfg.dt;
  ref.oracle_seed = cfg.seed;
  for (std::size_t m = 0; m < d; ++m) ref.cell_width = std::max(ref.cell_width, grid.step(m));
  ref.values.resize(grid.size());
  const double scale = 1.0 / (static_cast<double>(n) * grid.cell_volume());
  for (std::size_t i = 0; i < grid.size(); ++i) ref.values[i] = counts[i] * scale;
  return ref;
}

}  // namespace ejdke
