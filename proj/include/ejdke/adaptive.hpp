#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ejdke/error.hpp"
#include "ejdke/estimator.hpp"
#include "ejdke/kernel.hpp"
#include "ejdke/numeric.hpp"
#include "ejdke/parallel.hpp"
#include "ejdke/reference.hpp"
#include "ejdke/rng.hpp"
#include "ejdke/simulate.hpp"

namespace ejdke {

enum class GridMode { kPaperExact, kRelaxed, kExplicit };

inline std::string to_string(GridMode m) {
  switch (m) {
    case GridMode::kPaperExact: return "paper-exact";
    case GridMode::kRelaxed: return "relaxed";
    case GridMode::kExplicit: return "explicit";
  }
  return "unknown";
}

inline GridMode parse_grid_mode(const std::string& s) {
  if (s == "paper-exact") return GridMode::kPaperExact;
  if (s == "relaxed") return GridMode::kRelaxed;
  throw ConfigError("unknown grid mode '" + s + "' (expected paper-exact or relaxed)");
}

/// Candidate set: bandwidth vectors h with h_i = 1 / k_i, filtered by bounds on
/// prod h.
struct BandwidthGrid {
  double T = 0.0;
  std::size_t d = 0;
  GridMode mode = GridMode::kRelaxed;
  std::size_t k_max = 0;
  double lower = 0.0;  // enforced lower bound on prod h
  double upper = 1.0;  // enforced upper bound on prod h
  std::vector<std::vector<std::size_t>> k;
  std::vector<std::vector<double>> members;
  /// |H| = T^growth_exponent (0 when |H| <= 1).
  double growth_exponent = 0.0;

  std::size_t size() const noexcept { return members.size(); }
  bool empty() const noexcept { return members.empty(); }
};

namespace detail {

inline void finish_grid(BandwidthGrid& g) {
  g.growth_exponent = (g.size() > 1 && g.T > 1.0)
                          ? std::log(static_cast<double>(g.size())) / std::log(g.T)
                          : 0.0;
}

inline double product(const std::vector<double>& h) {
  double p = 1.0;
  for (double v : h) p *= v;
  return p;
}

}  // namespace detail

/// Enumerates k in {1..k_max}^d (last index fastest) and keeps members whose
/// prod h lies within the mode's bounds:
///   paper-exact  (log T)^{2d} / T^{d/3} <= prod h <= (1 / log T)^{3d/(d-2)}
///   relaxed      T^{-d/3} <= prod h <= 1
inline BandwidthGrid candidate_bandwidths(double T, std::size_t d, GridMode mode, std::size_t k_max) {
  if (d < 3)
    throw InvalidArgument("adaptive bandwidth selection is restricted to d >= 3 (got d = " +
                          std::to_string(d) + "); for d = 1, 2 a data-driven choice brings no gain");
  if (!(T > 1.0) || !std::isfinite(T)) throw InvalidArgument("candidate_bandwidths: T must exceed 1");
  if (k_max == 0) throw InvalidArgument("candidate_bandwidths: k_max must be positive");
  if (mode == GridMode::kExplicit) throw InvalidArgument("candidate_bandwidths: explicit mode takes a member list");
  BandwidthGrid g;
  g.T = T;
  g.d = d;
  g.mode = mode;
  g.k_max = k_max;
  const double dd = static_cast<double>(d), lt = std::log(T);
  if (mode == GridMode::kPaperExact) {
    g.lower = std::pow(lt, 2.0 * dd) / std::pow(T, dd / 3.0);
    g.upper = std::pow(1.0 / lt, 3.0 * dd / (dd - 2.0));
  } else {
    g.lower = std::pow(T, -dd / 3.0);
    g.upper = 1.0;
  }
  std::vector<std::size_t> k(d, 1);
  for (;;) {
    std::vector<double> h(d);
    for (std::size_t i = 0; i < d; ++i) h[i] = 1.0 / static_cast<double>(k[i]);
    const double p = detail::product(h);
    if (p >= g.lower && p <= g.upper) {
      g.k.push_back(k);
      g.members.push_back(h);
    }
    std::size_t i = d;
    while (i > 0 && ++k[i - 1] > k_max) k[--i] = 1;
    if (i == 0) break;
  }
  detail::finish_grid(g);
  return g;
}

/// A grid given member by member (each h_i must be 1 / k_i).
inline BandwidthGrid explicit_bandwidths(double T, std::size_t d, const std::vector<std::vector<double>>& members) {
  BandwidthGrid g;
  g.T = T;
  g.d = d;
  g.mode = GridMode::kExplicit;
  g.lower = 0.0;
  g.upper = 1.0;
  for (const auto& h : members) {
    if (h.size() != d) throw DimensionMismatch("explicit bandwidth member has wrong dimension");
    std::vector<std::size_t> k(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double inv = 1.0 / h[i];
      const double r = std::round(inv);
      if (!(h[i] > 0.0 && h[i] <= 1.0) || 1.0 / r != h[i])
        throw InvalidArgument("explicit bandwidth components must be of the form 1/k");
      k[i] = static_cast<std::size_t>(r);
      g.k_max = std::max(g.k_max, k[i]);
    }
    g.k.push_back(k);
    g.members.push_back(h);
  }
  detail::finish_grid(g);
  return g;
}

/// V(h) = (k / T) (prod h)^{2/d - 1}.
inline double variance_penalty(const std::vector<double>& h, double T, std::size_t d, double k) {
  if (!(k > 0.0)) throw InvalidArgument("variance_penalty: k must be positive");
  if (h.size() != d) throw DimensionMismatch("variance_penalty: h has wrong dimension");
  return k / T * std::pow(detail::product(h), 2.0 / static_cast<double>(d) - 1.0);
}

// ---------------------------------------------------------------------------
// Batched evaluation of all plain and convolved estimators a GL run needs.

/// Everything A(h) depends on apart from k: the plain estimates mu_eta and the
/// distances ||mu_{h,eta} - mu_eta||_A^2 for the requested rows h.
struct GLTable {
  std::vector<std::vector<double>> members;
  EvalGrid eval;
  double T = 0.0;
  std::size_t d = 0;
  std::vector<std::vector<double>> plain;  // plain[j] = mu_{h_j} on the grid
  std::vector<double> dist2;               // n x n row-major; NaN for rows not requested
  std::vector<std::size_t> rows;

  std::size_t n() const noexcept { return members.size(); }
  double distance2(std::size_t i, std::size_t j) const { return dist2[i * n() + j]; }
};

namespace detail {

/// One per-axis factor: the scaled kernel K_a (conv = false) or K_a * K_b.
struct AxisKey {
  double a = 0.0, b = 0.0;
  bool conv = false;
  bool operator<(const AxisKey& o) const {
    if (conv != o.conv) return conv < o.conv;
    if (a != o.a) return a < o.a;
    return b < o.b;
  }
};

/// Evaluates sum_k prod_m phi_{key_m}(X_k^m - x_m) / n for many key tuples at
/// once. Samples are processed in chunks; within a chunk the first d - 1 axes
/// form a Khatri-Rao product that multiplies the stacked last-axis factors.
class ProductSumEngine {
 public:
  ProductSumEngine(const Kernel& kernel, const EvalGrid& grid) : kernel_(kernel), grid_(grid) {
    keys_.resize(grid.dim());
    key_index_.resize(grid.dim());
  }

  /// Registers a term; returns its slot.
  std::size_t add_term(const std::vector<AxisKey>& keys) {
    const std::size_t d = grid_.dim();
    std::vector<std::size_t> idx(d);
    for (std::size_t m = 0; m < d; ++m) {
      auto [it, inserted] = key_index_[m].try_emplace(keys[m], keys_[m].size());
      if (inserted) keys_[m].push_back(keys[m]);
      idx[m] = it->second;
    }
    std::vector<std::size_t> prefix(idx.begin(), idx.end() - 1);
    auto& group = groups_[prefix];
    group.push_back({idx.back(), terms_});
    return terms_++;
  }

  std::vector<std::vector<double>> run(const Trajectory& traj, std::size_t chunk = 2048) {
    const std::size_t d = grid_.dim(), n = traj.n_steps;
    const std::size_t n_last = grid_.nodes()[d - 1];
    std::size_t prefix_size = 1;
    for (std::size_t m = 0; m + 1 < d; ++m) prefix_size *= grid_.nodes()[m];

    struct GroupState {
      std::vector<std::size_t> last_keys;  // distinct last-axis keys
      std::vector<std::pair<std::size_t, std::size_t>> slot_col;  // (slot, column block)
      Eigen::MatrixXd R;
    };
    std::vector<GroupState> states;
    std::vector<const std::vector<std::size_t>*> prefixes;
    for (auto& [prefix, list] : groups_) {
      GroupState s;
      std::map<std::size_t, std::size_t> block;
      for (auto [last, slot] : list) {
        auto [it, inserted] = block.try_emplace(last, s.last_keys.size());
        if (inserted) s.last_keys.push_back(last);
        s.slot_col.push_back({slot, it->second});
      }
      s.R = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(prefix_size),
                                  static_cast<Eigen::Index>(n_last * s.last_keys.size()));
      states.push_back(std::move(s));
      prefixes.push_back(&prefix);
    }

    std::vector<std::vector<Eigen::MatrixXd>> phi(d);
    Eigen::MatrixXd kr, kr_next, B;
    for (std::size_t start = 0; start < n; start += chunk) {
      const std::size_t rows = std::min(chunk, n - start);
      const auto er = static_cast<Eigen::Index>(rows);
      for (std::size_t m = 0; m < d; ++m) {
        const std::size_t nm = grid_.nodes()[m];
        phi[m].resize(keys_[m].size());
        for (std::size_t q = 0; q < keys_[m].size(); ++q) {
          const AxisKey& key = keys_[m][q];
          Eigen::MatrixXd& P = phi[m][q];
          P.resize(er, static_cast<Eigen::Index>(nm));
          for (std::size_t i = 0; i < nm; ++i) {
            const double x = grid_.coord(m, i);
            for (std::size_t r = 0; r < rows; ++r) {
              const double t = traj.states[(start + r) * d + m] - x;
              P(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) =
                  key.conv ? kernel_.convolved(t, key.a, key.b) : kernel_(-t / key.a) / key.a;
            }
          }
        }
      }
      for (std::size_t g = 0; g < states.size(); ++g) {
        const std::vector<std::size_t>& prefix = *prefixes[g];
        kr = Eigen::MatrixXd::Ones(er, 1);
        for (std::size_t m = 0; m + 1 < d; ++m) {
          const Eigen::MatrixXd& P = phi[m][prefix[m]];
          const Eigen::Index cols = kr.cols(), nm = P.cols();
          kr_next.resize(er, cols * nm);
          for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index i = 0; i < nm; ++i) kr_next.col(c * nm + i) = kr.col(c).cwiseProduct(P.col(i));
          kr.swap(kr_next);
        }
        GroupState& s = states[g];
        B.resize(er, static_cast<Eigen::Index>(n_last * s.last_keys.size()));
        for (std::size_t l = 0; l < s.last_keys.size(); ++l)
          B.middleCols(static_cast<Eigen::Index>(l * n_last), static_cast<Eigen::Index>(n_last)) =
              phi[d - 1][s.last_keys[l]];
        s.R.noalias() += kr.transpose() * B;
      }
    }

    std::vector<std::vector<double>> out(terms_, std::vector<double>(grid_.size()));
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& s : states)
      for (auto [slot, blk] : s.slot_col) {
        std::vector<double>& v = out[slot];
        for (std::size_t p = 0; p < prefix_size; ++p)
          for (std::size_t i = 0; i < n_last; ++i)
            v[p * n_last + i] = s.R(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(blk * n_last + i)) * inv_n;
      }
    return out;
  }

 private:
  const Kernel& kernel_;
  const EvalGrid& grid_;
  std::vector<std::vector<AxisKey>> keys_;
  std::vector<std::map<AxisKey, std::size_t>> key_index_;
  std::map<std::vector<std::size_t>, std::vector<std::pair<std::size_t, std::size_t>>> groups_;
  std::size_t terms_ = 0;
};

}  // namespace detail

/// Computes the plain estimates for every member and ||mu_{h_i,h_j} - mu_{h_j}||^2_A
/// for every requested row i (all rows when `rows` is empty) and every j.
/// The convolved estimate depends on the unordered per-axis pairs only, so
/// mu_{h,eta} and mu_{eta,h} are the same numbers.
inline GLTable gl_table(const Trajectory& traj, const Kernel& kernel,
                        const std::vector<std::vector<double>>& members, const EvalGrid& eval,
                        std::vector<std::size_t> rows = {}) {
  if (members.empty()) throw InvalidArgument("bandwidth grid is empty");
  detail::check_traj_grid(traj, eval);
  const std::size_t d = eval.dim(), n = members.size();
  for (const auto& h : members) detail::check_bandwidth(h, d, "bandwidth");
  if (rows.empty())
    for (std::size_t i = 0; i < n; ++i) rows.push_back(i);

  detail::ProductSumEngine engine(kernel, eval);
  std::vector<std::size_t> plain_slot(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<detail::AxisKey> keys(d);
    for (std::size_t m = 0; m < d; ++m) keys[m] = {members[j][m], 0.0, false};
    plain_slot[j] = engine.add_term(keys);
  }
  std::vector<std::size_t> conv_slot(rows.size() * n);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) throw InvalidArgument("gl_table: row index out of range");
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<detail::AxisKey> keys(d);
      for (std::size_t m = 0; m < d; ++m) {
        const double a = members[rows[r]][m], b = members[j][m];
        keys[m] = {std::min(a, b), std::max(a, b), true};
      }
      conv_slot[r * n + j] = engine.add_term(keys);
    }
  }
  std::vector<std::vector<double>> values = engine.run(traj);

  GLTable t;
  t.members = members;
  t.eval = eval;
  t.T = traj.T();
  t.d = d;
  t.rows = rows;
  t.plain.resize(n);
  for (std::size_t j = 0; j < n; ++j) t.plain[j] = values[plain_slot[j]];
  t.dist2.assign(n * n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < n; ++j)
      t.dist2[rows[r] * n + j] = squared_l2_on_A(values[conv_slot[r * n + j]], t.plain[j], eval);
  return t;
}

/// A(h_i) = max_j (||mu_{h_i,h_j} - mu_{h_j}||^2_A - V(h_j))_+ from a table.
inline double bias_proxy_from_table(const GLTable& t, std::size_t i, double k) {
  double a = 0.0;
  for (std::size_t j = 0; j < t.n(); ++j) {
    const double d2 = t.distance2(i, j);
    if (std::isnan(d2)) throw InvalidArgument("bias_proxy: row not present in the table");
    a = std::max(a, d2 - variance_penalty(t.members[j], t.T, t.d, k));
  }
  return a;
}

/// A(h) against the candidate set of `grid`; h need not be a member.
inline double bias_proxy(const Trajectory& traj, const Kernel& kernel, const std::vector<double>& h,
                         const BandwidthGrid& grid, const EvalGrid& eval, double k) {
  if (grid.empty()) throw InvalidArgument("bias_proxy: bandwidth grid is empty");
  std::vector<std::vector<double>> members = grid.members;
  auto it = std::find(members.begin(), members.end(), h);
  std::size_t row;
  bool extra = false;
  if (it == members.end()) {
    members.push_back(h);
    row = members.size() - 1;
    extra = true;
  } else {
    row = static_cast<std::size_t>(it - members.begin());
  }
  GLTable t = gl_table(traj, kernel, members, eval, {row});
  double a = 0.0;
  const std::size_t n_eta = extra ? members.size() - 1 : members.size();
  for (std::size_t j = 0; j < n_eta; ++j)
    a = std::max(a, t.distance2(row, j) - variance_penalty(members[j], t.T, t.d, k));
  return a;
}

struct AdaptiveSelection {
  std::vector<std::vector<double>> members;
  std::vector<double> A, V, score;  // score = A + V
  std::size_t selected = 0;
  std::vector<double> h_tilde;
  double k = 2.0;
  double T = 0.0;
  BandwidthGrid grid;
  int kernel_order = 0;
  std::vector<double> estimate;  // mu_{h_tilde} on the evaluation grid
};

/// Index of the minimal score; exact ties go to the largest prod h, then to the
/// lexicographically largest h.
inline std::size_t argmin_with_ties(const std::vector<double>& score,
                                    const std::vector<std::vector<double>>& members) {
  if (score.empty()) throw InvalidArgument("argmin over an empty grid");
  std::size_t best = 0;
  for (std::size_t i = 1; i < score.size(); ++i) {
    if (score[i] < score[best]) {
      best = i;
    } else if (score[i] == score[best]) {
      const double pi = detail::product(members[i]), pb = detail::product(members[best]);
      if (pi > pb || (pi == pb && members[i] > members[best])) best = i;
    }
  }
  return best;
}

inline AdaptiveSelection select_from_table(const GLTable& t, double k, const BandwidthGrid& grid,
                                           int kernel_order) {
  AdaptiveSelection s;
  s.members = t.members;
  s.k = k;
  s.T = t.T;
  s.grid = grid;
  s.kernel_order = kernel_order;
  for (std::size_t i = 0; i < t.n(); ++i) {
    s.A.push_back(bias_proxy_from_table(t, i, k));
    s.V.push_back(variance_penalty(t.members[i], t.T, t.d, k));
    s.score.push_back(s.A.back() + s.V.back());
  }
  s.selected = argmin_with_ties(s.score, s.members);
  s.h_tilde = s.members[s.selected];
  s.estimate = t.plain[s.selected];
  return s;
}

/// h_tilde = argmin over the grid of A(h) + V(h).
inline AdaptiveSelection select_bandwidth(const Trajectory& traj, const Kernel& kernel, const BandwidthGrid& grid,
                                          const EvalGrid& eval, double k) {
  if (grid.empty()) throw InvalidArgument("select_bandwidth: bandwidth grid is empty");
  if (!(k > 0.0)) throw InvalidArgument("select_bandwidth: k must be positive");
  const GLTable t = gl_table(traj, kernel, grid.members, eval);
  return select_from_table(t, k, grid, kernel.order());
}

// ---------------------------------------------------------------------------
// Simulation studies of the selection rule.

struct AdaptiveStudyConfig {
  double T = 500.0;
  double dt = 0.05;  // recording step
  std::size_t substeps = 5;
  std::optional<double> burn_in;
  GridMode mode = GridMode::kRelaxed;
  std::size_t k_max = 4;
  int kernel_order = 2;
  EvalGrid eval = EvalGrid::cube(3, -1.0, 1.0, 16);
  std::size_t replications = 50;
  std::uint64_t seed = 1;
};

namespace detail {

/// Simulates replication r and returns its GL table with all rows.
inline GLTable study_table(const ModelSpec& model, const AdaptiveStudyConfig& cfg, const Kernel& kernel,
                           const BandwidthGrid& grid, std::size_t r) {
  SimulationOptions opt;
  opt.T = cfg.T;
  opt.dt = cfg.dt;
  opt.substeps = cfg.substeps;
  opt.burn_in = cfg.burn_in;
  opt.seed = derive_seed(cfg.seed, {r});
  const Trajectory traj = simulate_path(model, opt);
  return gl_table(traj, kernel, grid.members, cfg.eval);
}

inline void check_reference(const ReferenceDensity& ref, const EvalGrid& eval) {
  if (!ref.grid.same_as(eval)) throw InvalidArgument("reference density grid differs from the evaluation grid");
}

}  // namespace detail

struct OracleRiskReport {
  double k = 2.0;
  std::vector<double> selected_risk;  // ||mu_{h_tilde} - mu||_A^2 per replication
  std::vector<double> oracle_risk;    // min over the grid per replication
  std::vector<std::size_t> selected_index;
  double median_selected = 0.0;
  double median_oracle = 0.0;
  double ratio = 0.0;
  double factor_limit = 3.0;
  bool argmin_exact = true;  // A + V at h_tilde equals the grid minimum in every replication
  bool pass = false;
  BandwidthGrid grid;
};

/// Risk of the selected estimator against the best member of the grid.
inline OracleRiskReport adaptive_oracle_experiment(const ModelSpec& model, const AdaptiveStudyConfig& cfg, double k,
                                                   const ReferenceDensity& ref, double factor_limit = 3.0) {
  detail::check_reference(ref, cfg.eval);
  if (model.dim < 3) throw InvalidArgument("adaptive experiments need d >= 3");
  const Kernel kernel(cfg.kernel_order);
  const BandwidthGrid grid = candidate_bandwidths(cfg.T, model.dim, cfg.mode, cfg.k_max);
  if (grid.empty()) throw InvalidArgument("candidate bandwidth grid is empty for T = " + std::to_string(cfg.T));
  OracleRiskReport rep;
  rep.k = k;
  rep.grid = grid;
  rep.factor_limit = factor_limit;
  rep.selected_risk.resize(cfg.replications);
  rep.oracle_risk.resize(cfg.replications);
  rep.selected_index.resize(cfg.replications);
  std::vector<char> exact(cfg.replications, 1);
  parallel_for(cfg.replications, [&](std::size_t r) {
    const GLTable t = detail::study_table(model, cfg, kernel, grid, r);
    const AdaptiveSelection s = select_from_table(t, k, grid, kernel.order());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < t.n(); ++j) best = std::min(best, squared_l2_on_A(t.plain[j], ref.values, cfg.eval));
    rep.oracle_risk[r] = best;
    rep.selected_risk[r] = squared_l2_on_A(s.estimate, ref.values, cfg.eval);
    rep.selected_index[r] = s.selected;
    exact[r] = *std::min_element(s.score.begin(), s.score.end()) == s.score[s.selected];
  });
  rep.argmin_exact = std::all_of(exact.begin(), exact.end(), [](char c) { return c != 0; });
  rep.median_selected = median(rep.selected_risk);
  rep.median_oracle = median(rep.oracle_risk);
  rep.ratio = rep.median_selected / rep.median_oracle;
  rep.pass = rep.argmin_exact && rep.ratio <= factor_limit;
  return rep;
}

struct CalibrationReport {
  std::vector<double> k_grid;
  std::vector<double> median_risk, q25, q75;
  double chosen_k = 0.0;
  std::size_t chosen_index = 0;
  bool flat = false;
  std::string rule = "smallest k whose median risk is within 5% of the minimum over the k grid";
};

/// Runs the selection for every k on common simulated paths and picks the
/// first k (in increasing order) past the elbow of the median-risk curve.
inline CalibrationReport calibrate_k(const ModelSpec& model, const AdaptiveStudyConfig& cfg,
                                     std::vector<double> k_grid, const ReferenceDensity& ref) {
  if (cfg.replications < 10) throw InvalidArgument("calibrate_k needs at least 10 replications");
  if (k_grid.empty()) throw InvalidArgument("calibrate_k: k grid is empty");
  for (double k : k_grid)
    if (!(k > 0.0)) throw InvalidArgument("calibrate_k: k values must be positive");
  std::sort(k_grid.begin(), k_grid.end());
  k_grid.erase(std::unique(k_grid.begin(), k_grid.end()), k_grid.end());
  detail::check_reference(ref, cfg.eval);
  const Kernel kernel(cfg.kernel_order);
  const BandwidthGrid grid = candidate_bandwidths(cfg.T, model.dim, cfg.mode, cfg.k_max);
  if (grid.empty()) throw InvalidArgument("candidate bandwidth grid is empty for T = " + std::to_string(cfg.T));

  std::vector<std::vector<double>> risk(k_grid.size(), std::vector<double>(cfg.replications));
  parallel_for(cfg.replications, [&](std::size_t r) {
    const GLTable t = detail::study_table(model, cfg, kernel, grid, r);
    for (std::size_t q = 0; q < k_grid.size(); ++q) {
      const AdaptiveSelection s = select_from_table(t, k_grid[q], grid, kernel.order());
      risk[q][r] = squared_l2_on_A(s.estimate, ref.values, cfg.eval);
    }
  });
  CalibrationReport rep;
  rep.k_grid = k_grid;
  for (const auto& v : risk) {
    rep.median_risk.push_back(median(v));
    rep.q25.push_back(quantile(v, 0.25));
    rep.q75.push_back(quantile(v, 0.75));
  }
  const double lo = *std::min_element(rep.median_risk.begin(), rep.median_risk.end());
  const double hi = *std::max_element(rep.median_risk.begin(), rep.median_risk.end());
  rep.flat = hi <= 1.05 * lo;
  for (std::size_t q = 0; q < k_grid.size(); ++q)
    if (rep.median_risk[q] <= 1.05 * lo) {
      rep.chosen_index = q;
      break;
    }
  rep.chosen_k = k_grid[rep.chosen_index];
  return rep;
}

}  // namespace ejdke
