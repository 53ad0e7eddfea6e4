#pragma once

// Monte-Carlo experiment runner and error metrics.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sidemat/baselines.hpp"
#include "sidemat/estimator_full.hpp"
#include "sidemat/estimator_mar.hpp"
#include "sidemat/estimator_mnar.hpp"
#include "sidemat/lowrank.hpp"
#include "sidemat/rng.hpp"
#include "sidemat/sieve_basis.hpp"
#include "sidemat/simgen.hpp"
#include "sidemat/types.hpp"

namespace sidemat {

// ---------------------------------------------------------------------------
// Metrics

/// Mean squared error over every cell.
inline double amse(const Matrix& estimate, const Matrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw DimensionError("amse: shape mismatch");
  if (truth.size() == 0) throw DomainError("amse: empty target set");
  return (estimate - truth).squaredNorm() / static_cast<double>(truth.size());
}

/// Mean squared error over the cells where `target` is 1.
inline double amse(const Matrix& estimate, const Matrix& truth, const ObservationMask& target) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols() ||
      target.rows() != truth.rows() || target.cols() != truth.cols())
    throw DimensionError("amse: shape mismatch");
  double sum = 0.0;
  Index count = 0;
  for (Index t = 0; t < truth.cols(); ++t)
    for (Index i = 0; i < truth.rows(); ++i)
      if (target.observed(i, t)) {
        const double d = estimate(i, t) - truth(i, t);
        sum += d * d;
        ++count;
      }
  if (count == 0) throw DomainError("amse: empty target set");
  return sum / static_cast<double>(count);
}

/// The missing block {i >= N0} x {t >= T0} as a target set.
inline ObservationMask missing_block(const BlockShape& shape) {
  shape.validate();
  ObservationMask m{ObservationMask::Cells::Zero(shape.n, shape.t), MaskPattern::block};
  m.cells.bottomRightCorner(shape.n - shape.n0, shape.t - shape.t0).setOnes();
  return m;
}

struct AveragedTargets {
  double per_year = 0.0;  // mean over post periods of (column-mean error)^2
  double overall = 0.0;   // (grand-mean error)^2
};

/// Errors of the cross-sectional averages of the missing block.
inline AveragedTargets averaged_targets(const Matrix& estimate, const Matrix& truth, const BlockShape& shape) {
  shape.validate();
  if (estimate.rows() != shape.n || estimate.cols() != shape.t || truth.rows() != shape.n ||
      truth.cols() != shape.t)
    throw DimensionError("averaged_targets: shape mismatch");
  const Index rows = shape.n - shape.n0;
  const Index cols = shape.t - shape.t0;
  const Matrix diff = (estimate - truth).bottomRightCorner(rows, cols);
  const Vector col_means = diff.colwise().mean().transpose();
  return {col_means.squaredNorm() / static_cast<double>(cols), std::pow(diff.mean(), 2)};
}

inline double relative_improvement(double amse_other, double amse_ours) {
  if (!(amse_ours > 0.0)) throw DomainError("relative_improvement: reference AMSE must be positive");
  return (amse_other - amse_ours) / amse_ours;
}

// ---------------------------------------------------------------------------
// Methods

enum class Setting { full, mar, mnar };

inline const char* to_string(Setting s) {
  switch (s) {
    case Setting::full: return "full";
    case Setting::mar: return "mar";
    case Setting::mnar: return "mnar";
  }
  return "unknown";
}

enum class Method {
  ours_full,
  nuclear_norm,
  double_projection,
  spectral_oracle,     // rank-K truncation with K the rank of M
  spectral_estimated,  // eigenvalue-ratio K
  ours_mar,
  nuclear_norm_mar,
  double_projection_mar,
  ours_mnar,
  mnar_spectral,
};

inline const char* to_string(Method m) {
  switch (m) {
    case Method::ours_full: return "ours";
    case Method::nuclear_norm: return "nuclear_norm";
    case Method::double_projection: return "double_projection";
    case Method::spectral_oracle: return "spectral_oracle";
    case Method::spectral_estimated: return "spectral_estimated";
    case Method::ours_mar: return "ours_mar";
    case Method::nuclear_norm_mar: return "nuclear_norm_mar";
    case Method::double_projection_mar: return "double_projection_mar";
    case Method::ours_mnar: return "ours_mnar";
    case Method::mnar_spectral: return "mnar_spectral";
  }
  return "unknown";
}

inline Setting setting_of(Method m) {
  switch (m) {
    case Method::ours_mar:
    case Method::nuclear_norm_mar:
    case Method::double_projection_mar: return Setting::mar;
    case Method::ours_mnar:
    case Method::mnar_spectral: return Setting::mnar;
    default: return Setting::full;
  }
}

inline std::vector<Method> default_methods(Setting s) {
  switch (s) {
    case Setting::full:
      return {Method::ours_full, Method::nuclear_norm, Method::double_projection, Method::spectral_oracle,
              Method::spectral_estimated};
    case Setting::mar: return {Method::ours_mar, Method::nuclear_norm_mar, Method::double_projection_mar};
    case Setting::mnar: return {Method::ours_mnar, Method::mnar_spectral};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentSpec {
  std::string name;
  Setting setting = Setting::full;
  std::vector<DgpConfig> grid;
  std::vector<Method> methods;
  Index reps = 20;
  std::uint64_t seed = 20251015;
  int degree = 5;            // sieve degree J on both sides
  double p = 0.6;            // MAR observation probability
  double block_fraction = 0.5;  // N0 / N and T0 / T in the MNAR setting
  double penalty_scale = 2.0;
  CompletionOptions completion{};
  unsigned jobs = 1;

  BlockShape block_shape(const DgpConfig& c) const {
    const auto n0 = static_cast<Index>(std::llround(block_fraction * static_cast<double>(c.n)));
    const auto t0 = static_cast<Index>(std::llround(block_fraction * static_cast<double>(c.t)));
    return {c.n, c.t, n0, t0};
  }

  void validate() const {
    if (grid.empty()) throw DomainError("experiment grid is empty");
    if (methods.empty()) throw DomainError("experiment has no methods");
    if (reps < 1) throw DomainError("reps must be >= 1");
    if (degree < 1) throw DomainError("sieve degree must be >= 1");
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("p must lie in (0, 1]");
    if (!(block_fraction > 0.0 && block_fraction < 1.0))
      throw DomainError("block fraction must lie in (0, 1)");
    if (!(penalty_scale > 0.0)) throw DomainError("penalty scale must be positive");
    completion.validate();
    for (Method m : methods)
      if (setting_of(m) != setting)
        throw DomainError(std::string("method ") + to_string(m) + " does not belong to setting " +
                          to_string(setting));
    const SieveSpec s{BasisFamily::polynomial, degree, true, false};
    for (const auto& c : grid) {
      c.validate();
      const Index q = s.width(4);
      if (c.n <= q || c.t <= q) throw DomainError("grid dimensions must exceed the sieve width");
      if (setting == Setting::mnar) {
        const BlockShape b = block_shape(c);
        b.validate();
        if (b.n0 <= q || b.t0 <= q) throw DomainError("control block must exceed the sieve width");
      }
    }
  }
};

struct ExperimentRecord {
  Index config_id = 0;
  DgpConfig config;
  Method method = Method::ours_full;
  std::vector<double> rep_errors;   // per-rep MSE over the target cells, NaN for failures
  std::vector<std::uint8_t> failed;
  std::vector<std::string> messages;  // non-empty where a rep failed or did not converge
  std::vector<std::uint8_t> nonconverged;
  double amse = 0.0;        // mean over successful reps, NaN if none
  Index reps = 0;
  Index failures = 0;
  double runtime_per_rep = 0.0;  // seconds, mean over reps
  std::uint64_t seed_base = 0;
};

namespace detail {

struct RepOutcome {
  double error = std::numeric_limits<double>::quiet_NaN();
  bool failed = false;
  bool nonconverged = false;
  std::string message;
  double seconds = 0.0;
};

inline Index oracle_rank(const Matrix& m) { return std::max<Index>(1, numerical_rank(singular_values(m))); }

inline void run_full_methods(const ExperimentSpec& spec, const SimulatedPanel& panel,
                             std::vector<RepOutcome>& out) {
  const SieveSpec s{BasisFamily::polynomial, spec.degree, true, false};
  const auto proj = build_projectors(panel.x, panel.z, s, s);
  std::optional<Index> k;
  for (std::size_t j = 0; j < spec.methods.size(); ++j) {
    const auto start = std::chrono::steady_clock::now();
    try {
      Matrix est;
      switch (spec.methods[j]) {
        case Method::ours_full:
          est = estimate_full(panel.y, proj.px, proj.pz, PenaltyPlan::automatic(spec.penalty_scale)).m_hat;
          break;
        case Method::nuclear_norm:
          est = nuclear_norm_full(panel.y, nuclear_norm_auto_penalty(panel.y, proj.px, proj.pz,
                                                                     SigmaRule::spectral_median,
                                                                     spec.penalty_scale));
          break;
        case Method::double_projection: est = double_projection(panel.y, proj.px, proj.pz); break;
        case Method::spectral_oracle:
          if (!k) k = oracle_rank(panel.m);
          est = spectral_oracle(panel.y, *k);
          break;
        case Method::spectral_estimated:
          est = spectral_estimated(panel.y, default_k_max(panel.y.rows(), panel.y.cols())).value;
          break;
        default: throw DomainError("method does not apply to the full setting");
      }
      out[j].error = amse(est, panel.m);
    } catch (const std::exception& e) {
      out[j].failed = true;
      out[j].message = e.what();
    }
    out[j].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
}

inline void run_mar_methods(const ExperimentSpec& spec, const SimulatedPanel& panel, std::vector<RepOutcome>& out) {
  const SieveSpec s{BasisFamily::polynomial, spec.degree, true, false};
  const auto proj = build_projectors(panel.x, panel.z, s, s);
  MarConfig cfg;
  cfg.nu_multiplier = spec.penalty_scale;
  cfg.tol = spec.completion.tol;
  cfg.max_iter = spec.completion.max_iter;
  std::optional<MarSettings> settings;
  for (std::size_t j = 0; j < spec.methods.size(); ++j) {
    const auto start = std::chrono::steady_clock::now();
    try {
      Matrix est;
      switch (spec.methods[j]) {
        case Method::ours_mar: {
          auto r = estimate_mar(panel.y, panel.mask, proj.px, proj.pz, cfg);
          if (!r.converged) {
            out[j].nonconverged = true;
            out[j].message = "completion did not converge";
          }
          est = std::move(r.m_hat);
          break;
        }
        case Method::nuclear_norm_mar: {
          if (!settings) settings = resolve_mar_settings(panel.y, panel.mask, proj.px, proj.pz, cfg);
          auto r = nuclear_norm_mar(panel.y, panel.mask, settings->nu, settings->m_max, spec.completion);
          if (!r.converged) {
            out[j].nonconverged = true;
            out[j].message = "completion did not converge";
          }
          est = std::move(r.value);
          break;
        }
        case Method::double_projection_mar:
          est = double_projection_mar(panel.y, panel.mask, estimate_p(panel.mask), proj.px, proj.pz);
          break;
        default: throw DomainError("method does not apply to the MAR setting");
      }
      out[j].error = amse(est, panel.m);
    } catch (const std::exception& e) {
      out[j].failed = true;
      out[j].message = e.what();
    }
    out[j].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
}

inline void run_mnar_methods(const ExperimentSpec& spec, const SimulatedPanel& panel,
                             std::vector<RepOutcome>& out) {
  const SieveSpec s{BasisFamily::polynomial, spec.degree, true, false};
  const BlockShape shape = spec.block_shape(panel.config);
  const ObservationMask target = missing_block(shape);
  const Index k = oracle_rank(panel.m);
  for (std::size_t j = 0; j < spec.methods.size(); ++j) {
    const auto start = std::chrono::steady_clock::now();
    try {
      Matrix est;
      switch (spec.methods[j]) {
        case Method::ours_mnar: {
          MnarOptions opts;
          opts.rank = std::min({k, shape.n0, shape.t0});
          opts.rank_cap = RankCap::noise_floor;
          opts.plan = PenaltyPlan::automatic(spec.penalty_scale);
          est = estimate_mnar(panel.y, shape, panel.x, panel.z, s, s, opts).m_hat;
          break;
        }
        case Method::mnar_spectral:
          est = mnar_spectral(panel.y, shape, std::min({k, shape.n0, shape.t0})).m_hat;
          break;
        default: throw DomainError("method does not apply to the MNAR setting");
      }
      out[j].error = amse(est, panel.m, target);
    } catch (const std::exception& e) {
      out[j].failed = true;
      out[j].message = e.what();
    }
    out[j].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
}

}  // namespace detail

/// The panel of one (config, rep) cell, including its mask.
inline SimulatedPanel experiment_panel(const ExperimentSpec& spec, Index config_id, Index rep) {
  DgpConfig cfg = spec.grid[static_cast<std::size_t>(config_id)];
  cfg.seed = derive_seed(spec.seed, static_cast<std::uint64_t>(config_id), static_cast<std::uint64_t>(rep));
  SimulatedPanel panel = gen_panel(cfg);
  if (spec.setting == Setting::mar) {
    StreamRng mask_rng(cfg.seed, Stream::mask);
    panel.mask = gen_mask_mar(cfg.n, cfg.t, spec.p, mask_rng);
  } else if (spec.setting == Setting::mnar) {
    panel.mask = gen_mask_mnar(spec.block_shape(cfg));
  }
  return panel;
}

/// Runs every method on `reps` panels per grid point. Panels are shared
/// across methods within a rep, so comparisons are paired. Work is split over
/// (config, rep) pairs; records do not depend on `jobs` apart from runtimes.
inline std::vector<ExperimentRecord> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto n_cfg = static_cast<Index>(spec.grid.size());
  const auto n_meth = spec.methods.size();
  const Index tasks = n_cfg * spec.reps;
  std::vector<std::vector<detail::RepOutcome>> results(static_cast<std::size_t>(tasks));

  std::atomic<Index> next{0};
  const auto worker = [&] {
    for (Index task = next++; task < tasks; task = next++) {
      const Index c = task / spec.reps;
      const Index r = task % spec.reps;
      auto& out = results[static_cast<std::size_t>(task)];
      out.assign(n_meth, {});
      try {
        const SimulatedPanel panel = experiment_panel(spec, c, r);
        switch (spec.setting) {
          case Setting::full: detail::run_full_methods(spec, panel, out); break;
          case Setting::mar: detail::run_mar_methods(spec, panel, out); break;
          case Setting::mnar: detail::run_mnar_methods(spec, panel, out); break;
        }
      } catch (const std::exception& e) {
        for (auto& o : out) {
          o.failed = true;
          o.message = e.what();
        }
      }
    }
  };

  const unsigned jobs = std::max(1u, std::min<unsigned>(spec.jobs, static_cast<unsigned>(tasks)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<ExperimentRecord> records;
  records.reserve(static_cast<std::size_t>(n_cfg) * n_meth);
  for (Index c = 0; c < n_cfg; ++c) {
    for (std::size_t j = 0; j < n_meth; ++j) {
      ExperimentRecord rec;
      rec.config_id = c;
      rec.config = spec.grid[static_cast<std::size_t>(c)];
      rec.method = spec.methods[j];
      rec.reps = spec.reps;
      rec.seed_base = spec.seed;
      double sum = 0.0, seconds = 0.0;
      Index ok = 0;
      for (Index r = 0; r < spec.reps; ++r) {
        const auto& o = results[static_cast<std::size_t>(c * spec.reps + r)][j];
        rec.rep_errors.push_back(o.error);
        rec.failed.push_back(o.failed ? 1 : 0);
        rec.nonconverged.push_back(o.nonconverged ? 1 : 0);
        rec.messages.push_back(o.message);
        seconds += o.seconds;
        if (o.failed) {
          ++rec.failures;
        } else {
          sum += o.error;
          ++ok;
        }
      }
      rec.amse = ok > 0 ? sum / static_cast<double>(ok) : std::numeric_limits<double>::quiet_NaN();
      rec.runtime_per_rep = seconds / static_cast<double>(spec.reps);
      records.push_back(std::move(rec));
    }
  }
  return records;
}

/// AMSE of `method` at `config_id`, NaN when absent.
inline double find_amse(const std::vector<ExperimentRecord>& records, Index config_id, Method method) {
  for (const auto& r : records)
    if (r.config_id == config_id && r.method == method) return r.amse;
  return std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Presets

inline std::vector<std::string> preset_names() {
  return {"alpha-full-desk", "alpha-full", "rank-full-desk", "rank-full", "mar-desk",
          "alpha-mar",       "rank-mar",   "mnar-desk",      "alpha-mnar", "rank-mnar"};
}

inline std::vector<DgpConfig> alpha_corners(Index n, Index t) {
  return {DgpConfig::alpha_study(n, t, corner_m1_heavy()), DgpConfig::alpha_study(n, t, corner_m4_heavy()),
          DgpConfig::alpha_study(n, t, corner_side_heavy()), DgpConfig::alpha_study(n, t, corner_balanced())};
}

inline std::vector<DgpConfig> rank_corners(Index n, Index t) {
  return {DgpConfig::rank_study(n, t, rank_split(12, 1)), DgpConfig::rank_study(n, t, rank_split(1, 12)),
          DgpConfig::rank_study(n, t, rank_split(1, 1)), DgpConfig::rank_study(n, t, rank_split(5, 5))};
}

/// Named experiment designs. Desk presets run four corner configurations at
/// reduced size; the others run the full grid at full size.
inline ExperimentSpec preset(const std::string& name) {
  ExperimentSpec s;
  s.name = name;
  if (name == "alpha-full-desk") {
    s.grid = alpha_corners(120, 120);
  } else if (name == "alpha-full") {
    s.grid = alpha_grid(200, 200);
    s.reps = 100;
  } else if (name == "rank-full-desk") {
    s.grid = rank_corners(120, 120);
    s.degree = 4;
  } else if (name == "rank-full") {
    s.grid = rank_grid(200, 200);
    s.degree = 4;
    s.reps = 100;
  } else if (name == "mar-desk") {
    s.setting = Setting::mar;
    s.grid = alpha_corners(120, 120);
    s.reps = 10;
  } else if (name == "alpha-mar") {
    s.setting = Setting::mar;
    s.grid = alpha_grid(400, 400);
    s.reps = 100;
  } else if (name == "rank-mar") {
    s.setting = Setting::mar;
    s.grid = rank_grid(400, 400);
    s.degree = 4;
    s.reps = 100;
  } else if (name == "mnar-desk") {
    s.setting = Setting::mnar;
    s.grid = alpha_corners(200, 200);
  } else if (name == "alpha-mnar") {
    s.setting = Setting::mnar;
    s.grid = alpha_grid(400, 400);
    s.reps = 100;
  } else if (name == "rank-mnar") {
    s.setting = Setting::mnar;
    s.grid = rank_grid(400, 400);
    s.degree = 4;
    s.reps = 100;
  } else {
    throw DomainError("unknown preset '" + name + "'");
  }
  s.methods = default_methods(s.setting);
  return s;
}

}  // namespace sidemat
