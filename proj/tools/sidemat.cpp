// sidemat: estimate, simulate and sweep from the command line.
//
// Exit codes: 0 success, 2 I/O or parse error, 3 validation error,
// 4 solver non-convergence (outputs are still written).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sidemat/sidemat.hpp"

namespace fs = std::filesystem;
using namespace sidemat;

namespace {

constexpr int kExitIo = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNonConvergence = 4;

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ordered key: value report.
class Report {
 public:
  template <class T>
  void add(const std::string& key, const T& value) {
    std::ostringstream s;
    s << value;
    lines_.emplace_back(key, s.str());
  }
  void add(const std::string& key, double value) { lines_.emplace_back(key, format_g10(value)); }
  void add(const std::string& key, bool value) { lines_.emplace_back(key, value ? "true" : "false"); }
  void add(const std::string& key, const char* value) { lines_.emplace_back(key, value); }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (const auto& [k, v] : lines_) out << k << ": " << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

std::string join(const std::vector<Index>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

std::optional<double> parse_auto_double(const std::string& s, const char* flag) {
  if (s == "auto") return std::nullopt;
  const auto v = detail::parse_number(s);
  if (!v) throw ValidationError(std::string(flag) + " must be a number or 'auto'");
  return v;
}

std::optional<Index> parse_auto_index(const std::string& s, const char* flag) {
  if (s == "auto") return std::nullopt;
  const auto v = detail::parse_number(s);
  if (!v || *v != std::floor(*v) || *v < 1) throw ValidationError(std::string(flag) + " must be a positive integer or 'auto'");
  return static_cast<Index>(*v);
}

std::vector<bool> read_labels(const std::string& path, Index expected, const char* what) {
  const CsvTable t = read_csv_file(path, {false, path});
  if (t.values.size() != expected)
    throw ValidationError(std::string(what) + " file has " + std::to_string(t.values.size()) +
                          " entries, expected " + std::to_string(expected));
  std::vector<bool> out;
  for (Index k = 0; k < t.values.size(); ++k) {
    const double v = t.values.data()[k];
    if (v != 0.0 && v != 1.0) throw ValidationError(std::string(what) + " labels must be 0 or 1");
    out.push_back(v == 1.0);
  }
  return out;
}

// Untreated first, then treated, each in original order.
std::vector<Index> canonical_order(const std::vector<bool>& flagged) {
  std::vector<Index> order;
  for (std::size_t i = 0; i < flagged.size(); ++i)
    if (!flagged[i]) order.push_back(static_cast<Index>(i));
  for (std::size_t i = 0; i < flagged.size(); ++i)
    if (flagged[i]) order.push_back(static_cast<Index>(i));
  return order;
}

Matrix permute_rows(const Matrix& a, const std::vector<Index>& order) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.row(static_cast<Index>(i)) = a.row(order[i]);
  return out;
}

Matrix permute_cols(const Matrix& a, const std::vector<Index>& order) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t j = 0; j < order.size(); ++j) out.col(static_cast<Index>(j)) = a.col(order[j]);
  return out;
}

bool is_identity(const std::vector<Index>& order) {
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i] != static_cast<Index>(i)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  std::string mode = "full";
  std::string method = "ours";
  std::string y, x, z, mask;
  std::optional<Index> n0, t0;
  std::string treated_rows, post_cols;
  std::string rank = "auto";
  double penalty_scale = 2.0;
  std::string p = "auto";
  std::optional<double> m_max;
  int degree = 5;
  bool no_intercept = false;
  bool standardize = false;
  std::string sigma_rule = "spectral_median";
  std::string rank_cap = "none";
  double tol = 1e-7;
  Index max_iter = 2000;
  std::string out_dir = ".";
};

void add_gram(Report& r, const std::string& prefix, const GramExtremes& g) {
  r.add(prefix + "_lambda_min", g.lambda_min);
  r.add(prefix + "_lambda_max", g.lambda_max);
  r.add(prefix + "_below_floor", g.lambda_min < kDefaultGramFloor);
}

void add_penalties(Report& r, const std::string& prefix, const ComponentEstimate& e) {
  const auto& p = e.penalties;
  r.add(prefix + "sigma_rule", to_string(p.sigma_rule));
  r.add(prefix + "sigma_hat", p.sigma_hat);
  r.add(prefix + "penalties_explicit", p.explicit_values);
  r.add(prefix + "c2", p.c2);
  r.add(prefix + "c3", p.c3);
  r.add(prefix + "c4", p.c4);
  r.add(prefix + "nu2", p.nu2);
  r.add(prefix + "nu3", p.nu3);
  r.add(prefix + "nu4", p.nu4);
  r.add(prefix + "rank_x", e.rank_x);
  r.add(prefix + "rank_z", e.rank_z);
  r.add(prefix + "rank_m2", e.ranks[0]);
  r.add(prefix + "rank_m3", e.ranks[1]);
  r.add(prefix + "rank_m4", e.ranks[2]);
  add_gram(r, prefix + "gram_x", e.gram_x);
  add_gram(r, prefix + "gram_z", e.gram_z);
}

SigmaRule parse_sigma_rule(const std::string& s) {
  if (s == "frobenius") return SigmaRule::frobenius;
  if (s == "spectral_median") return SigmaRule::spectral_median;
  throw ValidationError("--sigma-rule must be frobenius or spectral_median");
}

RankCap parse_rank_cap(const std::string& s) {
  if (s == "none") return RankCap::none;
  if (s == "numerical") return RankCap::numerical;
  if (s == "noise_floor") return RankCap::noise_floor;
  throw ValidationError("--rank-cap must be none, numerical or noise_floor");
}

int cmd_estimate(const EstimateArgs& a) {
  static const std::map<std::string, std::vector<std::string>> methods{
      {"full", {"ours", "nuclear_norm", "double_projection", "spectral"}},
      {"mar", {"ours", "nuclear_norm", "double_projection"}},
      {"mnar", {"ours", "spectral"}}};
  const auto& allowed = methods.at(a.mode);
  if (std::find(allowed.begin(), allowed.end(), a.method) == allowed.end())
    throw ValidationError("--method " + a.method + " is not available in mode " + a.mode);
  const bool needs_covariates = a.method != "spectral";
  if (needs_covariates && (a.x.empty() || a.z.empty()))
    throw ValidationError("--x and --z are required for method " + a.method);
  if (a.mode != "mnar" && (a.n0 || a.t0 || !a.treated_rows.empty() || !a.post_cols.empty()))
    throw ValidationError("--n0/--t0/--treated-rows/--post-cols apply to mode mnar only");
  if (a.mode == "full" && a.p != "auto") throw ValidationError("--p applies to mode mar only");
  if (a.mode != "mar" && a.m_max) throw ValidationError("--m-max applies to mode mar only");
  if (!(a.penalty_scale > 0.0)) throw ValidationError("--penalty-scale must be positive");

  const CsvTable yt = read_csv_file(a.y);
  Matrix y = yt.values;
  const Index n = y.rows(), t = y.cols();
  ObservationMask mask = yt.observed();
  if (!a.mask.empty()) {
    mask = read_mask_file(a.mask);
    if (mask.rows() != n || mask.cols() != t) throw ValidationError("mask shape does not match Y");
    for (Index c = 0; c < t; ++c)
      for (Index i = 0; i < n; ++i)
        if (mask.observed(i, c) && std::isnan(y(i, c)))
          throw ValidationError("Y is missing at row " + std::to_string(i + 1) + ", column " +
                                std::to_string(c + 1) + " but the mask marks it observed");
  }

  Matrix x, z;
  if (!a.x.empty()) {
    x = read_csv_file(a.x, {false, a.x}).values;
    if (x.rows() != n) throw ValidationError("X has " + std::to_string(x.rows()) + " rows, Y has " + std::to_string(n));
  }
  if (!a.z.empty()) {
    z = read_csv_file(a.z, {false, a.z}).values;
    if (z.rows() != t) throw ValidationError("Z has " + std::to_string(z.rows()) + " rows, Y has " + std::to_string(t) + " columns");
  }

  SieveSpec sieve;
  sieve.degree = a.degree;
  sieve.include_intercept = !a.no_intercept;
  sieve.standardize = a.standardize;
  sieve.validate();

  PenaltyPlan plan = PenaltyPlan::automatic(a.penalty_scale);
  plan.sigma_rule = parse_sigma_rule(a.sigma_rule);

  Report rep;
  rep.add("mode", a.mode.c_str());
  rep.add("method", a.method.c_str());
  rep.add("y", a.y.c_str());
  rep.add("x", a.x.empty() ? "none" : a.x.c_str());
  rep.add("z", a.z.empty() ? "none" : a.z.c_str());
  rep.add("mask", a.mask.empty() ? "inferred from Y" : a.mask.c_str());
  rep.add("n", n);
  rep.add("t", t);
  rep.add("observed_cells", mask.count());
  if (needs_covariates) {
    rep.add("sieve_family", "polynomial");
    rep.add("sieve_degree", a.degree);
    rep.add("sieve_intercept", sieve.include_intercept);
    rep.add("sieve_standardize", sieve.standardize);
    rep.add("penalty_scale", a.penalty_scale);
  }

  ensure_dir(a.out_dir);
  const std::string m_hat_path = (fs::path(a.out_dir) / "m_hat.csv").string();
  const std::string report_path = (fs::path(a.out_dir) / "report.txt").string();
  Matrix m_hat;
  bool converged = true;

  if (a.mode == "full") {
    if (!mask.complete()) throw ValidationError("mode full requires a fully observed Y");
    if (a.rank != "auto" && a.method != "spectral") throw ValidationError("--rank applies to the spectral method only in mode full");
    if (a.method == "spectral") {
      const auto k = parse_auto_index(a.rank, "--rank");
      if (k) {
        if (*k > std::min(n, t)) throw ValidationError("--rank exceeds min(N, T)");
        m_hat = spectral_oracle(y, *k);
        rep.add("rank", *k);
        rep.add("rank_auto", false);
      } else {
        auto s = spectral_estimated(y, default_k_max(n, t));
        m_hat = std::move(s.value);
        rep.add("rank", s.rank);
        rep.add("rank_auto", true);
      }
    } else {
      const auto proj = build_projectors(x, z, sieve, sieve);
      if (a.method == "ours") {
        auto e = estimate_full(y, proj.px, proj.pz, plan);
        e.gram_x = condition_diagnostic(proj.design_x);
        e.gram_z = condition_diagnostic(proj.design_z);
        add_penalties(rep, "", e);
        m_hat = std::move(e.m_hat);
      } else if (a.method == "double_projection") {
        m_hat = double_projection(y, proj.px, proj.pz);
        rep.add("rank_x", proj.px.rank);
        rep.add("rank_z", proj.pz.rank);
      } else {
        const double nu = nuclear_norm_auto_penalty(y, proj.px, proj.pz, plan.sigma_rule, a.penalty_scale);
        m_hat = nuclear_norm_full(y, nu);
        rep.add("sigma_rule", to_string(plan.sigma_rule));
        rep.add("nu", nu);
      }
    }
  } else if (a.mode == "mar") {
    if (a.rank != "auto") throw ValidationError("--rank does not apply to mode mar");
    MarConfig cfg;
    cfg.p = parse_auto_double(a.p, "--p");
    cfg.nu_multiplier = a.penalty_scale;
    cfg.m_max = a.m_max;
    cfg.tol = a.tol;
    cfg.max_iter = a.max_iter;
    cfg.validate();
    const auto proj = build_projectors(x, z, sieve, sieve);
    rep.add("p_source", cfg.p ? "supplied" : "estimated");
    if (a.method == "double_projection") {
      const double p = cfg.p ? *cfg.p : estimate_p(mask);
      m_hat = double_projection_mar(y, mask, p, proj.px, proj.pz);
      rep.add("p_hat", p);
    } else {
      const MarSettings s = resolve_mar_settings(y, mask, proj.px, proj.pz, cfg);
      rep.add("p_hat", s.p);
      rep.add("sigma_rule", "mad");
      rep.add("sigma_hat", s.sigma_hat);
      rep.add("nu", s.nu);
      rep.add("m_max", s.m_max);
      rep.add("m_max_source", a.m_max ? "supplied" : "3 * max |observed Y|");
      rep.add("tol", a.tol);
      rep.add("max_iter", a.max_iter);
      if (a.method == "ours") {
        auto e = estimate_mar(y, mask, proj.px, proj.pz, cfg);
        rep.add("rank_x", e.rank_x);
        rep.add("rank_z", e.rank_z);
        rep.add("rank_rest", e.rank_rest);
        rep.add("iterations", e.iterations);
        rep.add("converged", e.converged);
        add_gram(rep, "gram_x", condition_diagnostic(proj.design_x));
        add_gram(rep, "gram_z", condition_diagnostic(proj.design_z));
        converged = e.converged;
        m_hat = std::move(e.m_hat);
      } else {
        auto r = nuclear_norm_mar(y, mask, s.nu, s.m_max, {a.tol, a.max_iter, false});
        rep.add("rank", r.rank);
        rep.add("iterations", r.iterations);
        rep.add("converged", r.converged);
        converged = r.converged;
        m_hat = std::move(r.value);
      }
    }
  } else {
    // Work out which rows are treated and which columns are post-treatment,
    // then reorder to the canonical block layout.
    std::vector<bool> treated(static_cast<std::size_t>(n), false), post(static_cast<std::size_t>(t), false);
    std::string layout;
    if (!a.treated_rows.empty() || !a.post_cols.empty()) {
      if (a.treated_rows.empty() || a.post_cols.empty())
        throw ValidationError("--treated-rows and --post-cols must be given together");
      if (a.n0 || a.t0) throw ValidationError("give either --n0/--t0 or label files, not both");
      treated = read_labels(a.treated_rows, n, "treated-rows");
      post = read_labels(a.post_cols, t, "post-cols");
      layout = "label files";
    } else if (a.n0 || a.t0) {
      if (!a.n0 || !a.t0) throw ValidationError("--n0 and --t0 must be given together");
      if (*a.n0 < 1 || *a.n0 >= n || *a.t0 < 1 || *a.t0 >= t)
        throw ValidationError("block shape requires 1 <= N0 < N and 1 <= T0 < T");
      for (Index i = *a.n0; i < n; ++i) treated[static_cast<std::size_t>(i)] = true;
      for (Index c = *a.t0; c < t; ++c) post[static_cast<std::size_t>(c)] = true;
      layout = "n0/t0";
    } else {
      for (Index i = 0; i < n; ++i)
        for (Index c = 0; c < t; ++c)
          if (!mask.observed(i, c)) treated[static_cast<std::size_t>(i)] = post[static_cast<std::size_t>(c)] = true;
      layout = "inferred from mask";
    }
    for (Index i = 0; i < n; ++i)
      for (Index c = 0; c < t; ++c) {
        const bool in_block = treated[static_cast<std::size_t>(i)] && post[static_cast<std::size_t>(c)];
        if (in_block == mask.observed(i, c))
          throw ValidationError("mask is not block-shaped: cell (" + std::to_string(i + 1) + ", " +
                                std::to_string(c + 1) + ") is " + (in_block ? "observed inside" : "missing outside") +
                                " the treated x post block");
      }
    const auto row_order = canonical_order(treated);
    const auto col_order = canonical_order(post);
    const BlockShape shape{n, t, static_cast<Index>(std::count(treated.begin(), treated.end(), false)),
                           static_cast<Index>(std::count(post.begin(), post.end(), false))};
    if (shape.n0 == n || shape.t0 == t) throw ValidationError("mode mnar needs a non-empty missing block");
    shape.validate();

    const Matrix yc = permute_cols(permute_rows(mask.apply(y), row_order), col_order);
    rep.add("block_layout", layout.c_str());
    rep.add("n0", shape.n0);
    rep.add("t0", shape.t0);
    rep.add("rows_permuted", !is_identity(row_order));
    rep.add("cols_permuted", !is_identity(col_order));
    rep.add("row_order", join(row_order));
    rep.add("col_order", join(col_order));

    MnarOptions opts;
    opts.rank = parse_auto_index(a.rank, "--rank");
    opts.plan = plan;
    opts.rank_cap = parse_rank_cap(a.rank_cap);
    rep.add("rank_cap", to_string(opts.rank_cap));

    MnarEstimate e;
    if (a.method == "ours") {
      const Matrix xc = permute_rows(x, row_order);
      const Matrix zc = permute_rows(z, col_order);
      e = estimate_mnar(yc, shape, xc, zc, sieve, sieve, opts);
      add_penalties(rep, "tall_", *e.tall);
      add_penalties(rep, "wide_", *e.wide);
    } else {
      e = mnar_spectral(yc, shape, opts.rank, opts);
    }
    rep.add("rank", e.rank);
    rep.add("rank_requested", e.requested_rank);
    rep.add("rank_auto", e.rank_auto);
    rep.add("rank_achievable", e.achievable_rank);
    rep.add("rank_effective", e.effective_rank);
    rep.add("alignment_residual", e.alignment_residual);
    rep.add("incoherence_rows_lambda_min", e.incoherence.rows.lambda_min);
    rep.add("incoherence_rows_lambda_max", e.incoherence.rows.lambda_max);
    rep.add("incoherence_cols_lambda_min", e.incoherence.cols.lambda_min);
    rep.add("incoherence_cols_lambda_max", e.incoherence.cols.lambda_max);
    rep.add("incoherence_floor", opts.incoherence_floor);
    rep.add("incoherence_below_floor", e.incoherence.below_floor);

    // Back to the input ordering.
    m_hat.resize(n, t);
    for (Index i = 0; i < n; ++i)
      for (Index c = 0; c < t; ++c) m_hat(row_order[static_cast<std::size_t>(i)], col_order[static_cast<std::size_t>(c)]) = e.m_hat(i, c);
  }

  write_csv_file(m_hat_path, m_hat, yt.header);
  rep.add("output", m_hat_path.c_str());
  rep.add("status", converged ? "ok" : "not converged");
  rep.write(report_path);
  if (!converged) {
    std::cerr << "warning: solver did not converge; results written and flagged\n";
    return kExitNonConvergence;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string variant = "alpha";
  std::string setting = "full";
  Index n = 200, t = 200;
  std::vector<double> alphas{0.25, 0.25, 0.25, 0.25};
  std::vector<int> ranks;
  std::optional<double> noise_sd;
  double p = 0.6;
  std::optional<Index> n0, t0;
  std::uint64_t seed = 20251015;
  std::string out_dir = ".";
};

int cmd_simulate(const SimulateArgs& a) {
  if (a.alphas.size() != 4) throw ValidationError("--alphas takes four values");
  DgpConfig cfg;
  if (a.variant == "alpha") {
    cfg = DgpConfig::alpha_study(a.n, a.t, {a.alphas[0], a.alphas[1], a.alphas[2], a.alphas[3]});
    if (!a.ranks.empty()) {
      if (a.ranks.size() != 4) throw ValidationError("--ranks takes four values");
      cfg.ranks = {a.ranks[0], a.ranks[1], a.ranks[2], a.ranks[3]};
    }
  } else if (a.variant == "rank") {
    if (a.ranks.size() != 4) throw ValidationError("variant rank needs --ranks K1,K2,K3,K4");
    cfg = DgpConfig::rank_study(a.n, a.t, {a.ranks[0], a.ranks[1], a.ranks[2], a.ranks[3]});
    cfg.alphas = {a.alphas[0], a.alphas[1], a.alphas[2], a.alphas[3]};
  } else {
    throw ValidationError("--variant must be alpha or rank");
  }
  if (a.noise_sd) cfg.noise_sd = *a.noise_sd;
  cfg.seed = a.seed;
  cfg.validate();

  SimulatedPanel panel = gen_panel(cfg);
  if (a.setting == "mar") {
    StreamRng rng(cfg.seed, Stream::mask);
    panel.mask = gen_mask_mar(cfg.n, cfg.t, a.p, rng);
  } else if (a.setting == "mnar") {
    const BlockShape shape{cfg.n, cfg.t, a.n0.value_or(cfg.n / 2), a.t0.value_or(cfg.t / 2)};
    panel.mask = gen_mask_mnar(shape);
  } else if (a.setting != "full") {
    throw ValidationError("--setting must be full, mar or mnar");
  }

  ensure_dir(a.out_dir);
  Matrix y_obs = panel.y;
  for (Index i = 0; i < y_obs.rows(); ++i)
    for (Index c = 0; c < y_obs.cols(); ++c)
      if (!panel.mask.observed(i, c)) y_obs(i, c) = std::numeric_limits<double>::quiet_NaN();
  const fs::path dir(a.out_dir);
  write_csv_file((dir / "y.csv").string(), y_obs);
  write_csv_file((dir / "m.csv").string(), panel.m);
  write_csv_file((dir / "x.csv").string(), panel.x);
  write_csv_file((dir / "z.csv").string(), panel.z);
  write_mask_file((dir / "mask.csv").string(), panel.mask);

  Report rep;
  rep.add("variant", to_string(cfg.variant));
  rep.add("setting", a.setting.c_str());
  rep.add("n", cfg.n);
  rep.add("t", cfg.t);
  for (int r = 0; r < 4; ++r) rep.add("alpha" + std::to_string(r + 1), cfg.alphas[static_cast<std::size_t>(r)]);
  for (int r = 0; r < 4; ++r) rep.add("k" + std::to_string(r + 1), cfg.ranks[static_cast<std::size_t>(r)]);
  rep.add("noise_sd", cfg.noise_sd);
  rep.add("target_scale", cfg.target_scale);
  rep.add("seed", cfg.seed);
  if (a.setting == "mar") rep.add("p", a.p);
  rep.add("observed_cells", panel.mask.count());
  rep.write((dir / "report.txt").string());
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string preset;
  std::optional<Index> reps;
  std::optional<std::uint64_t> seed;
  std::optional<double> penalty_scale;
  unsigned jobs = 1;
  std::string out_dir = ".";
};

int cmd_sweep(const SweepArgs& a) {
  ExperimentSpec spec = preset(a.preset);
  if (a.reps) spec.reps = *a.reps;
  if (a.seed) spec.seed = *a.seed;
  if (a.penalty_scale) spec.penalty_scale = *a.penalty_scale;
  spec.jobs = a.jobs;
  spec.validate();
  ensure_dir(a.out_dir);

  const auto records = run_experiment(spec);
  const fs::path dir(a.out_dir);

  std::ofstream res(dir / "results.csv");
  std::ofstream tim(dir / "timing.csv");
  std::ofstream fail(dir / "failures.csv");
  if (!res || !tim || !fail) throw IoError("cannot write into '" + a.out_dir + "'");
  res << "config_id,setting,variant,n,t,n0,t0,p,alpha1,alpha2,alpha3,alpha4,k1,k2,k3,k4,noise_sd,degree,"
         "method,amse,reps,failures,nonconverged,ri_vs_ours,seed\n";
  tim << "config_id,method,runtime_per_rep_s\n";
  fail << "config_id,method,rep,kind,message\n";
  const Method ours = spec.methods.front();
  bool any_nonconverged = false;
  for (const auto& r : records) {
    const auto& c = r.config;
    const BlockShape b = spec.block_shape(c);
    const bool mnar = spec.setting == Setting::mnar;
    const Index nonconv = std::accumulate(r.nonconverged.begin(), r.nonconverged.end(), Index{0});
    any_nonconverged |= nonconv > 0;
    const double ours_amse = find_amse(records, r.config_id, ours);
    const double ri = ours_amse > 0.0 ? relative_improvement(r.amse, ours_amse)
                                      : std::numeric_limits<double>::quiet_NaN();
    res << r.config_id << ',' << to_string(spec.setting) << ',' << to_string(c.variant) << ',' << c.n << ','
        << c.t << ',' << (mnar ? std::to_string(b.n0) : "") << ',' << (mnar ? std::to_string(b.t0) : "") << ','
        << (spec.setting == Setting::mar ? format_g10(spec.p) : "") << ',';
    for (double al : c.alphas) res << format_g10(al) << ',';
    for (int k : c.ranks) res << k << ',';
    res << format_g10(c.noise_sd) << ',' << spec.degree << ',' << to_string(r.method) << ','
        << format_g10(r.amse) << ',' << r.reps << ',' << r.failures << ',' << nonconv << ','
        << format_g10(ri) << ',' << spec.seed << '\n';
    tim << r.config_id << ',' << to_string(r.method) << ',' << format_g10(r.runtime_per_rep) << '\n';
    for (std::size_t k = 0; k < r.messages.size(); ++k) {
      if (r.messages[k].empty()) continue;
      std::string msg = r.messages[k];
      std::replace(msg.begin(), msg.end(), ',', ';');
      fail << r.config_id << ',' << to_string(r.method) << ',' << k << ','
           << (r.failed[k] ? "failure" : "nonconvergence") << ',' << msg << '\n';
    }
  }
  std::cout << "wrote " << records.size() << " rows to " << (dir / "results.csv").string() << '\n';
  return any_nonconverged ? kExitNonConvergence : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank panel estimation with row and column side information"};
  app.require_subcommand(1);

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "Estimate the signal matrix of one panel");
  est->add_option("--mode", ea.mode, "full, mar or mnar")->check(CLI::IsMember({"full", "mar", "mnar"}));
  est->add_option("--method", ea.method, "ours (default), nuclear_norm, double_projection or spectral");
  est->add_option("--y", ea.y, "Outcome CSV (N x T); empty or NaN cells are missing")->required();
  est->add_option("--x", ea.x, "Row covariates CSV (N x d1)");
  est->add_option("--z", ea.z, "Column covariates CSV (T x d2)");
  est->add_option("--mask", ea.mask, "0/1 mask CSV; inferred from Y when absent");
  est->add_option("--n0", ea.n0, "Control rows (mnar, canonical ordering)");
  est->add_option("--t0", ea.t0, "Pre-treatment columns (mnar, canonical ordering)");
  est->add_option("--treated-rows", ea.treated_rows, "0/1 per row, 1 = treated (mnar)");
  est->add_option("--post-cols", ea.post_cols, "0/1 per column, 1 = post-treatment (mnar)");
  est->add_option("--rank", ea.rank, "Integer or 'auto' (mnar, spectral)");
  est->add_option("--penalty-scale", ea.penalty_scale, "Penalty multiplier c");
  est->add_option("--p", ea.p, "Observation probability or 'auto' (mar)");
  est->add_option("--m-max", ea.m_max, "Entrywise bound for the completion (mar)");
  est->add_option("--degree", ea.degree, "Sieve degree J");
  est->add_flag("--no-intercept", ea.no_intercept, "Drop the constant column of the sieve basis");
  est->add_flag("--standardize", ea.standardize, "Standardize covariate columns before expansion");
  est->add_option("--sigma-rule", ea.sigma_rule, "spectral_median (default) or frobenius");
  est->add_option("--rank-cap", ea.rank_cap, "none (default), numerical or noise_floor (mnar)");
  est->add_option("--tol", ea.tol, "Completion tolerance (mar)");
  est->add_option("--max-iter", ea.max_iter, "Completion iteration cap (mar)");
  est->add_option("--out-dir", ea.out_dir, "Directory for m_hat.csv and report.txt");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Write one simulated panel as CSV files");
  sim->add_option("--variant", sa.variant, "alpha or rank")->check(CLI::IsMember({"alpha", "rank"}));
  sim->add_option("--setting", sa.setting, "full, mar or mnar")->check(CLI::IsMember({"full", "mar", "mnar"}));
  sim->add_option("--n", sa.n, "Rows");
  sim->add_option("--t", sa.t, "Columns");
  sim->add_option("--alphas", sa.alphas, "Component weights")->delimiter(',');
  sim->add_option("--ranks", sa.ranks, "Component ranks")->delimiter(',');
  sim->add_option("--noise-sd", sa.noise_sd, "Noise standard deviation");
  sim->add_option("--p", sa.p, "Observation probability (mar)");
  sim->add_option("--n0", sa.n0, "Control rows (mnar)");
  sim->add_option("--t0", sa.t0, "Pre-treatment columns (mnar)");
  sim->add_option("--seed", sa.seed, "Seed");
  sim->add_option("--out-dir", sa.out_dir, "Output directory");

  SweepArgs wa;
  std::string names;
  for (const auto& p : preset_names()) names += (names.empty() ? "" : ", ") + p;
  auto* sweep = app.add_subcommand("sweep", "Run a Monte-Carlo preset and write result tables");
  sweep->add_option("--preset", wa.preset, names)->required()->check(CLI::IsMember(preset_names()));
  sweep->add_option("--reps", wa.reps, "Replications per configuration");
  sweep->add_option("--seed", wa.seed, "Base seed");
  sweep->add_option("--penalty-scale", wa.penalty_scale, "Penalty multiplier c");
  sweep->add_option("--jobs", wa.jobs, "Worker threads");
  sweep->add_option("--out-dir", wa.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*est) return cmd_estimate(ea);
    if (*sim) return cmd_simulate(sa);
    if (*sweep) return cmd_sweep(wa);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitIo;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
