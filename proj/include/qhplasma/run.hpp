#pragma once

// Command-line driver for the toolkit: subcommands `meanfield`, `sample`,
// `ed`, `energy`, and `phase-diagram`.  Configuration comes from an optional
// INI config file ([subcommand] sections) plus flags, flags winning; every
// run validates its parameters before any compute, writes versioned CSV /
// JSON artifacts with locale-independent full-precision numbers, and emits
// exactly one manifest.json carrying a deterministic hash of the semantic
// configuration (wall clock and output paths excluded).  Exit codes: 0 on
// success, 1 on a numerical/integrity failure mid-run (the manifest then
// carries the error detail), 2 on a usage or configuration error.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qhplasma/bargmann.hpp"
#include "qhplasma/errors.hpp"
#include "qhplasma/meanfield.hpp"
#include "qhplasma/model.hpp"
#include "qhplasma/numerics.hpp"
#include "qhplasma/plasma_mc.hpp"
#include "qhplasma/radial_grid.hpp"
#include "qhplasma/trial_energy.hpp"

namespace qhp::cli {

inline constexpr const char* toolkit_version = "qhplasma 1.0.0";
inline constexpr const char* csv_format_version = "1";
inline constexpr const char* output_dir_env = "QHP_OUTPUT_DIR";

// --------------------------------------------------------------------------
// Deterministic config hash: FNV-1a 64 over sorted canonical key=value lines.
// --------------------------------------------------------------------------
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const std::map<std::string, std::string>& config) {
  std::string canon;
  for (const auto& [key, value] : config) {
    canon += key;
    canon += '=';
    canon += value;
    canon += '\n';
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canon)));
  return std::string(buf);
}

// --------------------------------------------------------------------------
// Artifact writers.
// --------------------------------------------------------------------------
inline void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open for writing: " + path.string());
  out << body;
  out.flush();
  if (!out) throw config_error("write failed: " + path.string());
}

// CSV with a versioned column header comment, full double precision,
// locale-independent.
class CsvBuilder {
 public:
  CsvBuilder(const std::string& subcommand, const std::vector<std::string>& columns)
      : n_columns_(columns.size()) {
    body_ << "# qhplasma-csv v" << csv_format_version << " subcommand=" << subcommand
          << "\n# columns: ";
    append_row_text(columns);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != n_columns_)
      throw dimension_error("CsvBuilder: row width does not match the header");
    append_row_text(cells);
  }

  std::string str() const { return body_.str(); }

 private:
  void append_row_text(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      body_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
  }

  std::ostringstream body_;
  std::size_t n_columns_;
};

inline std::string fmt(double v) { return format_double(v); }
inline std::string fmt(long long v) { return std::to_string(v); }
inline std::string fmt(unsigned long long v) { return std::to_string(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "1" : "0"; }

// --------------------------------------------------------------------------
// Option bundles shared by subcommands.
// --------------------------------------------------------------------------
struct ModelOpts {
  int N = 1;
  long long m = 0;
  double omega = 0.0;
  double k = 0.0;
  double T = 0.0;
  bool T_given = false;  // set by the parser; absent means native 1/N

  // CLI-level validation happens before any compute: k < 0, T <= 0 and
  // N < 1 are configuration errors, not runtime failures.
  ModelParams build() const {
    if (N < 1) throw config_error("config: N must be at least 1");
    if (k < 0.0) throw config_error("config: k must be nonnegative");
    if (T_given && !(T > 0.0))
      throw config_error("config: T must be positive (omit for the native 1/N)");
    ModelParams p;
    p.N = N;
    p.m = m;
    p.omega = omega;
    p.k = k;
    p.T = T_given ? T : 0.0;
    p.validate();
    return p;
  }

  void canonicalize(std::map<std::string, std::string>& config) const {
    config["N"] = fmt(N);
    config["m"] = fmt(m);
    config["omega"] = fmt(omega);
    config["k"] = fmt(k);
    config["T"] = T_given ? fmt(T) : std::string("native");
  }
};

struct GridOpts {
  double r_max = 0.0;    // 0: automatic
  std::size_t bins = 0;  // 0: automatic

  RadialGrid resolve(const ModelParams& p) const {
    if (r_max == 0.0 && bins == 0) return suggested_grid(p);
    if (!(r_max > 0.0) || bins < 8)
      throw config_error("config: custom grid needs r-max > 0 and bins >= 8");
    return {r_max, bins};
  }

  void canonicalize(const RadialGrid& g, std::map<std::string, std::string>& config) const {
    config["grid.r_max"] = fmt(g.r_max());
    config["grid.bins"] = fmt(g.n_bins());
  }
};

struct SamplerOpts {
  std::uint64_t seed = 1;
  unsigned long long sweeps = 10000;
  unsigned long long burnin = 1000;
  unsigned long long thin = 1;
  double step = 0.5;
  double target_acceptance = 0.35;

  SamplerConfig build() const {
    SamplerConfig s;
    s.seed = seed;
    s.n_samples = sweeps;
    s.n_burnin = burnin;
    s.thinning = thin;
    s.step_size = step;
    s.target_acceptance = target_acceptance;
    try {
      s.validate();
    } catch (const domain_error& e) {
      throw config_error(std::string("config: ") + e.what());
    }
    return s;
  }

  void canonicalize(std::map<std::string, std::string>& config) const {
    config["sampler.seed"] = fmt(static_cast<unsigned long long>(seed));
    config["sampler.sweeps"] = fmt(sweeps);
    config["sampler.burnin"] = fmt(burnin);
    config["sampler.thin"] = fmt(thin);
    config["sampler.step"] = fmt(step);
    config["sampler.target_acceptance"] = fmt(target_acceptance);
  }
};

inline void add_model_options(CLI::App* sub, ModelOpts& opts, bool with_trap) {
  sub->add_option("--N", opts.N, "Particle count")->required();
  sub->add_option("--m", opts.m, "Vortex degree (default 0)");
  if (with_trap) {
    sub->add_option("--omega", opts.omega, "Quadratic trap coefficient");
    sub->add_option("--k", opts.k, "Quartic trap coefficient");
  }
  sub->add_option("--T", opts.T, "Plasma temperature (default: native 1/N)")
      ->each([&opts](const std::string&) { opts.T_given = true; });
}

inline void add_grid_options(CLI::App* sub, GridOpts& opts) {
  sub->add_option("--r-max", opts.r_max, "Radial grid extent (default: automatic)");
  sub->add_option("--bins", opts.bins, "Radial grid bins (default: automatic)");
}

inline void add_sampler_options(CLI::App* sub, SamplerOpts& opts) {
  sub->add_option("--seed", opts.seed, "RNG seed (default 1)");
  sub->add_option("--sweeps", opts.sweeps, "Recorded Metropolis sweeps");
  sub->add_option("--burnin", opts.burnin, "Burn-in sweeps with step adaptation");
  sub->add_option("--thin", opts.thin, "Record every n-th sweep");
  sub->add_option("--step", opts.step, "Initial proposal step");
  sub->add_option("--target-acceptance", opts.target_acceptance,
                  "Burn-in acceptance target");
}

// --------------------------------------------------------------------------
// Run execution: one manifest per run; compute failures still leave a
// manifest carrying the error detail and map to exit status 1.
// --------------------------------------------------------------------------
struct PendingRun {
  std::string subcommand;
  std::filesystem::path out_dir;
  std::map<std::string, std::string> config;
  // Returns (diagnostics, calibrated constants); writes data artifacts.
  std::function<std::pair<nlohmann::json, nlohmann::json>()> compute;
};

inline std::filesystem::path resolve_out_dir(const std::string& flag_value) {
  std::string dir = flag_value;
  if (dir.empty()) {
    if (const char* env = std::getenv(output_dir_env)) dir = env;
  }
  if (dir.empty()) dir = ".";
  std::filesystem::path path(dir);
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec || !std::filesystem::is_directory(path))
    throw config_error("config: output directory not writable: " + path.string());
  return path;
}

inline int execute(const PendingRun& run) {
  const auto t0 = std::chrono::steady_clock::now();
  nlohmann::json manifest;
  manifest["toolkit_version"] = toolkit_version;
  manifest["subcommand"] = run.subcommand;
  manifest["config"] = run.config;
  manifest["config_hash"] = config_hash(run.config);

  const auto finalize = [&](int status) {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    manifest["wall_clock_seconds"] = dt.count();
    manifest["exit_status"] = status;
    write_text(run.out_dir / "manifest.json", manifest.dump(2) + "\n");
    return status;
  };

  try {
    auto [diagnostics, calibrated] = run.compute();
    manifest["diagnostics"] = std::move(diagnostics);
    manifest["calibrated_constants"] = std::move(calibrated);
    return finalize(0);
  } catch (const qhp::error& e) {
    manifest["error"] = e.what();
    std::cerr << "qhp " << run.subcommand << ": " << e.what() << "\n";
    return finalize(1);
  }
}

// --------------------------------------------------------------------------
// Subcommand bodies.
// --------------------------------------------------------------------------
inline std::pair<nlohmann::json, nlohmann::json> run_meanfield(
    const ModelParams& p, const RadialGrid& grid, double tol, std::size_t max_iter,
    const std::filesystem::path& out) {
  const MeanFieldSolution sol = mf_minimize(p, tol, grid, max_iter);
  const RadialDensity rho_el = electrostatic_profile(p, grid);
  const RadialDensity rho_th = thermal_profile(p, grid);

  // Envelope column: the pointwise tail bound where it applies, "inf"
  // inside the bulk-plus-margin window where no bound is claimed.
  const auto envelope_at = [&](double r) {
    const auto env = decay_envelope(p, r);
    return env ? *env : std::numeric_limits<double>::infinity();
  };

  CsvBuilder csv("meanfield", {"r", "rho_mf", "rho_el", "rho_th", "envelope"});
  for (std::size_t i = 0; i < grid.n_bins(); ++i)
    csv.row({fmt(grid.node(i)), fmt(sol.density.values()[i]), fmt(rho_el.values()[i]),
             fmt(rho_th.values()[i]), fmt(envelope_at(grid.node(i)))});
  write_text(out / "meanfield.csv", csv.str());

  const FunctionalEnergies parts = functional_energies(p, sol.density);
  nlohmann::json diag;
  diag["iterations"] = sol.iterations;
  diag["residual"] = sol.residual;
  diag["energy"] = sol.energy;
  diag["energy_confinement"] = parts.confinement;
  diag["energy_coulomb"] = parts.coulomb;
  diag["energy_entropy"] = parts.entropy;
  diag["lagrange_constant"] = sol.lagrange_constant;
  diag["coulomb_dist_electrostatic"] = coulomb_energy(sol.density - rho_el);
  diag["coulomb_dist_thermal"] = coulomb_energy(sol.density - rho_th);
  diag["tv_dist_electrostatic"] = total_variation(sol.density - rho_el);
  diag["tv_dist_thermal"] = total_variation(sol.density - rho_th);
  nlohmann::json calibrated;
  calibrated["grid_cells_per_ridge_width"] = 16.0;
  return {diag, calibrated};
}

inline std::pair<nlohmann::json, nlohmann::json> run_sample(
    const ModelParams& p, const RadialGrid& grid, const SamplerConfig& sampler,
    const std::string& resume_path, const std::string& save_path,
    const std::filesystem::path& out) {
  SampleRun run = [&] {
    if (resume_path.empty()) return estimate_density(p, sampler, grid);
    const ChainCheckpoint chk = load_checkpoint(resume_path);
    if (chk.params.N != p.N || chk.params.m != p.m ||
        chk.params.temperature() != p.temperature())
      throw config_error("config: checkpoint was written for different (N, m, T)");
    Xoshiro256pp rng(0);
    rng.set_state(chk.rng_state);
    SamplerConfig frozen = sampler;
    frozen.step_size = chk.current_step;
    return continue_density(p, frozen, chk.config, rng, grid);
  }();

  if (!save_path.empty()) {
    // The saved state continues the chain: RNG state is not part of
    // SampleRun, so a fresh deterministic stream is derived from the seed
    // and the sweep count.
    ChainCheckpoint chk;
    chk.params = p;
    chk.sampler = sampler;
    chk.sweeps_done = run.sweeps;
    chk.current_step = run.tuned_step;
    Xoshiro256pp rng(sampler.seed ^ fnv1a64(fmt(run.sweeps)));
    chk.rng_state = rng.state();
    chk.config = run.final_configuration;
    save_checkpoint(save_path, chk);
  }

  const auto density = run.density.density();
  const auto stderr_ = run.density.standard_error();
  const RadialDensity rho_el = electrostatic_profile(p, grid);
  const RadialDensity rho_th = thermal_profile(p, grid);
  const auto envelope_at = [&](double r) {
    const auto env = decay_envelope(p, r);
    return env ? *env : std::numeric_limits<double>::infinity();
  };
  CsvBuilder csv("sample",
                 {"r", "density", "stderr", "rho_el", "rho_th", "envelope",
                  "undersampled"});
  for (std::size_t i = 0; i < grid.n_bins(); ++i)
    csv.row({fmt(grid.node(i)), fmt(density[i]), fmt(stderr_[i]),
             fmt(rho_el.values()[i]), fmt(rho_th.values()[i]),
             fmt(envelope_at(grid.node(i))), fmt(run.density.undersampled(i))});
  write_text(out / "sample.csv", csv.str());

  // Scalar variance diagnostic: variance among the batch means of the
  // second radial moment (the observable with a closed-form expectation).
  std::vector<double> moment_weights(grid.n_bins());
  for (std::size_t i = 0; i < grid.n_bins(); ++i)
    moment_weights[i] = grid.node(i) * grid.node(i) * grid.cell_area(i);
  const auto [moment_r2, moment_se] = run.density.functional_statistics(moment_weights);

  nlohmann::json diag;
  diag["acceptance_rate"] = run.acceptance_rate;
  diag["tuned_step"] = run.tuned_step;
  diag["sweeps"] = run.sweeps;
  diag["snapshots"] = run.density.total_snapshots();
  diag["moment_r2"] = moment_r2;
  if (std::isfinite(moment_se))
    diag["batch_variance"] =
        moment_se * moment_se * static_cast<double>(run.density.populated_batches());
  diag["resumed"] = !resume_path.empty();

  // Charge-fluctuation estimate on an independent short chain.  The budget
  // is capped so the diagnostic never dominates the run it annotates; the
  // derived seed keeps it deterministic yet decoupled from the main stream.
  SamplerConfig fluct = sampler;
  fluct.n_burnin = std::min<unsigned long long>(sampler.n_burnin, 1000);
  fluct.n_samples = std::min<unsigned long long>(sampler.n_samples, 4000);
  fluct.seed = sampler.seed ^ fnv1a64("fluctuation");
  const OnsagerReport fluctuation = onsager_fluctuation(p, fluct);
  diag["fluctuation_estimate"] = fluctuation.mean;
  if (std::isfinite(fluctuation.standard_error))
    diag["fluctuation_stderr"] = fluctuation.standard_error;

  nlohmann::json calibrated;
  calibrated["batch_count"] = DensityEstimate::n_batches;
  calibrated["fluctuation_max_samples"] = 4000;
  return {diag, calibrated};
}

inline std::pair<nlohmann::json, nlohmann::json> run_ed(
    int N, long long L_min, long long L_max, bool laughlin_vector,
    const std::filesystem::path& out) {
  if (N < 1) throw config_error("config: N must be at least 1");
  if (L_min < 0 || L_max < L_min)
    throw config_error("config: need 0 <= L-min <= L-max");

  CsvBuilder csv("ed", {"L", "dim", "kernel_dim", "kernel_law", "yrast", "gap",
                        "quarantined"});
  ModelParams p;
  p.N = N;
  bool law_matches = true;
  bool any_quarantined = false;
  double yrast_zero = std::numeric_limits<double>::quiet_NaN();
  for (long long L = L_min; L <= L_max; ++L) {
    const SectorSpectrum spectrum = sector_spectrum(N, L);
    const long long law = kernel_dimension_law(N, L);
    law_matches = law_matches && (static_cast<long long>(spectrum.kernel_dim) == law);
    any_quarantined = any_quarantined || !spectrum.quarantined.empty();
    const double yrast = spectrum.interaction_eigenvalues.front();
    if (L == 0) yrast_zero = yrast;
    csv.row({fmt(L), fmt(spectrum.basis_dim), fmt(spectrum.kernel_dim), fmt(law), fmt(yrast),
             fmt(spectrum.gap), fmt(spectrum.quarantined.size())});
  }
  write_text(out / "ed.csv", csv.str());

  nlohmann::json diag;
  diag["kernel_law_matches"] = law_matches;
  diag["any_quarantined"] = any_quarantined;
  if (L_min == 0) diag["interaction_at_zero_momentum"] = yrast_zero;

  if (laughlin_vector) {
    // Occupation-basis coordinates of the unique zero-interaction state at
    // L = N(N-1).  Sign fixed by making the largest-magnitude entry positive.
    const long long L0 = static_cast<long long>(N) * (N - 1);
    const std::vector<FockState> basis = enumerate_basis(N, L0);
    const Eigen::MatrixXd mat = build_interaction(N, L0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(mat);
    Eigen::VectorXd vec = solver.eigenvectors().col(0);
    Eigen::Index peak = 0;
    vec.cwiseAbs().maxCoeff(&peak);
    if (vec[peak] < 0.0) vec = -vec;
    CsvBuilder vec_csv("ed-laughlin-vector", {"index", "occupations", "coefficient"});
    for (Eigen::Index i = 0; i < vec.size(); ++i) {
      std::string occ;
      const auto& ns = basis[static_cast<std::size_t>(i)].occupations;
      for (std::size_t l = 0; l < ns.size(); ++l) {
        if (l > 0) occ += ' ';
        occ += std::to_string(ns[l]);
      }
      vec_csv.row({fmt(static_cast<long long>(i)), occ, fmt(vec[i])});
    }
    write_text(out / "laughlin_vector.csv", vec_csv.str());
    diag["laughlin_momentum"] = L0;
    diag["laughlin_dim"] = static_cast<long long>(vec.size());
    diag["laughlin_residual"] = solver.eigenvalues()[0];
  }
  nlohmann::json calibrated;
  calibrated["kernel_threshold"] = 1e-10;
  calibrated["quarantine_threshold"] = 1e-7;
  return {diag, calibrated};
}

inline nlohmann::json energy_report_json(const EnergyReport& rep) {
  nlohmann::json j;
  j["vortex_degree"] = rep.vortex_degree;
  j["momentum"] = rep.momentum;
  j["main_term"] = rep.main_term;
  j["mc_term"] = rep.mc_term;
  j["mc_stderr"] = rep.mc_stderr;
  j["term_bulk_profile"] = rep.term_bulk_profile;
  j["term_bulk_correction"] = rep.term_bulk_correction;
  j["term_tail"] = rep.term_tail;
  j["cutoff_error"] = rep.cutoff_error;
  j["lower_bound"] = rep.lower_bound;
  j["upper_bound"]["case"] = rep.upper.case_label;
  j["upper_bound"]["condition"] = rep.upper.condition;
  j["upper_bound"]["asymptotic_caveat"] = rep.upper.asymptotic_caveat;
  j["upper_bound"]["unproven_window"] = rep.upper.unproven_window;
  if (std::isfinite(rep.upper.value)) j["upper_bound"]["value"] = rep.upper.value;
  if (std::isfinite(rep.upper.alternate_value))
    j["upper_bound"]["alternate_value"] = rep.upper.alternate_value;
  j["cutoffs"]["inner_edge"] = rep.cutoffs.inner_edge;
  j["cutoffs"]["outer_edge"] = rep.cutoffs.outer_edge;
  j["fast_path"] = rep.fast_path;
  j["acceptance_rate"] = rep.acceptance_rate;
  return j;
}

inline std::pair<nlohmann::json, nlohmann::json> run_energy(
    const ModelParams& p, long long m, const SamplerConfig& sampler, bool fast,
    const std::filesystem::path& out) {
  SamplerConfig s = sampler;
  if (fast) s.n_samples = 0;
  const EnergyReport rep = evaluate_trial_energy(p, m, s);
  write_text(out / "energy.json", energy_report_json(rep).dump(2) + "\n");

  nlohmann::json calibrated;
  calibrated["cutoff_inner_edge"] = rep.cutoffs.inner_edge;
  calibrated["cutoff_outer_edge"] = rep.cutoffs.outer_edge;
  return {energy_report_json(rep), calibrated};
}

inline std::pair<nlohmann::json, nlohmann::json> run_phase_diagram(
    int N, double k, double omega_min, double omega_max, std::size_t points,
    const std::filesystem::path& out) {
  if (points < 1) throw config_error("config: points must be at least 1");
  if (points > 1 && omega_min == omega_max)
    throw config_error("config: omega range is empty but points > 1");
  std::vector<double> omegas;
  omegas.reserve(points);
  for (std::size_t i = 0; i < points; ++i)
    omegas.push_back(points == 1 ? omega_min
                                 : omega_min + (omega_max - omega_min) *
                                       static_cast<double>(i) /
                                       static_cast<double>(points - 1));
  const auto table = phase_diagram(N, k, omegas);

  CsvBuilder csv("phase-diagram", {"omega", "m_opt", "L", "main_term", "upper_bound",
                                   "upper_case", "unproven_window", "thermal_regime"});
  double first_vortex = std::numeric_limits<double>::quiet_NaN();
  double first_thermal = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : table) {
    if (row.m_opt > 0 && !(first_vortex == first_vortex)) first_vortex = row.omega;
    if (row.thermal_regime && !(first_thermal == first_thermal))
      first_thermal = row.omega;
    csv.row({fmt(row.omega), fmt(row.m_opt), fmt(row.momentum), fmt(row.main_term),
             fmt(row.upper_value), fmt(row.upper_case), fmt(row.upper_unproven),
             fmt(row.thermal_regime)});
  }
  write_text(out / "phase_diagram.csv", csv.str());

  nlohmann::json diag;
  diag["rows"] = table.size();
  diag["vortex_onset_closed_form"] = -2.0 * k * N;
  diag["regime_flip_closed_form"] = -2.0 * k * (static_cast<double>(N) * N + N);
  if (first_vortex == first_vortex) diag["vortex_onset_observed"] = first_vortex;
  if (first_thermal == first_thermal) diag["regime_flip_observed"] = first_thermal;
  nlohmann::json calibrated;
  calibrated["grid_points"] = points;
  return {diag, calibrated};
}

// --------------------------------------------------------------------------
// Entry point.  Usage/configuration problems exit 2 before any compute;
// numerical failures during compute exit 1 and leave the error in the
// manifest; success exits 0.
// --------------------------------------------------------------------------
inline int qhp_main(int argc, const char* const* argv) {
  CLI::App app{"Lowest-Landau-level plasma toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // --out / --config may follow the subcommand
  app.set_config("--config", "",
                 "INI config file with [subcommand] sections; flags win");
  std::string out_flag;
  app.add_option("--out", out_flag,
                 "Output directory (default: $QHP_OUTPUT_DIR or .)")
      ->envname(output_dir_env);

  // meanfield ---------------------------------------------------------------
  auto* mf = app.add_subcommand("meanfield", "Minimize the mean-field functional");
  ModelOpts mf_model;
  GridOpts mf_grid;
  double mf_tol = 1e-9;
  std::size_t mf_max_iter = 100000;
  add_model_options(mf, mf_model, false);
  add_grid_options(mf, mf_grid);
  mf->add_option("--tol", mf_tol, "Euler-Lagrange residual tolerance");
  mf->add_option("--max-iter", mf_max_iter, "Iteration budget");

  // sample ------------------------------------------------------------------
  auto* sm = app.add_subcommand("sample", "Metropolis sampling of the plasma");
  ModelOpts sm_model;
  GridOpts sm_grid;
  SamplerOpts sm_sampler;
  std::string sm_resume, sm_save;
  add_model_options(sm, sm_model, false);
  add_grid_options(sm, sm_grid);
  add_sampler_options(sm, sm_sampler);
  sm->add_option("--resume", sm_resume, "Continue from a chain checkpoint");
  sm->add_option("--save-checkpoint", sm_save, "Write the final chain state");

  // ed ----------------------------------------------------------------------
  auto* ed = app.add_subcommand("ed", "Exact diagonalization per momentum sector");
  int ed_N = 1;
  long long ed_L_min = 0, ed_L_max = 0;
  bool ed_laughlin = false;
  ed->add_option("--N", ed_N, "Particle count")->required();
  ed->add_option("--L-min", ed_L_min, "Lowest momentum sector (default 0)");
  ed->add_option("--L-max", ed_L_max, "Highest momentum sector")->required();
  ed->add_flag("--laughlin-vector", ed_laughlin,
               "Also dump the zero-interaction eigenvector at L = N(N-1)");

  // energy ------------------------------------------------------------------
  auto* en = app.add_subcommand("energy", "Trial-state energy report");
  ModelOpts en_model;
  SamplerOpts en_sampler;
  long long en_m = -1;
  bool en_fast = false;
  add_model_options(en, en_model, true);
  add_sampler_options(en, en_sampler);
  en->add_option("--vortex", en_m,
                 "Vortex degree to evaluate (default: the optimal degree)");
  en->add_flag("--fast", en_fast, "Profile-only evaluation, no sampling");

  // phase-diagram -----------------------------------------------------------
  auto* pd = app.add_subcommand("phase-diagram", "Closed-form (omega, k) table");
  int pd_N = 1;
  double pd_k = 0.0, pd_omega_min = 0.0, pd_omega_max = 0.0;
  std::size_t pd_points = 101;
  pd->add_option("--N", pd_N, "Particle count")->required();
  pd->add_option("--k", pd_k, "Quartic trap coefficient")->required();
  pd->add_option("--omega-min", pd_omega_min, "Start of the omega grid")->required();
  pd->add_option("--omega-max", pd_omega_max, "End of the omega grid")->required();
  pd->add_option("--points", pd_points, "Grid points (default 101)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    PendingRun run;
    run.out_dir = resolve_out_dir(out_flag);

    if (mf->parsed()) {
      const ModelParams p = mf_model.build();
      if (!(mf_tol > 0.0)) throw config_error("config: tol must be positive");
      const RadialGrid grid = mf_grid.resolve(p);
      run.subcommand = "meanfield";
      mf_model.canonicalize(run.config);
      mf_grid.canonicalize(grid, run.config);
      run.config["tol"] = fmt(mf_tol);
      run.config["max_iter"] = fmt(mf_max_iter);
      run.compute = [=, out = run.out_dir] {
        return run_meanfield(p, grid, mf_tol, mf_max_iter, out);
      };
    } else if (sm->parsed()) {
      const ModelParams p = sm_model.build();
      const RadialGrid grid = sm_grid.resolve(p);
      const SamplerConfig sampler = sm_sampler.build();
      if (sampler.n_samples < 1)
        throw config_error("config: sweeps must be at least 1");
      run.subcommand = "sample";
      sm_model.canonicalize(run.config);
      sm_grid.canonicalize(grid, run.config);
      sm_sampler.canonicalize(run.config);
      run.config["resume"] = sm_resume.empty() ? "no" : "yes";
      run.compute = [=, out = run.out_dir] {
        return run_sample(p, grid, sampler, sm_resume, sm_save, out);
      };
    } else if (ed->parsed()) {
      if (ed_N < 1) throw config_error("config: N must be at least 1");
      if (ed_L_min < 0 || ed_L_max < ed_L_min)
        throw config_error("config: need 0 <= L-min <= L-max");
      run.subcommand = "ed";
      run.config["N"] = fmt(ed_N);
      run.config["L_min"] = fmt(ed_L_min);
      run.config["L_max"] = fmt(ed_L_max);
      run.config["laughlin_vector"] = ed_laughlin ? "yes" : "no";
      run.compute = [=, out = run.out_dir] {
        return run_ed(ed_N, ed_L_min, ed_L_max, ed_laughlin, out);
      };
    } else if (en->parsed()) {
      const ModelParams p = en_model.build();
      const SamplerConfig sampler = en_sampler.build();
      const long long m = en_m >= 0 ? en_m : optimal_vortex(p);
      run.subcommand = "energy";
      en_model.canonicalize(run.config);
      en_sampler.canonicalize(run.config);
      run.config["m"] = fmt(m);  // resolved degree, not the -1 sentinel
      run.config["fast"] = en_fast ? "yes" : "no";
      run.compute = [=, out = run.out_dir] {
        return run_energy(p, m, sampler, en_fast, out);
      };
    } else if (pd->parsed()) {
      run.subcommand = "phase-diagram";
      run.config["N"] = fmt(pd_N);
      run.config["k"] = fmt(pd_k);
      run.config["omega_min"] = fmt(pd_omega_min);
      run.config["omega_max"] = fmt(pd_omega_max);
      run.config["points"] = fmt(pd_points);
      if (pd_N < 1) throw config_error("config: N must be at least 1");
      if (pd_k < 0.0) throw config_error("config: k must be nonnegative");
      run.compute = [=, out = run.out_dir] {
        return run_phase_diagram(pd_N, pd_k, pd_omega_min, pd_omega_max, pd_points,
                                 out);
      };
    }

    return execute(run);
  } catch (const config_error& e) {
    std::cerr << "qhp: " << e.what() << "\n";
    return 2;
  } catch (const domain_error& e) {
    std::cerr << "qhp: invalid configuration: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace qhp::cli
