#pragma once

// Metropolis Monte Carlo for the planar log-gas written in scaled
// coordinates: particle energy
//
//   H(z_1..z_N) = sum_j W(|z_j|) - (2/N) sum_{i != j} log|z_i - z_j|
//
// (the pair sum runs over ordered pairs) sampled at temperature params.T.
// The module provides the sampler itself, a binned radial density estimator
// with batch-means error bars that merges associatively across chains, a
// smooth-test-function comparator against the variational profiles, the
// smeared-charge fluctuation estimator, an exact small-N free-energy
// quadrature, and a versioned binary checkpoint for chain resume.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qhplasma/errors.hpp"
#include "qhplasma/meanfield.hpp"
#include "qhplasma/model.hpp"
#include "qhplasma/numerics.hpp"
#include "qhplasma/potential.hpp"
#include "qhplasma/radial_grid.hpp"
#include "qhplasma/rng.hpp"

namespace qhp {

using PlanarPoint = std::array<double, 2>;

// Two configurations closer than this (or a particle closer to the origin
// when the potential is singular there) are treated as the measure-zero
// singular set: the energy is +infinity and such proposals are rejected.
inline constexpr double coincidence_cutoff = 1e-12;

struct PlasmaConfiguration {
  std::vector<PlanarPoint> positions;
  double cached_energy = 0.0;
  // Accepted moves since the last from-scratch energy recomputation.
  long long moves_since_audit = 0;

  std::size_t size() const { return positions.size(); }
};

namespace detail {

inline double sq_distance(const PlanarPoint& a, const PlanarPoint& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

// Kept product of squared distances, flushed into a log before the double
// exponent range can saturate.
class ChunkedLog {
 public:
  void multiply(double factor) {
    product_ *= factor;
    if (++count_ == 32 || product_ < 1e-180 || product_ > 1e180) flush();
  }
  double log_value() {
    flush();
    return total_;
  }

 private:
  void flush() {
    if (count_ > 0) total_ += std::log(product_);
    product_ = 1.0;
    count_ = 0;
  }
  double product_ = 1.0;
  double total_ = 0.0;
  int count_ = 0;
};

}  // namespace detail

// Full O(N^2) energy; +infinity on the singular set.
inline double hamiltonian(const ModelParams& p, const std::vector<PlanarPoint>& z) {
  p.validate();
  const auto n = z.size();
  KahanSum confinement;
  for (const auto& pt : z) {
    const double r = std::hypot(pt[0], pt[1]);
    if (p.m > 0 && r < coincidence_cutoff)
      return std::numeric_limits<double>::infinity();
    confinement.add(potential_W(p, r));
  }
  detail::ChunkedLog pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d2 = detail::sq_distance(z[i], z[j]);
      if (d2 < coincidence_cutoff * coincidence_cutoff)
        return std::numeric_limits<double>::infinity();
      pairs.multiply(d2);
    }
  // log d = log(d^2)/2; ordered pairs double the unordered sum.
  return confinement.value() - (2.0 / p.N) * pairs.log_value();
}

inline double hamiltonian(const ModelParams& p, const PlasmaConfiguration& config) {
  return hamiltonian(p, config.positions);
}

// Energy change for moving particle `j` to `proposal`, consistent with the
// full recompute to 1e-10.  +infinity marks a rejected singular proposal.
inline double move_delta(const ModelParams& p, const std::vector<PlanarPoint>& z,
                         std::size_t j, const PlanarPoint& proposal) {
  if (j >= z.size()) throw dimension_error("move_delta: particle index out of range");
  const double r_new = std::hypot(proposal[0], proposal[1]);
  if (p.m > 0 && r_new < coincidence_cutoff)
    return std::numeric_limits<double>::infinity();
  detail::ChunkedLog ratio;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (i == j) continue;
    const double d2_new = detail::sq_distance(proposal, z[i]);
    if (d2_new < coincidence_cutoff * coincidence_cutoff)
      return std::numeric_limits<double>::infinity();
    ratio.multiply(d2_new / detail::sq_distance(z[j], z[i]));
  }
  const double r_old = std::hypot(z[j][0], z[j][1]);
  return potential_W(p, r_new) - potential_W(p, r_old) -
         (2.0 / p.N) * ratio.log_value();
}

struct SamplerConfig {
  double step_size = 0.5;
  unsigned long long n_burnin = 1000;
  unsigned long long n_samples = 10000;
  unsigned long long thinning = 1;
  std::uint64_t seed = 1;
  double target_acceptance = 0.35;

  void validate() const {
    if (!(step_size > 0.0)) throw domain_error("sampler: step_size must be positive");
    if (thinning < 1) throw domain_error("sampler: thinning must be >= 1");
    if (!(target_acceptance > 0.0 && target_acceptance < 1.0))
      throw domain_error("sampler: target_acceptance must lie in (0,1)");
  }
};

// Draw an i.i.d. start from the regime profile: radius by inverse CDF over
// the cell masses, angle uniform.
inline PlasmaConfiguration init_configuration(const ModelParams& p, Xoshiro256pp& rng,
                                              const RadialGrid& profile_grid) {
  const RadialDensity profile = p.thermal_regime() ? thermal_profile(p, profile_grid)
                                                   : electrostatic_profile(p, profile_grid);
  const auto& g = profile.grid();
  std::vector<double> cdf(g.n_bins());
  KahanSum acc;
  for (std::size_t i = 0; i < g.n_bins(); ++i) {
    acc.add(profile.value(i) * g.cell_area(i));
    cdf[i] = acc.value();
  }
  const double total = cdf.back();
  for (int attempt = 0; attempt < 100; ++attempt) {
    PlasmaConfiguration config;
    config.positions.resize(static_cast<std::size_t>(p.N));
    for (auto& pt : config.positions) {
      const double u = rng.uniform() * total;
      const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      const std::size_t cell =
          std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), g.n_bins() - 1);
      const double lo = g.lower(cell), hi = g.upper(cell);
      const double r = std::sqrt(lo * lo + rng.uniform() * (hi * hi - lo * lo));
      const double theta = 2.0 * pi * rng.uniform();
      pt = {r * std::cos(theta), r * std::sin(theta)};
    }
    config.cached_energy = hamiltonian(p, config.positions);
    if (std::isfinite(config.cached_energy)) return config;
  }
  throw integrity_error("init_configuration: could not draw a finite-energy start");
}

inline PlasmaConfiguration init_configuration(const ModelParams& p, Xoshiro256pp& rng) {
  return init_configuration(p, rng, suggested_grid(p));
}

// One sweep = N single-particle isotropic Gaussian proposals, visited in
// index order unless an explicit visit order is supplied (the order makes
// label equivariance testable).  Returns the number of accepted moves.
// Every 1000 accepted moves the cached energy is audited against a full
// recompute; disagreement beyond 1e-8 is an integrity failure.
inline int metropolis_sweep(const ModelParams& p, PlasmaConfiguration& config,
                            const SamplerConfig& sampler, Xoshiro256pp& rng,
                            const std::vector<int>* visit_order = nullptr) {
  const double T = p.temperature();
  const std::size_t n = config.size();
  if (visit_order && visit_order->size() != n)
    throw dimension_error("metropolis_sweep: visit order size mismatch");
  int accepted = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t j = visit_order ? static_cast<std::size_t>((*visit_order)[t]) : t;
    const auto kick = rng.normal_pair();
    const PlanarPoint proposal = {config.positions[j][0] + sampler.step_size * kick[0],
                                  config.positions[j][1] + sampler.step_size * kick[1]};
    const double delta = move_delta(p, config.positions, j, proposal);
    bool accept = false;
    if (delta <= 0.0)
      accept = true;
    else if (std::isfinite(delta))
      accept = rng.uniform() < std::exp(-delta / T);
    if (!accept) continue;
    config.positions[j] = proposal;
    config.cached_energy += delta;
    ++accepted;
    if (++config.moves_since_audit >= 1000) {
      const double fresh = hamiltonian(p, config.positions);
      if (std::abs(fresh - config.cached_energy) > 1e-8)
        throw integrity_error("metropolis_sweep: cached energy drifted beyond 1e-8");
      config.cached_energy = fresh;
      config.moves_since_audit = 0;
    }
  }
  return accepted;
}

// Radial histogram of chain snapshots.  Counts are kept per batch so that
// estimates from independent chains merge by plain addition (associative and
// order-independent); the batch means give the per-bin standard error.
class DensityEstimate {
 public:
  static constexpr std::size_t n_batches = 32;

  explicit DensityEstimate(const RadialGrid& grid)
      : grid_(grid),
        batch_counts_(n_batches, std::vector<double>(grid.n_bins(), 0.0)),
        batch_snapshots_(n_batches, 0.0) {}

  void record(const PlasmaConfiguration& config, std::size_t batch) {
    if (batch >= n_batches) throw dimension_error("DensityEstimate: batch out of range");
    if (n_particles_ == 0)
      n_particles_ = config.size();
    else if (n_particles_ != config.size())
      throw dimension_error("DensityEstimate: particle count changed between records");
    for (const auto& pt : config.positions) {
      const double r = std::hypot(pt[0], pt[1]);
      if (r <= grid_.r_max())
        batch_counts_[batch][grid_.cell_of(r)] += 1.0;
    }
    batch_snapshots_[batch] += 1.0;
  }

  void merge(const DensityEstimate& other) {
    if (!(grid_ == other.grid_))
      throw dimension_error("DensityEstimate: merging estimates on different grids");
    if (n_particles_ == 0)
      n_particles_ = other.n_particles_;
    else if (other.n_particles_ != 0 && other.n_particles_ != n_particles_)
      throw dimension_error("DensityEstimate: merging estimates of different N");
    for (std::size_t b = 0; b < n_batches; ++b) {
      batch_snapshots_[b] += other.batch_snapshots_[b];
      for (std::size_t i = 0; i < grid_.n_bins(); ++i)
        batch_counts_[b][i] += other.batch_counts_[b][i];
    }
  }

  const RadialGrid& grid() const { return grid_; }
  std::size_t n_particles() const { return n_particles_; }

  double total_snapshots() const {
    KahanSum s;
    for (double b : batch_snapshots_) s.add(b);
    return s.value();
  }

  // Number of batches that received at least one snapshot.  The batch-mean
  // standard error is an average over exactly these batches, so variance
  // among batch means equals (standard error)^2 * populated_batches().
  std::size_t populated_batches() const {
    std::size_t n = 0;
    for (double b : batch_snapshots_)
      if (b > 0.0) ++n;
    return n;
  }

  std::vector<double> counts() const {
    std::vector<double> out(grid_.n_bins(), 0.0);
    for (const auto& batch : batch_counts_)
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += batch[i];
    return out;
  }

  // Unit-mass radial density: counts / (snapshots * N * cell area).
  std::vector<double> density() const {
    const double norm = total_snapshots() * static_cast<double>(n_particles_);
    if (norm <= 0.0) throw domain_error("DensityEstimate: no snapshots recorded");
    auto out = counts();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= norm * grid_.cell_area(i);
    return out;
  }

  // Per-bin standard error of the density via (weighted) batch means.
  std::vector<double> standard_error() const {
    const double norm_particles = static_cast<double>(n_particles_);
    if (norm_particles <= 0.0)
      throw domain_error("DensityEstimate: no snapshots recorded");
    std::vector<double> weights;
    for (double b : batch_snapshots_)
      if (b > 0.0) weights.push_back(b);
    const std::size_t B = weights.size();
    std::vector<double> out(grid_.n_bins(), std::numeric_limits<double>::infinity());
    if (B < 2) return out;
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    for (std::size_t i = 0; i < grid_.n_bins(); ++i) {
      const double area = grid_.cell_area(i);
      double mean = 0.0;
      std::vector<double> means;
      means.reserve(B);
      for (std::size_t b = 0; b < n_batches; ++b) {
        if (batch_snapshots_[b] <= 0.0) continue;
        const double mb =
            batch_counts_[b][i] / (batch_snapshots_[b] * norm_particles * area);
        means.push_back(mb);
        mean += batch_snapshots_[b] * mb;
      }
      mean /= wsum;
      double var = 0.0;
      std::size_t k = 0;
      for (std::size_t b = 0; b < n_batches; ++b) {
        if (batch_snapshots_[b] <= 0.0) continue;
        const double d = means[k++] - mean;
        var += batch_snapshots_[b] * d * d;
      }
      out[i] = std::sqrt(var / (static_cast<double>(B - 1) * wsum));
    }
    return out;
  }

  // A bin whose total tally is below one count per batch cannot support the
  // batch-means error bar and must not be trusted silently.
  bool undersampled(std::size_t i) const {
    double total = 0.0;
    for (const auto& batch : batch_counts_) total += batch[i];
    return total < static_cast<double>(n_batches);
  }

  // Weighted batch mean and standard error of a linear density functional
  // sum_i w_i * density_i.  Propagating per-bin error bars through an
  // integral would ignore cross-bin correlation within a snapshot; the batch
  // means keep it.  The error is infinite with fewer than two batches.
  std::pair<double, double> functional_statistics(const std::vector<double>& w) const {
    if (w.size() != grid_.n_bins())
      throw dimension_error("DensityEstimate: functional weight size mismatch");
    const double norm_particles = static_cast<double>(n_particles_);
    if (norm_particles <= 0.0)
      throw domain_error("DensityEstimate: no snapshots recorded");
    std::vector<double> means, weights;
    for (std::size_t b = 0; b < n_batches; ++b) {
      if (batch_snapshots_[b] <= 0.0) continue;
      KahanSum v;
      for (std::size_t i = 0; i < grid_.n_bins(); ++i)
        if (w[i] != 0.0)
          v.add(w[i] * batch_counts_[b][i] /
                (batch_snapshots_[b] * norm_particles * grid_.cell_area(i)));
      means.push_back(v.value());
      weights.push_back(batch_snapshots_[b]);
    }
    const std::size_t B = means.size();
    if (B == 0) throw domain_error("DensityEstimate: no snapshots recorded");
    double wsum = 0.0, mean = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      wsum += weights[b];
      mean += weights[b] * means[b];
    }
    mean /= wsum;
    if (B < 2) return {mean, std::numeric_limits<double>::infinity()};
    double var = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      const double d = means[b] - mean;
      var += weights[b] * d * d;
    }
    return {mean, std::sqrt(var / (static_cast<double>(B - 1) * wsum))};
  }

 private:
  RadialGrid grid_;
  std::vector<std::vector<double>> batch_counts_;
  std::vector<double> batch_snapshots_;
  std::size_t n_particles_ = 0;
};

struct SampleRun {
  DensityEstimate density;
  PlasmaConfiguration final_configuration;
  double acceptance_rate = 0.0;
  double tuned_step = 0.0;
  unsigned long long sweeps = 0;
};

namespace detail {

// Burn in `config`, adapting the step every 50 sweeps toward the target
// acceptance, then freeze the step (adaptation during sampling would break
// detailed balance).  Returns the frozen step.
inline double burn_in(const ModelParams& p, PlasmaConfiguration& config,
                      const SamplerConfig& sampler, Xoshiro256pp& rng) {
  SamplerConfig local = sampler;
  long long window_accepts = 0;
  unsigned long long window_sweeps = 0;
  for (unsigned long long s = 0; s < sampler.n_burnin; ++s) {
    window_accepts += metropolis_sweep(p, config, local, rng);
    if (++window_sweeps == 50) {
      const double rate =
          static_cast<double>(window_accepts) /
          (static_cast<double>(window_sweeps) * static_cast<double>(p.N));
      local.step_size = std::clamp(local.step_size * std::exp(rate - sampler.target_acceptance),
                                   1e-5, 10.0);
      window_accepts = 0;
      window_sweeps = 0;
    }
  }
  return local.step_size;
}

// Run the recording phase of a frozen chain: sweep, thin, and spread the
// kept snapshots evenly over the estimator batches.  Returns the accepted
// move count.
inline long long record_sweeps(const ModelParams& p, const SamplerConfig& frozen,
                               PlasmaConfiguration& config, Xoshiro256pp& rng,
                               DensityEstimate& estimate) {
  const unsigned long long recorded_total =
      (frozen.n_samples + frozen.thinning - 1) / frozen.thinning;
  unsigned long long recorded = 0;
  long long accepted = 0;
  for (unsigned long long s = 0; s < frozen.n_samples; ++s) {
    accepted += metropolis_sweep(p, config, frozen, rng);
    if (s % frozen.thinning == 0) {
      const std::size_t batch = std::min<std::size_t>(
          DensityEstimate::n_batches - 1,
          static_cast<std::size_t>((recorded * DensityEstimate::n_batches) / recorded_total));
      estimate.record(config, batch);
      ++recorded;
    }
  }
  return accepted;
}

}  // namespace detail

inline SampleRun estimate_density(const ModelParams& p, const SamplerConfig& sampler,
                                  const RadialGrid& grid) {
  p.validate();
  sampler.validate();
  if (sampler.n_samples < 1) throw domain_error("estimate_density: n_samples must be >= 1");
  Xoshiro256pp rng(sampler.seed);
  PlasmaConfiguration config = init_configuration(p, rng);

  SamplerConfig frozen = sampler;
  frozen.step_size = detail::burn_in(p, config, sampler, rng);

  DensityEstimate estimate(grid);
  const long long accepted = detail::record_sweeps(p, frozen, config, rng, estimate);
  const double rate = static_cast<double>(accepted) /
                      (static_cast<double>(sampler.n_samples) * static_cast<double>(p.N));
  return SampleRun{std::move(estimate), std::move(config), rate, frozen.step_size,
                   sampler.n_burnin + sampler.n_samples};
}

// Continue an already-equilibrated chain (typically restored from a
// checkpoint): no burn-in and no step adaptation, the supplied step is taken
// as frozen and the generator continues from its given state.  Density
// statistics restart at zero for the continued segment.
inline SampleRun continue_density(const ModelParams& p, const SamplerConfig& frozen,
                                  PlasmaConfiguration config, Xoshiro256pp& rng,
                                  const RadialGrid& grid) {
  p.validate();
  frozen.validate();
  if (frozen.n_samples < 1) throw domain_error("continue_density: n_samples must be >= 1");
  if (config.size() != static_cast<std::size_t>(p.N))
    throw dimension_error("continue_density: configuration does not match N");
  DensityEstimate estimate(grid);
  const long long accepted = detail::record_sweeps(p, frozen, config, rng, estimate);
  const double rate = static_cast<double>(accepted) /
                      (static_cast<double>(frozen.n_samples) * static_cast<double>(p.N));
  return SampleRun{std::move(estimate), std::move(config), rate, frozen.step_size,
                   frozen.n_samples};
}

inline SampleRun estimate_density(const ModelParams& p, const SamplerConfig& sampler) {
  return estimate_density(p, sampler, suggested_grid(p));
}

// Comparison of a smooth radial observable against the regime profile.
// `rate_envelope` is the functional form  grad_bound * log N / sqrt(N)
// with unit constant; the calibrated constant is the reported ratio.
struct PairTestReport {
  double mc_estimate = 0.0;
  double standard_error = 0.0;
  double reference = 0.0;
  double difference = 0.0;
  double rate_envelope = 0.0;
};

inline PairTestReport pair_test_function(const ModelParams& p, const SamplerConfig& sampler,
                                         const std::function<double(double)>& V,
                                         double grad_bound) {
  p.validate();
  sampler.validate();
  Xoshiro256pp rng(sampler.seed);
  PlasmaConfiguration config = init_configuration(p, rng);
  SamplerConfig frozen = sampler;
  frozen.step_size = detail::burn_in(p, config, sampler, rng);

  constexpr std::size_t n_batches = DensityEstimate::n_batches;
  std::array<KahanSum, n_batches> batch_sum{};
  std::array<double, n_batches> batch_count{};
  const unsigned long long recorded_total =
      (sampler.n_samples + sampler.thinning - 1) / sampler.thinning;
  unsigned long long recorded = 0;
  for (unsigned long long s = 0; s < sampler.n_samples; ++s) {
    metropolis_sweep(p, config, frozen, rng);
    if (s % sampler.thinning != 0) continue;
    KahanSum snapshot;
    for (const auto& pt : config.positions) {
      const double v = V(std::hypot(pt[0], pt[1]));
      if (!std::isfinite(v))
        throw domain_error("pair_test_function: V is not finite on the sampled support");
      snapshot.add(v);
    }
    const std::size_t batch = std::min<std::size_t>(
        n_batches - 1, static_cast<std::size_t>((recorded * n_batches) / recorded_total));
    batch_sum[batch].add(snapshot.value() / static_cast<double>(p.N));
    batch_count[batch] += 1.0;
    ++recorded;
  }

  double wsum = 0.0, mean = 0.0;
  std::size_t B = 0;
  for (std::size_t b = 0; b < n_batches; ++b) {
    if (batch_count[b] <= 0.0) continue;
    wsum += batch_count[b];
    mean += batch_sum[b].value();
    ++B;
  }
  mean /= wsum;
  double var = 0.0;
  for (std::size_t b = 0; b < n_batches; ++b) {
    if (batch_count[b] <= 0.0) continue;
    const double d = batch_sum[b].value() / batch_count[b] - mean;
    var += batch_count[b] * d * d;
  }
  const double stderr_mean = B > 1 ? std::sqrt(var / (static_cast<double>(B - 1) * wsum))
                                   : std::numeric_limits<double>::infinity();

  // Integrate V against the regime profile, normalized by the profile's own
  // summed mass so that V == 1 gives exactly 1 (the profile is a unit
  // measure by definition; its Kahan mass carries one ulp of rounding).
  const RadialDensity profile =
      p.thermal_regime() ? thermal_profile(p) : electrostatic_profile(p);
  KahanSum ref, ref_mass;
  for (std::size_t i = 0; i < profile.grid().n_bins(); ++i) {
    if (profile.value(i) <= 0.0) continue;
    const double v = V(profile.grid().node(i));
    if (!std::isfinite(v))
      throw domain_error("pair_test_function: V is not finite on the reference support");
    ref.add(v * profile.value(i) * profile.grid().cell_area(i));
    ref_mass.add(profile.value(i) * profile.grid().cell_area(i));
  }
  const double reference = ref.value() / ref_mass.value();

  PairTestReport report;
  report.mc_estimate = mean;
  report.standard_error = stderr_mean;
  report.reference = reference;
  report.difference = mean - reference;
  report.rate_envelope =
      grad_bound * std::log(std::max(2.0, static_cast<double>(p.N))) /
      std::sqrt(static_cast<double>(p.N));
  return report;
}

namespace detail {

// Average of a radial potential over the disc of radius l centered at
// distance d from the origin (Gauss-Legendre radially, midpoint angularly).
template <typename Potential>
double disc_average(const Potential& h, double d, double l) {
  static const QuadratureRule rule = gauss_legendre(16);
  constexpr int n_angle = 32;
  double integral = 0.0;
  for (std::size_t a = 0; a < rule.nodes.size(); ++a) {
    const double s = 0.5 * l * (rule.nodes[a] + 1.0);
    const double ws = 0.5 * l * rule.weights[a];
    double angular = 0.0;
    for (int k = 0; k < n_angle; ++k) {
      const double phi = 2.0 * pi * (k + 0.5) / n_angle;
      angular += h(std::sqrt(std::max(0.0, d * d + s * s + 2.0 * d * s * std::cos(phi))));
    }
    integral += ws * s * angular * (2.0 * pi / n_angle);
  }
  return integral / (pi * l * l);
}

// Newton potential of a unit-mass uniform disc of radius l.
inline double uniform_disc_potential(double l, double r) {
  if (r >= l) return -std::log(r);
  return -std::log(l) + (l * l - r * r) / (2.0 * l * l);
}

// Interaction energy of two unit-mass uniform discs of radius l at center
// distance d.  Exactly -log d once they are disjoint.
inline double disc_pair_energy(double l, double d) {
  if (d >= 2.0 * l) return -std::log(d);
  return disc_average([l](double r) { return uniform_disc_potential(l, r); }, d, l);
}

}  // namespace detail

// Smeared-charge correction h(d) - disc average, evaluated against an
// already-built potential table (the free function in potential.hpp rebuilds
// the table per call, which is too slow inside a sampling loop).
inline double smeared_charge_correction_cached(const PotentialTable& h,
                                               const RadialDensity& rho, double d, double l) {
  double support_radius = 0.0;
  for (std::size_t i = rho.grid().n_bins(); i-- > 0;)
    if (rho.value(i) > 0.0) {
      support_radius = rho.grid().upper(i);
      break;
    }
  if (d - l >= support_radius) return 0.0;
  return h(d) - detail::disc_average([&h](double r) { return h(r); }, d, l);
}

// Gibbs average of the Coulomb energy of the signed measure
// N rho - sum_i (point charge smeared over a disc of radius l): the
// smearing regularizes the point self-energies, whose exact value
// N (1/4 - log l) is added back as a constant.
struct OnsagerReport {
  double mean = 0.0;
  double standard_error = 0.0;
  double min_sample = 0.0;
  double coulomb_self = 0.0;
  std::size_t snapshots = 0;
};

inline OnsagerReport onsager_fluctuation(const ModelParams& p, const SamplerConfig& sampler,
                                         double l = 0.0) {
  p.validate();
  sampler.validate();
  if (l == 0.0) l = 1.0 / std::sqrt(static_cast<double>(p.N));
  if (!(l > 0.0)) throw domain_error("onsager_fluctuation: smearing radius must be positive");

  const MeanFieldSolution mf = mf_minimize(p, 1e-9);
  const PotentialTable h(mf.density.as_signed());
  const double coulomb_self = coulomb_energy(mf.density.as_signed(), mf.density.as_signed());
  const double N = static_cast<double>(p.N);
  const double self_term = N * (0.25 - std::log(l));

  Xoshiro256pp rng(sampler.seed);
  PlasmaConfiguration config = init_configuration(p, rng);
  SamplerConfig frozen = sampler;
  frozen.step_size = detail::burn_in(p, config, sampler, rng);

  constexpr std::size_t n_batches = DensityEstimate::n_batches;
  std::array<KahanSum, n_batches> batch_sum{};
  std::array<double, n_batches> batch_count{};
  double min_sample = std::numeric_limits<double>::infinity();
  const unsigned long long recorded_total =
      (sampler.n_samples + sampler.thinning - 1) / sampler.thinning;
  unsigned long long recorded = 0;
  std::size_t snapshots = 0;
  for (unsigned long long s = 0; s < sampler.n_samples; ++s) {
    metropolis_sweep(p, config, frozen, rng);
    if (s % sampler.thinning != 0) continue;
    KahanSum cross;  // sum_i of the disc average of h around particle i
    for (const auto& pt : config.positions) {
      const double d = std::hypot(pt[0], pt[1]);
      cross.add(h(d) - smeared_charge_correction_cached(h, mf.density, d, l));
    }
    KahanSum pair;
    for (std::size_t i = 0; i < config.size(); ++i)
      for (std::size_t j = i + 1; j < config.size(); ++j)
        pair.add(detail::disc_pair_energy(
            l, std::sqrt(detail::sq_distance(config.positions[i], config.positions[j]))));
    const double sample =
        N * N * coulomb_self - 2.0 * N * cross.value() + 2.0 * pair.value() + self_term;
    min_sample = std::min(min_sample, sample);
    const std::size_t batch = std::min<std::size_t>(
        n_batches - 1, static_cast<std::size_t>((recorded * n_batches) / recorded_total));
    batch_sum[batch].add(sample);
    batch_count[batch] += 1.0;
    ++recorded;
    ++snapshots;
  }

  double wsum = 0.0, mean = 0.0;
  std::size_t B = 0;
  for (std::size_t b = 0; b < n_batches; ++b) {
    if (batch_count[b] <= 0.0) continue;
    wsum += batch_count[b];
    mean += batch_sum[b].value();
    ++B;
  }
  mean /= wsum;
  double var = 0.0;
  for (std::size_t b = 0; b < n_batches; ++b) {
    if (batch_count[b] <= 0.0) continue;
    const double d = batch_sum[b].value() / batch_count[b] - mean;
    var += batch_count[b] * d * d;
  }
  OnsagerReport report;
  report.mean = mean;
  report.standard_error = B > 1 ? std::sqrt(var / (static_cast<double>(B - 1) * wsum))
                                : std::numeric_limits<double>::infinity();
  report.min_sample = min_sample;
  report.coulomb_self = coulomb_self;
  report.snapshots = snapshots;
  return report;
}

// ---------------------------------------------------------------------------
// Exact small-N free energy by tensor quadrature.

struct FreeEnergyReport {
  double free_energy = 0.0;
  // Per-particle variational minimum and its self-interaction.
  double mf_energy = 0.0;
  double coulomb_self = 0.0;
  double upper_bound = 0.0;  // N * mf_energy - coulomb_self
  double upper_gap = 0.0;    // upper_bound - free_energy (negative = violated)
  bool upper_bound_ok = false;
  double lower_constant = 0.0;  // C with F >= N * mf_energy - log(N)/2 - C
};

namespace detail {

// log Z_N for N <= 3 by rotation reduction: theta_1 = 0 contributes 2 pi,
// the remaining angles on a uniform grid (exact for the trigonometric
// polynomials arising at the native temperature), radii by Gauss-Legendre.
inline double log_partition_function(const ModelParams& p) {
  const double T = p.temperature();
  const double a = static_cast<double>(p.m) / (p.N * T);  // r^{2a} weight
  const double a_eff = a + 8.0;
  const double r_cut =
      std::sqrt(T * (a_eff + 12.0 * std::sqrt(std::max(a_eff, 4.0)) + 20.0));

  const int K_r = p.N == 3 ? 48 : 64;
  const QuadratureRule rule = gauss_legendre(K_r);
  std::vector<double> r(K_r), w(K_r);
  double w_max = -std::numeric_limits<double>::infinity();
  std::vector<double> log_w(K_r);
  for (int i = 0; i < K_r; ++i) {
    r[i] = 0.5 * r_cut * (rule.nodes[i] + 1.0);
    // log of  weight * r * exp(-W(r)/T)
    log_w[i] = std::log(0.5 * r_cut * rule.weights[i] * r[i]) -
               potential_W(p, r[i]) / T;
    w_max = std::max(w_max, log_w[i]);
  }
  for (int i = 0; i < K_r; ++i) w[i] = std::exp(log_w[i] - w_max);

  if (p.N == 1) {
    KahanSum z;
    for (int i = 0; i < K_r; ++i) z.add(w[i]);
    return std::log(2.0 * pi) + w_max + std::log(z.value());
  }

  // Pair factor d^{4/(N T)} as a function of (r_i, r_j, angle difference).
  const double q_half = 2.0 / (p.N * T);  // exponent on d^2
  const bool square_path = std::abs(q_half - 2.0) < 1e-14;
  const int K_a = p.N == 3 ? 32 : 64;
  std::vector<double> cos_table(K_a);
  for (int k = 0; k < K_a; ++k) cos_table[k] = std::cos(2.0 * pi * k / K_a);

  auto pair_factor = [&](double ri, double rj, int k) {
    const double d2 = ri * ri + rj * rj - 2.0 * ri * rj * cos_table[k];
    if (d2 <= 0.0) return 0.0;
    if (square_path) return d2 * d2;
    return std::pow(d2, q_half);
  };

  if (p.N == 2) {
    KahanSum z;
    for (int i = 0; i < K_r; ++i)
      for (int j = 0; j < K_r; ++j) {
        double angular = 0.0;
        for (int k = 0; k < K_a; ++k) angular += pair_factor(r[i], r[j], k);
        z.add(w[i] * w[j] * angular);
      }
    return std::log(2.0 * pi) + std::log(2.0 * pi / K_a) + 2.0 * w_max +
           std::log(z.value());
  }

  // N = 3: precompute all pair tables P[i][j][k].
  std::vector<double> P(static_cast<std::size_t>(K_r) * K_r * K_a);
  auto at = [&](int i, int j, int k) -> double& {
    return P[(static_cast<std::size_t>(i) * K_r + j) * K_a + k];
  };
  for (int i = 0; i < K_r; ++i)
    for (int j = 0; j < K_r; ++j)
      for (int k = 0; k < K_a; ++k) at(i, j, k) = pair_factor(r[i], r[j], k);

  KahanSum z;
  for (int i = 0; i < K_r; ++i)
    for (int j = 0; j < K_r; ++j) {
      const double* P12 = &at(i, j, 0);
      for (int k = 0; k < K_r; ++k) {
        const double* P13 = &at(i, k, 0);
        const double* P23 = &at(j, k, 0);
        double s = 0.0;
        for (int alpha = 0; alpha < K_a; ++alpha) {
          const double f12 = P12[alpha];
          double inner = 0.0;
          for (int beta = 0; beta < K_a; ++beta) {
            int diff = beta - alpha;
            if (diff < 0) diff += K_a;
            inner += P13[beta] * P23[diff];
          }
          s += f12 * inner;
        }
        z.add(w[i] * w[j] * w[k] * s);
      }
    }
  return std::log(2.0 * pi) + 2.0 * std::log(2.0 * pi / K_a) + 3.0 * w_max +
         std::log(z.value());
}

}  // namespace detail

inline FreeEnergyReport free_energy_quadrature(const ModelParams& p) {
  p.validate();
  if (p.N > 3)
    throw unsupported_error("free_energy_quadrature: only N <= 3 is tractable exactly");
  const double T = p.temperature();
  FreeEnergyReport report;
  report.free_energy = -T * detail::log_partition_function(p);

  const MeanFieldSolution mf = mf_minimize(p, 1e-9);
  report.mf_energy = mf.energy;
  report.coulomb_self =
      coulomb_energy(mf.density.as_signed(), mf.density.as_signed());
  report.upper_bound = p.N * mf.energy - report.coulomb_self;
  report.upper_gap = report.upper_bound - report.free_energy;
  report.upper_bound_ok = report.upper_gap >= -1e-9;
  report.lower_constant = p.N * mf.energy - 0.5 * std::log(static_cast<double>(p.N)) -
                          report.free_energy;
  return report;
}

// ---------------------------------------------------------------------------
// Versioned binary checkpoint of a chain (native-endian, same-machine resume).

struct ChainCheckpoint {
  ModelParams params;
  SamplerConfig sampler;
  unsigned long long sweeps_done = 0;
  double current_step = 0.0;
  std::array<std::uint64_t, 4> rng_state{};
  PlasmaConfiguration config;
};

namespace detail {

inline constexpr char checkpoint_magic[8] = {'Q', 'H', 'P', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ChainCheckpoint& chk) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("save_checkpoint: cannot open " + path);
  out.write(detail::checkpoint_magic, sizeof(detail::checkpoint_magic));
  const std::uint32_t version = 1;
  detail::write_pod(out, version);
  detail::write_pod(out, static_cast<std::int64_t>(chk.params.N));
  detail::write_pod(out, static_cast<std::int64_t>(chk.params.m));
  detail::write_pod(out, chk.params.omega);
  detail::write_pod(out, chk.params.k);
  detail::write_pod(out, chk.params.g);
  detail::write_pod(out, chk.params.T);
  detail::write_pod(out, chk.sampler.step_size);
  detail::write_pod(out, static_cast<std::uint64_t>(chk.sampler.n_burnin));
  detail::write_pod(out, static_cast<std::uint64_t>(chk.sampler.n_samples));
  detail::write_pod(out, static_cast<std::uint64_t>(chk.sampler.thinning));
  detail::write_pod(out, chk.sampler.seed);
  detail::write_pod(out, chk.sampler.target_acceptance);
  detail::write_pod(out, static_cast<std::uint64_t>(chk.sweeps_done));
  detail::write_pod(out, chk.current_step);
  for (auto word : chk.rng_state) detail::write_pod(out, word);
  detail::write_pod(out, static_cast<std::uint64_t>(chk.config.positions.size()));
  for (const auto& pt : chk.config.positions) {
    detail::write_pod(out, pt[0]);
    detail::write_pod(out, pt[1]);
  }
  detail::write_pod(out, chk.config.cached_energy);
  detail::write_pod(out, static_cast<std::int64_t>(chk.config.moves_since_audit));
  if (!out) throw config_error("save_checkpoint: write failed for " + path);
}

inline ChainCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, detail::checkpoint_magic, sizeof(magic)) != 0)
    throw config_error("load_checkpoint: not a chain checkpoint: " + path);
  std::uint32_t version = 0;
  detail::read_pod(in, version);
  if (version != 1)
    throw config_error("load_checkpoint: unsupported checkpoint version");
  ChainCheckpoint chk;
  std::int64_t N = 0, m = 0;
  detail::read_pod(in, N);
  detail::read_pod(in, m);
  chk.params.N = static_cast<int>(N);
  chk.params.m = m;
  detail::read_pod(in, chk.params.omega);
  detail::read_pod(in, chk.params.k);
  detail::read_pod(in, chk.params.g);
  detail::read_pod(in, chk.params.T);
  detail::read_pod(in, chk.sampler.step_size);
  std::uint64_t burnin = 0, samples = 0, thinning = 0;
  detail::read_pod(in, burnin);
  detail::read_pod(in, samples);
  detail::read_pod(in, thinning);
  chk.sampler.n_burnin = burnin;
  chk.sampler.n_samples = samples;
  chk.sampler.thinning = thinning;
  detail::read_pod(in, chk.sampler.seed);
  detail::read_pod(in, chk.sampler.target_acceptance);
  std::uint64_t sweeps = 0;
  detail::read_pod(in, sweeps);
  chk.sweeps_done = sweeps;
  detail::read_pod(in, chk.current_step);
  for (auto& word : chk.rng_state) detail::read_pod(in, word);
  std::uint64_t n = 0;
  detail::read_pod(in, n);
  chk.config.positions.resize(n);
  for (auto& pt : chk.config.positions) {
    detail::read_pod(in, pt[0]);
    detail::read_pod(in, pt[1]);
  }
  detail::read_pod(in, chk.config.cached_energy);
  std::int64_t audits = 0;
  detail::read_pod(in, audits);
  chk.config.moves_since_audit = audits;
  if (!in) throw config_error("load_checkpoint: truncated checkpoint: " + path);
  return chk;
}

}  // namespace qhp
