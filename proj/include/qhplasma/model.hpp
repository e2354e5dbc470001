#pragma once

// Model parameters of the trapped lowest-Landau-level gas in scaled plasma
// units, the radial confining potential W_m, the two explicit limit profiles
// (flat electrostatic annulus, thermal Gaussian ridge), and the closed-form
// optimal vortex degree.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "qhplasma/errors.hpp"
#include "qhplasma/numerics.hpp"
#include "qhplasma/radial_grid.hpp"

namespace qhp {

struct ModelParams {
  int N = 1;             // particle count
  long long m = 0;       // vortex degree (nonnegative integer)
  double omega = 0.0;    // quadratic trap coefficient (signed)
  double k = 0.0;        // quartic trap coefficient (nonnegative)
  double g = 1.0;        // contact interaction strength (nonnegative)
  double T = 0.0;        // temperature; 0 requests the default 1/N

  double temperature() const { return T > 0.0 ? T : 1.0 / N; }
  bool default_temperature() const {
    return std::abs(temperature() * N - 1.0) < 1e-12;
  }

  void validate() const {
    if (N < 1) throw domain_error("ModelParams: N must be at least 1");
    if (m < 0) throw domain_error("ModelParams: m must be nonnegative");
    if (k < 0.0) throw domain_error("ModelParams: k must be nonnegative");
    if (g < 0.0) throw domain_error("ModelParams: g must be nonnegative");
    if (T < 0.0) throw domain_error("ModelParams: T must be positive (or 0 for 1/N)");
  }

  // Radius of the minimum of W_m (0 for m = 0).
  double r_opt() const { return std::sqrt(static_cast<double>(m) / N); }

  // Outer radius of the flat equilibrium profile.
  double bulk_outer_radius() const {
    return std::sqrt(2.0 + static_cast<double>(m) / N);
  }

  // The profile family switches character at m ~ N^2.
  bool thermal_regime() const {
    return static_cast<double>(m) > static_cast<double>(N) * N;
  }
};

// Confining potential W_m(r) = r^2 - 2 (m/N) log r.  At the origin with
// m > 0 the potential diverges; +infinity is the documented sentinel.
inline double potential_W(const ModelParams& p, double r) {
  if (r < 0.0) throw domain_error("potential_W: negative radius");
  if (p.m == 0) return r * r;
  if (r == 0.0) return std::numeric_limits<double>::infinity();
  return r * r - 2.0 * (static_cast<double>(p.m) / p.N) * std::log(r);
}

// Grid sized for the profiles of `p`: wide enough for the flat bulk, the
// Gaussian tails at small N, and fine enough to resolve the thermal ridge
// width 1/(2 sqrt N).  The plain RadialGrid default (r_max = max(3,
// 2 sqrt(2+m/N)), 2048 bins) is the floor of this rule.
inline RadialGrid suggested_grid(const ModelParams& p) {
  const double edge = p.bulk_outer_radius();
  const double r_max =
      std::max({3.0, 2.0 * edge, edge + 8.0 / std::sqrt(static_cast<double>(p.N))});
  const double sigma = 0.5 / std::sqrt(static_cast<double>(p.N));
  const std::size_t n = next_pow2_clamped(16.0 * r_max / sigma, 2048, 131072);
  return {r_max, n};
}

// Flat profile 1/(2 pi) on the annulus sqrt(m/N) <= r <= sqrt(2 + m/N);
// cell values are exact area-overlap averages, so the mass is exactly one
// and fully covered cells carry exactly 1/(2 pi).
inline RadialDensity electrostatic_profile(const ModelParams& p, const RadialGrid& grid) {
  p.validate();
  const double r_in = p.r_opt();
  const double r_out = p.bulk_outer_radius();
  if (r_out > grid.r_max())
    throw domain_error("electrostatic_profile: grid does not cover the bulk");
  constexpr double flat = 1.0 / (2.0 * pi);
  std::vector<double> values(grid.n_bins(), 0.0);
  for (std::size_t i = 0; i < grid.n_bins(); ++i) {
    const double lo = std::max(grid.lower(i), r_in);
    const double hi = std::min(grid.upper(i), r_out);
    if (hi <= lo) continue;
    // Interior cells must carry the flat value bit-for-bit; only the two
    // boundary cells are area-weighted.
    if (lo == grid.lower(i) && hi == grid.upper(i))
      values[i] = flat;
    else
      values[i] = (hi - lo) * (hi + lo) * pi * flat / grid.cell_area(i);
  }
  return {grid, std::move(values)};
}
inline RadialDensity electrostatic_profile(const ModelParams& p) {
  return electrostatic_profile(p, suggested_grid(p));
}

// Gibbs profile of W_m alone.  At the native temperature T = 1/N the cell
// masses are Gamma(m+1) distribution increments in t = N r^2, integrated by
// a per-cell Gauss-Legendre rule in log space; for any other temperature the
// unnormalized Boltzmann weight is integrated the same way.  The mass is
// brought to exactly one by an explicit renormalization whose factor must
// stay within `renorm_tolerance` of unity, otherwise the grid is unfit.
inline RadialDensity thermal_profile(const ModelParams& p, const RadialGrid& grid) {
  p.validate();
  constexpr double renorm_tolerance = 1e-6;
  static const QuadratureRule rule = gauss_legendre(8);
  std::vector<double> values(grid.n_bins(), 0.0);

  if (p.default_temperature()) {
    const double a = static_cast<double>(p.m) + 1.0;
    const double log_norm = std::lgamma(a);
    for (std::size_t i = 0; i < grid.n_bins(); ++i) {
      const double t_lo = p.N * grid.lower(i) * grid.lower(i);
      const double t_hi = p.N * grid.upper(i) * grid.upper(i);
      const double cell_mass = integrate_gl(
          [&](double t) {
            return t <= 0.0 ? 0.0 : std::exp((a - 1.0) * std::log(t) - t - log_norm);
          },
          t_lo, t_hi, rule);
      values[i] = cell_mass / grid.cell_area(i);
    }
  } else {
    const double T = p.temperature();
    // Peak of the weight exp(-W/T) at r_opt keeps the exponent in range.
    const double w_min = p.m == 0 ? 0.0 : potential_W(p, p.r_opt());
    for (std::size_t i = 0; i < grid.n_bins(); ++i) {
      const double unnorm = integrate_gl(
          [&](double r) {
            return r <= 0.0 ? 0.0
                            : 2.0 * pi * r * std::exp(-(potential_W(p, r) - w_min) / T);
          },
          grid.lower(i), grid.upper(i), rule);
      values[i] = unnorm / grid.cell_area(i);
    }
  }

  auto [density, factor] = RadialDensity::renormalized(grid, std::move(values));
  if (p.default_temperature() && std::abs(factor - 1.0) > renorm_tolerance)
    throw domain_error("thermal_profile: grid truncates the profile (renorm factor " +
                       format_double(factor) + ")");
  return density;
}
inline RadialDensity thermal_profile(const ModelParams& p) {
  return thermal_profile(p, suggested_grid(p));
}

// Vortex degree minimizing the leading-order trial energy: 0 as long as
// omega >= -2kN, then -omega/(2k) - N rounded to the nearest nonnegative
// integer with half-way ties taken downward (the degree is a winding number).
inline long long optimal_vortex(const ModelParams& p) {
  p.validate();
  if (p.omega >= -2.0 * p.k * p.N) return 0;
  if (p.k <= 0.0)
    throw domain_error("optimal_vortex: trap unbounded below (k = 0, omega < 0)");
  const double target = -p.omega / (2.0 * p.k) - p.N;
  if (target <= 0.0) return 0;
  const double floor_v = std::floor(target);
  const double frac = target - floor_v;
  double rounded = frac > 0.5 ? floor_v + 1.0 : floor_v;  // ties go down
  return static_cast<long long>(std::max(0.0, rounded));
}

}  // namespace qhp
