#pragma once

// Logarithmic potential theory on radial measures.
//
// Everything rests on the radial identity
//   h_mu(r) = -log(r) * M(r) - integral over {s > r} of log(s) dmu(s),
// where M(r) is the mass inside radius r.  For a measure that is constant
// on each finite-volume cell both pieces integrate in closed form, so the
// potential is exactly
//   h(r) = -alpha_i log r + beta_i - (rho_i pi / 2) r^2     (r in cell i)
// and the pair energy D(mu, nu) = integral of h_nu dmu is an exact cell sum.
// No singular 2D quadrature appears anywhere: within each cell the log
// kernel is integrated analytically.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "qhplasma/errors.hpp"
#include "qhplasma/numerics.hpp"
#include "qhplasma/radial_grid.hpp"

namespace qhp {

// Integral of log(r) over the annulus a <= |x| <= b (2D area element).
inline double annulus_log_integral(double a, double b) {
  auto prim = [](double r) {
    return r == 0.0 ? 0.0 : r * r * (std::log(r) - 0.5);
  };
  return pi * (prim(b) - prim(a));
}

// Integral of r^2 over the annulus a <= |x| <= b.
inline double annulus_r2_integral(double a, double b) {
  return 0.5 * pi * (b * b * b * b - a * a * a * a);
}

// Per-cell closed-form coefficients of the potential h_mu.
class PotentialTable {
 public:
  explicit PotentialTable(const SignedRadialMeasure& mu)
      : grid_(mu.grid()),
        rho_(mu.values()),
        alpha_(mu.values().size()),
        beta_(mu.values().size()) {
    const std::size_t n = rho_.size();
    // Mass strictly inside the lower edge of each cell.
    KahanSum inside;
    for (std::size_t i = 0; i < n; ++i) {
      const double l = grid_.lower(i);
      alpha_[i] = inside.value() - rho_[i] * pi * l * l;
      inside.add(rho_[i] * grid_.cell_area(i));
    }
    total_mass_ = inside.value();
    // Weighted log integral strictly outside the upper edge of each cell.
    KahanSum outside;
    for (std::size_t i = n; i-- > 0;) {
      const double u = grid_.upper(i);
      beta_[i] = -outside.value() -
                 rho_[i] * pi * (u * u * std::log(u) - 0.5 * u * u);
      outside.add(rho_[i] * annulus_log_integral(grid_.lower(i), u));
    }
  }

  const RadialGrid& grid() const { return grid_; }
  double total_mass() const { return total_mass_; }

  // h_mu(r); beyond the grid the measure acts as a point charge at the origin.
  double operator()(double r) const {
    if (r < 0.0) throw domain_error("newton_potential: negative radius");
    if (r > grid_.r_max()) return -total_mass_ * std::log(r);
    const std::size_t i = grid_.cell_of(r);
    const double log_term = alpha_[i] == 0.0 ? 0.0 : -alpha_[i] * std::log(r);
    return log_term + beta_[i] - 0.5 * rho_[i] * pi * r * r;
  }

  // Exact integral of h_mu over cell i (2D area element).
  double cell_integral(std::size_t i) const {
    const double l = grid_.lower(i), u = grid_.upper(i);
    return -alpha_[i] * annulus_log_integral(l, u) +
           beta_[i] * grid_.cell_area(i) -
           0.5 * rho_[i] * pi * annulus_r2_integral(l, u);
  }

  // h_mu at every grid node.
  std::vector<double> at_nodes() const {
    std::vector<double> h(rho_.size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = (*this)(grid_.node(i));
    return h;
  }

 private:
  RadialGrid grid_;
  std::vector<double> rho_;
  std::vector<double> alpha_;
  std::vector<double> beta_;
  double total_mass_ = 0.0;
};

inline double newton_potential(const SignedRadialMeasure& mu, double r) {
  return PotentialTable(mu)(r);
}
inline double newton_potential(const RadialDensity& mu, double r) {
  return newton_potential(mu.as_signed(), r);
}

// D(mu, nu) = -double integral of log|x - y| dmu(x) dnu(y).
inline double coulomb_energy(const SignedRadialMeasure& mu, const SignedRadialMeasure& nu) {
  if (!(mu.grid() == nu.grid()))
    throw dimension_error("coulomb_energy: incompatible grids");
  PotentialTable h_nu(nu);
  KahanSum sum;
  for (std::size_t i = 0; i < mu.values().size(); ++i)
    if (mu.value(i) != 0.0) sum.add(mu.value(i) * h_nu.cell_integral(i));
  return sum.value();
}
inline double coulomb_energy(const RadialDensity& mu, const RadialDensity& nu) {
  return coulomb_energy(mu.as_signed(), nu.as_signed());
}
inline double coulomb_energy(const SignedRadialMeasure& mu) {
  return coulomb_energy(mu, mu);
}

// Kullback-Leibler divergence between unit-mass densities on one grid.
inline double relative_entropy(const RadialDensity& mu, const RadialDensity& nu) {
  if (!(mu.grid() == nu.grid()))
    throw dimension_error("relative_entropy: incompatible grids");
  if (std::abs(mu.declared_mass() - 1.0) > RadialDensity::mass_tolerance ||
      std::abs(nu.declared_mass() - 1.0) > RadialDensity::mass_tolerance)
    throw domain_error("relative_entropy: both densities must carry unit mass");
  KahanSum sum;
  for (std::size_t i = 0; i < mu.values().size(); ++i) {
    const double m = mu.value(i), n = nu.value(i);
    if (m == 0.0) continue;  // 0 log 0 := 0
    if (n == 0.0)
      throw singular_support_error(
          "relative_entropy: first density carries mass where second vanishes");
    sum.add(m * std::log(m / n) * mu.grid().cell_area(i));
  }
  return sum.value();
}

// Total variation |mu|(R^2) = integral of |mu+| + |mu-|.
inline double total_variation(const SignedRadialMeasure& mu) {
  KahanSum sum;
  for (std::size_t i = 0; i < mu.values().size(); ++i)
    sum.add(std::abs(mu.value(i)) * mu.grid().cell_area(i));
  return sum.value();
}

// D(rho, delta_x - mu_x) where mu_x spreads a unit charge uniformly over the
// disc of radius l around a point x at distance d from the origin.  By the
// mean-value property of the potential this vanishes identically once the
// smearing disc clears the support of rho, which is returned exactly.
inline double smeared_charge_correction(const RadialDensity& rho, double center_distance,
                                        double l) {
  if (!(l > 0.0)) throw domain_error("smeared_charge_correction: radius must be positive");
  if (center_distance < 0.0)
    throw domain_error("smeared_charge_correction: negative center distance");
  double support_radius = 0.0;
  for (std::size_t i = rho.grid().n_bins(); i-- > 0;)
    if (rho.value(i) > 0.0) {
      support_radius = rho.grid().upper(i);
      break;
    }
  if (center_distance - l >= support_radius) return 0.0;

  PotentialTable h(rho.as_signed());
  static const QuadratureRule radial_rule = gauss_legendre(16);
  constexpr int n_angle = 32;
  const double d = center_distance;
  double disc_integral = 0.0;
  for (std::size_t a = 0; a < radial_rule.nodes.size(); ++a) {
    const double s = 0.5 * l * (radial_rule.nodes[a] + 1.0);
    const double ws = 0.5 * l * radial_rule.weights[a];
    double angular = 0.0;
    for (int k = 0; k < n_angle; ++k) {
      const double phi = 2.0 * pi * (k + 0.5) / n_angle;
      const double r = std::sqrt(std::max(0.0, d * d + s * s + 2.0 * d * s * std::cos(phi)));
      angular += h(r);
    }
    disc_integral += ws * s * angular * (2.0 * pi / n_angle);
  }
  const double disc_average = disc_integral / (pi * l * l);
  return h(d) - disc_average;
}

}  // namespace qhp
