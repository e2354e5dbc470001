#pragma once

// Quadrature oracle for the contact-interaction matrix elements between
// lowest-Landau-level orbitals f_l(z) = z^l / sqrt(pi l!), Gaussian weight.
//
// The contact interaction collapses the two-particle integral onto the
// diagonal x1 = x2 = z, leaving the Gaussian-weighted planar integral
//   <pq|V|rs> = (pi^2 sqrt(p! q! r! s!))^{-1}
//               * integral of conj(z)^{p+q} z^{r+s} e^{-2|z|^2} dA(z),
// which is evaluated here directly in polar coordinates: Gauss-Legendre in
// the radius, a uniform angular rule (exact for the trigonometric degree at
// hand), log-space magnitudes so no factorial ever overflows.

#include <cmath>

#include "qhplasma/numerics.hpp"

namespace oracle {

inline double pair_element_quadrature(int p, int q, int r, int s) {
  static const qhp::QuadratureRule radial = qhp::gauss_legendre(48);
  constexpr int n_angle = 32;
  constexpr double r_cut = 7.0;
  const double log_norm = -2.0 * std::log(qhp::pi) -
                          0.5 * (qhp::log_factorial(p) + qhp::log_factorial(q) +
                                 qhp::log_factorial(r) + qhp::log_factorial(s));
  const int power = p + q + r + s;
  const int winding = (r + s) - (p + q);
  double value = 0.0;
  for (std::size_t i = 0; i < radial.nodes.size(); ++i) {
    const double t = 0.5 * r_cut * (radial.nodes[i] + 1.0);
    const double wt = 0.5 * r_cut * radial.weights[i];
    double angular = 0.0;
    for (int k = 0; k < n_angle; ++k)
      angular += std::cos(winding * 2.0 * qhp::pi * k / n_angle);
    angular *= 2.0 * qhp::pi / n_angle;
    value += wt * angular * std::exp(log_norm + (power + 1) * std::log(t) - 2.0 * t * t);
  }
  return value;
}

}  // namespace oracle
