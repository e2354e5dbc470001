#pragma once

// Independent potential-theory oracles for the test suite.
//
// Two kinds of ground truth, neither sharing code with the library kernel:
//   1. Classical closed forms: the uniform disc and the Gaussian, whose
//      logarithmic potentials and pair energies are textbook special-function
//      identities (exponential integral E1, Euler-Mascheroni constant).
//   2. A direct 2D quadrature of -integral log|x-y| f(|y|) dA(y) for smooth
//      radial profiles f, done in polar coordinates centered at x: the log
//      singularity then sits at the coordinate origin and is tamed by
//      geometrically refined radial panels, while the angular factor is
//      smooth and handled by a uniform (spectrally accurate) rule.

#include <cmath>
#include <vector>

#include "qhplasma/numerics.hpp"

namespace oracle {

// Potential of the uniform disc of radius R carrying `mass`.
inline double disc_potential(double R, double mass, double r) {
  if (r >= R) return -mass * std::log(r);
  return mass * (0.5 * (1.0 - r * r / (R * R)) - std::log(R));
}

// Self energy of the uniform disc of radius R, unit mass: 1/4 - log R.
inline double disc_self_energy(double R) { return 0.25 - std::log(R); }

// Planar density (1/(pi a^2)) exp(-r^2/a^2); potential -log r - E1(r^2/a^2)/2.
inline double gauss_density(double a, double r) {
  return std::exp(-r * r / (a * a)) / (qhp::pi * a * a);
}

inline double gauss_potential(double a, double r) {
  const double x = r * r / (a * a);
  if (x < 1e-12) {
    // -log r - E1(x)/2 -> (gamma - log(a^2))/2 + O(x) as r -> 0.
    return 0.5 * (qhp::euler_gamma - 2.0 * std::log(a)) - 0.5 * x;
  }
  return -std::log(r) + 0.5 * std::expint(-x);  // E1(x) = -Ei(-x)
}

// D(gauss_a, gauss_b) = gamma/2 - log(a^2 + b^2)/2.
inline double gauss_pair_energy(double a, double b) {
  return 0.5 * (qhp::euler_gamma - std::log(a * a + b * b));
}

// Direct 2D quadrature of h_f(x) = -integral log|x-y| f(|y|) dA(y) for a
// smooth radial density f negligible beyond r_tail.
template <class F>
double potential_2d(F&& f, double r, double r_tail) {
  static const qhp::QuadratureRule panel = qhp::gauss_legendre(16);
  constexpr int n_angle = 512;  // resolves rings nearly tangent to narrow ridges
  // Panels are capped at feature scale; near the origin they shrink
  // geometrically so the log factor stays smooth within each panel.
  constexpr double panel_max = 0.2;
  const double t_max = r + r_tail;
  qhp::KahanSum total;
  double hi = t_max;
  while (hi > t_max * 1e-15) {
    const double lo = hi > 2.0 * panel_max ? hi - panel_max : 0.5 * hi;
    for (std::size_t q = 0; q < panel.nodes.size(); ++q) {
      const double t = 0.5 * (hi + lo) + 0.5 * (hi - lo) * panel.nodes[q];
      const double wt = 0.5 * (hi - lo) * panel.weights[q];
      double ring = 0.0;
      for (int k = 0; k < n_angle; ++k) {
        const double psi = 2.0 * qhp::pi * (k + 0.5) / n_angle;
        const double s = std::sqrt(r * r + t * t + 2.0 * r * t * std::cos(psi));
        ring += f(s);
      }
      total.add(-wt * t * std::log(t) * ring * (2.0 * qhp::pi / n_angle));
    }
    hi = lo;
  }
  return total.value();
}

// Pair energy by composing the 2D potential oracle with a 1D radial rule:
// D(f, g) = integral h_f(|y|) g(|y|) dA(y).
template <class F, class G>
double pair_energy_2d(F&& f, G&& g, double r_tail) {
  static const qhp::QuadratureRule outer = qhp::gauss_legendre(32);
  qhp::KahanSum total;
  constexpr int n_panels = 8;
  for (int p = 0; p < n_panels; ++p) {
    const double a = r_tail * p / n_panels;
    const double b = r_tail * (p + 1) / n_panels;
    for (std::size_t q = 0; q < outer.nodes.size(); ++q) {
      const double r = 0.5 * (a + b) + 0.5 * (b - a) * outer.nodes[q];
      const double w = 0.5 * (b - a) * outer.weights[q];
      total.add(w * 2.0 * qhp::pi * r * g(r) * potential_2d(f, r, r_tail));
    }
  }
  return total.value();
}

}  // namespace oracle
