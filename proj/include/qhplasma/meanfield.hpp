#pragma once

// Mean-field free-energy functional on radial densities,
//   E[rho] = integral W_m rho + 2 D(rho, rho) + T integral rho log rho,
// its electrostatic (entropy dropped) and thermal (Coulomb dropped)
// variants, a numerical minimizer via the Euler-Lagrange fixed point
//   rho <- Z^{-1} exp(-(W_m + 4 h_rho)/T),
// and the Gaussian decay envelope of the minimizer outside the bulk.
//
// The fixed-point map is iterated in log space with a damping factor of 0.5
// and an energy-backtracking line search; when plain damping stalls (after
// 200 iterations with less than one residual decade per 50 iterations) an
// Anderson-style extrapolation over a short history is attempted, each step
// gated on the energy never increasing.  The map is a contraction only near
// the solution at small T, which is why the safeguards exist.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <sstream>
#include <vector>

#include "qhplasma/errors.hpp"
#include "qhplasma/model.hpp"
#include "qhplasma/numerics.hpp"
#include "qhplasma/potential.hpp"
#include "qhplasma/radial_grid.hpp"

namespace qhp {

struct MeanFieldSolution {
  RadialDensity density;
  double energy = 0.0;             // value of the full functional
  double lagrange_constant = 0.0;  // energy + 2 D(rho, rho)
  std::size_t iterations = 0;
  double residual = 0.0;           // sup-norm Euler-Lagrange residual
};

struct FunctionalEnergies {
  double confinement = 0.0;  // integral W_m rho
  double coulomb = 0.0;      // D(rho, rho)
  double entropy = 0.0;      // integral rho log rho
  double temperature = 0.0;
  double total() const { return confinement + 2.0 * coulomb + temperature * entropy; }
  double electrostatic() const { return confinement + 2.0 * coulomb; }
  double thermal() const { return confinement + temperature * entropy; }
};

namespace detail {

inline std::vector<double> potential_W_nodes(const ModelParams& p, const RadialGrid& g) {
  std::vector<double> w(g.n_bins());
  for (std::size_t i = 0; i < g.n_bins(); ++i) w[i] = potential_W(p, g.node(i));
  return w;
}

inline FunctionalEnergies energies_from_values(const ModelParams& p, const RadialGrid& g,
                                               const std::vector<double>& w_nodes,
                                               const std::vector<double>& rho) {
  FunctionalEnergies e;
  e.temperature = p.temperature();
  KahanSum conf, ent;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (rho[i] <= 0.0) continue;  // 0 log 0 := 0, and W may be +inf there
    const double a = g.cell_area(i);
    conf.add(a * rho[i] * w_nodes[i]);
    ent.add(a * rho[i] * std::log(rho[i]));
  }
  e.confinement = conf.value();
  e.entropy = ent.value();
  e.coulomb = coulomb_energy(SignedRadialMeasure(g, rho), SignedRadialMeasure(g, rho));
  return e;
}

// Solve the small symmetric system (G + reg*tr(G)*I) x = b in place.
inline std::vector<double> solve_regularized(std::vector<std::vector<double>> G,
                                             std::vector<double> b, double reg) {
  const std::size_t k = b.size();
  double trace = 0.0;
  for (std::size_t i = 0; i < k; ++i) trace += G[i][i];
  for (std::size_t i = 0; i < k; ++i) G[i][i] += reg * trace;
  for (std::size_t col = 0; col < k; ++col) {  // Gaussian elimination, partial pivot
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::abs(G[r][col]) > std::abs(G[piv][col])) piv = r;
    std::swap(G[piv], G[col]);
    std::swap(b[piv], b[col]);
    if (G[col][col] == 0.0) continue;
    for (std::size_t r = col + 1; r < k; ++r) {
      const double factor = G[r][col] / G[col][col];
      for (std::size_t c = col; c < k; ++c) G[r][c] -= factor * G[col][c];
      b[r] -= factor * b[col];
    }
  }
  std::vector<double> x(k, 0.0);
  for (std::size_t i = k; i-- > 0;) {
    if (G[i][i] == 0.0) continue;
    double s = b[i];
    for (std::size_t c = i + 1; c < k; ++c) s -= G[i][c] * x[c];
    x[i] = s / G[i][i];
  }
  return x;
}

}  // namespace detail

// Evaluate the three functionals on a unit-mass density.
inline FunctionalEnergies functional_energies(const ModelParams& p, const RadialDensity& rho) {
  p.validate();
  return detail::energies_from_values(p, rho.grid(),
                                      detail::potential_W_nodes(p, rho.grid()), rho.values());
}

inline MeanFieldSolution mf_minimize(const ModelParams& p, double tol,
                                     const RadialGrid& grid, std::size_t max_iter = 100000) {
  p.validate();
  if (!(tol > 0.0)) throw domain_error("mf_minimize: tolerance must be positive");
  const double T = p.temperature();
  const std::size_t n = grid.n_bins();
  const std::vector<double> w = detail::potential_W_nodes(p, grid);
  std::vector<double> log_area(n);
  for (std::size_t i = 0; i < n; ++i) log_area[i] = std::log(grid.cell_area(i));

  // Normalize u (log density) so that sum exp(u + log_area) = 1.
  auto normalize = [&](std::vector<double>& u) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, u[i] + log_area[i]);
    KahanSum s;
    for (std::size_t i = 0; i < n; ++i) s.add(std::exp(u[i] + log_area[i] - mx));
    const double shift = mx + std::log(s.value());
    for (auto& v : u) v -= shift;
  };

  // Strictly positive start from the regime-appropriate explicit profile.
  const RadialDensity start =
      p.thermal_regime() ? thermal_profile(p, grid) : electrostatic_profile(p, grid);
  std::vector<double> u(n);
  double u_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = std::log(std::max(start.value(i), 1e-300));
    u_max = std::max(u_max, u[i]);
  }
  for (auto& v : u) v = std::max(v, u_max - 2000.0);
  normalize(u);

  auto energy_of_u = [&](const std::vector<double>& uu) {
    std::vector<double> rho(n);
    for (std::size_t i = 0; i < n; ++i) rho[i] = std::exp(uu[i]);
    return detail::energies_from_values(p, grid, w, rho).total();
  };

  double lam = 0.5;
  double E = energy_of_u(u);
  std::deque<std::vector<double>> hist_u, hist_f;
  constexpr std::size_t hist_len = 6;
  std::vector<double> resid_hist;
  bool anderson_on = false;

  std::vector<double> rho(n), gmap(n), f(n), u_try(n);
  for (std::size_t it = 1; it <= max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) rho[i] = std::exp(u[i]);
    PotentialTable h(SignedRadialMeasure(grid, rho));
    for (std::size_t i = 0; i < n; ++i) gmap[i] = -(w[i] + 4.0 * h(grid.node(i))) / T;
    normalize(gmap);
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = gmap[i] - u[i];
      if (rho[i] > 1e-12) resid = std::max(resid, std::abs(rho[i] - std::exp(gmap[i])));
    }
    resid_hist.push_back(resid);
    if (resid <= tol) {
      RadialDensity density = RadialDensity::renormalized(grid, rho).first;
      FunctionalEnergies fe = functional_energies(p, density);
      return {std::move(density), fe.total(), fe.total() + 2.0 * fe.coulomb, it, resid};
    }
    if (!anderson_on && it > 200 && resid_hist.size() > 51) {
      const double ratio = resid / resid_hist[resid_hist.size() - 51];
      if (ratio > 0.77) anderson_on = true;
    }
    hist_u.push_back(u);
    hist_f.push_back(f);
    if (hist_u.size() > hist_len) {
      hist_u.pop_front();
      hist_f.pop_front();
    }

    bool stepped = false;
    if (anderson_on && hist_u.size() >= 3) {
      const std::size_t k = hist_u.size() - 1;  // history differences
      std::vector<std::vector<double>> G(k, std::vector<double>(k, 0.0));
      std::vector<double> b(k, 0.0);
      auto dF = [&](std::size_t j, std::size_t i) {
        return hist_f[j + 1][i] - hist_f[j][i];
      };
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t c = a; c < k; ++c) {
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i) s += dF(a, i) * dF(c, i);
          G[a][c] = G[c][a] = s;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += dF(a, i) * f[i];
        b[a] = s;
      }
      const std::vector<double> gamma = detail::solve_regularized(G, b, 1e-10);
      for (std::size_t i = 0; i < n; ++i) {
        double corr = 0.0;
        for (std::size_t a = 0; a < k; ++a)
          corr += gamma[a] * ((hist_u[a + 1][i] - hist_u[a][i]) + dF(a, i));
        u_try[i] = u[i] + f[i] - corr;
      }
      normalize(u_try);
      const double E_try = energy_of_u(u_try);
      if (std::isfinite(E_try) && E_try <= E + 1e-12 * (std::abs(E) + 1.0)) {
        u.swap(u_try);
        E = E_try;
        stepped = true;
      }
    }
    if (!stepped) {
      double lam_try = lam;
      for (int halving = 0; halving < 60; ++halving) {
        for (std::size_t i = 0; i < n; ++i) u_try[i] = u[i] + lam_try * f[i];
        normalize(u_try);
        const double E_try = energy_of_u(u_try);
        if (E_try <= E + 1e-13 * (std::abs(E) + 1.0)) {
          u.swap(u_try);
          E = E_try;
          lam = std::min(lam_try * 1.3, 0.5);
          stepped = true;
          break;
        }
        lam_try *= 0.5;
      }
      if (!stepped) break;  // line search exhausted at this residual
    }
  }

  std::ostringstream msg;
  msg << "mf_minimize: no convergence to " << tol << "; residual history tail:";
  for (std::size_t i = resid_hist.size() >= 5 ? resid_hist.size() - 5 : 0;
       i < resid_hist.size(); ++i)
    msg << ' ' << format_double(resid_hist[i]);
  throw convergence_error(msg.str());
}

inline MeanFieldSolution mf_minimize(const ModelParams& p, double tol = 1e-9) {
  return mf_minimize(p, tol, suggested_grid(p));
}

// Gaussian upper envelope of the minimizer outside the bulk band
// [sqrt(m/N), sqrt(2+m/N)] widened by 8/sqrt(N); inside that widened band
// the envelope is not applicable and nullopt is returned.  The amplitude
// covers both the universal density cap 1/(2 pi) and the thermal ridge peak;
// the decay rate N d(r)^2 undercuts the true rate (at least 2 N d^2) by
// half, which is what absorbs the finite-temperature edge layers.
inline std::optional<double> decay_envelope(const ModelParams& p, double r) {
  p.validate();
  if (r < 0.0) throw domain_error("decay_envelope: negative radius");
  const double inner = p.r_opt();
  const double outer = p.bulk_outer_radius();
  const double margin = 8.0 / std::sqrt(static_cast<double>(p.N));
  const double d = std::max({0.0, inner - r, r - outer});
  if (d <= margin) return std::nullopt;
  double amplitude = 1.0 / (2.0 * pi);
  if (p.thermal_regime()) {
    const double mm = static_cast<double>(p.m);
    const double log_peak = std::log(static_cast<double>(p.N) / pi) + mm * std::log(mm) -
                            mm - log_factorial(p.m);
    amplitude = std::max(amplitude, std::exp(log_peak));
  }
  return 1.05 * amplitude * std::exp(-static_cast<double>(p.N) * d * d);
}

}  // namespace qhp
