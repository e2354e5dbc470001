#pragma once

// Uniform radial grids and the measures living on them.
//
// A grid with n_bins nodes covers [0, r_max] by finite-volume cells
//   cell 0     = [0, dr/2]                 (half bin around the origin)
//   cell i     = [(i-1/2) dr, (i+1/2) dr]  for 0 < i < n_bins-1
//   cell n-1   = [r_max - dr/2, r_max]     (half bin at the boundary)
// with dr = r_max / (n_bins - 1).  The representative node of cell 0 is the
// cell midpoint dr/4 -- never the origin -- so that logarithmic integrands
// are always evaluated at a strictly positive radius.  Nodes of the other
// cells sit at i*dr.  A density value is a planar density (mass per unit
// area); the mass of a measure is the exact sum of value * cell area.

#include <cmath>
#include <cstddef>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qhplasma/errors.hpp"
#include "qhplasma/numerics.hpp"

namespace qhp {

class RadialGrid {
 public:
  RadialGrid(double r_max, std::size_t n_bins) : r_max_(r_max), n_bins_(n_bins) {
    if (!(r_max > 0.0)) throw domain_error("RadialGrid: r_max must be positive");
    if (n_bins < 2) throw domain_error("RadialGrid: need at least two bins");
  }

  double r_max() const { return r_max_; }
  std::size_t n_bins() const { return n_bins_; }
  double spacing() const { return r_max_ / static_cast<double>(n_bins_ - 1); }

  // Representative (strictly increasing, strictly positive) node radii.
  double node(std::size_t i) const {
    return i == 0 ? 0.25 * spacing() : static_cast<double>(i) * spacing();
  }
  double lower(std::size_t i) const {
    return i == 0 ? 0.0 : (static_cast<double>(i) - 0.5) * spacing();
  }
  double upper(std::size_t i) const {
    return i + 1 == n_bins_ ? r_max_ : (static_cast<double>(i) + 0.5) * spacing();
  }
  double cell_area(std::size_t i) const {
    const double u = upper(i), l = lower(i);
    return pi * (u - l) * (u + l);
  }

  // Index of the cell containing radius r in [0, r_max].
  std::size_t cell_of(double r) const {
    if (r < 0.0) throw domain_error("RadialGrid: negative radius");
    const double x = r / spacing() + 0.5;
    auto i = static_cast<std::size_t>(x);
    return i >= n_bins_ ? n_bins_ - 1 : i;
  }

  friend bool operator==(const RadialGrid& a, const RadialGrid& b) {
    return a.r_max_ == b.r_max_ && a.n_bins_ == b.n_bins_;
  }

 private:
  double r_max_;
  std::size_t n_bins_;
};

// Signed measure: per-node planar densities of arbitrary sign.
class SignedRadialMeasure {
 public:
  SignedRadialMeasure(RadialGrid grid, std::vector<double> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_.n_bins())
      throw dimension_error("SignedRadialMeasure: value count != grid bins");
  }

  const RadialGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double value(std::size_t i) const { return values_[i]; }

  double mass() const {
    KahanSum s;
    for (std::size_t i = 0; i < values_.size(); ++i)
      s.add(values_[i] * grid_.cell_area(i));
    return s.value();
  }

 private:
  RadialGrid grid_;
  std::vector<double> values_;
};

// Nonnegative density with a declared total mass (1 for probabilities).
// Construction validates the invariants; renormalization is a separate,
// explicit act that reports the factor it applied.
class RadialDensity {
 public:
  static constexpr double mass_tolerance = 1e-9;

  RadialDensity(RadialGrid grid, std::vector<double> values, double declared_mass = 1.0)
      : grid_(std::move(grid)), values_(std::move(values)), declared_mass_(declared_mass) {
    if (values_.size() != grid_.n_bins())
      throw dimension_error("RadialDensity: value count != grid bins");
    for (double v : values_)
      if (!(v >= 0.0)) throw domain_error("RadialDensity: negative or NaN value");
    const double m = SignedRadialMeasure(grid_, values_).mass();
    if (std::abs(m - declared_mass_) >
        mass_tolerance * std::max(1.0, std::abs(declared_mass_)))
      throw domain_error("RadialDensity: mass " + format_double(m) +
                         " deviates from declared " + format_double(declared_mass_));
  }

  // Rescale `values` so the result carries exactly `declared_mass`; returns
  // the density together with the multiplicative factor that was applied.
  static std::pair<RadialDensity, double> renormalized(RadialGrid grid,
                                                       std::vector<double> values,
                                                       double declared_mass = 1.0) {
    SignedRadialMeasure raw(grid, values);
    const double m = raw.mass();
    if (!(m > 0.0)) throw domain_error("RadialDensity: cannot renormalize zero mass");
    const double factor = declared_mass / m;
    for (double& v : values) v *= factor;
    return {RadialDensity(std::move(grid), std::move(values), declared_mass), factor};
  }

  const RadialGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double value(std::size_t i) const { return values_[i]; }
  double declared_mass() const { return declared_mass_; }
  double mass() const { return SignedRadialMeasure(grid_, values_).mass(); }

  SignedRadialMeasure as_signed() const { return {grid_, values_}; }

 private:
  RadialGrid grid_;
  std::vector<double> values_;
  double declared_mass_;
};

inline SignedRadialMeasure operator-(const RadialDensity& a, const RadialDensity& b) {
  if (!(a.grid() == b.grid()))
    throw dimension_error("measure difference: incompatible grids");
  std::vector<double> d(a.values().size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.value(i) - b.value(i);
  return {a.grid(), std::move(d)};
}

// ---------------------------------------------------------------------------
// CSV serialization: versioned header, (r, value) rows, full double precision.
// ---------------------------------------------------------------------------
inline void write_density_csv(std::ostream& out, const RadialDensity& rho) {
  out << "# qhplasma radial-density v1 declared_mass=" << format_double(rho.declared_mass())
      << "\n";
  out << "r,value\n";
  for (std::size_t i = 0; i < rho.grid().n_bins(); ++i)
    out << format_double(rho.grid().node(i)) << ',' << format_double(rho.value(i)) << '\n';
}

inline RadialDensity read_density_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# qhplasma radial-density v1", 0) != 0)
    throw domain_error("radial-density CSV: missing or unknown version header");
  double declared = 1.0;
  if (auto pos = line.find("declared_mass="); pos != std::string::npos)
    declared = std::stod(line.substr(pos + 14));
  if (!std::getline(in, line) || line != "r,value")
    throw domain_error("radial-density CSV: missing column header");
  std::vector<double> radii, values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw domain_error("radial-density CSV: malformed row");
    radii.push_back(std::stod(line.substr(0, comma)));
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  if (radii.size() < 2) throw domain_error("radial-density CSV: too few rows");
  RadialGrid grid(radii.back(), radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (std::abs(radii[i] - grid.node(i)) > 1e-9 * std::max(1.0, grid.r_max()))
      throw domain_error("radial-density CSV: nodes do not form a uniform grid");
  return {std::move(grid), std::move(values), declared};
}

}  // namespace qhp
