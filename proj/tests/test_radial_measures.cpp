#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "oracle_quadrature.hpp"
#include "qhplasma/potential.hpp"
#include "qhplasma/radial_grid.hpp"

using namespace qhp;

namespace {

// Uniform density carrying `mass` on the disc of radius R, cell values by
// exact area overlap (edge cell fractional).
RadialDensity uniform_disc(const RadialGrid& grid, double R, double mass = 1.0) {
  std::vector<double> v(grid.n_bins(), 0.0);
  const double rho = mass / (pi * R * R);
  for (std::size_t i = 0; i < grid.n_bins(); ++i) {
    const double lo = grid.lower(i);
    const double hi = std::min(grid.upper(i), R);
    if (hi > lo) v[i] = rho * pi * (hi - lo) * (hi + lo) / grid.cell_area(i);
  }
  return {grid, std::move(v), mass};
}

// Gridded smooth radial profile; declared mass is whatever the grid carries.
template <class F>
SignedRadialMeasure gridded(const RadialGrid& grid, F&& f) {
  std::vector<double> v(grid.n_bins());
  for (std::size_t i = 0; i < grid.n_bins(); ++i) v[i] = f(grid.node(i));
  return {grid, std::move(v)};
}

RadialDensity as_unit_density(const SignedRadialMeasure& mu) {
  return RadialDensity::renormalized(mu.grid(), mu.values()).first;
}

}  // namespace

TEST_CASE("grid nodes are strictly increasing with a half bin at the origin") {
  RadialGrid g(3.0, 2048);
  REQUIRE(g.spacing() == Catch::Approx(3.0 / 2047));
  CHECK(g.node(0) == Catch::Approx(0.25 * g.spacing()));
  CHECK(g.lower(0) == 0.0);
  CHECK(g.upper(0) == Catch::Approx(0.5 * g.spacing()));
  CHECK(g.upper(g.n_bins() - 1) == 3.0);
  for (std::size_t i = 1; i < g.n_bins(); ++i) {
    CHECK(g.node(i) > g.node(i - 1));
    CHECK(g.lower(i) == Catch::Approx(g.upper(i - 1)));
  }
  KahanSum area;
  for (std::size_t i = 0; i < g.n_bins(); ++i) area.add(g.cell_area(i));
  CHECK(area.value() == Catch::Approx(pi * 9.0).epsilon(1e-12));
  CHECK(g.cell_of(0.0) == 0);
  CHECK(g.cell_of(3.0) == g.n_bins() - 1);
  CHECK(g.cell_of(g.node(77)) == 77);
}

TEST_CASE("grid construction rejects invalid shapes") {
  CHECK_THROWS_AS(RadialGrid(0.0, 64), domain_error);
  CHECK_THROWS_AS(RadialGrid(-1.0, 64), domain_error);
  CHECK_THROWS_AS(RadialGrid(1.0, 1), domain_error);
}

TEST_CASE("density construction enforces nonnegativity and declared mass") {
  RadialGrid g(2.0, 256);
  std::vector<double> bad(g.n_bins(), 1.0 / (pi * 4.0));
  bad[10] = -1e-3;
  CHECK_THROWS_AS(RadialDensity(g, bad, 1.0), domain_error);

  std::vector<double> off(g.n_bins(), 1.1 / (pi * 4.0));
  CHECK_THROWS_AS(RadialDensity(g, off, 1.0), domain_error);

  auto [rho, factor] = RadialDensity::renormalized(g, off, 1.0);
  CHECK(factor == Catch::Approx(1.0 / 1.1).epsilon(1e-12));
  CHECK(rho.mass() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("disc potential matches the closed form") {
  RadialGrid g(3.0, 4096);
  auto disc = uniform_disc(g, 1.0);
  CHECK(newton_potential(disc, 0.0) == Catch::Approx(0.5).margin(2e-6));
  CHECK(newton_potential(disc, 1.0) == Catch::Approx(0.0).margin(2e-6));
  CHECK(newton_potential(disc, 0.6) ==
        Catch::Approx(oracle::disc_potential(1.0, 1.0, 0.6)).margin(2e-6));
  // Beyond the grid the measure is a point charge: exactly -M log r.
  const double far = 10.0 * g.r_max();
  CHECK(newton_potential(disc, far) ==
        Catch::Approx(-disc.mass() * std::log(far)).epsilon(1e-14));
  CHECK_THROWS_AS(newton_potential(disc, -0.1), domain_error);
}

TEST_CASE("gaussian potential matches the exponential-integral closed form") {
  RadialGrid g(8.0, 8192);
  auto gauss = gridded(g, [](double r) { return oracle::gauss_density(1.0, r); });
  for (double r : {0.0, 0.3, 1.0, 2.5}) {
    const double expected = oracle::gauss_potential(1.0, r);
    CHECK(newton_potential(gauss, r) == Catch::Approx(expected).margin(1e-6));
  }
  CHECK(oracle::gauss_potential(1.0, 1e-9) == Catch::Approx(0.5 * euler_gamma).margin(1e-8));
}

TEST_CASE("potential of a random smooth profile matches direct 2D quadrature") {
  std::mt19937 rng(20240817);
  std::uniform_real_distribution<double> width(0.35, 0.8), center(0.0, 1.2),
      weight(0.2, 1.0);
  // Node sampling of the smooth profile carries an O(dr^2 f'') bias, so the
  // comparison grid is finer than the defaults used elsewhere.
  RadialGrid g(6.0, 32768);
  for (int trial = 0; trial < 3; ++trial) {
    const double a = width(rng), c = center(rng), w1 = weight(rng), w2 = weight(rng);
    auto f = [=](double r) {
      return w1 * oracle::gauss_density(a, r) +
             w2 * std::exp(-(r - c) * (r - c) / (a * a));
    };
    auto mu = gridded(g, f);
    for (double r : {0.15, 0.9, 1.7}) {
      const double direct = oracle::potential_2d(f, r, 6.0);
      const double lib = newton_potential(mu, r);
      CHECK(lib == Catch::Approx(direct).epsilon(1e-6).margin(1e-6));
    }
  }
}

TEST_CASE("coulomb energy reproduces closed forms") {
  RadialGrid g(3.0, 4096);
  auto disc1 = uniform_disc(g, 1.0);
  CHECK(coulomb_energy(disc1, disc1) == Catch::Approx(0.25).margin(2e-6));

  auto disc_sqrt2 = uniform_disc(g, std::sqrt(2.0));  // density 1/(2 pi)
  CHECK(coulomb_energy(disc_sqrt2, disc_sqrt2) ==
        Catch::Approx(0.25 - 0.5 * std::log(2.0)).margin(2e-6));

  SignedRadialMeasure zero(g, std::vector<double>(g.n_bins(), 0.0));
  CHECK(coulomb_energy(zero, zero) == 0.0);
}

TEST_CASE("coulomb energy of two gaussians matches gamma/2 - log(a^2+b^2)/2") {
  RadialGrid g(9.0, 8192);
  auto ga = gridded(g, [](double r) { return oracle::gauss_density(1.0, r); });
  auto gb = gridded(g, [](double r) { return oracle::gauss_density(1.3, r); });
  CHECK(coulomb_energy(ga, gb) ==
        Catch::Approx(oracle::gauss_pair_energy(1.0, 1.3)).margin(1e-6));
  CHECK(coulomb_energy(ga, ga) ==
        Catch::Approx(oracle::gauss_pair_energy(1.0, 1.0)).margin(1e-6));
}

TEST_CASE("coulomb energy is symmetric and positive on zero-mass measures") {
  std::mt19937 rng(7);
  std::normal_distribution<double> noise(0.0, 1.0);
  RadialGrid g(4.0, 1024);
  for (int trial = 0; trial < 8; ++trial) {
    std::vector<double> v(g.n_bins()), w(g.n_bins());
    for (auto& x : v) x = noise(rng) * 0.1;
    for (auto& x : w) x = noise(rng) * 0.1;
    SignedRadialMeasure mu(g, v), nu(g, w);
    CHECK(std::abs(coulomb_energy(mu, nu) - coulomb_energy(nu, mu)) < 1e-9);

    // Remove the total mass to land in the positive cone.
    const double shift = mu.mass() / (pi * g.r_max() * g.r_max());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= shift;
    SignedRadialMeasure balanced(g, v);
    REQUIRE(std::abs(balanced.mass()) < 1e-10);
    CHECK(coulomb_energy(balanced, balanced) >= -1e-10);
  }
}

TEST_CASE("dilating a unit-mass density shifts its energy by exactly -log R") {
  RadialGrid g(3.0, 2048);
  auto rho = uniform_disc(g, 1.4);
  const double base = coulomb_energy(rho, rho);
  const double R = 2.7;
  RadialGrid gd(g.r_max() * R, g.n_bins());
  std::vector<double> scaled(rho.values());
  for (auto& v : scaled) v /= R * R;
  RadialDensity dilated(gd, scaled, 1.0);
  CHECK(coulomb_energy(dilated, dilated) == Catch::Approx(base - std::log(R)).epsilon(1e-12));
}

TEST_CASE("coulomb energy rejects incompatible grids") {
  RadialGrid a(3.0, 512), b(3.0, 1024), c(4.0, 512);
  SignedRadialMeasure ma(a, std::vector<double>(a.n_bins(), 0.0));
  SignedRadialMeasure mb(b, std::vector<double>(b.n_bins(), 0.0));
  SignedRadialMeasure mc(c, std::vector<double>(c.n_bins(), 0.0));
  CHECK_THROWS_AS(coulomb_energy(ma, mb), dimension_error);
  CHECK_THROWS_AS(coulomb_energy(ma, mc), dimension_error);
}

TEST_CASE("relative entropy: identity, positivity, and the CKP bound") {
  RadialGrid g(6.0, 2048);
  auto mu = as_unit_density(gridded(g, [](double r) { return oracle::gauss_density(1.0, r); }));
  CHECK(relative_entropy(mu, mu) == Catch::Approx(0.0).margin(1e-13));

  std::mt19937 rng(99);
  std::uniform_real_distribution<double> width(0.6, 1.4);
  for (int trial = 0; trial < 6; ++trial) {
    const double a = width(rng), b = width(rng);
    auto p = as_unit_density(gridded(g, [=](double r) { return oracle::gauss_density(a, r); }));
    auto q = as_unit_density(gridded(g, [=](double r) { return oracle::gauss_density(b, r); }));
    const double kl = relative_entropy(p, q);
    const double tv = total_variation(p - q);
    CHECK(kl >= -1e-13);
    CHECK(kl >= 0.5 * tv * tv - 1e-12);
  }
}

TEST_CASE("relative entropy rejects mass outside the reference support") {
  RadialGrid g(4.0, 512);
  auto inner = uniform_disc(g, 1.0);
  // Unit mass on the annulus [2, 3]: disjoint from the disc.
  std::vector<double> v(g.n_bins(), 0.0);
  for (std::size_t i = 0; i < g.n_bins(); ++i) {
    const double lo = std::max(g.lower(i), 2.0);
    const double hi = std::min(g.upper(i), 3.0);
    if (hi > lo) v[i] = pi * (hi - lo) * (hi + lo) / (pi * 5.0) / g.cell_area(i);
  }
  RadialDensity outer(g, v, 1.0);
  CHECK_THROWS_AS(relative_entropy(outer, inner), singular_support_error);
  CHECK_THROWS_AS(relative_entropy(inner, outer), singular_support_error);
}

TEST_CASE("total variation: zero, disjoint masses, annulus overlap") {
  RadialGrid g(4.0, 4096);
  SignedRadialMeasure zero(g, std::vector<double>(g.n_bins(), 0.0));
  CHECK(total_variation(zero) == 0.0);

  auto inner = uniform_disc(g, 1.0);
  std::vector<double> v(g.n_bins(), 0.0);
  for (std::size_t i = 0; i < g.n_bins(); ++i) {
    const double lo = std::max(g.lower(i), 2.0);
    const double hi = std::min(g.upper(i), 3.0);
    if (hi > lo) v[i] = pi * (hi - lo) * (hi + lo) / (pi * 5.0) / g.cell_area(i);
  }
  RadialDensity outer(g, v, 1.0);
  CHECK(total_variation(inner - outer) == Catch::Approx(2.0).epsilon(1e-9));

  // Disc of radius sqrt2 against the annulus [1, sqrt3], both at 1/(2 pi):
  // the symmetric difference carries area pi + pi, so the distance is 1.
  auto disc = uniform_disc(g, std::sqrt(2.0));
  std::vector<double> ann(g.n_bins(), 0.0);
  for (std::size_t i = 0; i < g.n_bins(); ++i) {
    const double lo = std::max(g.lower(i), 1.0);
    const double hi = std::min(g.upper(i), std::sqrt(3.0));
    if (hi > lo) ann[i] = (hi - lo) * (hi + lo) / 2.0 / g.cell_area(i);
  }
  RadialDensity annulus(g, ann, 1.0);
  const double tv = total_variation(disc - annulus);
  CHECK(tv == Catch::Approx(1.0).margin(1e-9));
  CHECK(tv > 0.0);
  CHECK(tv < 2.0);
}

TEST_CASE("smeared-charge correction: disc value, quadratic scaling, exact far zero") {
  RadialGrid g(3.0, 4096);
  auto disc = uniform_disc(g, 1.0);

  // Inside the unit disc the potential is (1 - r^2)/2, so averaging over a
  // disc of radius l around the origin costs exactly l^2/4.
  const double at_origin = smeared_charge_correction(disc, 0.0, 0.1);
  CHECK(at_origin == Catch::Approx(0.01 / 4.0).margin(1e-6));
  const double max_rho = 1.0 / pi;
  CHECK(std::abs(at_origin) <= 1.0 * 0.01 * max_rho);  // empirical C <= 1

  const double l1 = smeared_charge_correction(disc, 0.4, 0.2);
  const double l2 = smeared_charge_correction(disc, 0.4, 0.1);
  const double l3 = smeared_charge_correction(disc, 0.4, 0.05);
  CHECK(l1 / l2 == Catch::Approx(4.0).epsilon(0.05));
  CHECK(l2 / l3 == Catch::Approx(4.0).epsilon(0.05));

  CHECK(smeared_charge_correction(disc, 1.2, 0.1) == 0.0);
  CHECK_THROWS_AS(smeared_charge_correction(disc, 0.0, 0.0), domain_error);
  CHECK_THROWS_AS(smeared_charge_correction(disc, 0.0, -1.0), domain_error);
}

TEST_CASE("density CSV round trip preserves grid, values, and mass") {
  RadialGrid g(2.5, 512);
  auto rho = uniform_disc(g, 1.1, 2.0);
  std::ostringstream out;
  write_density_csv(out, rho);
  std::istringstream in(out.str());
  auto back = read_density_csv(in);
  REQUIRE(back.grid() == rho.grid());
  REQUIRE(back.declared_mass() == rho.declared_mass());
  for (std::size_t i = 0; i < g.n_bins(); ++i) CHECK(back.value(i) == rho.value(i));

  std::istringstream garbage("r,value\n0,1\n");
  CHECK_THROWS_AS(read_density_csv(garbage), domain_error);
}
