#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "oracle_quadrature.hpp"
#include "qhplasma/meanfield.hpp"
#include "qhplasma/model.hpp"
#include "qhplasma/potential.hpp"

using namespace qhp;

namespace {
ModelParams params(int N, long long m) {
  ModelParams p;
  p.N = N;
  p.m = m;
  return p;
}
}  // namespace

TEST_CASE("confining potential: values, minimum, and the origin sentinel") {
  CHECK(potential_W(params(7, 0), 2.0) == 4.0);
  CHECK(potential_W(params(7, 7), 1.0) == 1.0);
  CHECK(params(7, 7).r_opt() == 1.0);

  // m = 4N: W(2) = 4 - 8 log 2 and the derivative vanishes at r = 2.
  auto p = params(5, 20);
  CHECK(potential_W(p, 2.0) == Catch::Approx(4.0 - 8.0 * std::log(2.0)).epsilon(1e-14));
  const double eps = 1e-6;
  const double deriv = (potential_W(p, 2.0 + eps) - potential_W(p, 2.0 - eps)) / (2 * eps);
  CHECK(deriv == Catch::Approx(0.0).margin(1e-8));
  CHECK(p.r_opt() == 2.0);

  CHECK(std::isinf(potential_W(p, 0.0)));
  CHECK(potential_W(params(5, 0), 0.0) == 0.0);
  CHECK_THROWS_AS(potential_W(p, -1.0), domain_error);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(params(0, 0).validate(), domain_error);
  CHECK_THROWS_AS(params(3, -1).validate(), domain_error);
  ModelParams bad = params(3, 0);
  bad.k = -1.0;
  CHECK_THROWS_AS(bad.validate(), domain_error);
  CHECK(params(4, 0).temperature() == 0.25);
}

TEST_CASE("electrostatic profile is exactly flat on its annulus with unit mass") {
  SECTION("disc for m = 0") {
    auto rho = electrostatic_profile(params(100, 0));
    const auto& g = rho.grid();
    CHECK(std::abs(rho.mass() - 1.0) < 1e-12);
    const double flat = 1.0 / (2.0 * pi);
    const double edge = std::sqrt(2.0);
    for (std::size_t i = 0; i < g.n_bins(); ++i) {
      if (g.upper(i) < edge) CHECK(rho.value(i) == flat);
      if (g.lower(i) > edge) CHECK(rho.value(i) == 0.0);
    }
  }
  SECTION("annulus radii 1 and sqrt3 for N = m = 100") {
    auto rho = electrostatic_profile(params(100, 100));
    const auto& g = rho.grid();
    CHECK(std::abs(rho.mass() - 1.0) < 1e-12);
    const double flat = 1.0 / (2.0 * pi);
    for (std::size_t i = 0; i < g.n_bins(); ++i) {
      if (g.lower(i) > 1.0 && g.upper(i) < std::sqrt(3.0)) CHECK(rho.value(i) == flat);
      if (g.upper(i) < 1.0 || g.lower(i) > std::sqrt(3.0)) CHECK(rho.value(i) == 0.0);
    }
  }
}

TEST_CASE("thermal profile: gaussian at N=1, unit mass, ridge at r_opt") {
  SECTION("single particle at native temperature is exp(-r^2)/pi") {
    auto rho = thermal_profile(params(1, 0));
    const auto& g = rho.grid();
    CHECK(std::abs(rho.mass() - 1.0) < 1e-12);
    for (double r : {0.2, 1.0, 2.0}) {
      const std::size_t i = g.cell_of(r);
      CHECK(rho.value(i) ==
            Catch::Approx(std::exp(-g.node(i) * g.node(i)) / pi).epsilon(1e-5));
    }
  }
  SECTION("ridge peaks within 2% of r_opt for N=10, m=1000") {
    auto p = params(10, 1000);
    auto rho = thermal_profile(p);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < rho.values().size(); ++i)
      if (rho.value(i) > rho.value(arg)) arg = i;
    CHECK(std::abs(rho.grid().node(arg) - p.r_opt()) < 0.02 * p.r_opt());
  }
  SECTION("general-temperature path reproduces the single-particle Gibbs law") {
    ModelParams p = params(1, 0);
    p.T = 0.5;
    auto rho = thermal_profile(p, RadialGrid(6.0, 4096));
    CHECK(std::abs(rho.mass() - 1.0) < 1e-12);
    const auto& g = rho.grid();
    for (double r : {0.3, 0.9}) {
      const std::size_t i = g.cell_of(r);
      const double expected = std::exp(-g.node(i) * g.node(i) / 0.5) / (pi * 0.5);
      CHECK(rho.value(i) == Catch::Approx(expected).epsilon(1e-5));
    }
  }
}

TEST_CASE("optimal vortex degree: closed form and guard rails") {
  ModelParams p = params(50, 0);
  p.k = 1e-5;
  p.omega = -4.0 * p.k * p.N;
  CHECK(optimal_vortex(p) == 50);

  p.omega = -2.0 * p.k * p.N;
  CHECK(optimal_vortex(p) == 0);
  p.omega = 1.0;
  CHECK(optimal_vortex(p) == 0);

  p.omega = -1.0;
  p.k = 0.0;
  CHECK_THROWS_AS(optimal_vortex(p), domain_error);

  // Ties round to the smaller integer: target N + 1/2 at omega = -k(3N+1).
  p.k = 1e-5;
  p.omega = -p.k * (3.0 * p.N + 1.0);
  CHECK(optimal_vortex(p) == 25);  // -omega/2k - N = 25.5 -> 25
}

TEST_CASE("functional energies on the explicit profiles") {
  auto p = params(100, 0);
  auto grid = RadialGrid(3.0, 4096);
  auto el = electrostatic_profile(p, grid);
  auto fe = functional_energies(p, el);
  // integral r^2 over the flat disc of radius sqrt2 is 1; D = 1/4 - log2/2.
  CHECK(fe.confinement == Catch::Approx(1.0).margin(1e-5));
  CHECK(fe.coulomb == Catch::Approx(0.25 - 0.5 * std::log(2.0)).margin(1e-5));
  CHECK(fe.electrostatic() == Catch::Approx(1.5 - std::log(2.0)).margin(2e-5));
  // Entropy of the flat profile is -log(2 pi) up to edge-cell smearing.
  CHECK(fe.entropy == Catch::Approx(-std::log(2.0 * pi)).margin(5e-3));

  // Thermal profile: the thermal functional equals -T log Z_th exactly.
  auto pth = params(5, 3);
  auto th = thermal_profile(pth);
  auto fth = functional_energies(pth, th);
  const double log_Zth =
      std::log(pi) + log_factorial(3) - 4.0 * std::log(5.0);
  CHECK(fth.thermal() == Catch::Approx(-log_Zth / 5.0).margin(1e-6));
}

TEST_CASE("mean-field minimizer: electrostatic regime at N=100") {
  auto p = params(100, 0);
  RadialGrid grid(3.0, 2048);
  auto sol = mf_minimize(p, 1e-9, grid);
  CHECK(sol.residual <= 1e-9);

  // Density cap 1/(2 pi) up to grid tolerance.
  double max_rho = 0.0;
  for (double v : sol.density.values()) max_rho = std::max(max_rho, v);
  CHECK(max_rho <= 1.0 / (2.0 * pi) + 1e-6);

  // The minimizer beats both explicit profiles.
  auto el = electrostatic_profile(p, grid);
  auto th = thermal_profile(p, grid);
  CHECK(sol.energy <= functional_energies(p, el).total() + 1e-12);
  CHECK(sol.energy <= functional_energies(p, th).total() + 1e-12);

  // Lagrange constant bookkeeping.
  auto fe = functional_energies(p, sol.density);
  CHECK(sol.lagrange_constant ==
        Catch::Approx(sol.energy + 2.0 * fe.coulomb).margin(1e-10));

  // Independent residual recheck of the Euler-Lagrange fixed point.
  const auto& g = sol.density.grid();
  PotentialTable h(sol.density.as_signed());
  std::vector<double> gmap(g.n_bins());
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.n_bins(); ++i) {
    gmap[i] = -(potential_W(p, g.node(i)) + 4.0 * h(g.node(i))) * p.N;
    mx = std::max(mx, gmap[i] + std::log(g.cell_area(i)));
  }
  KahanSum Z;
  for (std::size_t i = 0; i < g.n_bins(); ++i)
    Z.add(std::exp(gmap[i] + std::log(g.cell_area(i)) - mx));
  const double shift = mx + std::log(Z.value());
  double resid = 0.0;
  for (std::size_t i = 0; i < g.n_bins(); ++i)
    if (sol.density.value(i) > 1e-12)
      resid = std::max(resid, std::abs(sol.density.value(i) - std::exp(gmap[i] - shift)));
  CHECK(resid <= 2e-9);

  // Distance to the flat profile in Coulomb norm (regression, derived).
  auto diff = sol.density - el;
  const double d = coulomb_energy(diff, diff);
  CHECK(d == Catch::Approx(5.3171e-5).epsilon(0.02));
  CHECK(d <= 1.0 / p.N);
}

TEST_CASE("mean-field minimizer: small N and thermal regime") {
  SECTION("single particle energy (regression) and bounds") {
    auto p = params(1, 0);
    auto sol = mf_minimize(p, 1e-9);
    CHECK(sol.energy == Catch::Approx(-1.66997).margin(2e-3));
    // Upper bounds through the explicit profiles:
    // E <= E_el[rho_el] - T log(2 pi) and E <= E_th[rho_th] + 2 D(rho_th).
    CHECK(sol.energy <= 1.5 - std::log(2.0) - std::log(2.0 * pi) + 1e-9);
    const double d_gauss = oracle::gauss_pair_energy(1.0, 1.0);
    CHECK(sol.energy <= -std::log(pi) + 2.0 * d_gauss + 1e-9);
  }
  SECTION("deep thermal regime stays close to the thermal profile") {
    auto p = params(10, 100000);
    auto sol = mf_minimize(p, 1e-9);
    auto th = thermal_profile(p, sol.density.grid());
    const double tv = total_variation(sol.density - th);
    CHECK(tv < 0.05);
    double max_rho = 0.0;
    for (double v : sol.density.values()) max_rho = std::max(max_rho, v);
    CHECK(max_rho <= 1.0 / (2.0 * pi) + 1e-6);
  }
  SECTION("regime monotonicity of the profile distances") {
    // Toward the electrostatic limit (m <= N^2): D(rho - rho_el) shrinks
    // as m/N^2 decreases on a log-spaced sweep.
    const int N = 10;
    RadialGrid grid(13.0, 4096);
    std::vector<double> d_el;
    for (long long m : {100LL, 25LL, 6LL}) {
      auto sol = mf_minimize(params(N, m), 1e-9, grid);
      auto diff = sol.density - electrostatic_profile(params(N, m), grid);
      d_el.push_back(coulomb_energy(diff, diff));
    }
    CHECK(d_el[0] > d_el[1]);
    CHECK(d_el[1] > d_el[2]);

    // Toward the thermal limit: both distances to the ridge profile shrink
    // as m/N^2 grows.
    std::vector<double> d_th, tv_th;
    for (long long m : {1000LL, 10000LL, 100000LL}) {
      auto p = params(N, m);
      auto sol = mf_minimize(p, 1e-9);
      auto diff = sol.density - thermal_profile(p, sol.density.grid());
      d_th.push_back(coulomb_energy(diff, diff));
      tv_th.push_back(total_variation(diff));
    }
    CHECK(d_th[0] > d_th[1]);
    CHECK(d_th[1] > d_th[2]);
    CHECK(tv_th[0] > tv_th[1]);
    CHECK(tv_th[1] > tv_th[2]);
  }
  SECTION("iteration budget exhaustion raises a convergence error") {
    CHECK_THROWS_AS(mf_minimize(params(50, 0), 1e-12, RadialGrid(3.0, 2048), 5),
                    convergence_error);
  }
}

TEST_CASE("decay envelope: applicability, monotonicity, and solver compliance") {
  auto p = params(100, 0);
  CHECK_FALSE(decay_envelope(p, p.r_opt()).has_value());
  CHECK_FALSE(decay_envelope(p, 1.0).has_value());
  CHECK_FALSE(decay_envelope(p, std::sqrt(2.0) + 0.79).has_value());
  REQUIRE(decay_envelope(p, 2.3).has_value());
  CHECK_THROWS_AS(decay_envelope(p, -1.0), domain_error);

  // Monotone decreasing beyond the bulk.
  double prev = std::numeric_limits<double>::infinity();
  for (double r = 2.25; r < 4.0; r += 0.05) {
    auto v = decay_envelope(p, r);
    REQUIRE(v.has_value());
    CHECK(*v < prev);
    prev = *v;
  }

  // Converged solver density lies below the envelope wherever it applies,
  // in particular at r = 3.
  auto sol = mf_minimize(p, 1e-9, RadialGrid(4.0, 4096));
  const auto& g = sol.density.grid();
  for (std::size_t i = 0; i < g.n_bins(); ++i) {
    auto env = decay_envelope(p, g.node(i));
    if (env) CHECK(sol.density.value(i) <= *env);
  }
  auto at3 = decay_envelope(p, 3.0);
  REQUIRE(at3.has_value());
  CHECK(sol.density.value(g.cell_of(3.0)) <= *at3);

  // Inner hole applicability for a wide annulus.
  auto pa = params(100, 10000);  // inner radius 10
  CHECK(decay_envelope(pa, 5.0).has_value());
  CHECK_FALSE(decay_envelope(pa, 9.5).has_value());
}
