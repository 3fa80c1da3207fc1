#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include "rgsim/core.hpp"

using namespace rgsim;

TEST_CASE("grid spacing and layout") {
  SimParams p;
  p.box_len = 1;
  p.n_grid = 8;
  Grid g = make_grid(p);
  CHECK(g.spacing == Catch::Approx(2.0 * pi / 8.0).epsilon(1e-15));
  CHECK(g.length == Catch::Approx(2.0 * pi));
  CHECK(g.points.front() == 0.0);
  CHECK(g.points.back() == Catch::Approx(g.length - g.spacing));

  p.box_len = 8;
  p.n_grid = 256;
  g = make_grid(p);
  CHECK(g.spacing == Catch::Approx(pi / 16.0).epsilon(1e-15));
}

TEST_CASE("grid wavenumbers follow the spectral convention") {
  SimParams p;
  p.box_len = 2;
  p.n_grid = 8;
  Grid g = make_grid(p);
  const double dk = 0.5;  // 2 pi / (2 lambda_c)
  CHECK(g.wavenumbers[0] == 0.0);
  CHECK(g.wavenumbers[1] == Catch::Approx(dk));
  CHECK(g.wavenumbers[3] == Catch::Approx(3 * dk));
  CHECK(g.wavenumbers[4] == Catch::Approx(-4 * dk));
  CHECK(g.wavenumbers[7] == Catch::Approx(-dk));
  // k_c = 1 must be representable on an integer-period box
  bool found = false;
  for (double k : g.wavenumbers) found |= std::abs(k - 1.0) < 1e-15;
  CHECK(found);
}

TEST_CASE("parameter validation") {
  SimParams p;
  CHECK_NOTHROW(p.validate());
  SECTION("non-power-of-two grid") {
    p.n_grid = 250;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SECTION("negative kappa") {
    p.kappa = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SECTION("bad dt") {
    p.dt = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SECTION("bad box") {
    p.box_len = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
}

TEST_CASE("gravitational potential is linear with the documented slope") {
  SimParams p;
  p.box_len = 4;
  p.n_grid = 64;
  Grid g = make_grid(p);

  p.grav = 0.0;
  for (double v : grav_potential(g, p)) CHECK(v == 0.0);

  p.grav = 10.0;
  const std::vector<double> v = grav_potential(g, p);
  // one lattice period drop equals grav by definition
  const int j_2pi = g.n / 4;
  CHECK(g.points[j_2pi] == Catch::Approx(2.0 * pi));
  CHECK(v[j_2pi] == Catch::Approx(10.0));
  CHECK(v[j_2pi / 2] == Catch::Approx(5.0));
  // exact linearity on grid points
  for (int j = 0; j < g.n; ++j) CHECK(v[j] == Catch::Approx(10.0 / (2.0 * pi) * g.points[j]));
}

TEST_CASE("JSON schema round trip with exact field names") {
  SimParams p;
  p.delta_c = -8.0;
  p.eta0rn = 20.0;
  p.n_grid = 512;
  nlohmann::json j = p;
  for (const char* k : {"delta_c", "kappa", "u0n", "eta0rn", "grav", "n_atoms", "box_len",
                        "n_grid", "dt"})
    CHECK(j.contains(k));
  const SimParams q = j.get<SimParams>();
  CHECK(q.delta_c == p.delta_c);
  CHECK(q.n_grid == p.n_grid);
  CHECK(q.dt == p.dt);
  // partial JSON keeps defaults for missing fields
  const SimParams r = nlohmann::json{{"kappa", 2.5}}.get<SimParams>();
  CHECK(r.kappa == 2.5);
  CHECK(r.delta_c == SimParams{}.delta_c);
}

TEST_CASE("SI bridge round trip at the reference operating point") {
  const double k_c_si = 2.0 * pi / 780.0e-9;
  const double omega_r = si::recoil_frequency(k_c_si, si::mass_rb87);
  // recoil frequency of 87Rb at 780 nm
  CHECK(omega_r == Catch::Approx(2.3708e4).epsilon(1e-4));

  const double g_si = 9.81;
  const double sin_theta = 0.3;
  const double grav = si::grav_to_dimensionless(g_si, sin_theta, k_c_si, si::mass_rb87);
  const double back = si::grav_from_dimensionless(grav, sin_theta, k_c_si, si::mass_rb87);
  CHECK(back == Catch::Approx(g_si).epsilon(1e-12));
}
