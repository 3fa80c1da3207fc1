#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "rgsim/observables.hpp"

using namespace rgsim;

namespace {

CondensateState density_state(const Grid& grid, const std::function<double(double)>& rho) {
  CondensateState c;
  c.psi.resize(grid.n);
  double norm = 0.0;
  for (int j = 0; j < grid.n; ++j) {
    c.psi[j] = std::sqrt(std::max(rho(grid.points[j]), 0.0));
    norm += std::norm(c.psi[j]);
  }
  norm *= grid.spacing;
  for (auto& a : c.psi) a *= 1.0 / std::sqrt(norm);
  return c;
}

}  // namespace

TEST_CASE("relative and total phase definitions") {
  const complex e_p = std::polar(1.0, pi / 4.0);
  const complex e_m = std::polar(1.0, -pi / 4.0);
  CHECK(rel_phase({e_p, e_m}) == Catch::Approx(pi / 4.0));
  CHECK(tot_phase({e_p, e_m}) == Catch::Approx(0.0).margin(1e-15));
  CHECK(rel_phase({e_p, e_p}) == Catch::Approx(0.0).margin(1e-15));
  // amplitude independent
  CHECK(rel_phase({complex{0.0, 2.0}, complex{2.0, 0.0}}) == Catch::Approx(pi / 4.0));
  const complex e3 = std::polar(1.0, pi / 3.0);
  CHECK(tot_phase({e3, e3}) == Catch::Approx(pi / 3.0));
  CHECK(tot_phase({complex{0.0, 1.0}, complex{0.0, 1.0}}) == Catch::Approx(pi / 2.0));
  // common rescaling invariance
  const CavityState c{complex{0.3, 0.7}, complex{-0.2, 0.4}};
  const CavityState c2{3.7 * c.alpha_plus, 3.7 * c.alpha_minus};
  CHECK(rel_phase(c2) == Catch::Approx(rel_phase(c)));
  CHECK(tot_phase(c2) == Catch::Approx(tot_phase(c)));
}

TEST_CASE("phase of a dark mode is an error") {
  CHECK_THROWS_AS(rel_phase({complex{0.0, 0.0}, complex{1.0, 0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(tot_phase({complex{1.0, 0.0}, complex{0.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("center of mass") {
  SimParams p;
  p.box_len = 4;
  p.n_grid = 256;
  const Grid grid = make_grid(p);

  SECTION("sharply peaked density sits at its peak") {
    const double x0 = grid.points[100];
    const auto st = density_state(grid, [&](double x) {
      const double d = std::remainder(x - x0, grid.length);
      return std::exp(-d * d / 0.05);
    });
    CHECK(std::remainder(center_of_mass(st, grid) - x0, 2.0 * pi) ==
          Catch::Approx(0.0).margin(1e-6));
  }
  SECTION("1 + cos(x - 0.3) density averages to 0.3") {
    const auto st = density_state(grid, [](double x) { return 1.0 + std::cos(x - 0.3); });
    CHECK(center_of_mass(st, grid) == Catch::Approx(0.3).epsilon(1e-10));
  }
  SECTION("uniform density is an error") {
    CondensateState st;
    st.psi.assign(grid.n, complex{1.0 / std::sqrt(grid.length), 0.0});
    CHECK_THROWS_AS(center_of_mass(st, grid), std::invalid_argument);
  }
}

TEST_CASE("trace unwrapping is branch independent for dense sampling") {
  SimParams p;
  p.box_len = 1;
  p.n_grid = 32;
  const Grid grid = make_grid(p);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> jump(-1.2, 1.2);

  // random dense phase path, fed through states whose per-sample branch
  // wraps arbitrarily
  double phi_true = 0.2;
  TraceRecorder rec;
  std::vector<double> truth;
  CondensateState st = density_state(grid, [](double x) { return 1.0 + std::cos(x); });
  for (int k = 0; k < 400; ++k) {
    phi_true += 0.5 * jump(rng);
    truth.push_back(phi_true);
    SystemState s;
    s.condensate = st;
    s.time = 0.01 * k;
    s.cavity.alpha_plus = std::polar(2.0, phi_true);
    s.cavity.alpha_minus = std::polar(2.0, -phi_true);
    rec.sample(s, grid);
  }
  const Trace& tr = rec.trace();
  for (size_t k = 0; k < truth.size(); ++k)
    CHECK(tr.rows[k].phi - tr.rows[0].phi ==
          Catch::Approx(truth[k] - truth[0]).margin(1e-9));
  for (size_t k = 1; k < tr.rows.size(); ++k) CHECK(tr.rows[k].t > tr.rows[k - 1].t);
}

TEST_CASE("dragging residual of a constant trace vanishes") {
  Trace tr;
  for (int k = 0; k < 10; ++k) tr.rows.push_back({0.1 * k, 0.7, 0.0, -0.4, 4.0, 4.0, 1.0});
  for (double r : dragging_residual(tr)) CHECK(r == 0.0);
}

TEST_CASE("dragging residual detects rigid co-motion") {
  // lattice translating rigidly: phi decreases as x_com advances
  Trace tr;
  for (int k = 0; k < 50; ++k) {
    const double x = 0.07 * k;
    tr.rows.push_back({0.1 * k, 0.5 - x, 0.0, -1.0 + x, 4.0, 4.0, 1.0});
  }
  for (double r : dragging_residual(tr)) CHECK(std::abs(r) < 1e-12);
}

TEST_CASE("homodyne expectation matches the equal-amplitude closed form") {
  const double n = 9.0;
  SECTION("phi = 0, Phi = 0, gamma = 0 reads sqrt(n)") {
    const double a = std::sqrt(n / 4.0);
    CHECK(homodyne_expectation({complex{a, 0.0}, complex{a, 0.0}}, 0.0) ==
          Catch::Approx(std::sqrt(n)));
  }
  SECTION("quadrature node at gamma = Phi + pi/2") {
    const CavityState c{std::polar(1.3, 0.9 + 0.4), std::polar(1.3, 0.9 - 0.4)};
    CHECK(homodyne_expectation(c, 0.9 + pi / 2.0) == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("phi = pi/2 nulls the signal") {
    const CavityState c{std::polar(2.0, pi / 2.0), std::polar(2.0, -pi / 2.0)};
    CHECK(homodyne_expectation(c, 0.0) == Catch::Approx(0.0).margin(1e-12));
  }
  SECTION("general closed form") {
    const double amp = 1.7, phi = 0.35, Phi = -0.6, gamma = 0.2;
    const CavityState c{std::polar(amp, Phi + phi), std::polar(amp, Phi - phi)};
    CHECK(homodyne_expectation(c, gamma) ==
          Catch::Approx(2.0 * amp * std::cos(phi) * std::cos(Phi - gamma)));
  }
}

TEST_CASE("trace CSV round trip preserves payload bits") {
  Trace tr;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int k = 0; k < 64; ++k)
    tr.rows.push_back({0.05 * k, u(rng), u(rng), u(rng), std::abs(u(rng)), std::abs(u(rng)),
                       1.0 + 1e-12 * u(rng)});
  const std::string path =
      (std::filesystem::temp_directory_path() / "rgsim_test_trace.csv").string();
  write_trace_csv(tr, path);
  const Trace rt = read_trace_csv(path);
  std::filesystem::remove(path);
  REQUIRE(rt.rows.size() == tr.rows.size());
  for (size_t k = 0; k < tr.rows.size(); ++k) {
    CHECK(rt.rows[k].t == tr.rows[k].t);  // %.17g is lossless for doubles
    CHECK(rt.rows[k].phi == tr.rows[k].phi);
    CHECK(rt.rows[k].Phi == tr.rows[k].Phi);
    CHECK(rt.rows[k].x_com == tr.rows[k].x_com);
    CHECK(rt.rows[k].n_plus == tr.rows[k].n_plus);
    CHECK(rt.rows[k].n_minus == tr.rows[k].n_minus);
    CHECK(rt.rows[k].norm == tr.rows[k].norm);
  }
}

TEST_CASE("observable U(1) transformation rules") {
  SimParams p;
  p.box_len = 2;
  p.n_grid = 128;
  const Grid grid = make_grid(p);
  const double X = 0.45;
  const CavityState c{std::polar(1.5, 0.3), std::polar(1.5, -0.1)};
  const CavityState cX{c.alpha_plus * std::exp(complex{0.0, -X}),
                       c.alpha_minus * std::exp(complex{0.0, +X})};
  CHECK(rel_phase(cX) == Catch::Approx(rel_phase(c) - X));
  CHECK(tot_phase(cX) == Catch::Approx(tot_phase(c)));

  const auto st = density_state(grid, [](double x) { return 1.0 + std::cos(x - 0.2); });
  const auto stX = density_state(grid, [&](double x) { return 1.0 + std::cos(x - 0.2 - X); });
  CHECK(center_of_mass(stX, grid) == Catch::Approx(center_of_mass(st, grid) + X).epsilon(1e-9));
}
