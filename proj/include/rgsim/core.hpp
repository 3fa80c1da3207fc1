#pragma once

// Units convention: hbar = 1, k_c = 1, omega_r = hbar k_c^2 / 2M = 1,
// hence M = 1/2 and lambda_c = 2*pi. All rates are in omega_r, all
// energies in hbar*omega_r, positions in 1/k_c, times in 1/omega_r.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace rgsim {

using complex = std::complex<double>;
inline constexpr double pi = std::numbers::pi;
inline constexpr double lambda_c = 2.0 * pi;

class BoxExit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Divergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, bool oscillatory_)
      : std::runtime_error(what), oscillatory(oscillatory_) {}
  bool oscillatory = false;
};

// All physical and numerical parameters in recoil units. The couplings are
// the collective combinations N*U0 and sqrt(N)*eta0; the wavefunction is
// normalized to one and n_atoms enters only through photon-number rescaling
// and atom-number scans.
struct SimParams {
  double delta_c = -8.0;    // cavity detuning, omega_r
  double kappa = 1.0;       // photon loss rate, omega_r
  double u0n = -1.0;        // N*U0, hbar*omega_r
  double eta0rn = 20.0;     // sqrt(N)*eta0, hbar*omega_r
  double grav = 10.0;       // G = M g sin(theta) lambda_c / (hbar omega_r)
  double n_atoms = 5.0e5;   // atom number (photon rescaling and scans only)
  int box_len = 8;          // grid length in lambda_c
  int n_grid = 256;         // grid points, power of two
  double dt = 1.25e-4;      // time step, 1/omega_r

  void validate() const {
    if (kappa < 0.0) throw std::invalid_argument("SimParams: kappa must be >= 0");
    if (n_grid < 8 || (n_grid & (n_grid - 1)) != 0)
      throw std::invalid_argument("SimParams: n_grid must be a power of two >= 8");
    if (box_len < 1) throw std::invalid_argument("SimParams: box_len must be a positive integer");
    if (!(dt > 0.0)) throw std::invalid_argument("SimParams: dt must be > 0");
    if (!(n_atoms > 0.0)) throw std::invalid_argument("SimParams: n_atoms must be > 0");
  }
};

inline void to_json(nlohmann::json& j, const SimParams& p) {
  j = nlohmann::json{{"delta_c", p.delta_c}, {"kappa", p.kappa},
                     {"u0n", p.u0n},         {"eta0rn", p.eta0rn},
                     {"grav", p.grav},       {"n_atoms", p.n_atoms},
                     {"box_len", p.box_len}, {"n_grid", p.n_grid},
                     {"dt", p.dt}};
}

inline void from_json(const nlohmann::json& j, SimParams& p) {
  p.delta_c = j.value("delta_c", p.delta_c);
  p.kappa = j.value("kappa", p.kappa);
  p.u0n = j.value("u0n", p.u0n);
  p.eta0rn = j.value("eta0rn", p.eta0rn);
  p.grav = j.value("grav", p.grav);
  p.n_atoms = j.value("n_atoms", p.n_atoms);
  p.box_len = j.value("box_len", p.box_len);
  p.n_grid = j.value("n_grid", p.n_grid);
  p.dt = j.value("dt", p.dt);
}

// Uniform periodic grid on [0, box_len*2*pi). Wavenumbers follow FFT
// ordering: k_j = j*(2*pi/L) for j < n/2, then the negative branch.
struct Grid {
  std::vector<double> points;
  std::vector<double> wavenumbers;
  double spacing = 0.0;
  double length = 0.0;
  int n = 0;
};

inline Grid make_grid(const SimParams& params) {
  params.validate();
  Grid g;
  g.n = params.n_grid;
  g.length = params.box_len * lambda_c;
  g.spacing = g.length / g.n;
  g.points.resize(g.n);
  g.wavenumbers.resize(g.n);
  const double dk = 2.0 * pi / g.length;
  for (int j = 0; j < g.n; ++j) {
    g.points[j] = j * g.spacing;
    g.wavenumbers[j] = dk * (j < g.n / 2 ? j : j - g.n);
  }
  return g;
}

// V_g(x) = M g sin(theta) x = grav/(2*pi) * x, applied unwrapped (not
// periodized); runs must end before the COM displacement exceeds L/4.
inline std::vector<double> grav_potential(const Grid& grid, const SimParams& params) {
  std::vector<double> v(grid.n);
  const double slope = params.grav / lambda_c;
  for (int j = 0; j < grid.n; ++j) v[j] = slope * grid.points[j];
  return v;
}

// SI bridge for the unit convention above (one conversion boundary).
namespace si {
inline constexpr double hbar = 1.054571817e-34;    // J s
inline constexpr double mass_rb87 = 1.44316060e-25;  // kg

inline double recoil_frequency(double k_c_si, double mass) {
  return hbar * k_c_si * k_c_si / (2.0 * mass);
}

// g (m/s^2) -> dimensionless G = M g sin(theta) lambda_c / (hbar omega_r)
inline double grav_to_dimensionless(double g_si, double sin_theta, double k_c_si, double mass) {
  const double omega_r = recoil_frequency(k_c_si, mass);
  const double lam = 2.0 * pi / k_c_si;
  return mass * g_si * sin_theta * lam / (hbar * omega_r);
}

inline double grav_from_dimensionless(double grav, double sin_theta, double k_c_si, double mass) {
  const double omega_r = recoil_frequency(k_c_si, mass);
  const double lam = 2.0 * pi / k_c_si;
  return grav * hbar * omega_r / (mass * sin_theta * lam);
}
}  // namespace si

}  // namespace rgsim
