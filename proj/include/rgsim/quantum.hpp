#pragma once

// Exact-diagonalization companion at N = 1: one particle on a single
// lattice cell coupled to both cavity modes with truncated Fock spaces.
// Exposes the ground state, mode statistics, the Husimi Q function of a
// mode, the symmetry operator that winds the broken U(1), and measurement
// collapse of the plus mode onto a coherent state.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rgsim/core.hpp"

namespace rgsim {

struct QuantumConfig {
  int n_sites = 16;     // position points on one lattice cell [0, 2 pi)
  int fock_cutoff = 4;  // max photon number per mode (levels 0 .. fock_cutoff)
  double delta_c = -8.0;
  double u0 = -1.0;     // single-atom dispersive shift (N = 1)
  double eta0 = 8.0;    // single-atom pump coupling
  double grav = 0.0;

  int levels() const { return fock_cutoff + 1; }
  int dim() const { return n_sites * levels() * levels(); }

  void validate() const {
    if (n_sites < 2 || fock_cutoff < 1)
      throw std::invalid_argument("quantum: n_sites >= 2, fock_cutoff >= 1");
    if (dim() > 10000)
      throw std::invalid_argument("quantum: Hilbert dimension " + std::to_string(dim()) +
                                  " exceeds the 1e4 cap");
  }
};

inline void to_json(nlohmann::json& j, const QuantumConfig& cfg) {
  j = nlohmann::json{{"n_sites", cfg.n_sites},   {"fock_cutoff", cfg.fock_cutoff},
                     {"delta_c", cfg.delta_c},   {"u0", cfg.u0},
                     {"eta0", cfg.eta0},         {"grav", cfg.grav}};
}

inline void from_json(const nlohmann::json& j, QuantumConfig& cfg) {
  cfg.n_sites = j.value("n_sites", cfg.n_sites);
  cfg.fock_cutoff = j.value("fock_cutoff", cfg.fock_cutoff);
  cfg.delta_c = j.value("delta_c", cfg.delta_c);
  cfg.u0 = j.value("u0", cfg.u0);
  cfg.eta0 = j.value("eta0", cfg.eta0);
  cfg.grav = j.value("grav", cfg.grav);
}

using SparseH = Eigen::SparseMatrix<std::complex<double>>;
using VectorXc = Eigen::VectorXcd;

namespace qdetail {

// basis index = (site * cutoff + n_plus) * cutoff + n_minus
inline int idx(const QuantumConfig& cfg, int site, int np, int nm) {
  return (site * cfg.levels() + np) * cfg.levels() + nm;
}

// Dense kinetic block F^dag diag(k^2) F on a 2 pi cell, integer momenta
// FFT-ordered.
inline Eigen::MatrixXcd kinetic_block(int n) {
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(n, n);
  for (int m = 0; m < n; ++m) {
    const double k = static_cast<double>(m < (n + 1) / 2 ? m : m - n);
    const double k2 = k * k;
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        const double ph = k * 2.0 * pi * (j - l) / n;
        t(j, l) += k2 / n * std::complex<double>{std::cos(ph), std::sin(ph)};
      }
  }
  return t;
}

}  // namespace qdetail

// H = p^2 + V_g(x) - delta_c (n+ + n-)
//     + u0 [ n+ + n- + a+^dag a- e^{-2ix} + a-^dag a+ e^{+2ix} ]
//     + eta0 [ a+ e^{+ix} + a+^dag e^{-ix} + a- e^{-ix} + a-^dag e^{+ix} ]
inline SparseH build_hamiltonian(const QuantumConfig& cfg) {
  cfg.validate();
  const int ns = cfg.n_sites, nc = cfg.levels();
  const Eigen::MatrixXcd kin = qdetail::kinetic_block(ns);
  std::vector<Eigen::Triplet<std::complex<double>>> trip;
  trip.reserve(static_cast<size_t>(cfg.dim()) * (ns + 8));

  for (int s = 0; s < ns; ++s) {
    const double x = 2.0 * pi * s / ns;
    const std::complex<double> e1{std::cos(x), std::sin(x)};        // e^{+ix}
    const std::complex<double> e2 = e1 * e1;                        // e^{+2ix}
    for (int np = 0; np < nc; ++np)
      for (int nm = 0; nm < nc; ++nm) {
        const int row = qdetail::idx(cfg, s, np, nm);
        // kinetic couples sites at fixed Fock labels
        for (int s2 = 0; s2 < ns; ++s2)
          trip.emplace_back(row, qdetail::idx(cfg, s2, np, nm), kin(s, s2));
        // diagonal: gravity, detuning, dispersive shift
        const double diag = cfg.grav * x / (2.0 * pi) +
                            (cfg.u0 - cfg.delta_c) * (np + nm);
        trip.emplace_back(row, row, std::complex<double>{diag, 0.0});
        // u0 a+^dag a- e^{-2ix}: row (np, nm) <- col (np-1, nm+1)
        if (np >= 1 && nm + 1 < nc)
          trip.emplace_back(row, qdetail::idx(cfg, s, np - 1, nm + 1),
                            cfg.u0 * std::sqrt(double(np) * (nm + 1)) * std::conj(e2));
        // u0 a-^dag a+ e^{+2ix}
        if (nm >= 1 && np + 1 < nc)
          trip.emplace_back(row, qdetail::idx(cfg, s, np + 1, nm - 1),
                            cfg.u0 * std::sqrt(double(nm) * (np + 1)) * e2);
        // eta0 a+ e^{+ix}
        if (np + 1 < nc)
          trip.emplace_back(row, qdetail::idx(cfg, s, np + 1, nm),
                            cfg.eta0 * std::sqrt(double(np + 1)) * e1);
        // eta0 a+^dag e^{-ix}
        if (np >= 1)
          trip.emplace_back(row, qdetail::idx(cfg, s, np - 1, nm),
                            cfg.eta0 * std::sqrt(double(np)) * std::conj(e1));
        // eta0 a- e^{-ix}
        if (nm + 1 < nc)
          trip.emplace_back(row, qdetail::idx(cfg, s, np, nm + 1),
                            cfg.eta0 * std::sqrt(double(nm + 1)) * std::conj(e1));
        // eta0 a-^dag e^{+ix}
        if (nm >= 1)
          trip.emplace_back(row, qdetail::idx(cfg, s, np, nm - 1),
                            cfg.eta0 * std::sqrt(double(nm)) * e1);
      }
  }
  SparseH h(cfg.dim(), cfg.dim());
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

struct GroundState {
  double energy = 0.0;
  VectorXc vec;
  double residual = 0.0;
  int iterations = 0;
};

// Lanczos with full reorthogonalization, deterministic seeded start.
inline GroundState ground_state(const SparseH& h, int max_iter = 400, double tol = 1.0e-9,
                                std::uint64_t seed = 7) {
  const int dim = static_cast<int>(h.rows());
  std::mt19937_64 rng(seed);
  VectorXc v(dim);
  for (int j = 0; j < dim; ++j) {
    const double a = static_cast<double>(rng()) / 18446744073709551616.0 - 0.5;
    const double b = static_cast<double>(rng()) / 18446744073709551616.0 - 0.5;
    v(j) = {a, b};
  }
  v.normalize();

  std::vector<VectorXc> basis;
  std::vector<double> alpha, beta;
  VectorXc w;
  GroundState gs;
  const int m_max = std::min(max_iter, dim);
  for (int m = 0; m < m_max; ++m) {
    basis.push_back(v);
    w = h * v;
    alpha.push_back(std::real(v.dot(w)));
    w -= alpha.back() * v;
    if (m > 0) w -= beta.back() * basis[m - 1];
    for (const auto& q : basis) w -= q.dot(w) * q;  // full reorthogonalization
    for (const auto& q : basis) w -= q.dot(w) * q;
    const double b = w.norm();

    if (m >= 1) {
      const int k = m + 1;
      Eigen::MatrixXd tm = Eigen::MatrixXd::Zero(k, k);
      for (int j = 0; j < k; ++j) tm(j, j) = alpha[j];
      for (int j = 0; j + 1 < k; ++j) tm(j, j + 1) = tm(j + 1, j) = beta[j];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tm);
      const Eigen::VectorXd y = es.eigenvectors().col(0);
      VectorXc cand = VectorXc::Zero(dim);
      for (int j = 0; j < k; ++j) cand += y(j) * basis[j];
      cand.normalize();
      const double e = es.eigenvalues()(0);
      const double res = (h * cand - e * cand).norm();
      gs.energy = e;
      gs.vec = cand;
      gs.residual = res;
      gs.iterations = k;
      if (res < tol) return gs;
    }
    if (b < 1e-14) break;  // invariant subspace exhausted
    beta.push_back(b);
    v = w / b;
  }
  if (gs.residual >= tol)
    throw NonConvergence("ground_state: Lanczos residual " + std::to_string(gs.residual) +
                             " above tolerance",
                         false);
  return gs;
}

enum class Mode { plus, minus };

// Reduced density matrix of one cavity mode (trace over position and the
// other mode).
inline Eigen::MatrixXcd mode_density_matrix(const VectorXc& psi, const QuantumConfig& cfg,
                                            Mode mode) {
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(cfg.levels(), cfg.levels());
  for (int s = 0; s < cfg.n_sites; ++s)
    for (int a = 0; a < cfg.levels(); ++a)
      for (int b = 0; b < cfg.levels(); ++b)
        for (int o = 0; o < cfg.levels(); ++o) {
          const int i = mode == Mode::plus ? qdetail::idx(cfg, s, a, o)
                                           : qdetail::idx(cfg, s, o, a);
          const int j = mode == Mode::plus ? qdetail::idx(cfg, s, b, o)
                                           : qdetail::idx(cfg, s, o, b);
          rho(a, b) += psi(i) * std::conj(psi(j));
        }
  return rho;
}

inline double mode_occupation(const Eigen::MatrixXcd& rho) {
  double n = 0.0;
  for (int j = 0; j < rho.rows(); ++j) n += j * std::real(rho(j, j));
  return n;
}

// Population of the top Fock level: the truncation leak indicator.
inline double cutoff_leak(const Eigen::MatrixXcd& rho) {
  return std::real(rho(rho.rows() - 1, rho.rows() - 1));
}

// Husimi Q(beta) = <beta| rho |beta> / pi on the truncated space.
inline double q_function(const Eigen::MatrixXcd& rho, std::complex<double> beta) {
  const int nc = static_cast<int>(rho.rows());
  std::vector<std::complex<double>> coef(nc);
  coef[0] = std::exp(-0.5 * std::norm(beta));
  for (int j = 1; j < nc; ++j) coef[j] = coef[j - 1] * beta / std::sqrt(double(j));
  std::complex<double> q{0.0, 0.0};
  for (int a = 0; a < nc; ++a)
    for (int b = 0; b < nc; ++b) q += std::conj(coef[a]) * rho(a, b) * coef[b];
  return std::real(q) / pi;
}

// Radius of the angle-averaged Q maximum: the U(1) ring of the broken
// phase; near zero in the normal phase.
inline double ridge_radius(const Eigen::MatrixXcd& rho, double r_max = 0.0, int n_r = 400,
                           int n_ang = 64) {
  if (r_max <= 0.0) r_max = std::sqrt(static_cast<double>(rho.rows())) + 1.0;
  double best_r = 0.0, best_q = -1.0;
  for (int ir = 0; ir <= n_r; ++ir) {
    const double r = r_max * ir / n_r;
    double q = 0.0;
    for (int ia = 0; ia < n_ang; ++ia) {
      const double th = 2.0 * pi * ia / n_ang;
      q += q_function(rho, std::polar(r, th));
    }
    if (q > best_q) {
      best_q = q;
      best_r = r;
    }
  }
  return best_r;
}

// Local coherent label of the plus mode at site s: the phase of
// chi(s) = <Psi| (|s><s| tensor a+) |Psi>, i.e. the conditional field the
// particle sees at its own position.
inline std::complex<double> local_plus_label(const VectorXc& psi, const QuantumConfig& cfg,
                                             int site) {
  std::complex<double> chi{0.0, 0.0};
  for (int np = 1; np < cfg.levels(); ++np)
    for (int nm = 0; nm < cfg.levels(); ++nm)
      chi += std::conj(psi(qdetail::idx(cfg, site, np - 1, nm))) * std::sqrt(double(np)) *
             psi(qdetail::idx(cfg, site, np, nm));
  return chi;
}

// Heterodyne-style collapse: project the plus mode onto the coherent state
// whose amplitude has the ridge radius and the local label phase at the
// given site, then renormalize. Positions the atomic density at the
// collapsed lattice, turning the U(1)-symmetric ground state into a
// symmetry-broken one.
inline VectorXc collapse_plus(const VectorXc& psi, const QuantumConfig& cfg, int site,
                              double radius = -1.0) {
  const Eigen::MatrixXcd rho = mode_density_matrix(psi, cfg, Mode::plus);
  if (radius < 0.0) radius = ridge_radius(rho);
  const std::complex<double> chi = local_plus_label(psi, cfg, site);
  if (std::abs(chi) < 1e-14)
    throw std::invalid_argument("collapse_plus: vanishing local field label at site");
  const std::complex<double> beta = radius * chi / std::abs(chi);

  std::vector<std::complex<double>> coef(cfg.levels());
  coef[0] = std::exp(-0.5 * std::norm(beta));
  for (int j = 1; j < cfg.levels(); ++j) coef[j] = coef[j - 1] * beta / std::sqrt(double(j));

  VectorXc out = VectorXc::Zero(psi.size());
  for (int s = 0; s < cfg.n_sites; ++s)
    for (int nm = 0; nm < cfg.levels(); ++nm) {
      std::complex<double> ov{0.0, 0.0};
      for (int np = 0; np < cfg.levels(); ++np)
        ov += std::conj(coef[np]) * psi(qdetail::idx(cfg, s, np, nm));
      for (int np = 0; np < cfg.levels(); ++np)
        out(qdetail::idx(cfg, s, np, nm)) = coef[np] * ov;
    }
  const double n = out.norm();
  if (n < 1e-14) throw std::invalid_argument("collapse_plus: projection annihilated the state");
  return out / n;
}

// Atomic density marginal rho(x_s).
inline std::vector<double> position_density(const VectorXc& psi, const QuantumConfig& cfg) {
  std::vector<double> rho(cfg.n_sites, 0.0);
  for (int s = 0; s < cfg.n_sites; ++s)
    for (int np = 0; np < cfg.levels(); ++np)
      for (int nm = 0; nm < cfg.levels(); ++nm)
        rho[s] += std::norm(psi(qdetail::idx(cfg, s, np, nm)));
  return rho;
}

// U(1) winding operator: translate the particle by one site and rotate the
// mode phases oppositely, U = T_delta x e^{-i delta n+} x e^{+i delta n-}
// with delta = 2 pi / n_sites; commutes with H at grav = 0. (Shifting the
// state by +delta conjugates operators by x -> x - delta, so e^{+-ix}
// factors pick up e^{-+i delta} and the mode rotations must compensate
// with the opposite signs.)
inline VectorXc apply_symmetry(const VectorXc& psi, const QuantumConfig& cfg) {
  const double delta = 2.0 * pi / cfg.n_sites;
  VectorXc out(psi.size());
  for (int s = 0; s < cfg.n_sites; ++s) {
    const int s_from = (s - 1 + cfg.n_sites) % cfg.n_sites;
    for (int np = 0; np < cfg.levels(); ++np)
      for (int nm = 0; nm < cfg.levels(); ++nm) {
        const std::complex<double> ph =
            std::polar(1.0, delta * (static_cast<double>(nm) - static_cast<double>(np)));
        out(qdetail::idx(cfg, s, np, nm)) = ph * psi(qdetail::idx(cfg, s_from, np, nm));
      }
  }
  return out;
}

}  // namespace rgsim
