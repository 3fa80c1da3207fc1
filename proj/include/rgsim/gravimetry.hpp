#pragma once

// Metrology layer: damped-dragging phase model, sensitivity, Fisher
// information of homodyne phase readout, and maximum-likelihood recovery
// of g from simulated homodyne records.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgsim/core.hpp"
#include "rgsim/observables.hpp"

namespace rgsim {

// Kernel of the damped-dragging model phidd = zeta g k_c - xi phid:
//   K(t) = (e^{-xi t} + xi t - 1) / xi^2,
// so phi(t) = zeta g k_c K(t) + phi0. Series-expanded for xi t << 1 where
// the closed form loses all significant digits: K = t^2 (1/2 - u/6 +
// u^2/24 - u^3/120 + ...), u = xi t.
inline double phase_kernel(double t, double xi) {
  const double u = xi * t;
  if (std::abs(u) < 1.0e-4) {
    return t * t * (0.5 + u * (-1.0 / 6.0 + u * (1.0 / 24.0 + u * (-1.0 / 120.0))));
  }
  return (std::exp(-u) + u - 1.0) / (xi * xi);
}

inline double heuristic_phase(double t, double g, double k_c, double zeta, double xi,
                              double phi0 = 0.0) {
  return zeta * g * k_c * phase_kernel(t, xi) + phi0;
}

// Max over interior points of |phidd + xi phid - zeta g k_c| by central
// differences on a uniformly sampled series; verifies that a phi(t) record
// obeys the damped-dragging ODE.
inline double heuristic_ode_residual(const std::vector<double>& t,
                                     const std::vector<double>& phi, double g, double k_c,
                                     double zeta, double xi) {
  if (t.size() != phi.size() || t.size() < 3)
    throw std::invalid_argument("heuristic_ode_residual needs >= 3 matched samples");
  const double h = t[1] - t[0];
  double worst = 0.0;
  for (size_t j = 1; j + 1 < t.size(); ++j) {
    const double fd2 = (phi[j + 1] - 2.0 * phi[j] + phi[j - 1]) / (h * h);
    const double fd1 = (phi[j + 1] - phi[j - 1]) / (2.0 * h);
    worst = std::max(worst, std::abs(fd2 + xi * fd1 - zeta * g * k_c));
  }
  return worst;
}

struct HeuristicFit {
  double zeta = 0.0;
  double xi = 0.0;
  double phi0 = 0.0;
  double residual_max = 0.0;
  double residual_rms = 0.0;
  double terminal_velocity = 0.0;  // v_inf = zeta g k_c / xi
  double tail_r2 = 0.0;
  bool ok = false;
  std::string error;
};

// Two-stage fit of phi(t) samples to the kernel model, anchored by the
// late-time linear asymptote:
//   stage 1: linear regression on the final quarter of the record gives
//            the terminal velocity v_inf (rejected if R^2 < 0.999, i.e.
//            the record never reached the damped regime);
//   stage 2: golden-section search over xi with zeta = v_inf xi / (g k_c)
//            and phi0 taken as the residual mean (its least-squares
//            optimum at fixed zeta, xi).
inline HeuristicFit fit_heuristic(const std::vector<double>& t, const std::vector<double>& phi,
                                  double g, double k_c, double xi_lo = 1.0e-3,
                                  double xi_hi = 50.0) {
  HeuristicFit fit;
  if (t.size() != phi.size() || t.size() < 8) {
    fit.error = "fit needs matched samples, at least 8";
    return fit;
  }
  const size_t n = t.size();
  const size_t tail0 = n - n / 4;
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const double m = static_cast<double>(n - tail0);
  for (size_t j = tail0; j < n; ++j) {
    sx += t[j];
    sy += phi[j];
    sxx += t[j] * t[j];
    sxy += t[j] * phi[j];
    syy += phi[j] * phi[j];
  }
  const double vden = m * sxx - sx * sx;
  if (std::abs(vden) < 1e-30) {
    fit.error = "degenerate tail abscissa";
    return fit;
  }
  const double v_inf = (m * sxy - sx * sy) / vden;
  const double r2den = (m * sxx - sx * sx) * (m * syy - sy * sy);
  const double r2 = r2den > 0 ? (m * sxy - sx * sy) * (m * sxy - sx * sy) / r2den : 0.0;
  fit.tail_r2 = r2;
  if (r2 < 0.999) {
    fit.error = "tail not linear (R^2 < 0.999); record too short for terminal regime";
    return fit;
  }

  auto sse_at = [&](double xi, double* phi0_out) {
    const double zeta = v_inf * xi / (g * k_c);
    double mean_res = 0.0;
    for (size_t j = 0; j < n; ++j)
      mean_res += phi[j] - zeta * g * k_c * phase_kernel(t[j], xi);
    mean_res /= static_cast<double>(n);
    double sse = 0.0;
    for (size_t j = 0; j < n; ++j) {
      const double r = phi[j] - zeta * g * k_c * phase_kernel(t[j], xi) - mean_res;
      sse += r * r;
    }
    if (phi0_out) *phi0_out = mean_res;
    return sse;
  };

  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(xi_lo), b = std::log(xi_hi);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = sse_at(std::exp(c), nullptr), fd = sse_at(std::exp(d), nullptr);
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = sse_at(std::exp(c), nullptr);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = sse_at(std::exp(d), nullptr);
    }
  }
  fit.xi = std::exp(0.5 * (a + b));
  if (fit.xi < xi_lo * 1.001 || fit.xi > xi_hi * 0.999) {
    fit.error = "xi search hit its bounds [" + std::to_string(xi_lo) + ", " +
                std::to_string(xi_hi) + "]";
    return fit;
  }
  sse_at(fit.xi, &fit.phi0);
  fit.zeta = v_inf * fit.xi / (g * k_c);
  fit.terminal_velocity = v_inf;

  double sse = 0.0;
  for (size_t j = 0; j < n; ++j) {
    const double r =
        phi[j] - heuristic_phase(t[j], g, k_c, fit.zeta, fit.xi, fit.phi0);
    fit.residual_max = std::max(fit.residual_max, std::abs(r));
    sse += r * r;
  }
  fit.residual_rms = std::sqrt(sse / static_cast<double>(n));
  fit.ok = true;
  return fit;
}

struct MetrologyParams {
  double zeta = 0.007;
  double xi = 0.167;               // same time unit as the t passed in
  double k_c = 1.0;                // same length unit as g; SI bridging happens here
  double n_photons = 2.5e11;       // mean total photon number n
  double m_repeats = 1.0;          // measurement repetitions m
  double detection_eff = 1.0;      // multiplies the effective photon number
  double phi0 = 0.0;
  double g_true = 9.81;            // for relative sensitivity Delta g / g
};

inline void to_json(nlohmann::json& j, const MetrologyParams& mp) {
  j = nlohmann::json{{"zeta", mp.zeta},
                     {"xi", mp.xi},
                     {"k_c", mp.k_c},
                     {"n_photons", mp.n_photons},
                     {"m_repeats", mp.m_repeats},
                     {"detection_eff", mp.detection_eff},
                     {"phi0", mp.phi0},
                     {"g_true", mp.g_true}};
}

inline void from_json(const nlohmann::json& j, MetrologyParams& mp) {
  mp.zeta = j.value("zeta", mp.zeta);
  mp.xi = j.value("xi", mp.xi);
  mp.k_c = j.value("k_c", mp.k_c);
  mp.n_photons = j.value("n_photons", mp.n_photons);
  mp.m_repeats = j.value("m_repeats", mp.m_repeats);
  mp.detection_eff = j.value("detection_eff", mp.detection_eff);
  mp.phi0 = j.value("phi0", mp.phi0);
  mp.g_true = j.value("g_true", mp.g_true);
}

// Shot-noise-limited sensitivity of the kernel readout,
//   dg = 1 / (2 sqrt(n m) zeta k_c K(t)).
inline double sensitivity(const MetrologyParams& mp, double t) {
  const double k = phase_kernel(t, mp.xi);
  const double n_eff = mp.n_photons * mp.detection_eff * mp.m_repeats;
  if (k <= 0.0 || n_eff <= 0.0)
    throw std::invalid_argument("sensitivity undefined for K(t) <= 0 or n <= 0");
  return 1.0 / (2.0 * std::sqrt(n_eff) * mp.zeta * mp.k_c * k);
}

inline double sensitivity_relative(const MetrologyParams& mp, double t) {
  return sensitivity(mp, t) / mp.g_true;
}

// Homodyne outcome density for the phase quadrature of a coherent state,
// variance 1/4: p(q|g) = sqrt(2/pi) exp(-2 (q - sqrt(n) cos phi(g))^2).
inline double homodyne_pdf(double q, double g, double t, const MetrologyParams& mp) {
  const double phi = heuristic_phase(t, g, mp.k_c, mp.zeta, mp.xi, mp.phi0);
  const double mu = std::sqrt(mp.n_photons * mp.detection_eff) * std::cos(phi);
  const double r = q - mu;
  return std::sqrt(2.0 / pi) * std::exp(-2.0 * r * r);
}

// Classical Fisher information of the homodyne record about g:
//   F = 4 n [ zeta k_c K(t) sin phi ]^2   (per shot; m enters as 1/sqrt(m F)).
inline double fisher_classical(double g, double t, const MetrologyParams& mp) {
  const double phi = heuristic_phase(t, g, mp.k_c, mp.zeta, mp.xi, mp.phi0);
  const double s = mp.zeta * mp.k_c * phase_kernel(t, mp.xi) * std::sin(phi);
  return 4.0 * mp.n_photons * mp.detection_eff * s * s;
}

// Quantum Fisher information (coherent-state phase generator bound):
//   F_Q = 4 n [ zeta k_c K(t) ]^2, the phi-optimum of F (sin^2 phi = 1).
inline double fisher_quantum(double g, double t, const MetrologyParams& mp) {
  (void)g;
  const double s = mp.zeta * mp.k_c * phase_kernel(t, mp.xi);
  return 4.0 * mp.n_photons * mp.detection_eff * s * s;
}

namespace gdetail {

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double fa, double fm, double fb, double whole, double eps,
                               int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0) throw NonConvergence("fisher quadrature: recursion depth exhausted", false);
  if (std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double eps = 1e-12) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, eps, 48);
}

}  // namespace gdetail

// Defining-integral evaluation of the classical Fisher information,
//   F = Int dq [d_g p(q|g)]^2 / p(q|g),
// with a central finite difference in g; numerical oracle for the closed
// form above.
inline double fisher_classical_numeric(double g, double t, const MetrologyParams& mp,
                                       double rel_dg = 1.0e-5) {
  const double dg = std::max(std::abs(g), 1.0) * rel_dg;
  const double amp = std::sqrt(mp.n_photons * mp.detection_eff);
  const double mu = amp * std::cos(heuristic_phase(t, g, mp.k_c, mp.zeta, mp.xi, mp.phi0));
  auto integrand = [&](double q) {
    const double p = homodyne_pdf(q, g, t, mp);
    const double dp =
        (homodyne_pdf(q, g + dg, t, mp) - homodyne_pdf(q, g - dg, t, mp)) / (2.0 * dg);
    if (p < 1e-300) return 0.0;
    return dp * dp / p;
  };
  // the Gaussian has variance 1/4; +-10 sigma around the mean captures it.
  // Tolerance scales with F_Q >= F so large-n information stays resolvable
  // to ~1e-10 relative within the recursion budget. Integrate over fixed
  // unit-width panels: the integrand vanishes at q = mu (dp is odd there),
  // so a single adaptive pass over the whole range can falsely converge to
  // zero when all its initial sample points land on the symmetry axis and
  // the far tails.
  const double eps = 1.0e-10 * (1.0 + fisher_quantum(g, t, mp));
  double total = 0.0;
  for (int k = 0; k < 10; ++k)
    total += gdetail::integrate(integrand, mu - 5.0 + k, mu - 4.0 + k, eps / 10.0);
  return total;
}

struct HomodyneSample {
  double t = 0.0;
  double q = 0.0;
};

// Draws one homodyne record along the given sampling times; Gaussian noise
// with variance 1/4 via Box-Muller on a mt19937_64 stream, so records are
// bit-reproducible per seed across platforms.
inline std::vector<HomodyneSample> sample_record(const std::vector<double>& times, double g,
                                                 const MetrologyParams& mp, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto gauss = [&rng]() {
    double u1 = 0.0;
    while (u1 <= 0.0)
      u1 = static_cast<double>(rng()) * (1.0 / 18446744073709551616.0);
    const double u2 = static_cast<double>(rng()) * (1.0 / 18446744073709551616.0);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
  };
  std::vector<HomodyneSample> rec;
  rec.reserve(times.size());
  const double amp = std::sqrt(mp.n_photons * mp.detection_eff);
  for (double t : times) {
    const double phi = heuristic_phase(t, g, mp.k_c, mp.zeta, mp.xi, mp.phi0);
    rec.push_back({t, amp * std::cos(phi) + 0.5 * gauss()});
  }
  return rec;
}

struct GEstimate {
  double g = 0.0;
  double stderr_g = 0.0;
  double nll = 0.0;
  bool ok = false;
  std::string error;
};

// Maximum-likelihood g from a homodyne record: golden-section search of the
// negative log-likelihood over a bracket around g_guess, standard error
// from the local curvature. Flags non-identifiable records (flat NLL).
inline GEstimate estimate_g(const std::vector<HomodyneSample>& record, double g_guess,
                            const MetrologyParams& mp, double bracket_frac = 0.02) {
  GEstimate est;
  if (record.empty()) {
    est.error = "empty record";
    return est;
  }
  auto nll = [&](double g) {
    double s = 0.0;
    const double amp = std::sqrt(mp.n_photons * mp.detection_eff);
    for (const auto& r : record) {
      const double phi = heuristic_phase(r.t, g, mp.k_c, mp.zeta, mp.xi, mp.phi0);
      const double d = r.q - amp * std::cos(phi);
      s += 2.0 * d * d;
    }
    return s;
  };
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = g_guess * (1.0 - bracket_frac), b = g_guess * (1.0 + bracket_frac);
  if (a > b) std::swap(a, b);
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = nll(c), fd = nll(d);
  for (int it = 0; it < 300 && b - a > std::abs(g_guess) * 1e-14; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = nll(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = nll(d);
    }
  }
  est.g = 0.5 * (a + b);
  est.nll = nll(est.g);

  const double h = std::max(std::abs(est.g) * 1e-7, 1e-12);
  const double curv = (nll(est.g + h) - 2.0 * est.nll + nll(est.g - h)) / (h * h);
  if (!(curv > 0.0) || !std::isfinite(curv)) {
    est.error = "non-identifiable record: likelihood has no curvature in g";
    return est;
  }
  // NLL here is 2 sum d^2 = -log L + const for variance 1/4, so the
  // observed-information variance is 1/curv.
  est.stderr_g = std::sqrt(1.0 / curv);
  est.ok = true;
  return est;
}

}  // namespace rgsim
