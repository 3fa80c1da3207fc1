#pragma once

// Phase and position observables on the coupled state, unwrapped traces,
// and the CSV trace writer.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rgsim/core.hpp"
#include "rgsim/meanfield.hpp"

namespace rgsim {

// Relative cavity phase phi = (arg a+ - arg a-)/2, reduced to the branch
// (-pi/2, pi/2]. Individual args live on (-pi, pi], so the raw half
// difference lands in (-pi, pi] and phi is only defined mod pi (swapping
// the pi ambiguity of the standing-wave pattern).
inline double rel_phase(const CavityState& cavity) {
  if (std::abs(cavity.alpha_plus) < 1e-12 || std::abs(cavity.alpha_minus) < 1e-12)
    throw std::invalid_argument("rel_phase: undefined phase, |alpha| < 1e-12");
  double p = 0.5 * (std::arg(cavity.alpha_plus) - std::arg(cavity.alpha_minus));
  while (p > pi / 2.0) p -= pi;
  while (p <= -pi / 2.0) p += pi;
  return p;
}

// Total cavity phase Phi = (arg a+ + arg a-)/2 on (-pi/2, pi/2].
inline double tot_phase(const CavityState& cavity) {
  if (std::abs(cavity.alpha_plus) < 1e-12 || std::abs(cavity.alpha_minus) < 1e-12)
    throw std::invalid_argument("tot_phase: undefined phase, |alpha| < 1e-12");
  double p = 0.5 * (std::arg(cavity.alpha_plus) + std::arg(cavity.alpha_minus));
  while (p > pi / 2.0) p -= pi;
  while (p <= -pi / 2.0) p += pi;
  return p;
}

// Center of mass as the circular mean of the density at the lattice
// wavelength: x_com = arg Int rho(x) e^{ix} dx, on (-pi, pi]. For a
// lattice-periodic density this is the position of the occupied well
// pattern; a box-wavelength circular mean would vanish identically.
inline double center_of_mass(const CondensateState& state, const Grid& grid) {
  complex m{0.0, 0.0};
  for (int j = 0; j < grid.n; ++j)
    m += std::norm(state.psi[j]) * grid.spacing *
         complex{std::cos(grid.points[j]), std::sin(grid.points[j])};
  if (std::abs(m) < 1e-12)
    throw std::invalid_argument("center_of_mass: undefined for (near-)uniform density");
  return std::arg(m);
}

inline double condensate_norm(const CondensateState& state, const Grid& grid) {
  double n = 0.0;
  for (const auto& a : state.psi) n += std::norm(a);
  return n * grid.spacing;
}

// One sampled row of a trajectory.
struct TraceRow {
  double t = 0.0;
  double phi = 0.0;    // unwrapped relative phase (branch jumps of pi removed)
  double Phi = 0.0;    // total phase, raw branch
  double x_com = 0.0;  // unwrapped COM displacement
  double n_plus = 0.0;
  double n_minus = 0.0;
  double norm = 0.0;
};

struct Trace {
  std::vector<TraceRow> rows;
};

// Incrementally unwraps phi (period pi) and x_com (period 2 pi) across
// samples; callers must sample densely enough that successive jumps stay
// below half a period.
class TraceRecorder {
 public:
  void sample(const SystemState& state, const Grid& grid) {
    TraceRow row;
    row.t = state.time;
    const double phi_raw = rel_phase(state.cavity);
    const double com_raw = center_of_mass(state.condensate, grid);
    if (!trace_.rows.empty()) {
      phi_off_ += wrap_delta(phi_raw - last_phi_, pi) - (phi_raw - last_phi_);
      com_off_ += wrap_delta(com_raw - last_com_, 2.0 * pi) - (com_raw - last_com_);
    }
    last_phi_ = phi_raw;
    last_com_ = com_raw;
    row.phi = phi_raw + phi_off_;
    row.x_com = com_raw + com_off_;
    row.Phi = tot_phase(state.cavity);
    row.n_plus = std::norm(state.cavity.alpha_plus);
    row.n_minus = std::norm(state.cavity.alpha_minus);
    row.norm = condensate_norm(state.condensate, grid);
    trace_.rows.push_back(row);
  }

  const Trace& trace() const { return trace_; }

 private:
  static double wrap_delta(double d, double period) {
    return d - period * std::round(d / period);
  }
  Trace trace_;
  double last_phi_ = 0.0, last_com_ = 0.0;
  double phi_off_ = 0.0, com_off_ = 0.0;
};

// Lattice-dragging residual r(t) = dphi + dx_com relative to the first
// sample: perfect dragging (the lattice falling rigidly with the cloud)
// keeps phi + x_com constant.
inline std::vector<double> dragging_residual(const Trace& trace) {
  std::vector<double> r;
  r.reserve(trace.rows.size());
  if (trace.rows.empty()) return r;
  const double base = trace.rows.front().phi + trace.rows.front().x_com;
  for (const auto& row : trace.rows) r.push_back(row.phi + row.x_com - base);
  return r;
}

// Mean homodyne quadrature at local-oscillator phase gamma,
//   <Q> = Re[(a+ + a-) e^{-i gamma}],
// which reduces to sqrt(n) cos(phi) cos(Phi - gamma) for equal amplitudes
// (n the total photon number).
inline double homodyne_expectation(const CavityState& cavity, double gamma) {
  return std::real((cavity.alpha_plus + cavity.alpha_minus) *
                   complex{std::cos(gamma), -std::sin(gamma)});
}

inline void write_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open trace file for writing: " + path);
  f << "t,phi,Phi,x_com,n_plus,n_minus,norm\n";
  char buf[512];
  for (const auto& r : trace.rows) {
    std::snprintf(buf, sizeof(buf),
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.phi, r.Phi,
                  r.x_com, r.n_plus, r.n_minus, r.norm);
    f << buf;
  }
}

inline Trace read_trace_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open trace file: " + path);
  std::string line;
  std::getline(f, line);  // header
  Trace trace;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    TraceRow r;
    if (std::sscanf(line.c_str(), "%lg,%lg,%lg,%lg,%lg,%lg,%lg", &r.t, &r.phi, &r.Phi,
                    &r.x_com, &r.n_plus, &r.n_minus, &r.norm) != 7)
      throw std::runtime_error("malformed trace row: " + line);
    trace.rows.push_back(r);
  }
  return trace;
}

}  // namespace rgsim
