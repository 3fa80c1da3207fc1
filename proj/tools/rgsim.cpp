// Scenario front end: one scenario per invocation, deterministic artifacts
// under --out, manifest.json describing every run.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgsim/core.hpp"
#include "rgsim/gravimetry.hpp"
#include "rgsim/meanfield.hpp"
#include "rgsim/observables.hpp"
#include "rgsim/quantum.hpp"
#include "rgsim/scenarios.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// RGSIM_<FIELD> overrides the config field <field> wherever it lives
// (top level, params, metrology, quantum or options). Values parse as JSON
// when possible, else as strings.
void apply_env_overrides(json& cfg, char** envp) {
  static const char* sections[] = {"params", "metrology", "quantum", "options"};
  for (char** e = envp; e && *e; ++e) {
    const std::string kv = *e;
    if (kv.rfind("RGSIM_", 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    std::string key = kv.substr(6, eq - 6);
    for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const std::string raw = kv.substr(eq + 1);
    json val;
    try {
      val = json::parse(raw);
    } catch (const json::parse_error&) {
      val = raw;
    }
    bool placed = false;
    for (const char* sec : sections) {
      if (cfg.contains(sec) && cfg[sec].contains(key)) {
        cfg[sec][key] = val;
        placed = true;
      }
    }
    if (cfg.contains(key)) {
      cfg[key] = val;
      placed = true;
    }
    if (!placed) {
      // unknown fields land in params by default: that is where the 1:1
      // mapping points for the documented schema
      static const char* simfields[] = {"delta_c", "kappa",   "u0n",    "eta0rn", "grav",
                                        "n_atoms", "box_len", "n_grid", "dt"};
      bool is_sim = false;
      for (const char* f : simfields) is_sim |= key == f;
      if (is_sim)
        cfg["params"][key] = val;
      else
        cfg["options"][key] = val;
    }
  }
}

void write_manifest(const fs::path& out, const json& cfg, const std::string& scenario,
                    std::uint64_t seed, double wall_seconds, const std::vector<std::string>& files,
                    const json& results = json::object()) {
  json m;
  m["scenario"] = scenario;
  m["seed"] = seed;
  m["config"] = cfg;
  m["code_version"] = kVersion;
  m["wall_seconds"] = wall_seconds;
  m["artifacts"] = files;
  m["results"] = results;
  std::ofstream f(out / "manifest.json");
  f << m.dump(2) << '\n';
}

json opt(const json& cfg) { return cfg.value("options", json::object()); }

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int j = 0; j < n; ++j) v[j] = a + (b - a) * j / (n - 1);
  return v;
}

int run_steady_state(const json& cfg, const fs::path& out, std::uint64_t seed, json& results,
                     std::vector<std::string>& files) {
  const rgsim::SimParams params = cfg.value("params", rgsim::SimParams{});
  const rgsim::Grid grid = rgsim::make_grid(params);
  const json o = opt(cfg);
  const double seed_phase = o.value("seed_phase", 0.0);

  rgsim::SimParams p0 = params;
  p0.grav = 0.0;
  const rgsim::SystemState ss = rgsim::find_steady_state(p0, grid, seed_phase);
  const rgsim::OrderParams op = rgsim::order_params(ss.condensate, grid);
  const double n_mf = std::norm(ss.cavity.alpha_plus) + std::norm(ss.cavity.alpha_minus);

  results["alpha_plus_abs"] = std::abs(ss.cavity.alpha_plus);
  results["alpha_minus_abs"] = std::abs(ss.cavity.alpha_minus);
  results["n_photons_meanfield"] = n_mf;
  results["n_photons_absolute"] = n_mf * params.n_atoms;
  results["bunching_abs"] = std::abs(op.bunching);
  results["rel_phase"] = n_mf > 1e-12 ? rgsim::rel_phase(ss.cavity) : 0.0;

  // photon populations under gravity vs without: the deviation is measured,
  // not asserted (no asserted tolerance)
  if (params.grav != 0.0) {
    rgsim::SystemState falling = ss;
    rgsim::Stepper st(params, grid);
    const int n_steps = static_cast<int>(std::round(o.value("grav_probe_time", 2.0) / params.dt));
    for (int s = 0; s < n_steps; ++s) st.step(falling);
    const double n_grav =
        std::norm(falling.cavity.alpha_plus) + std::norm(falling.cavity.alpha_minus);
    results["n_photons_under_gravity"] = n_grav;
    results["gravity_photon_deviation"] = std::abs(n_grav - n_mf) / n_mf;
  }

  if (o.value("report_threshold", true)) {
    results["eta_c"] = rgsim::find_threshold(params, grid);
  }

  rgsim::save_checkpoint(ss, p0, (out / "steady_state.ckpt").string());
  files.push_back("steady_state.ckpt");
  (void)seed;
  return 0;
}

int run_fall(const json& cfg, const fs::path& out, std::uint64_t seed, json& results,
             std::vector<std::string>& files) {
  const rgsim::SimParams params = cfg.value("params", rgsim::SimParams{});
  const rgsim::Grid grid = rgsim::make_grid(params);
  const json o = opt(cfg);
  rgsim::FallOptions fo;
  fo.seed_phase = o.value("seed_phase", fo.seed_phase);
  fo.envelope_sigma = o.value("envelope_sigma", fo.envelope_sigma);
  fo.settle_time = o.value("settle_time", fo.settle_time);
  fo.t_final = o.value("t_final", fo.t_final);
  fo.sample_every = o.value("sample_every", fo.sample_every);

  const rgsim::Trace trace = rgsim::run_fall(params, grid, fo);
  rgsim::write_trace_csv(trace, (out / "trace.csv").string());
  files.push_back("trace.csv");

  const auto& rows = trace.rows;
  results["phi_final"] = rows.back().phi - rows.front().phi;
  results["x_com_final"] = rows.back().x_com - rows.front().x_com;
  results["n_samples"] = rows.size();
  (void)seed;
  return 0;
}

int run_goldstone(const json& cfg, const fs::path& out, std::uint64_t seed, json& results,
                  std::vector<std::string>& files) {
  const rgsim::SimParams params = cfg.value("params", rgsim::SimParams{});
  const rgsim::Grid grid = rgsim::make_grid(params);
  const json o = opt(cfg);
  const rgsim::GoldstoneResult res = rgsim::run_goldstone_kick(
      params, grid, o.value("kick", 0.125), o.value("t_final", 20.0), o.value("sample_every", 40),
      o.value("seed_phase", 0.0));
  rgsim::write_trace_csv(res.trace, (out / "trace.csv").string());
  files.push_back("trace.csv");
  results["v_early"] = res.v_early;
  results["v_late"] = res.v_late;
  results["velocity_decay"] = res.decay;
  const auto r = rgsim::dragging_residual(res.trace);
  double rmax = 0.0;
  for (double x : r) rmax = std::max(rmax, std::abs(x));
  results["dragging_residual_max"] = rmax;
  (void)seed;
  return 0;
}

int run_fit(const json& cfg, const fs::path& out, std::uint64_t seed, json& results,
            std::vector<std::string>& files) {
  const json o = opt(cfg);
  if (!o.contains("trace_csv")) throw std::invalid_argument("fit: options.trace_csv is required");
  const rgsim::Trace trace = rgsim::read_trace_csv(o.at("trace_csv").get<std::string>());
  const rgsim::SimParams params = cfg.value("params", rgsim::SimParams{});
  // in recoil units g*k_c = grav/pi (V_g slope grav/(2 pi), M = 1/2)
  const double g = o.value("g", params.grav / rgsim::pi);
  const double k_c = o.value("k_c", 1.0);
  std::vector<double> t, phi;
  for (const auto& row : trace.rows) {
    t.push_back(row.t);
    phi.push_back(row.phi - trace.rows.front().phi);
  }
  const rgsim::HeuristicFit fit = rgsim::fit_heuristic(t, phi, g, k_c);
  json jf;
  jf["ok"] = fit.ok;
  jf["xi"] = fit.xi;
  jf["zeta"] = fit.zeta;
  jf["phi0"] = fit.phi0;
  jf["terminal_velocity"] = fit.terminal_velocity;
  jf["residual_max"] = fit.residual_max;
  jf["residual_rms"] = fit.residual_rms;
  jf["tail_r2"] = fit.tail_r2;
  jf["error"] = fit.error;
  jf["seed"] = seed;
  std::ofstream f(out / "fit.json");
  f << jf.dump(2) << '\n';
  files.push_back("fit.json");
  results = jf;
  if (!fit.ok) throw rgsim::NonConvergence("fit: " + fit.error, false);
  return 0;
}

void write_curves(const fs::path& path, const std::vector<double>& ts,
                  const rgsim::MetrologyParams& mp, double g) {
  std::ofstream f(path);
  f << "t,dg,dg_over_g,F,F_q\n";
  char buf[512];
  for (double t : ts) {
    const double dg = rgsim::sensitivity(mp, t);
    const double fc = rgsim::fisher_classical(g, t, mp);
    const double fq = rgsim::fisher_quantum(g, t, mp);
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n", t, dg, dg / mp.g_true, fc,
                  fq);
    f << buf;
  }
}

int run_curves(const json& cfg, const fs::path& out, std::uint64_t seed, json& results,
               std::vector<std::string>& files, const std::string& which) {
  const rgsim::MetrologyParams mp = cfg.value("metrology", rgsim::MetrologyParams{});
  const json o = opt(cfg);
  const double t0 = o.value("t_min", 1.0e-2);
  const double t1 = o.value("t_max", 10.0);
  const int n = o.value("n_points", 200);
  const double g = o.value("g", mp.g_true);
  std::vector<double> ts(n);
  const double lr = std::log(t1 / t0);
  for (int j = 0; j < n; ++j) ts[j] = t0 * std::exp(lr * j / (n - 1));
  const std::string fname = which + ".csv";
  write_curves(out / fname, ts, mp, g);
  files.push_back(fname);
  results["dg_over_g_at_t1"] = rgsim::sensitivity(mp, 1.0) / mp.g_true;
  (void)seed;
  return 0;
}

int run_estimate(const json& cfg, const fs::path& out, std::uint64_t seed, json& results,
                 std::vector<std::string>& files) {
  const rgsim::MetrologyParams mp = cfg.value("metrology", rgsim::MetrologyParams{});
  const json o = opt(cfg);
  const double g_true = mp.g_true;

  if (o.contains("record_csv")) {
    std::ifstream f(o.at("record_csv").get<std::string>());
    if (!f) throw std::invalid_argument("estimate: cannot open record_csv");
    std::string line;
    std::getline(f, line);
    std::vector<rgsim::HomodyneSample> rec;
    while (std::getline(f, line)) {
      rgsim::HomodyneSample s;
      if (std::sscanf(line.c_str(), "%lg,%lg", &s.t, &s.q) == 2) rec.push_back(s);
    }
    const rgsim::GEstimate est = rgsim::estimate_g(rec, o.value("g_guess", g_true), mp);
    if (!est.ok) throw rgsim::NonConvergence("estimate: " + est.error, false);
    results["g_hat"] = est.g;
    results["stderr"] = est.stderr_g;
  } else {
    const int n_records = o.value("n_records", 500);
    const int n_samples = o.value("n_samples", 200);
    const double t0 = o.value("t_min", 0.1);
    const double t1 = o.value("t_max", 60.0);
    const std::vector<double> ts = linspace(t0, t1, n_samples);
    double mean = 0.0, m2 = 0.0;
    std::ofstream f(out / "estimates.csv");
    f << "record,g_hat,stderr\n";
    for (int r = 0; r < n_records; ++r) {
      const auto rec = rgsim::sample_record(ts, g_true, mp, seed + static_cast<std::uint64_t>(r));
      const rgsim::GEstimate est = rgsim::estimate_g(rec, g_true, mp);
      if (!est.ok) throw rgsim::NonConvergence("estimate: " + est.error, false);
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", r, est.g, est.stderr_g);
      f << buf;
      const double d = est.g - mean;
      mean += d / (r + 1);
      m2 += d * (est.g - mean);
    }
    files.push_back("estimates.csv");
    results["g_true"] = g_true;
    results["mean_g_hat"] = mean;
    results["std_g_hat"] = std::sqrt(m2 / (n_records - 1));
    double fisher_total = 0.0;
    for (double t : ts) fisher_total += rgsim::fisher_classical(g_true, t, mp);
    results["crb"] = 1.0 / std::sqrt(fisher_total);
  }
  return 0;
}

int run_scan(const json& cfg, const fs::path& out, std::uint64_t seed, json& results,
             std::vector<std::string>& files) {
  const rgsim::SimParams params = cfg.value("params", rgsim::SimParams{});
  const rgsim::Grid grid = rgsim::make_grid(params);
  const json o = opt(cfg);
  std::vector<double> ns;
  if (o.contains("n_atoms_list"))
    ns = o.at("n_atoms_list").get<std::vector<double>>();
  else {
    const int pts = o.value("n_points", 9);
    for (int j = 0; j < pts; ++j)
      ns.push_back(params.n_atoms * std::pow(4.0, (j - pts / 2) / static_cast<double>(pts - 1)));
  }
  const auto scan = rgsim::photon_scan(params, grid, ns, o.value("seed_phase", 0.0));
  std::ofstream f(out / "scan.csv");
  f << "n_atoms,n_photons\n";
  char buf[160];
  for (const auto& p : scan) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.n_atoms, p.n_photons);
    f << buf;
  }
  files.push_back("scan.csv");
  const rgsim::PowerLawFit fit = rgsim::fit_power_law(scan);
  if (!fit.ok) throw rgsim::NonConvergence("scan-N: " + fit.error, false);
  results["prefactor_a"] = fit.prefactor;
  results["exponent_b"] = fit.exponent;
  (void)seed;
  return 0;
}

void write_q_grid(const fs::path& path, const Eigen::MatrixXcd& rho, double r_max, int n_pts) {
  std::ofstream f(path);
  f << "re_beta,im_beta,Q\n";
  char buf[200];
  for (int ix = 0; ix < n_pts; ++ix)
    for (int iy = 0; iy < n_pts; ++iy) {
      const double re = -r_max + 2.0 * r_max * ix / (n_pts - 1);
      const double im = -r_max + 2.0 * r_max * iy / (n_pts - 1);
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", re, im,
                    rgsim::q_function(rho, {re, im}));
      f << buf;
    }
}

void write_density(const fs::path& path, const std::vector<double>& rho, int n_sites) {
  std::ofstream f(path);
  f << "x,density\n";
  char buf[120];
  for (int s = 0; s < n_sites; ++s) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", 2.0 * rgsim::pi * s / n_sites, rho[s]);
    f << buf;
  }
}

int run_quantum(const json& cfg, const fs::path& out, std::uint64_t seed, json& results,
                std::vector<std::string>& files, bool do_collapse) {
  const rgsim::QuantumConfig qc = cfg.value("quantum", rgsim::QuantumConfig{});
  const json o = opt(cfg);
  const auto h = rgsim::build_hamiltonian(qc);
  const rgsim::GroundState gs = rgsim::ground_state(h, 400, 1e-9, seed == 0 ? 7 : seed);

  const auto rho_p = rgsim::mode_density_matrix(gs.vec, qc, rgsim::Mode::plus);
  const auto rho_m = rgsim::mode_density_matrix(gs.vec, qc, rgsim::Mode::minus);
  results["energy"] = gs.energy;
  results["residual"] = gs.residual;
  results["n_plus"] = rgsim::mode_occupation(rho_p);
  results["n_minus"] = rgsim::mode_occupation(rho_m);
  const double leak = rgsim::cutoff_leak(rho_p) + rgsim::cutoff_leak(rho_m);
  results["cutoff_leak"] = leak;
  if (leak > 1e-6)
    std::cerr << "warning: Fock population at the cutoff is " << leak
              << " (> 1e-6); raise fock_cutoff for converged Q functions\n";

  const double ridge = rgsim::ridge_radius(rho_p);
  results["ridge_radius"] = ridge;
  const double r_max = o.value("q_grid_radius", ridge + 2.0);
  const int n_pts = o.value("q_grid_points", 61);
  write_q_grid(out / "q_plus.csv", rho_p, r_max, n_pts);
  write_q_grid(out / "q_minus.csv", rho_m, r_max, n_pts);
  files.push_back("q_plus.csv");
  files.push_back("q_minus.csv");
  write_density(out / "density.csv", rgsim::position_density(gs.vec, qc), qc.n_sites);
  files.push_back("density.csv");

  if (do_collapse) {
    const int site = o.value("collapse_site", qc.n_sites / 2);
    const auto collapsed = rgsim::collapse_plus(gs.vec, qc, site, ridge);
    const auto crho_p = rgsim::mode_density_matrix(collapsed, qc, rgsim::Mode::plus);
    const auto crho_m = rgsim::mode_density_matrix(collapsed, qc, rgsim::Mode::minus);
    write_q_grid(out / "q_plus_collapsed.csv", crho_p, r_max, n_pts);
    write_q_grid(out / "q_minus_collapsed.csv", crho_m, r_max, n_pts);
    write_density(out / "density_collapsed.csv", rgsim::position_density(collapsed, qc),
                  qc.n_sites);
    files.push_back("q_plus_collapsed.csv");
    files.push_back("q_minus_collapsed.csv");
    files.push_back("density_collapsed.csv");
    results["collapse_site"] = site;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv, char** envp) {
  CLI::App app{"ring-cavity condensate gravimetry simulator"};
  std::string config_path, scenario, out_dir = "out";
  std::uint64_t seed = 1;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--scenario", scenario, "scenario name (overrides config)");
  app.add_option("--seed", seed, "RNG seed");
  app.add_option("--out", out_dir, "output directory");
  CLI11_PARSE(app, argc, argv);

  json cfg = json::object();
  try {
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw std::invalid_argument("cannot open config: " + config_path);
      cfg = json::parse(f);
    }
    apply_env_overrides(cfg, envp);
    if (cfg.contains("scenario") && scenario.empty()) scenario = cfg["scenario"].get<std::string>();
    if (cfg.contains("seed") && app.count("--seed") == 0) seed = cfg["seed"].get<std::uint64_t>();
    if (cfg.contains("output_dir") && app.count("--out") == 0)
      out_dir = cfg["output_dir"].get<std::string>();
    if (scenario.empty()) throw std::invalid_argument("no scenario given (--scenario or config)");
    cfg["scenario"] = scenario;
    cfg["seed"] = seed;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  const fs::path out(out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);

  const auto t_start = std::chrono::steady_clock::now();
  json results;
  std::vector<std::string> files;
  try {
    int rc;
    if (scenario == "steady-state")
      rc = run_steady_state(cfg, out, seed, results, files);
    else if (scenario == "fall")
      rc = run_fall(cfg, out, seed, results, files);
    else if (scenario == "goldstone-kick")
      rc = run_goldstone(cfg, out, seed, results, files);
    else if (scenario == "fit")
      rc = run_fit(cfg, out, seed, results, files);
    else if (scenario == "sensitivity")
      rc = run_curves(cfg, out, seed, results, files, "sensitivity");
    else if (scenario == "fisher")
      rc = run_curves(cfg, out, seed, results, files, "fisher");
    else if (scenario == "estimate")
      rc = run_estimate(cfg, out, seed, results, files);
    else if (scenario == "scan-N")
      rc = run_scan(cfg, out, seed, results, files);
    else if (scenario == "quantum-ground")
      rc = run_quantum(cfg, out, seed, results, files, false);
    else if (scenario == "quantum-collapse")
      rc = run_quantum(cfg, out, seed, results, files, true);
    else {
      std::cerr << "config error: unknown scenario '" << scenario << "'\n";
      return 2;
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    write_manifest(out, cfg, scenario, seed, wall, files, results);
    std::cout << results.dump(2) << '\n';
    return rc;
  } catch (const rgsim::Divergence& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return 3;
  } catch (const rgsim::BoxExit& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return 3;
  } catch (const rgsim::NonConvergence& e) {
    std::cerr << "non-convergence: " << e.what() << '\n';
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
