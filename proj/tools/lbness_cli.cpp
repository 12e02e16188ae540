// lbness: steady-state quantum transport for tight-binding junctions.
//
// Subcommands: spectrum, transmission, smatrix-check, current, energy-current,
// ness-verify. Every invocation reads one JSON config and writes exactly one
// CSV or JSON artifact. Exit codes: 0 ok, 1 validation errors, 2 numerical
// failure, 3 I/O or malformed config.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lbness/config_io.hpp"
#include "lbness/ness.hpp"
#include "lbness/scattering.hpp"
#include "lbness/transport.hpp"

namespace {

using nlohmann::ordered_json;

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell_to_string(const ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return fmt_num(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  return v.dump();
}

struct Output {
  std::string command;
  std::vector<ordered_json> rows;  // flat objects, consistent keys
};

void write_output(const Output& out, const std::string& path, const std::string& format,
                  bool header) {
  std::ofstream os(path);
  if (!os) throw lbness::ConfigError("cannot open output file `" + path + "`");

  std::string stamp;
  if (header) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    stamp = buf;
  }

  if (format == "json") {
    ordered_json doc;
    doc["command"] = out.command;
    if (header) doc["generated"] = stamp;
    doc["rows"] = out.rows;
    os << doc.dump(2) << "\n";
    return;
  }

  if (header) os << "# lbness " << out.command << " generated " << stamp << "\n";
  if (out.rows.empty()) return;
  bool first = true;
  for (const auto& [key, val] : out.rows.front().items()) {
    (void)val;
    os << (first ? "" : ",") << key;
    first = false;
  }
  os << "\n";
  for (const ordered_json& row : out.rows) {
    first = true;
    for (const auto& [key, val] : row.items()) {
      (void)key;
      os << (first ? "" : ",") << cell_to_string(val);
      first = false;
    }
    os << "\n";
  }
}

const char* kConventions = R"(lbness physical conventions
---------------------------
  * hbar = 1. Energies, temperatures and chemical potentials share one energy
    unit E; times are in hbar/E.
  * Each lead is a semi-infinite chain  (H psi)(n) = onsite psi(n)
    - hopping (psi(n-1) + psi(n+1)),  n >= 1, psi(0) = 0, with the band
    [onsite - 2 hopping, onsite + 2 hopping] and dispersion
    E(k) = onsite - 2 hopping cos k.
  * Carriers have charge -e with e = `charge` from the config (> 0).
  * Currents are *out of* the reservoirs: j_k = - d/dt (reservoir charge),
    Phi_k = - d/dt (reservoir energy).
  * Scattering matrices: S(E) = 1 - 2 pi i T(E) on the open leads, with
    T_jk(E) = <psi0_j, V psi+_k> in delta(E - E')-normalized lead
    eigenfunctions psi0(n) = sin(k n)/sqrt(pi hopping sin k). The
    transmission probability is 4 pi^2 |T_jk|^2 = |S_jk|^2 (j != k).
  * Steady-state currents:  j_k   = -2 e pi Int dE sum_j (f_k - f_j) |T_kj|^2,
                            Phi_k = +2 pi   Int dE sum_j (f_k - f_j) E |T_kj|^2,
    f_j the Fermi-Dirac function of lead j, integrated over intersecting
    bands. The N-terminal energy current generalizes the two-terminal form
    with the same pairwise sum as the charge current.
  * ness-verify evolves the truncated system from the decoupled initial state
    (each lead filled by its own Fermi-Dirac function, empty dot) and reports
    the plateau of j_k(t) = i e Tr(rho(t) [V, P_k]) and
    Phi_k(t) = -i Tr(rho(t) [V, P_k H0 P_k]) against the integrals above.
)";

struct CliOptions {
  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  double emin = std::nan("");
  double emax = std::nan("");
  int n_grid = 200;
  double quad_tol = 1e-9;
  int quad_budget = 2000;
  double edge_margin = 1e-6;
  int lead_length = 400;
  std::string window = "50,150";
  double dt = 0.5;
  bool no_header = false;
  int threads = 0;
};

std::vector<double> make_grid(const lbness::SystemSpec& spec, const CliOptions& opt) {
  double lo = opt.emin, hi = opt.emax;
  if (std::isnan(lo) || std::isnan(hi)) {
    lo = lbness::kInfinity;
    hi = -lbness::kInfinity;
    for (const lbness::LeadSpec& l : spec.leads) {
      lo = std::min(lo, l.band_min());
      hi = std::max(hi, l.band_max());
    }
    const double pad = 2.0 * opt.edge_margin * (hi - lo);
    lo += pad;
    hi -= pad;
  }
  std::vector<double> grid(opt.n_grid);
  for (int i = 0; i < opt.n_grid; ++i)
    grid[i] = lo + (hi - lo) * i / double(opt.n_grid - 1);
  return grid;
}

lbness::QuadratureConfig quad_config(const CliOptions& opt) {
  lbness::QuadratureConfig cfg;
  cfg.abs_tol = opt.quad_tol;
  cfg.max_intervals = opt.quad_budget;
  cfg.edge_margin_rel = opt.edge_margin;
  return cfg;
}

Output run_spectrum(const lbness::SystemSpec& spec) {
  Output out;
  out.command = "spectrum";
  for (int j = 0; j < spec.num_leads(); ++j) {
    ordered_json row;
    row["kind"] = "band";
    row["leads"] = std::to_string(j + 1);
    row["lo[E]"] = spec.leads[j].band_min();
    row["hi[E]"] = spec.leads[j].band_max();
    out.rows.push_back(row);
  }
  auto emit_intersection = [&](const std::vector<int>& which, const std::string& label) {
    const lbness::IntervalUnion u = lbness::spectral_intersection(spec, which);
    if (u.empty()) {
      ordered_json row;
      row["kind"] = "intersection";
      row["leads"] = label;
      row["lo[E]"] = "";
      row["hi[E]"] = "";
      out.rows.push_back(row);
    }
    for (const lbness::Interval& iv : u.parts()) {
      ordered_json row;
      row["kind"] = "intersection";
      row["leads"] = label;
      row["lo[E]"] = iv.lo;
      row["hi[E]"] = iv.hi;
      out.rows.push_back(row);
    }
  };
  for (int a = 0; a < spec.num_leads(); ++a)
    for (int b = a + 1; b < spec.num_leads(); ++b)
      emit_intersection({a, b}, std::to_string(a + 1) + "&" + std::to_string(b + 1));
  if (spec.num_leads() > 2) emit_intersection({}, "all");
  return out;
}

Output run_transmission(const lbness::SystemSpec& spec, const CliOptions& opt) {
  Output out;
  out.command = "transmission";
  const auto grid = make_grid(spec, opt);
  const lbness::CouplingSpace space = lbness::build_coupling_space(spec);
  lbness::ScatteringSettings st;
  st.edge_margin_rel = opt.edge_margin;
  const lbness::ScanResult scan =
      lbness::scan_transmission(spec, space, grid, st, opt.threads);

  int emitted = 0;
  for (size_t i = 0; i < scan.points.size(); ++i) {
    if (!scan.points[i]) continue;
    const lbness::ScatteringData& d = *scan.points[i];
    ordered_json row;
    row["energy[E]"] = d.energy;
    for (int a = 0; a < spec.num_leads(); ++a)
      for (int b = 0; b < spec.num_leads(); ++b) {
        if (a == b) continue;
        const std::string key =
            "T_" + std::to_string(a + 1) + "_" + std::to_string(b + 1) + "[1]";
        row[key] = (d.open[a] && d.open[b]) ? lbness::transmission_probability(d, a, b) : 0.0;
      }
    row["unitarity_residual[1]"] = d.unitarity_residual;
    row["optical_residual[1]"] = d.optical_residual;
    row["condition[1]"] = d.condition_estimate;
    out.rows.push_back(row);
    ++emitted;
  }
  const int skipped = scan.skipped_closed + scan.skipped_edge + scan.skipped_exceptional;
  if (skipped > 0)
    std::cerr << "note: skipped " << skipped << " grid points (" << scan.skipped_closed
              << " outside all bands, " << scan.skipped_edge << " at band edges, "
              << scan.skipped_exceptional << " exceptional)\n";
  if (emitted == 0)
    throw lbness::ExceptionalEnergy(0.0, "no grid point admitted a scattering solve");
  return out;
}

Output run_smatrix_check(const lbness::SystemSpec& spec, const CliOptions& opt) {
  Output out;
  out.command = "smatrix-check";
  const auto grid = make_grid(spec, opt);
  const lbness::CouplingSpace space = lbness::build_coupling_space(spec);
  lbness::ScatteringSettings st;
  st.edge_margin_rel = opt.edge_margin;
  const lbness::ScanResult scan =
      lbness::scan_transmission(spec, space, grid, st, opt.threads);

  double worst_u = 0.0, worst_o = 0.0, worst_c = 0.0;
  double at_u = std::nan(""), at_o = std::nan(""), at_c = std::nan("");
  int evaluated = 0;
  for (const auto& p : scan.points) {
    if (!p) continue;
    ++evaluated;
    if (p->unitarity_residual > worst_u) {
      worst_u = p->unitarity_residual;
      at_u = p->energy;
    }
    if (p->optical_residual > worst_o) {
      worst_o = p->optical_residual;
      at_o = p->energy;
    }
    if (p->condition_estimate > worst_c) {
      worst_c = p->condition_estimate;
      at_c = p->energy;
    }
  }
  if (evaluated == 0)
    throw lbness::ExceptionalEnergy(0.0, "no grid point admitted a scattering solve");
  ordered_json row;
  row["points_evaluated[1]"] = evaluated;
  row["points_skipped[1]"] =
      scan.skipped_closed + scan.skipped_edge + scan.skipped_exceptional;
  row["worst_unitarity_residual[1]"] = worst_u;
  row["at_energy_unitarity[E]"] = at_u;
  row["worst_optical_residual[1]"] = worst_o;
  row["at_energy_optical[E]"] = at_o;
  row["worst_condition[1]"] = worst_c;
  row["at_energy_condition[E]"] = at_c;
  out.rows.push_back(row);
  return out;
}

Output run_current(const lbness::SystemSpec& spec, const CliOptions& opt, bool charge,
                   bool energy) {
  Output out;
  out.command = charge && energy ? "current" : (charge ? "current" : "energy-current");
  const lbness::CurrentReport rep =
      lbness::current_report(spec, quad_config(opt), charge, energy);
  for (int k = 0; k < spec.num_leads(); ++k) {
    ordered_json row;
    row["lead"] = k + 1;
    if (charge) {
      row["charge_current[e*E/hbar]"] = rep.charge_currents(k);
      row["charge_error[e*E/hbar]"] = rep.charge_errors(k);
      row["charge_intervals[1]"] = rep.charge_quadrature[k].intervals;
    }
    if (energy) {
      row["energy_current[E^2/hbar]"] = rep.energy_currents(k);
      row["energy_error[E^2/hbar]"] = rep.energy_errors(k);
      row["energy_intervals[1]"] = rep.energy_quadrature[k].intervals;
    }
    out.rows.push_back(row);
  }
  ordered_json sum;
  sum["lead"] = "sum";
  if (charge) {
    sum["charge_current[e*E/hbar]"] = rep.charge_currents.sum();
    sum["charge_error[e*E/hbar]"] = rep.charge_conservation_defect;
    sum["charge_intervals[1]"] = 0;
  }
  if (energy) {
    sum["energy_current[E^2/hbar]"] = rep.energy_currents.sum();
    sum["energy_error[E^2/hbar]"] = rep.energy_conservation_defect;
    sum["energy_intervals[1]"] = 0;
  }
  out.rows.push_back(sum);
  return out;
}

Output run_ness_verify(const lbness::SystemSpec& spec, const CliOptions& opt) {
  Output out;
  out.command = "ness-verify";

  double w0 = 50.0, w1 = 150.0;
  if (std::sscanf(opt.window.c_str(), "%lf,%lf", &w0, &w1) != 2)
    throw lbness::ConfigError("--window expects T1,T2");

  const lbness::CurrentReport rep = lbness::current_report(spec, quad_config(opt));

  std::vector<int> lengths(spec.num_leads(), opt.lead_length);
  const lbness::TruncatedSystem sys = lbness::build_truncated(spec, lengths);
  const lbness::Matrix rho0 = lbness::initial_density(sys, spec);
  const int n_times = static_cast<int>(std::floor(w1 / opt.dt)) + 1;
  lbness::RealVector times(n_times);
  for (int i = 0; i < n_times; ++i) times(i) = i * opt.dt;
  const lbness::EvolutionTrace trace =
      lbness::evolve_currents(sys, spec, rho0, times);
  if (trace.horizon_exceeded)
    std::cerr << "warning: plateau window extends past the recurrence guard t ~ "
              << trace.recurrence_guard << "\n";
  const lbness::PlateauReport plateau = lbness::extract_plateau(trace, w0, w1);

  auto rel_dev = [](double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale > 1e-15 ? std::abs(a - b) / scale : 0.0;
  };

  for (int k = 0; k < spec.num_leads(); ++k) {
    ordered_json row;
    row["lead"] = k + 1;
    row["charge_quadrature[e*E/hbar]"] = rep.charge_currents(k);
    row["charge_quadrature_error[e*E/hbar]"] = rep.charge_errors(k);
    row["charge_plateau[e*E/hbar]"] = plateau.charge[k].value;
    row["charge_fluctuation[e*E/hbar]"] = plateau.charge[k].fluctuation;
    row["charge_plateau_ok"] = plateau.charge[k].plateau_ok;
    row["charge_rel_deviation[1]"] =
        rel_dev(rep.charge_currents(k), plateau.charge[k].value);
    row["energy_quadrature[E^2/hbar]"] = rep.energy_currents(k);
    row["energy_quadrature_error[E^2/hbar]"] = rep.energy_errors(k);
    row["energy_plateau[E^2/hbar]"] = plateau.energy[k].value;
    row["energy_fluctuation[E^2/hbar]"] = plateau.energy[k].fluctuation;
    row["energy_plateau_ok"] = plateau.energy[k].plateau_ok;
    row["energy_rel_deviation[1]"] =
        rel_dev(rep.energy_currents(k), plateau.energy[k].value);
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lbness: steady-state transport through tight-binding junctions "
               "(transmission-formula currents cross-checked by exact time evolution)"};
  app.require_subcommand(0, 1);

  CliOptions opt;
  bool conventions = false;
  app.add_flag("--conventions", conventions, "print the physical conventions and exit");

  auto add_common = [&](CLI::App* sub, bool needs_grid, bool needs_quad, bool needs_ness) {
    sub->add_option("--config", opt.config_path, "system configuration (JSON)")->required();
    sub->add_option("--out", opt.out_path, "output artifact path")->required();
    sub->add_option("--format", opt.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--edge-margin", opt.edge_margin,
                    "band-edge exclusion, fraction of each lead's bandwidth");
    sub->add_flag("--no-header", opt.no_header, "omit the timestamp header");
    sub->add_option("--threads", opt.threads, "worker threads for grid scans (0 = auto)");
    if (needs_grid) {
      sub->add_option("--emin", opt.emin, "grid lower bound");
      sub->add_option("--emax", opt.emax, "grid upper bound");
      sub->add_option("--n", opt.n_grid, "grid point count")->check(CLI::Range(2, 2000000));
    }
    if (needs_quad) {
      sub->add_option("--quad-tol", opt.quad_tol, "absolute quadrature tolerance");
      sub->add_option("--quad-budget", opt.quad_budget, "subdivision budget");
    }
    if (needs_ness) {
      sub->add_option("--lead-length", opt.lead_length, "truncated sites per lead");
      sub->add_option("--window", opt.window, "plateau window T1,T2");
      sub->add_option("--dt", opt.dt, "recording step");
    }
  };

  CLI::App* c_spectrum = app.add_subcommand("spectrum", "band intervals and intersections");
  add_common(c_spectrum, false, false, false);
  CLI::App* c_trans = app.add_subcommand("transmission", "per-energy transmission scan");
  add_common(c_trans, true, false, false);
  CLI::App* c_smx = app.add_subcommand("smatrix-check", "worst-case S-matrix residuals");
  add_common(c_smx, true, false, false);
  CLI::App* c_cur = app.add_subcommand("current", "steady-state charge currents");
  add_common(c_cur, false, true, false);
  CLI::App* c_ecur = app.add_subcommand("energy-current", "steady-state energy currents");
  add_common(c_ecur, false, true, false);
  CLI::App* c_ness = app.add_subcommand("ness-verify", "time-evolution cross-check");
  add_common(c_ness, false, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 3;
  }

  if (conventions) {
    std::cout << kConventions;
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 3;
  }

  try {
    const lbness::SystemSpec spec = lbness::load_system(opt.config_path);
    const lbness::ValidationReport report = lbness::validate(spec);
    for (const lbness::ValidationIssue& issue : report.issues)
      std::cerr << (issue.severity == lbness::Severity::Error ? "error: " : "warning: ")
                << issue.message << "\n";
    if (!report.ok()) return 1;

    Output out;
    if (c_spectrum->parsed())
      out = run_spectrum(spec);
    else if (c_trans->parsed())
      out = run_transmission(spec, opt);
    else if (c_smx->parsed())
      out = run_smatrix_check(spec, opt);
    else if (c_cur->parsed())
      out = run_current(spec, opt, true, false);
    else if (c_ecur->parsed())
      out = run_current(spec, opt, false, true);
    else if (c_ness->parsed())
      out = run_ness_verify(spec, opt);

    write_output(out, opt.out_path, opt.format, !opt.no_header);
    return 0;
  } catch (const lbness::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const lbness::QuadratureFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lbness::ExceptionalEnergy& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lbness::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
