#pragma once

#include <functional>
#include <span>
#include <utility>

#include "lbness/scattering.hpp"

namespace lbness {

// ---------------------------------------------------------------------------
// Steady-state currents by energy integration. With hbar = 1 and carrier
// charge -e, the current out of reservoir k and the energy current are
//   j_k   = -2 e pi Int dE sum_j (f_k - f_j) |T_kj(E)|^2,
//   Phi_k = +2 pi   Int dE sum_j (f_k - f_j) E |T_kj(E)|^2,
// integrated over the union of band(k) /\ band(j). The N-terminal energy
// current uses the same pairwise sum as the charge current; for N = 2 it
// reduces to the two-reservoir expression.
// ---------------------------------------------------------------------------

/// Fermi-Dirac occupation 1/(exp(beta (E - mu)) + 1), overflow-safe. beta =
/// +inf gives the step 1_{E < mu} with value 1/2 at E = mu.
double fermi_dirac(double energy, double beta, double mu);

struct QuadratureConfig {
  double abs_tol = 1e-9;              // absolute target, in result units
  int max_intervals = 2000;           // subdivision budget
  double edge_margin_rel = 1e-6;      // band-edge exclusion, x bandwidth
  double condition_threshold = 1e12;  // forwarded to the scattering solve
  int max_excisions = 100;            // exceptional-point removals before giving up
};

struct QuadratureOutcome {
  double value = 0.0;
  double error = 0.0;  // embedded-rule differences plus excised-sliver bounds
  int intervals = 0;
  int evaluations = 0;
  int excisions = 0;
};

/// Adaptive Gauss-Kronrod (G7, K15) over an interval union. Intervals inside
/// the band of `kspace_reference` are integrated in the wavenumber variable
/// E = onsite - 2 hopping cos k, which removes the 1/sin k edge behaviour of
/// energy-normalized integrands. Points where `f` throws ExceptionalEnergy or
/// AtBandEdge are excised by local subdivision; their measure is added to the
/// error estimate. `split_points` seed mandatory initial subdivisions (Fermi
/// steps at zero temperature).
QuadratureOutcome integrate_band(const std::function<double(double)>& f,
                                 const IntervalUnion& domain, const QuadratureConfig& cfg,
                                 const LeadSpec* kspace_reference = nullptr,
                                 std::span<const double> split_points = {});

/// Charge current out of reservoir k (0-based). Returns (value, error).
std::pair<double, double> charge_current(const SystemSpec& spec, int k,
                                         const QuadratureConfig& cfg = {});

/// Energy current out of reservoir k (0-based). Returns (value, error).
std::pair<double, double> energy_current(const SystemSpec& spec, int k,
                                         const QuadratureConfig& cfg = {});

struct CurrentReport {
  RealVector charge_currents;   // j_k, units e x energy / hbar
  RealVector charge_errors;
  RealVector energy_currents;   // Phi_k, units energy^2 / hbar
  RealVector energy_errors;
  double charge_conservation_defect = 0.0;  // |sum_k j_k|
  double energy_conservation_defect = 0.0;  // |sum_k Phi_k|
  std::vector<QuadratureOutcome> charge_quadrature;  // per lead
  std::vector<QuadratureOutcome> energy_quadrature;
  bool with_charge = true;
  bool with_energy = true;
};

CurrentReport current_report(const SystemSpec& spec, const QuadratureConfig& cfg = {},
                             bool with_charge = true, bool with_energy = true);

/// Integration domain for the lead-k current: union over j of
/// band(k) /\ band(j), restricted to [min mu, max mu] for zero-temperature
/// pairs and stripped of every lead's edge margin.
IntervalUnion current_domain(const SystemSpec& spec, int k, const QuadratureConfig& cfg);

}  // namespace lbness
