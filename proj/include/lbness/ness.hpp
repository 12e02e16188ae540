#pragma once

#include <vector>

#include "lbness/model.hpp"

namespace lbness {

// ---------------------------------------------------------------------------
// Independent steady-state check by exact time evolution. Each lead is
// truncated to L_j sites, the decoupled blocks are prepared in their own
// grand-canonical states, the coupling is switched on at t = 0 and the exact
// one-particle density operator rho(t) = e^{-iHt} rho0 e^{iHt} is evolved via
// one full eigendecomposition of H = H0 + V. The recorded observables are the
// trace-formula currents
//   j_k(t)   =  i e Tr( rho(t) [V, P_k] ),
//   Phi_k(t) = -i   Tr( rho(t) [V, P_k H0 P_k] ),
// whose pre-recurrence plateau is the steady-state value.
// ---------------------------------------------------------------------------

struct TruncatedSystem {
  Matrix hamiltonian;             // H0 + V, Hermitian, blocks [dot | lead 1 | ...]
  int dot_dim = 0;
  std::vector<int> lead_lengths;  // L_j
  std::vector<int> lead_offsets;  // first index of each lead block

  int dim() const { return static_cast<int>(hamiltonian.rows()); }
  int lead_offset(int j) const { return lead_offsets.at(j); }
  int lead_length(int j) const { return lead_lengths.at(j); }
};

/// Assemble the truncated realization. Requires L_j >= (max coupling site on
/// lead j) + 1 so the coupling support sits strictly inside the truncation;
/// throws TruncationTooShort otherwise.
TruncatedSystem build_truncated(const SystemSpec& spec, const std::vector<int>& lengths);

/// Block-diagonal initial one-particle density operator: the Fermi-Dirac
/// function of each truncated lead block (via that block's eigendecomposition)
/// and a zero dot block. Eigenvalues lie in [0, 1].
Matrix initial_density(const TruncatedSystem& sys, const SystemSpec& spec);

struct EvolveOptions {
  bool charge = true;       // record j_k(t)
  bool energy = true;       // record Phi_k(t)
  bool dot_charge = true;   // record Tr(rho(t) P_dot)
};

struct EvolutionTrace {
  RealVector times;
  RealMatrix charge_currents;    // times x N
  RealMatrix energy_currents;    // times x N
  RealVector dot_charge;         // times
  RealVector imag_defect;        // max |Im| over the recorded traces, per time
  bool horizon_exceeded = false; // some time passed the recurrence guard
  double recurrence_guard = 0.0; // min_j L_j / (2 max_j hopping)
};

/// Evolve and record. Times beyond the recurrence guard only raise the
/// `horizon_exceeded` flag (warning-grade), they are still computed.
EvolutionTrace evolve_currents(const TruncatedSystem& sys, const SystemSpec& spec,
                               const Matrix& rho0, const RealVector& times,
                               const EvolveOptions& opts = {});

/// rho(t) = e^{-iHt} rho0 e^{iHt}, exact via the eigendecomposition of H.
Matrix evolve_density(const TruncatedSystem& sys, const Matrix& rho0, double t);

struct PlateauStats {
  double value = 0.0;        // mean over the window
  double fluctuation = 0.0;  // max |deviation from mean| over the window
  bool plateau_ok = true;    // false when the window is visibly not settled
};

/// Mean and fluctuation of one recorded series over [t0, t1]. Throws
/// WindowOutsideTrace when the window misses the recorded times.
PlateauStats extract_plateau(const RealVector& times, const RealVector& values, double t0,
                             double t1, double noise_floor = 1e-10);

struct PlateauReport {
  std::vector<PlateauStats> charge;  // per lead
  std::vector<PlateauStats> energy;  // per lead (empty if not recorded)
};

PlateauReport extract_plateau(const EvolutionTrace& trace, double t0, double t1);

/// CSV rendering of a trace: t, j_1..j_N, Phi_1..Phi_N, the worst imaginary
/// part per time, and the dot population.
std::string trace_to_csv(const EvolutionTrace& trace);

}  // namespace lbness
