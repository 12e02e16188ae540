#pragma once

#include <optional>
#include <vector>

#include "lbness/model.hpp"
#include "lbness/spectral.hpp"

namespace lbness {

// ---------------------------------------------------------------------------
// Stationary scattering. The Lippmann-Schwinger equation
//     psi+ = psi0 - (H0 - E - i0)^{-1} V psi+
// closes on the finite coupling subspace (dot (+) coupling sites) because V
// has finite rank and range. Per energy we solve one augmented linear system
// with the dot amplitudes as explicit unknowns,
//     (H_S - E) x + (V u)_dot = 0,
//     c + G_lead(E + i0) (V u)_lead = psi0|_sites,
// where G_lead collects the retarded lead resolvents at the coupling sites
// (closed leads enter through their decaying off-band branch), and read off
//     T_jk(E) = <psi0_{j,E}, V psi+_{k,E}>,    S(E) = 1 - 2 pi i T(E).
// ---------------------------------------------------------------------------

/// Finite subspace that closes the stationary equations: the whole dot plus
/// the deduplicated coupling sites of every lead.
struct CouplingSpace {
  int dot_dim = 0;
  std::vector<std::vector<int>> lead_sites;  // per lead, ascending, unique
  Matrix v_matrix;                           // Hermitian, (dot + sites)^2

  int total_sites() const;
  int dim() const { return dot_dim + total_sites(); }
  /// Index of (lead, site) in the coupling coordinates; -1 if absent.
  int index_of(int lead, int site) const;
  /// First coordinate of the given lead's site block.
  int lead_offset(int lead) const;
};

CouplingSpace build_coupling_space(const SystemSpec& spec);

struct ScatteringSettings {
  double edge_margin_rel = 1e-6;        // margin = rel x bandwidth, per lead
  double condition_threshold = 1e12;    // above this the energy is exceptional
};

/// Per-energy transition and scattering matrices with diagnostics. Rows and
/// columns of closed leads (band not containing `energy`) are zero in `t` and
/// identity in `s`.
struct ScatteringData {
  double energy = 0.0;
  Matrix t;                     // N x N
  Matrix s;                     // N x N, s = 1 - 2 pi i t
  std::vector<bool> open;       // per lead
  double unitarity_residual = 0.0;  // ||S S^dag - 1|| over open block
  double optical_residual = 0.0;    // ||T - T^dag + 2 pi i T T^dag||
  double condition_estimate = 1.0;  // of the augmented solve
};

/// Throws AtBandEdge when `energy` falls inside any lead's edge margin,
/// OutOfBand when no lead is open, ExceptionalEnergy when the augmented
/// system's condition estimate exceeds the threshold.
ScatteringData solve_scattering(const SystemSpec& spec, const CouplingSpace& space,
                                double energy, const ScatteringSettings& settings = {});

/// ||S S^dag - 1||_2 over the open-lead block.
double unitarity_residual(const ScatteringData& data);
/// ||T - T^dag + 2 pi i T T^dag||_2 over the open-lead block.
double optical_residual(const ScatteringData& data);
/// Transmission probability 4 pi^2 |T_jk|^2 between open leads j != k.
double transmission_probability(const ScatteringData& data, int j, int k);

// ---------------------------------------------------------------------------
// Grid scans. Points are independent; evaluation may run on several threads
// and the aggregation order is fixed by the grid index.
// ---------------------------------------------------------------------------

struct ScanResult {
  std::vector<double> energies;
  std::vector<std::optional<ScatteringData>> points;  // nullopt: skipped
  int skipped_closed = 0;       // no open lead / outside bands
  int skipped_edge = 0;         // inside an edge margin
  int skipped_exceptional = 0;  // condition estimate above threshold
};

ScanResult scan_transmission(const SystemSpec& spec, const CouplingSpace& space,
                             const std::vector<double>& energies,
                             const ScatteringSettings& settings = {}, int threads = 0);

}  // namespace lbness
