#pragma once

#include "lbness/model.hpp"

namespace lbness {

// ---------------------------------------------------------------------------
// Closed-form spectral data of one uncoupled semi-infinite chain, plus the
// residual form of the dot resolvent. All pure functions.
//
// Conventions, fixed once and used everywhere:
//   dispersion      E(k) = onsite - 2 hopping cos k,   k in (0, pi),
//   group velocity  dE/dk = 2 hopping sin k > 0,
//   eigenfunction   psi_E(n) = sin(k n) / sqrt(pi hopping sin k),
//                   normalized so that <psi_E, psi_E'> = delta(E - E'),
//   resolvent       lead_green(z, n, m) = <n| (z - H)^{-1} |m>,
//                   the retarded boundary value at z = E + i0 being
//                   -sin(k n_<) e^{i k n_>} / (hopping sin k).
// ---------------------------------------------------------------------------

/// Interior point of a lead band together with its wavenumber and velocity.
struct BandPoint {
  double energy = 0.0;
  double wavenumber = 0.0;  // in (0, pi)
  double velocity = 0.0;    // 2 hopping sin k
};

/// Band edges are excluded within this margin (velocity -> 0 there and the
/// resolvent diverges). Default: 1e-6 x bandwidth.
double default_edge_margin(const LeadSpec& lead);

/// Unique band point at `energy`. Throws OutOfBand outside the closed band,
/// AtBandEdge within `margin` of an edge (margin < 0 selects the default).
BandPoint band_point(const LeadSpec& lead, double energy, double margin = -1.0);

/// Energy-normalized generalized eigenfunction value at a 1-based site.
double eigenfunction(const LeadSpec& lead, const BandPoint& pt, int site);

/// Resolvent matrix element <n| (z - H)^{-1} |m> of the semi-infinite chain.
/// Im z > 0: valid for any z. Im z = 0: returns the retarded boundary value
/// for Re z strictly inside the band (and outside `margin`); for Re z outside
/// the band the decaying real branch is returned when `allow_offband` is set,
/// otherwise OutOfBandRealAxis is thrown.
Complex lead_green(const LeadSpec& lead, Complex z, int n, int m,
                   bool allow_offband = false, double margin = -1.0);

/// (H_S - E) x + y. The dot block of the stationary equations is used in this
/// residual form so real eigenvalues of H_S are never inverted.
Vector dot_resolvent_residual(const DotSpec& dot, double energy, const Vector& x,
                              const Vector& y);

}  // namespace lbness
