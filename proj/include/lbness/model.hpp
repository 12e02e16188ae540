#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "lbness/types.hpp"

namespace lbness {

// ---------------------------------------------------------------------------
// System description: N semi-infinite single-channel tight-binding reservoirs
// (leads), a finite Hermitian block (the dot), and a finite-rank Hermitian
// coupling assembled from rank-one pairs. Immutable after validation; safe to
// share across threads.
// ---------------------------------------------------------------------------

/// One reservoir:  (H psi)(n) = onsite*psi(n) - hopping*(psi(n-1) + psi(n+1)),
/// sites n = 1, 2, ... with psi(0) = 0, prepared at inverse temperature `beta`
/// and chemical potential `mu`. beta = +inf is the zero-temperature step
/// filling. The spectrum is the band [onsite - 2 hopping, onsite + 2 hopping].
struct LeadSpec {
  double hopping = 1.0;
  double onsite = 0.0;
  double beta = kInfinity;
  double mu = 0.0;

  double band_min() const { return onsite - 2.0 * hopping; }
  double band_max() const { return onsite + 2.0 * hopping; }
  double bandwidth() const { return 4.0 * hopping; }
  Interval band() const { return {band_min(), band_max()}; }
};

/// Finite central block. M = 0 (no dot, direct junctions only) is allowed.
struct DotSpec {
  Matrix h;                     // M x M, Hermitian once validated
  double load_asymmetry = 0.0;  // max |h - h^dagger| entry seen in raw input

  Eigen::Index dim() const { return h.rows(); }
};

enum class CouplingKind { DotLead, LeadLead };

/// Finitely supported amplitudes on a chain, keyed by 1-based site index.
using SiteAmplitudes = std::map<int, Complex>;

/// One Hermitian rank-one pair of the coupling V:
///   dot_lead :  amplitude |dot_vector><lead_vector_b|  + h.c.,
///               lead_vector_b lives on lead `lead_b`;
///   lead_lead:  amplitude |lead_vector_a><lead_vector_b| + h.c.,
///               the two vectors live on distinct leads `lead_a`, `lead_b`.
/// Amplitudes may be complex and vectors need not be normalized.
struct CouplingTerm {
  CouplingKind kind = CouplingKind::DotLead;
  Complex amplitude{0.0, 0.0};
  Vector dot_vector;             // dot_lead only; length M
  SiteAmplitudes lead_vector_a;  // lead_lead only
  SiteAmplitudes lead_vector_b;  // both kinds
  int lead_a = -1;               // 0-based lead indices
  int lead_b = -1;
};

struct SystemSpec {
  std::vector<LeadSpec> leads;
  DotSpec dot;
  std::vector<CouplingTerm> couplings;
  double charge = 1.0;  // e > 0; the carrier charge is -e

  int num_leads() const { return static_cast<int>(leads.size()); }
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class Severity { Warning, Error };

struct ValidationIssue {
  Severity severity = Severity::Error;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const;  // no errors (warnings allowed)
  int error_count() const;
  int warning_count() const;
  std::string to_string() const;
};

/// Total function: every invariant violation becomes an issue, nothing throws.
/// Errors block downstream computation, warnings do not.
ValidationReport validate(const SystemSpec& spec);

/// Intersection of the bands of the given leads (0-based indices; empty
/// `which` means all leads). The result can be empty.
IntervalUnion spectral_intersection(const SystemSpec& spec, std::span<const int> which);

// ---------------------------------------------------------------------------
// Abstract application of V on finitely supported vectors. Used to assemble
// the coupling-space matrix and as the reference in Hermiticity checks.
// ---------------------------------------------------------------------------

/// Vector in H = H_dot (+) H_1 (+) ... (+) H_N with finite support.
struct BlockVector {
  Vector dot;                       // dense, size M
  std::vector<SiteAmplitudes> lead; // one map per lead
};

BlockVector zero_block_vector(const SystemSpec& spec);
Complex block_inner(const BlockVector& x, const BlockVector& y);  // <x, y>
BlockVector apply_coupling(const SystemSpec& spec, const BlockVector& y);  // V y

}  // namespace lbness
