#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lbness {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Error taxonomy. Everything numerical that can fail throws one of these;
// total functions (validation, reports) never throw.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Energy outside the closed band of a lead.
struct OutOfBand : Error {
  using Error::Error;
};

/// Energy inside the edge-exclusion margin of a band edge.
struct AtBandEdge : Error {
  using Error::Error;
};

/// Real-axis evaluation outside the band without the off-band flag.
struct OutOfBandRealAxis : Error {
  using Error::Error;
};

/// The stationary solve degenerated (condition estimate above threshold).
struct ExceptionalEnergy : Error {
  double energy;
  ExceptionalEnergy(double e, const std::string& msg) : Error(msg), energy(e) {}
};

/// A per-pair quantity was requested for a lead whose band excludes the energy.
struct LeadClosed : Error {
  using Error::Error;
};

/// Adaptive integration could not meet the error target within its budget.
struct QuadratureFailure : Error {
  using Error::Error;
};

/// Truncated lead too short to contain the coupling support.
struct TruncationTooShort : Error {
  using Error::Error;
};

/// Plateau window not covered by the recorded times.
struct WindowOutsideTrace : Error {
  using Error::Error;
};

/// Malformed or unreadable configuration input.
struct ConfigError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Closed intervals and finite unions of them (spectral supports, integration
// domains). Degenerate intervals [a, a] are kept; they carry zero measure.
// ---------------------------------------------------------------------------

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool valid() const { return lo <= hi; }
  double length() const { return valid() ? hi - lo : 0.0; }
  bool contains(double x) const { return valid() && lo <= x && x <= hi; }
};

class IntervalUnion {
 public:
  IntervalUnion() = default;
  explicit IntervalUnion(Interval iv) { add(iv); }

  /// Union-insert, merging overlapping or touching parts.
  void add(Interval iv);

  bool empty() const { return parts_.empty(); }
  double total_length() const;
  bool contains(double x) const;
  const std::vector<Interval>& parts() const { return parts_; }

 private:
  std::vector<Interval> parts_;  // sorted, pairwise disjoint
};

IntervalUnion intersect(const Interval& a, const Interval& b);
IntervalUnion intersect(const IntervalUnion& a, const IntervalUnion& b);
IntervalUnion unite(const IntervalUnion& a, const IntervalUnion& b);
/// Set difference a \ b (the removed pieces are treated as open, so the
/// remainder keeps closed endpoints).
IntervalUnion subtract(const IntervalUnion& a, const IntervalUnion& b);

}  // namespace lbness
