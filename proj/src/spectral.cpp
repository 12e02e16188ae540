#include "lbness/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lbness {

double default_edge_margin(const LeadSpec& lead) { return 1e-6 * lead.bandwidth(); }

BandPoint band_point(const LeadSpec& lead, double energy, double margin) {
  if (margin < 0.0) margin = default_edge_margin(lead);
  const double lo = lead.band_min();
  const double hi = lead.band_max();
  if (energy < lo || energy > hi) throw OutOfBand("energy outside the lead band");
  if (energy < lo + margin || energy > hi - margin)
    throw AtBandEdge("energy within the band-edge exclusion margin");

  const double c = std::clamp((lead.onsite - energy) / (2.0 * lead.hopping), -1.0, 1.0);
  BandPoint pt;
  pt.energy = energy;
  pt.wavenumber = std::acos(c);
  pt.velocity = 2.0 * lead.hopping * std::sin(pt.wavenumber);
  return pt;
}

double eigenfunction(const LeadSpec& lead, const BandPoint& pt, int site) {
  const double sk = std::sin(pt.wavenumber);
  return std::sin(pt.wavenumber * site) / std::sqrt(std::numbers::pi * lead.hopping * sk);
}

namespace {

/// Decaying root (|chi| < 1) of chi + 1/chi = w, for w off [-2, 2] or complex.
Complex decaying_root(Complex w) {
  const Complex s = std::sqrt(w * w - 4.0);
  const Complex r1 = 0.5 * (w + s);
  const Complex r2 = 0.5 * (w - s);
  return std::abs(r1) <= std::abs(r2) ? r1 : r2;
}

}  // namespace

Complex lead_green(const LeadSpec& lead, Complex z, int n, int m, bool allow_offband,
                   double margin) {
  if (z.imag() < 0.0) throw Error("lead_green requires Im z >= 0");
  const double t = lead.hopping;

  Complex chi;
  if (z.imag() == 0.0) {
    const double e = z.real();
    const double lo = lead.band_min();
    const double hi = lead.band_max();
    if (margin < 0.0) margin = default_edge_margin(lead);
    if (e >= lo && e <= hi) {
      if (e < lo + margin || e > hi - margin)
        throw AtBandEdge("resolvent boundary value within the edge margin");
      const double c = std::clamp((lead.onsite - e) / (2.0 * t), -1.0, 1.0);
      const double k = std::acos(c);
      chi = Complex{std::cos(k), std::sin(k)};  // retarded branch e^{+ik}
    } else {
      if (!allow_offband)
        throw OutOfBandRealAxis("real-axis resolvent requested outside the band");
      chi = decaying_root(Complex{(lead.onsite - e) / t, 0.0});
    }
  } else {
    chi = decaying_root((Complex{lead.onsite, 0.0} - z) / t);
  }

  const int lesser = std::min(n, m);
  const int greater = std::max(n, m);
  // G_nm = (chi^{n<} - chi^{-n<}) chi^{n>} / (t (chi^{-1} - chi)), rearranged
  // so only non-negative powers of chi appear.
  const Complex chi2 = chi * chi;
  return -std::pow(chi, greater - lesser + 1) * (1.0 - std::pow(chi, 2 * lesser)) /
         (t * (1.0 - chi2));
}

Vector dot_resolvent_residual(const DotSpec& dot, double energy, const Vector& x,
                              const Vector& y) {
  if (dot.dim() == 0) return Vector{};
  return dot.h * x - energy * x + y;
}

}  // namespace lbness
