#include "lbness/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace lbness {

double fermi_dirac(double energy, double beta, double mu) {
  if (beta == kInfinity) {
    if (energy < mu) return 1.0;
    if (energy > mu) return 0.0;
    return 0.5;
  }
  const double x = beta * (energy - mu);
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod quadrature
// ---------------------------------------------------------------------------

namespace {

// QUADPACK G7-K15 nodes and weights on [-1, 1].
constexpr double kXgk[8] = {0.9914553711208126, 0.9491079123427585, 0.8648644233597691,
                            0.7415311855993944, 0.5860872354676911, 0.4058451513773972,
                            0.2077849550078985, 0.0};
constexpr double kWgk[8] = {0.0229353220105292, 0.0630920926299786, 0.1047900103222502,
                            0.1406532597155259, 0.1690047266392679, 0.1903505780647854,
                            0.2044329400752989, 0.2094821410847278};
constexpr double kWg[4] = {0.1294849661688697, 0.2797053914892767, 0.3818300505051189,
                           0.4179591836734694};

struct Piece {
  double a = 0.0, b = 0.0;
  double value = 0.0, error = 0.0;
  double fmax = 0.0;
  int which = 0;  // index into the integrand table (plain-E or k-space)
};

struct BadPoint {
  double x;
};

// One K15/G7 application on [a, b]; throws BadPoint at the first node the
// integrand rejects so the caller can excise it.
Piece apply_rule(const std::function<double(double)>& f, double a, double b, int which,
                 int& evaluations) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  auto eval = [&](double x) -> double {
    ++evaluations;
    try {
      return f(x);
    } catch (const ExceptionalEnergy&) {
      throw BadPoint{x};
    } catch (const AtBandEdge&) {
      throw BadPoint{x};
    }
  };

  double k15 = 0.0, g7 = 0.0, fmax = 0.0;
  for (int i = 0; i < 7; ++i) {
    const double f1 = eval(c - h * kXgk[i]);
    const double f2 = eval(c + h * kXgk[i]);
    fmax = std::max({fmax, std::abs(f1), std::abs(f2)});
    k15 += kWgk[i] * (f1 + f2);
    if (i % 2 == 1) g7 += kWg[i / 2] * (f1 + f2);
  }
  const double fc = eval(c);
  fmax = std::max(fmax, std::abs(fc));
  k15 += kWgk[7] * fc;
  g7 += kWg[3] * fc;

  Piece p;
  p.a = a;
  p.b = b;
  p.which = which;
  p.value = h * k15;
  p.error = std::abs(h * (k15 - g7));
  p.fmax = fmax;
  return p;
}

}  // namespace

QuadratureOutcome integrate_band(const std::function<double(double)>& f,
                                 const IntervalUnion& domain, const QuadratureConfig& cfg,
                                 const LeadSpec* ref, std::span<const double> split_points) {
  QuadratureOutcome out;
  if (domain.empty()) return out;

  // Integrand table: 0 = plain energy variable, 1 = wavenumber variable of
  // the reference lead (dE = 2 t sin k dk).
  std::vector<std::function<double(double)>> integrands;
  integrands.push_back(f);
  double ref_t = 0.0, ref_onsite = 0.0;
  if (ref) {
    ref_t = ref->hopping;
    ref_onsite = ref->onsite;
    integrands.push_back([f, ref_t, ref_onsite](double k) {
      return f(ref_onsite - 2.0 * ref_t * std::cos(k)) * 2.0 * ref_t * std::sin(k);
    });
  }
  auto k_of_e = [&](double e) {
    return std::acos(std::clamp((ref_onsite - e) / (2.0 * ref_t), -1.0, 1.0));
  };

  // Seed intervals: split at the mandatory points, then move in-band pieces
  // to k space when a reference lead is given. Each piece is pre-subdivided
  // so the first error estimates sample narrow structure (thermal windows,
  // resonances) instead of converging on a gap between rule nodes.
  std::vector<std::pair<Interval, int>> seeds;
  for (const Interval& part : domain.parts()) {
    std::vector<double> cuts{part.lo};
    for (double s : split_points)
      if (s > part.lo && s < part.hi) cuts.push_back(s);
    if (ref)
      for (double s : {ref->band_min(), ref->band_max()})
        if (s > part.lo && s < part.hi) cuts.push_back(s);
    cuts.push_back(part.hi);
    std::sort(cuts.begin(), cuts.end());
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      Interval piece{cuts[i], cuts[i + 1]};
      if (!(piece.length() > 0.0)) continue;
      if (ref && piece.lo >= ref->band_min() && piece.hi <= ref->band_max())
        seeds.emplace_back(Interval{k_of_e(piece.lo), k_of_e(piece.hi)}, 1);
      else
        seeds.emplace_back(piece, 0);
    }
  }
  {
    double total = 0.0;
    for (const auto& [iv, which] : seeds) total += iv.length();
    std::vector<std::pair<Interval, int>> refined;
    for (const auto& [iv, which] : seeds) {
      const int pieces =
          std::clamp(static_cast<int>(std::lround(24.0 * iv.length() / total)), 1, 24);
      for (int p = 0; p < pieces; ++p)
        refined.emplace_back(Interval{iv.lo + iv.length() * p / pieces,
                                      iv.lo + iv.length() * (p + 1) / pieces},
                             which);
    }
    seeds = std::move(refined);
  }

  const double scale = std::max(1.0, domain.total_length());
  const double min_width = 1e-13 * scale;

  std::vector<Piece> pieces;
  double val_sum = 0.0, err_sum = 0.0, excised_error = 0.0;

  auto push = [&](const Piece& p) {
    pieces.push_back(p);
    val_sum += p.value;
    err_sum += p.error;
  };

  // Evaluate [a, b]; on a rejected node split around it, recursing until the
  // pieces evaluate cleanly or shrink below the width floor.
  std::function<void(double, double, int, double)> settle = [&](double a, double b, int which,
                                                                double fallback_fmax) {
    if (!(b - a > min_width)) {
      excised_error += (b - a) * fallback_fmax;
      return;
    }
    try {
      push(apply_rule(integrands[which], a, b, which, out.evaluations));
      ++out.intervals;
    } catch (const BadPoint& bad) {
      ++out.excisions;
      if (out.excisions > cfg.max_excisions)
        throw QuadratureFailure("integration domain is saturated with exceptional points");
      const double w = std::max(1e-10 * (b - a), 8.0 * std::abs(bad.x) * 1e-16);
      excised_error += 2.0 * w * fallback_fmax;
      if (bad.x - w > a) settle(a, bad.x - w, which, fallback_fmax);
      if (bad.x + w < b) settle(bad.x + w, b, which, fallback_fmax);
    }
  };

  for (const auto& [iv, which] : seeds) settle(iv.lo, iv.hi, which, 0.0);

  while (err_sum + excised_error > cfg.abs_tol && out.intervals < cfg.max_intervals) {
    size_t worst = pieces.size();
    double worst_err = 0.0;
    for (size_t i = 0; i < pieces.size(); ++i)
      if (pieces[i].error > worst_err) {
        worst_err = pieces[i].error;
        worst = i;
      }
    if (worst == pieces.size()) break;  // all piece errors zero; excisions remain

    Piece p = pieces[worst];
    if (!(p.b - p.a > 2.0 * min_width)) {
      // Unsplittable; retire its error into the permanent tally.
      excised_error += p.error;
      val_sum -= pieces[worst].value;
      err_sum -= pieces[worst].error;
      p.error = 0.0;
      pieces[worst] = p;
      val_sum += p.value;
      continue;
    }
    pieces.erase(pieces.begin() + worst);
    val_sum -= p.value;
    err_sum -= p.error;
    const double mid = 0.5 * (p.a + p.b);
    settle(p.a, mid, p.which, p.fmax);
    settle(mid, p.b, p.which, p.fmax);
  }

  const double total_err = err_sum + excised_error;
  if (total_err > cfg.abs_tol && out.intervals >= cfg.max_intervals)
    throw QuadratureFailure("error target not met within the subdivision budget");

  out.value = val_sum;
  out.error = total_err;
  return out;
}

// ---------------------------------------------------------------------------
// Currents
// ---------------------------------------------------------------------------

IntervalUnion current_domain(const SystemSpec& spec, int k, const QuadratureConfig& cfg) {
  const LeadSpec& lk = spec.leads.at(k);
  IntervalUnion domain;
  for (int j = 0; j < spec.num_leads(); ++j) {
    if (j == k) continue;
    const LeadSpec& lj = spec.leads[j];
    IntervalUnion pair = intersect(lk.band(), lj.band());
    if (lk.beta == kInfinity && lj.beta == kInfinity) {
      // The Fermi difference vanishes exactly outside the mu window.
      pair = intersect(pair, IntervalUnion(Interval{std::min(lk.mu, lj.mu),
                                                    std::max(lk.mu, lj.mu)}));
    }
    domain = unite(domain, pair);
  }
  // Strip every lead's edge margin; the solver rejects those neighbourhoods.
  IntervalUnion margins;
  for (const LeadSpec& l : spec.leads) {
    const double m = cfg.edge_margin_rel * l.bandwidth();
    margins.add({l.band_min() - m, l.band_min() + m});
    margins.add({l.band_max() - m, l.band_max() + m});
  }
  return subtract(domain, margins);
}

namespace {

QuadratureOutcome current_integral(const SystemSpec& spec, const CouplingSpace& space,
                                   int k, const QuadratureConfig& cfg, bool energy_weighted) {
  const IntervalUnion domain = current_domain(spec, k, cfg);
  if (domain.empty()) return {};

  ScatteringSettings st;
  st.edge_margin_rel = cfg.edge_margin_rel;
  st.condition_threshold = cfg.condition_threshold;

  const double prefactor = energy_weighted ? 2.0 * std::numbers::pi
                                           : -2.0 * spec.charge * std::numbers::pi;
  auto integrand = [&spec, &space, k, st, prefactor, energy_weighted](double e) {
    const ScatteringData data = solve_scattering(spec, space, e, st);
    double sum = 0.0;
    const double fk = fermi_dirac(e, spec.leads[k].beta, spec.leads[k].mu);
    for (int j = 0; j < spec.num_leads(); ++j) {
      if (j == k) continue;
      const double fj = fermi_dirac(e, spec.leads[j].beta, spec.leads[j].mu);
      sum += (fk - fj) * std::norm(data.t(k, j));
    }
    return prefactor * (energy_weighted ? e * sum : sum);
  };

  // Every chemical potential marks a kink or a sharp thermal window; seed
  // subdivisions there so the adaptive rule starts on the right structure.
  std::vector<double> splits;
  for (const LeadSpec& l : spec.leads) splits.push_back(l.mu);

  return integrate_band(integrand, domain, cfg, &spec.leads[k], splits);
}

}  // namespace

std::pair<double, double> charge_current(const SystemSpec& spec, int k,
                                         const QuadratureConfig& cfg) {
  const CouplingSpace space = build_coupling_space(spec);
  const QuadratureOutcome q = current_integral(spec, space, k, cfg, false);
  return {q.value, q.error};
}

std::pair<double, double> energy_current(const SystemSpec& spec, int k,
                                         const QuadratureConfig& cfg) {
  const CouplingSpace space = build_coupling_space(spec);
  const QuadratureOutcome q = current_integral(spec, space, k, cfg, true);
  return {q.value, q.error};
}

CurrentReport current_report(const SystemSpec& spec, const QuadratureConfig& cfg,
                             bool with_charge, bool with_energy) {
  const CouplingSpace space = build_coupling_space(spec);
  const int n = spec.num_leads();
  CurrentReport rep;
  rep.with_charge = with_charge;
  rep.with_energy = with_energy;
  rep.charge_currents = RealVector::Zero(n);
  rep.charge_errors = RealVector::Zero(n);
  rep.energy_currents = RealVector::Zero(n);
  rep.energy_errors = RealVector::Zero(n);

  for (int k = 0; k < n; ++k) {
    if (with_charge) {
      const QuadratureOutcome q = current_integral(spec, space, k, cfg, false);
      rep.charge_currents(k) = q.value;
      rep.charge_errors(k) = q.error;
      rep.charge_quadrature.push_back(q);
    }
    if (with_energy) {
      const QuadratureOutcome q = current_integral(spec, space, k, cfg, true);
      rep.energy_currents(k) = q.value;
      rep.energy_errors(k) = q.error;
      rep.energy_quadrature.push_back(q);
    }
  }
  rep.charge_conservation_defect = std::abs(rep.charge_currents.sum());
  rep.energy_conservation_defect = std::abs(rep.energy_currents.sum());
  return rep;
}

}  // namespace lbness
