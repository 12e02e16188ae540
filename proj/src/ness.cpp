#include "lbness/ness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "lbness/transport.hpp"

namespace lbness {

TruncatedSystem build_truncated(const SystemSpec& spec, const std::vector<int>& lengths) {
  const int n_leads = spec.num_leads();
  if (static_cast<int>(lengths.size()) != n_leads)
    throw Error("build_truncated: one length per lead required");

  for (int j = 0; j < n_leads; ++j) {
    int max_site = 0;
    for (const CouplingTerm& t : spec.couplings) {
      if (t.lead_b == j)
        for (const auto& [site, amp] : t.lead_vector_b) {
          (void)amp;
          max_site = std::max(max_site, site);
        }
      if (t.kind == CouplingKind::LeadLead && t.lead_a == j)
        for (const auto& [site, amp] : t.lead_vector_a) {
          (void)amp;
          max_site = std::max(max_site, site);
        }
    }
    if (lengths[j] < max_site + 1) {
      char msg[128];
      std::snprintf(msg, sizeof msg,
                    "lead %d truncated to %d sites but the coupling reaches site %d", j + 1,
                    lengths[j], max_site);
      throw TruncationTooShort(msg);
    }
  }

  TruncatedSystem sys;
  sys.dot_dim = static_cast<int>(spec.dot.dim());
  sys.lead_lengths = lengths;
  sys.lead_offsets.resize(n_leads);
  int dim = sys.dot_dim;
  for (int j = 0; j < n_leads; ++j) {
    sys.lead_offsets[j] = dim;
    dim += lengths[j];
  }

  Matrix h = Matrix::Zero(dim, dim);
  if (sys.dot_dim > 0) h.topLeftCorner(sys.dot_dim, sys.dot_dim) = spec.dot.h;
  for (int j = 0; j < n_leads; ++j) {
    const LeadSpec& l = spec.leads[j];
    const int off = sys.lead_offsets[j];
    for (int n = 0; n < lengths[j]; ++n) {
      h(off + n, off + n) = l.onsite;
      if (n + 1 < lengths[j]) {
        h(off + n, off + n + 1) = -l.hopping;
        h(off + n + 1, off + n) = -l.hopping;
      }
    }
  }
  // Coupling entries: site s of lead j sits at lead_offset(j) + s - 1.
  for (const CouplingTerm& t : spec.couplings) {
    if (t.kind == CouplingKind::DotLead) {
      if (t.dot_vector.size() == 0) continue;
      for (const auto& [site, f] : t.lead_vector_b) {
        const int col = sys.lead_offsets[t.lead_b] + site - 1;
        for (int i = 0; i < sys.dot_dim; ++i) {
          const Complex v = t.amplitude * t.dot_vector(i) * std::conj(f);
          h(i, col) += v;
          h(col, i) += std::conj(v);
        }
      }
    } else {
      for (const auto& [sa, ga] : t.lead_vector_a) {
        const int row = sys.lead_offsets[t.lead_a] + sa - 1;
        for (const auto& [sb, gb] : t.lead_vector_b) {
          const int col = sys.lead_offsets[t.lead_b] + sb - 1;
          const Complex v = t.amplitude * ga * std::conj(gb);
          h(row, col) += v;
          h(col, row) += std::conj(v);
        }
      }
    }
  }
  sys.hamiltonian = std::move(h);
  return sys;
}

Matrix initial_density(const TruncatedSystem& sys, const SystemSpec& spec) {
  Matrix rho = Matrix::Zero(sys.dim(), sys.dim());
  for (int j = 0; j < spec.num_leads(); ++j) {
    const int off = sys.lead_offset(j);
    const int len = sys.lead_length(j);
    const Matrix block = sys.hamiltonian.block(off, off, len, len);
    Eigen::SelfAdjointEigenSolver<Matrix> es(block);
    RealVector occ(len);
    for (int n = 0; n < len; ++n)
      occ(n) = fermi_dirac(es.eigenvalues()(n), spec.leads[j].beta, spec.leads[j].mu);
    rho.block(off, off, len, len) =
        es.eigenvectors() * occ.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  }
  return rho;
}

namespace {

/// Rank-one piece coef |u><w| of an observable, in truncated coordinates.
struct RankOnePiece {
  Complex coef;
  Vector u, w;
};

Vector embed_site_vector(const TruncatedSystem& sys, int lead, const SiteAmplitudes& v) {
  Vector out = Vector::Zero(sys.dim());
  for (const auto& [site, a] : v) out(sys.lead_offset(lead) + site - 1) = a;
  return out;
}

Vector embed_dot_vector(const TruncatedSystem& sys, const Vector& v) {
  Vector out = Vector::Zero(sys.dim());
  out.head(sys.dot_dim) = v;
  return out;
}

int block_of(const CouplingTerm& t, bool left) {
  if (t.kind == CouplingKind::DotLead) return left ? -1 : t.lead_b;  // -1 = dot
  return left ? t.lead_a : t.lead_b;
}

/// [V, P_k] as rank-one pieces: each a |l><r| picks up (delta_{r in k} -
/// delta_{l in k}), plus the conjugate pair.
std::vector<RankOnePiece> commutator_projection(const TruncatedSystem& sys,
                                                const SystemSpec& spec, int k) {
  std::vector<RankOnePiece> pieces;
  for (const CouplingTerm& t : spec.couplings) {
    const Vector l = t.kind == CouplingKind::DotLead
                         ? embed_dot_vector(sys, t.dot_vector)
                         : embed_site_vector(sys, t.lead_a, t.lead_vector_a);
    const Vector r = embed_site_vector(sys, t.lead_b, t.lead_vector_b);
    const int lblock = block_of(t, true);
    const int rblock = block_of(t, false);
    const double fwd = (rblock == k ? 1.0 : 0.0) - (lblock == k ? 1.0 : 0.0);
    if (fwd != 0.0) pieces.push_back({t.amplitude * fwd, l, r});
    const double bwd = (lblock == k ? 1.0 : 0.0) - (rblock == k ? 1.0 : 0.0);
    if (bwd != 0.0) pieces.push_back({std::conj(t.amplitude) * bwd, r, l});
  }
  return pieces;
}

/// [V, P_k H0 P_k]: |l><r| B = |l><B r|, B |l><r| = |B l><r| with B the
/// truncated lead-k block of H0.
std::vector<RankOnePiece> commutator_lead_energy(const TruncatedSystem& sys,
                                                 const SystemSpec& spec, int k) {
  const int off = sys.lead_offset(k);
  const int len = sys.lead_length(k);
  auto apply_b = [&](const Vector& v) {
    Vector out = Vector::Zero(sys.dim());
    out.segment(off, len) =
        sys.hamiltonian.block(off, off, len, len) * v.segment(off, len);
    return out;
  };
  std::vector<RankOnePiece> pieces;
  for (const CouplingTerm& t : spec.couplings) {
    const Vector l = t.kind == CouplingKind::DotLead
                         ? embed_dot_vector(sys, t.dot_vector)
                         : embed_site_vector(sys, t.lead_a, t.lead_vector_a);
    const Vector r = embed_site_vector(sys, t.lead_b, t.lead_vector_b);
    const int lblock = block_of(t, true);
    const int rblock = block_of(t, false);
    if (rblock == k) pieces.push_back({t.amplitude, l, apply_b(r)});
    if (lblock == k) {
      pieces.push_back({-t.amplitude, apply_b(l), r});
      pieces.push_back({std::conj(t.amplitude), r, apply_b(l)});
    }
    if (rblock == k) pieces.push_back({-std::conj(t.amplitude), apply_b(r), l});
  }
  return pieces;
}

}  // namespace

EvolutionTrace evolve_currents(const TruncatedSystem& sys, const SystemSpec& spec,
                               const Matrix& rho0, const RealVector& times,
                               const EvolveOptions& opts) {
  const int dim = sys.dim();
  const int n_leads = spec.num_leads();
  const int n_times = static_cast<int>(times.size());

  EvolutionTrace trace;
  trace.times = times;
  trace.charge_currents = RealMatrix::Zero(n_times, opts.charge ? n_leads : 0);
  trace.energy_currents = RealMatrix::Zero(n_times, opts.energy ? n_leads : 0);
  trace.dot_charge = RealVector::Zero(n_times);
  trace.imag_defect = RealVector::Zero(n_times);

  double max_hop = 0.0;
  int min_len = sys.lead_lengths.empty() ? 0 : sys.lead_lengths[0];
  for (const LeadSpec& l : spec.leads) max_hop = std::max(max_hop, l.hopping);
  for (int len : sys.lead_lengths) min_len = std::min(min_len, len);
  trace.recurrence_guard = max_hop > 0.0 ? min_len / (2.0 * max_hop) : kInfinity;
  for (int i = 0; i < n_times; ++i)
    if (times(i) > trace.recurrence_guard) trace.horizon_exceeded = true;

  // One eigendecomposition of H, reused across all times. Real-symmetric
  // systems take the cheaper real path.
  const bool real_h = sys.hamiltonian.imag().cwiseAbs().maxCoeff() == 0.0;
  const bool real_rho = rho0.imag().cwiseAbs().maxCoeff() == 0.0;
  RealVector lambda;
  Matrix u;
  Matrix rho_t;  // rho0 rotated to the eigenbasis
  if (real_h) {
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(sys.hamiltonian.real());
    lambda = es.eigenvalues();
    if (real_rho) {
      const RealMatrix rr = es.eigenvectors().transpose() * rho0.real() * es.eigenvectors();
      rho_t = rr.cast<Complex>();
    }
    u = es.eigenvectors().cast<Complex>();
    if (!real_rho) rho_t = u.adjoint() * rho0 * u;
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sys.hamiltonian);
    lambda = es.eigenvalues();
    u = es.eigenvectors();
    rho_t = u.adjoint() * rho0 * u;
  }

  // Per observable A: value(t) = ph(t)^dag W ph(t) with W = rho_t (.) A_t^T,
  // A_t = U^dag A U assembled from the rank-one pieces, ph_q = e^{i lambda_q t}.
  struct Observable {
    Matrix w;
    Complex prefactor;  // i e for charge, -i for energy, 1 for populations
    int kind;           // 0 charge (lead idx), 1 energy (lead idx), 2 dot charge
    int lead = -1;
  };
  std::vector<Observable> observables;

  auto rotated = [&](const std::vector<RankOnePiece>& pieces) {
    Matrix a = Matrix::Zero(dim, dim);
    for (const RankOnePiece& p : pieces)
      a.noalias() += p.coef * (u.adjoint() * p.u) * (u.adjoint() * p.w).adjoint();
    return a;
  };
  auto make_w = [&](const Matrix& a_t) -> Matrix {
    return rho_t.cwiseProduct(a_t.transpose());
  };

  const Complex ie{0.0, spec.charge};
  for (int k = 0; k < n_leads && opts.charge; ++k)
    observables.push_back({make_w(rotated(commutator_projection(sys, spec, k))), ie, 0, k});
  for (int k = 0; k < n_leads && opts.energy; ++k)
    observables.push_back(
        {make_w(rotated(commutator_lead_energy(sys, spec, k))), Complex{0.0, -1.0}, 1, k});
  if (opts.dot_charge && sys.dot_dim > 0) {
    const Matrix udot = u.topRows(sys.dot_dim);
    observables.push_back({make_w(udot.adjoint() * udot), Complex{1.0, 0.0}, 2});
  }

  Vector phase(dim);
  for (int it = 0; it < n_times; ++it) {
    const double t = times(it);
    for (int q = 0; q < dim; ++q) phase(q) = std::polar(1.0, lambda(q) * t);
    double imag_worst = 0.0;
    for (const Observable& ob : observables) {
      const Complex raw = phase.dot(ob.w * phase);  // ph^dag (W ph)
      const Complex val = ob.prefactor * raw;
      if (ob.kind == 0)
        trace.charge_currents(it, ob.lead) = val.real();
      else if (ob.kind == 1)
        trace.energy_currents(it, ob.lead) = val.real();
      else
        trace.dot_charge(it) = val.real();
      imag_worst = std::max(imag_worst, std::abs(val.imag()));
    }
    trace.imag_defect(it) = imag_worst;
  }
  return trace;
}

Matrix evolve_density(const TruncatedSystem& sys, const Matrix& rho0, double t) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sys.hamiltonian);
  const Matrix rho_t = es.eigenvectors().adjoint() * rho0 * es.eigenvectors();
  Vector phase(sys.dim());
  for (int q = 0; q < sys.dim(); ++q) phase(q) = std::polar(1.0, -es.eigenvalues()(q) * t);
  const Matrix mid = phase.asDiagonal() * rho_t * phase.conjugate().asDiagonal();
  return es.eigenvectors() * mid * es.eigenvectors().adjoint();
}

PlateauStats extract_plateau(const RealVector& times, const RealVector& values, double t0,
                             double t1, double noise_floor) {
  if (times.size() == 0 || t0 > t1) throw WindowOutsideTrace("empty plateau window");
  const double eps = 1e-9 * std::max(1.0, std::abs(t1));
  if (t0 < times(0) - eps || t1 > times(times.size() - 1) + eps)
    throw WindowOutsideTrace("plateau window outside the recorded times");

  double sum = 0.0;
  int count = 0;
  for (int i = 0; i < times.size(); ++i)
    if (times(i) >= t0 - eps && times(i) <= t1 + eps) {
      sum += values(i);
      ++count;
    }
  if (count == 0) throw WindowOutsideTrace("no recorded times inside the plateau window");

  PlateauStats st;
  st.value = sum / count;
  for (int i = 0; i < times.size(); ++i)
    if (times(i) >= t0 - eps && times(i) <= t1 + eps)
      st.fluctuation = std::max(st.fluctuation, std::abs(values(i) - st.value));
  st.plateau_ok =
      !(st.fluctuation > 0.05 * std::abs(st.value) && std::abs(st.value) > noise_floor);
  return st;
}

PlateauReport extract_plateau(const EvolutionTrace& trace, double t0, double t1) {
  PlateauReport rep;
  for (int k = 0; k < trace.charge_currents.cols(); ++k)
    rep.charge.push_back(extract_plateau(trace.times, trace.charge_currents.col(k), t0, t1));
  for (int k = 0; k < trace.energy_currents.cols(); ++k)
    rep.energy.push_back(extract_plateau(trace.times, trace.energy_currents.col(k), t0, t1));
  return rep;
}

std::string trace_to_csv(const EvolutionTrace& trace) {
  std::string out = "t[hbar/E]";
  char buf[40];
  for (int k = 0; k < trace.charge_currents.cols(); ++k)
    out += ",j_" + std::to_string(k + 1) + "[e*E/hbar]";
  for (int k = 0; k < trace.energy_currents.cols(); ++k)
    out += ",Phi_" + std::to_string(k + 1) + "[E^2/hbar]";
  out += ",imag_defect[1],dot_charge[1]\n";
  auto cell = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out += buf;
  };
  for (int i = 0; i < trace.times.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", trace.times(i));
    out += buf;
    for (int k = 0; k < trace.charge_currents.cols(); ++k) cell(trace.charge_currents(i, k));
    for (int k = 0; k < trace.energy_currents.cols(); ++k) cell(trace.energy_currents(i, k));
    cell(trace.imag_defect(i));
    cell(trace.dot_charge(i));
    out += "\n";
  }
  return out;
}

}  // namespace lbness
