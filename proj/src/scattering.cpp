#include "lbness/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <thread>

namespace lbness {

int CouplingSpace::total_sites() const {
  int n = 0;
  for (const auto& s : lead_sites) n += static_cast<int>(s.size());
  return n;
}

int CouplingSpace::lead_offset(int lead) const {
  int off = dot_dim;
  for (int j = 0; j < lead; ++j) off += static_cast<int>(lead_sites[j].size());
  return off;
}

int CouplingSpace::index_of(int lead, int site) const {
  const auto& sites = lead_sites[lead];
  auto it = std::lower_bound(sites.begin(), sites.end(), site);
  if (it == sites.end() || *it != site) return -1;
  return lead_offset(lead) + static_cast<int>(it - sites.begin());
}

CouplingSpace build_coupling_space(const SystemSpec& spec) {
  CouplingSpace sp;
  sp.dot_dim = static_cast<int>(spec.dot.dim());
  sp.lead_sites.resize(spec.leads.size());

  std::vector<std::set<int>> sites(spec.leads.size());
  for (const CouplingTerm& t : spec.couplings) {
    for (const auto& [site, amp] : t.lead_vector_b) {
      (void)amp;
      sites.at(t.lead_b).insert(site);
    }
    if (t.kind == CouplingKind::LeadLead)
      for (const auto& [site, amp] : t.lead_vector_a) {
        (void)amp;
        sites.at(t.lead_a).insert(site);
      }
  }
  for (size_t j = 0; j < sites.size(); ++j)
    sp.lead_sites[j].assign(sites[j].begin(), sites[j].end());

  // Assemble V restricted to the coupling coordinates by applying the
  // abstract V to each basis vector. Single-sources the Hermitian structure.
  const int d = sp.dim();
  sp.v_matrix = Matrix::Zero(d, d);
  for (int col = 0; col < d; ++col) {
    BlockVector e = zero_block_vector(spec);
    if (col < sp.dot_dim) {
      e.dot(col) = 1.0;
    } else {
      int rest = col - sp.dot_dim;
      for (size_t j = 0; j < sp.lead_sites.size(); ++j) {
        const int nj = static_cast<int>(sp.lead_sites[j].size());
        if (rest < nj) {
          e.lead[j][sp.lead_sites[j][rest]] = 1.0;
          break;
        }
        rest -= nj;
      }
    }
    const BlockVector ve = apply_coupling(spec, e);
    for (int row = 0; row < sp.dot_dim; ++row) sp.v_matrix(row, col) = ve.dot(row);
    for (size_t j = 0; j < sp.lead_sites.size(); ++j) {
      const int off = sp.lead_offset(static_cast<int>(j));
      for (size_t i = 0; i < sp.lead_sites[j].size(); ++i) {
        auto it = ve.lead[j].find(sp.lead_sites[j][i]);
        if (it != ve.lead[j].end()) sp.v_matrix(off + static_cast<int>(i), col) = it->second;
      }
    }
  }
  return sp;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class LeadState { Open, Closed };

std::vector<LeadState> classify_leads(const SystemSpec& spec, double energy,
                                      const ScatteringSettings& st) {
  std::vector<LeadState> states(spec.leads.size());
  bool any_open = false;
  for (size_t j = 0; j < spec.leads.size(); ++j) {
    const LeadSpec& l = spec.leads[j];
    const double m = st.edge_margin_rel * l.bandwidth();
    if (energy > l.band_min() + m && energy < l.band_max() - m) {
      states[j] = LeadState::Open;
      any_open = true;
    } else if (energy < l.band_min() - m || energy > l.band_max() + m) {
      states[j] = LeadState::Closed;
    } else {
      throw AtBandEdge("energy within the edge margin of a lead band");
    }
  }
  if (!any_open) throw OutOfBand("no lead band contains this energy");
  return states;
}

double opnorm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.jacobiSvd().singularValues()(0);
}

Matrix open_block(const Matrix& full, const std::vector<bool>& open) {
  std::vector<int> idx;
  for (size_t j = 0; j < open.size(); ++j)
    if (open[j]) idx.push_back(static_cast<int>(j));
  Matrix blk(idx.size(), idx.size());
  for (size_t a = 0; a < idx.size(); ++a)
    for (size_t b = 0; b < idx.size(); ++b) blk(a, b) = full(idx[a], idx[b]);
  return blk;
}

}  // namespace

ScatteringData solve_scattering(const SystemSpec& spec, const CouplingSpace& space,
                                double energy, const ScatteringSettings& settings) {
  const int n_leads = spec.num_leads();
  const auto states = classify_leads(spec, energy, settings);

  ScatteringData data;
  data.energy = energy;
  data.t = Matrix::Zero(n_leads, n_leads);
  data.open.resize(n_leads);
  for (int j = 0; j < n_leads; ++j) data.open[j] = states[j] == LeadState::Open;

  const int m_dot = space.dot_dim;
  const int n_sites = space.total_sites();
  const bool have_v = space.v_matrix.size() > 0 && space.v_matrix.cwiseAbs().maxCoeff() > 0.0;

  if (have_v && n_sites > 0) {
    // The dot participates only when V actually touches it.
    const bool dot_active =
        m_dot > 0 && space.v_matrix.topRows(m_dot).cwiseAbs().maxCoeff() > 0.0;
    const int n_active = (dot_active ? m_dot : 0) + n_sites;
    const int site0 = space.dot_dim;            // first site coord in full indexing
    const int asite0 = dot_active ? m_dot : 0;  // first site coord in active indexing

    auto full_of_active = [&](int a) { return a < asite0 ? a : a - asite0 + site0; };

    // Retarded lead resolvents at the coupling sites, block diagonal.
    Matrix green = Matrix::Zero(n_sites, n_sites);
    {
      int off = 0;
      for (int j = 0; j < n_leads; ++j) {
        const auto& sites = space.lead_sites[j];
        const double margin = settings.edge_margin_rel * spec.leads[j].bandwidth();
        for (size_t a = 0; a < sites.size(); ++a)
          for (size_t b = 0; b < sites.size(); ++b)
            green(off + a, off + b) = lead_green(spec.leads[j], Complex{energy, 0.0},
                                                 sites[a], sites[b], true, margin);
        off += static_cast<int>(sites.size());
      }
    }

    Matrix a_mat = Matrix::Zero(n_active, n_active);
    if (dot_active) {
      a_mat.topLeftCorner(m_dot, m_dot) =
          spec.dot.h - energy * Matrix::Identity(m_dot, m_dot);
      for (int col = 0; col < n_active; ++col)
        a_mat.block(0, col, m_dot, 1) +=
            space.v_matrix.block(0, full_of_active(col), m_dot, 1);
    }
    // Site rows: c - G (V u)|_sites = psi0|_sites, with G the retarded
    // resolvent ((H0 - E - i0)^{-1} = -G).
    for (int r = 0; r < n_sites; ++r) {
      a_mat(asite0 + r, asite0 + r) += 1.0;
      for (int col = 0; col < n_active; ++col) {
        Complex g_v{0.0, 0.0};
        for (int rp = 0; rp < n_sites; ++rp)
          g_v += green(r, rp) * space.v_matrix(site0 + rp, full_of_active(col));
        a_mat(asite0 + r, col) -= g_v;
      }
    }

    Eigen::PartialPivLU<Matrix> lu(a_mat);
    const double rcond = lu.rcond();
    data.condition_estimate = rcond > 0.0 ? 1.0 / rcond : kInfinity;
    // rcond can miss an exactly singular factorization; a zero pivot settles it
    if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() == 0.0)
      data.condition_estimate = kInfinity;
    if (!(data.condition_estimate < settings.condition_threshold))
      throw ExceptionalEnergy(energy, "augmented solve is ill-conditioned (exceptional energy)");

    for (int in = 0; in < n_leads; ++in) {
      if (!data.open[in]) continue;
      const BandPoint pt_in =
          band_point(spec.leads[in], energy, settings.edge_margin_rel * spec.leads[in].bandwidth());
      Vector rhs = Vector::Zero(n_active);
      {
        const int off = space.lead_offset(in) - site0;  // within site coords
        const auto& sites = space.lead_sites[in];
        for (size_t a = 0; a < sites.size(); ++a)
          rhs(asite0 + off + static_cast<int>(a)) = eigenfunction(spec.leads[in], pt_in, sites[a]);
      }
      const Vector u_active = lu.solve(rhs);
      Vector u_full = Vector::Zero(space.dim());
      for (int a = 0; a < n_active; ++a) u_full(full_of_active(a)) = u_active(a);
      const Vector w = space.v_matrix * u_full;  // V psi+ on the coupling coords

      for (int out = 0; out < n_leads; ++out) {
        if (!data.open[out]) continue;
        const BandPoint pt_out = band_point(spec.leads[out], energy,
                                            settings.edge_margin_rel * spec.leads[out].bandwidth());
        Complex t_elem{0.0, 0.0};
        const int off = space.lead_offset(out);
        const auto& sites = space.lead_sites[out];
        for (size_t a = 0; a < sites.size(); ++a)
          t_elem += eigenfunction(spec.leads[out], pt_out, sites[a]) * w(off + static_cast<int>(a));
        data.t(out, in) = t_elem;
      }
    }
  }

  data.s = Matrix::Identity(n_leads, n_leads) - Complex{0.0, kTwoPi} * data.t;
  data.unitarity_residual = unitarity_residual(data);
  data.optical_residual = optical_residual(data);
  return data;
}

double unitarity_residual(const ScatteringData& data) {
  const Matrix s = open_block(data.s, data.open);
  if (s.size() == 0) return 0.0;
  return opnorm(s * s.adjoint() - Matrix::Identity(s.rows(), s.cols()));
}

double optical_residual(const ScatteringData& data) {
  const Matrix t = open_block(data.t, data.open);
  if (t.size() == 0) return 0.0;
  return opnorm(t - t.adjoint() + Complex{0.0, kTwoPi} * (t * t.adjoint()));
}

double transmission_probability(const ScatteringData& data, int j, int k) {
  if (!data.open.at(j) || !data.open.at(k))
    throw LeadClosed("transmission requested for a closed lead");
  return kTwoPi * kTwoPi * std::norm(data.t(j, k));
}

ScanResult scan_transmission(const SystemSpec& spec, const CouplingSpace& space,
                             const std::vector<double>& energies,
                             const ScatteringSettings& settings, int threads) {
  ScanResult result;
  result.energies = energies;
  result.points.resize(energies.size());
  std::vector<int> skip_kind(energies.size(), 0);

  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min<int>(threads, static_cast<int>(energies.size())));

  auto work = [&](int tid) {
    for (size_t i = tid; i < energies.size(); i += threads) {
      try {
        result.points[i] = solve_scattering(spec, space, energies[i], settings);
      } catch (const AtBandEdge&) {
        skip_kind[i] = 1;
      } catch (const OutOfBand&) {
        skip_kind[i] = 2;
      } catch (const ExceptionalEnergy&) {
        skip_kind[i] = 3;
      }
    }
  };

  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }

  for (int k : skip_kind) {
    result.skipped_edge += (k == 1);
    result.skipped_closed += (k == 2);
    result.skipped_exceptional += (k == 3);
  }
  return result;
}

}  // namespace lbness
