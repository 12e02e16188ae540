#include "lbness/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace lbness {

// ---------------------------------------------------------------------------
// IntervalUnion
// ---------------------------------------------------------------------------

void IntervalUnion::add(Interval iv) {
  if (!iv.valid()) return;
  std::vector<Interval> merged;
  merged.reserve(parts_.size() + 1);
  for (const Interval& p : parts_) {
    if (p.hi < iv.lo || iv.hi < p.lo) {
      merged.push_back(p);
    } else {  // overlap or touch: absorb into iv
      iv.lo = std::min(iv.lo, p.lo);
      iv.hi = std::max(iv.hi, p.hi);
    }
  }
  merged.push_back(iv);
  std::sort(merged.begin(), merged.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  parts_ = std::move(merged);
}

double IntervalUnion::total_length() const {
  double s = 0.0;
  for (const Interval& p : parts_) s += p.length();
  return s;
}

bool IntervalUnion::contains(double x) const {
  for (const Interval& p : parts_)
    if (p.contains(x)) return true;
  return false;
}

IntervalUnion intersect(const Interval& a, const Interval& b) {
  IntervalUnion u;
  u.add({std::max(a.lo, b.lo), std::min(a.hi, b.hi)});
  return u;
}

IntervalUnion intersect(const IntervalUnion& a, const IntervalUnion& b) {
  IntervalUnion u;
  for (const Interval& p : a.parts())
    for (const Interval& q : b.parts())
      u.add({std::max(p.lo, q.lo), std::min(p.hi, q.hi)});
  return u;
}

IntervalUnion unite(const IntervalUnion& a, const IntervalUnion& b) {
  IntervalUnion u = a;
  for (const Interval& q : b.parts()) u.add(q);
  return u;
}

IntervalUnion subtract(const IntervalUnion& a, const IntervalUnion& b) {
  IntervalUnion out;
  for (const Interval& p : a.parts()) {
    std::vector<Interval> pieces{p};
    for (const Interval& cut : b.parts()) {
      std::vector<Interval> next;
      for (const Interval& piece : pieces) {
        if (cut.hi <= piece.lo || piece.hi <= cut.lo) {
          next.push_back(piece);
          continue;
        }
        if (cut.lo > piece.lo) next.push_back({piece.lo, std::min(cut.lo, piece.hi)});
        if (cut.hi < piece.hi) next.push_back({std::max(cut.hi, piece.lo), piece.hi});
      }
      pieces = std::move(next);
    }
    for (const Interval& piece : pieces) out.add(piece);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

bool ValidationReport::ok() const { return error_count() == 0; }

int ValidationReport::error_count() const {
  int n = 0;
  for (const auto& i : issues) n += (i.severity == Severity::Error);
  return n;
}

int ValidationReport::warning_count() const {
  return static_cast<int>(issues.size()) - error_count();
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& i : issues)
    os << (i.severity == Severity::Error ? "error: " : "warning: ") << i.message << "\n";
  return os.str();
}

namespace {

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Union-find over {dot} + leads for the connectivity warning.
struct Components {
  std::vector<int> parent;
  explicit Components(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
  void join(int a, int b) { parent[find(a)] = find(b); }
};

bool term_has_weight(const CouplingTerm& t) {
  if (t.amplitude == Complex{0.0, 0.0}) return false;
  auto live = [](const SiteAmplitudes& v) {
    for (const auto& [s, a] : v)
      if (a != Complex{0.0, 0.0}) return true;
    return false;
  };
  if (t.kind == CouplingKind::DotLead)
    return t.dot_vector.size() > 0 && t.dot_vector.norm() > 0.0 && live(t.lead_vector_b);
  return live(t.lead_vector_a) && live(t.lead_vector_b);
}

}  // namespace

ValidationReport validate(const SystemSpec& spec) {
  ValidationReport rep;
  auto error = [&](std::string m) { rep.issues.push_back({Severity::Error, std::move(m)}); };
  auto warn = [&](std::string m) { rep.issues.push_back({Severity::Warning, std::move(m)}); };

  const int n_leads = spec.num_leads();
  if (n_leads < 2) error("system must define at least two leads");

  for (int j = 0; j < n_leads; ++j) {
    const LeadSpec& l = spec.leads[j];
    if (!(l.hopping > 0.0)) error(fmt("lead %d: hopping must be positive", j + 1));
    if (!(l.beta > 0.0)) error(fmt("lead %d: beta must be positive (or +inf)", j + 1));
    if (!std::isfinite(l.onsite)) error(fmt("lead %d: onsite must be finite", j + 1));
    if (!std::isfinite(l.mu)) error(fmt("lead %d: mu must be finite", j + 1));
  }

  if (!(spec.charge > 0.0)) error("charge must be positive");

  const Eigen::Index m = spec.dot.dim();
  if (spec.dot.h.cols() != m) {
    error("dot matrix must be square");
  } else if (m > 0) {
    const double scale = std::max(1.0, spec.dot.h.cwiseAbs().maxCoeff());
    const double tol = 1e-12 * scale;
    double worst = spec.dot.load_asymmetry;
    Eigen::Index wi = 0, wj = 0;
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = i; j < m; ++j) {
        const double d = std::abs(spec.dot.h(i, j) - std::conj(spec.dot.h(j, i)));
        if (d > worst) {
          worst = d;
          wi = i;
          wj = j;
        }
      }
    if (worst > tol)
      error(fmt("dot matrix is not Hermitian: entries (%ld,%ld) and (%ld,%ld) differ by %.3g",
                long(wi + 1), long(wj + 1), long(wj + 1), long(wi + 1), worst));
  }

  for (size_t c = 0; c < spec.couplings.size(); ++c) {
    const CouplingTerm& t = spec.couplings[c];
    const int id = static_cast<int>(c) + 1;
    auto check_sites = [&](const SiteAmplitudes& v, const char* which) {
      for (const auto& [site, amp] : v) {
        (void)amp;
        if (site < 1) error(fmt("coupling %d: %s has site index %d; sites are 1-based", id, which, site));
      }
    };
    if (t.lead_b < 0 || t.lead_b >= n_leads)
      error(fmt("coupling %d: lead index %d out of range", id, t.lead_b + 1));
    check_sites(t.lead_vector_b, "lead vector");
    if (t.kind == CouplingKind::DotLead) {
      if (t.dot_vector.size() != m)
        error(fmt("coupling %d: dot vector has length %ld, expected %ld", id,
                  long(t.dot_vector.size()), long(m)));
      if (m == 0) warn(fmt("coupling %d: dot_lead term with no dot dimensions has no effect", id));
    } else {
      if (t.lead_a < 0 || t.lead_a >= n_leads)
        error(fmt("coupling %d: lead index %d out of range", id, t.lead_a + 1));
      if (t.lead_a == t.lead_b)
        error(fmt("coupling %d: lead_lead term must join two distinct leads", id));
      check_sites(t.lead_vector_a, "lead vector");
    }
    if (t.amplitude == Complex{0.0, 0.0})
      warn(fmt("coupling %d: zero amplitude, no effect", id));
  }

  // Connectivity: node 0 is the dot, nodes 1..N the leads.
  if (n_leads >= 2 && rep.ok()) {
    Components comp(n_leads + 1);
    for (const CouplingTerm& t : spec.couplings) {
      if (!term_has_weight(t)) continue;
      if (t.kind == CouplingKind::DotLead)
        comp.join(0, t.lead_b + 1);
      else
        comp.join(t.lead_a + 1, t.lead_b + 1);
    }
    bool all_disconnected = true;
    for (int a = 0; a < n_leads && all_disconnected; ++a)
      for (int b = a + 1; b < n_leads; ++b)
        if (comp.find(a + 1) == comp.find(b + 1)) all_disconnected = false;
    if (all_disconnected) {
      warn("leads are disconnected; all currents will be zero");
    } else {
      for (int a = 0; a < n_leads; ++a)
        for (int b = a + 1; b < n_leads; ++b)
          if (comp.find(a + 1) != comp.find(b + 1))
            warn(fmt("leads %d and %d are not connected by any coupling path; "
                     "currents between them will be zero",
                     a + 1, b + 1));
    }
  }

  return rep;
}

IntervalUnion spectral_intersection(const SystemSpec& spec, std::span<const int> which) {
  std::vector<int> idx(which.begin(), which.end());
  if (idx.empty()) {
    idx.resize(spec.leads.size());
    std::iota(idx.begin(), idx.end(), 0);
  }
  if (idx.empty()) return {};
  IntervalUnion u(spec.leads.at(idx[0]).band());
  for (size_t i = 1; i < idx.size(); ++i)
    u = intersect(u, IntervalUnion(spec.leads.at(idx[i]).band()));
  return u;
}

// ---------------------------------------------------------------------------
// Abstract V
// ---------------------------------------------------------------------------

BlockVector zero_block_vector(const SystemSpec& spec) {
  BlockVector v;
  v.dot = Vector::Zero(spec.dot.dim());
  v.lead.resize(spec.leads.size());
  return v;
}

Complex block_inner(const BlockVector& x, const BlockVector& y) {
  Complex s = x.dot.size() > 0 && y.dot.size() > 0 ? x.dot.dot(y.dot) : Complex{0.0, 0.0};
  const size_t n = std::min(x.lead.size(), y.lead.size());
  for (size_t j = 0; j < n; ++j) {
    for (const auto& [site, a] : x.lead[j]) {
      auto it = y.lead[j].find(site);
      if (it != y.lead[j].end()) s += std::conj(a) * it->second;
    }
  }
  return s;
}

namespace {

Complex site_inner(const SiteAmplitudes& v, const SiteAmplitudes& y) {
  Complex s{0.0, 0.0};
  for (const auto& [site, a] : v) {
    auto it = y.find(site);
    if (it != y.end()) s += std::conj(a) * it->second;
  }
  return s;
}

void axpy_sites(SiteAmplitudes& out, Complex c, const SiteAmplitudes& v) {
  for (const auto& [site, a] : v) out[site] += c * a;
}

}  // namespace

BlockVector apply_coupling(const SystemSpec& spec, const BlockVector& y) {
  BlockVector r = zero_block_vector(spec);
  for (const CouplingTerm& t : spec.couplings) {
    if (t.kind == CouplingKind::DotLead) {
      if (t.dot_vector.size() == 0) continue;
      // amplitude |s><f| y  +  conj(amplitude) |f><s| y
      const Complex fy = site_inner(t.lead_vector_b, y.lead.at(t.lead_b));
      r.dot += t.amplitude * fy * t.dot_vector;
      const Complex sy = y.dot.size() > 0 ? t.dot_vector.dot(y.dot) : Complex{0.0, 0.0};
      axpy_sites(r.lead.at(t.lead_b), std::conj(t.amplitude) * sy, t.lead_vector_b);
    } else {
      const Complex by = site_inner(t.lead_vector_b, y.lead.at(t.lead_b));
      axpy_sites(r.lead.at(t.lead_a), t.amplitude * by, t.lead_vector_a);
      const Complex ay = site_inner(t.lead_vector_a, y.lead.at(t.lead_a));
      axpy_sites(r.lead.at(t.lead_b), std::conj(t.amplitude) * ay, t.lead_vector_b);
    }
  }
  return r;
}

}  // namespace lbness
