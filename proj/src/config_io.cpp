#include "lbness/config_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace lbness {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    fail(where + " missing required field `" + key + "`");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where + " must be a number");
  return j.get<double>();
}

Complex complex_pair(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    fail(where + " must be a [re, im] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

double beta_value(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "inf" || s == "+inf" || s == "infinity") return kInfinity;
  }
  fail(where + " must be a positive number or \"inf\"");
}

SiteAmplitudes site_map(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where + " must be a map from site index to [re, im]");
  SiteAmplitudes out;
  for (const auto& [key, val] : j.items()) {
    int site = 0;
    try {
      size_t pos = 0;
      site = std::stoi(key, &pos);
      if (pos != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      fail(where + " has non-integer site key `" + key + "`");
    }
    out[site] = complex_pair(val, where + " site " + key);
  }
  return out;
}

}  // namespace

SystemSpec system_from_json(const json& j) {
  if (!j.is_object()) fail("top level must be an object");
  const json& schema = require(j, "schema", "config");
  if (!schema.is_number_integer() || schema.get<int>() != 1)
    fail("unsupported schema version (expected schema: 1)");

  SystemSpec spec;
  spec.charge = number(require(j, "charge", "config"), "`charge`");

  const json& leads = require(j, "leads", "config");
  if (!leads.is_array()) fail("`leads` must be an array");
  for (size_t i = 0; i < leads.size(); ++i) {
    const std::string where = "lead " + std::to_string(i + 1);
    LeadSpec l;
    l.hopping = number(require(leads[i], "hopping", where), where + " `hopping`");
    l.onsite = number(require(leads[i], "onsite", where), where + " `onsite`");
    l.beta = beta_value(require(leads[i], "beta", where), where + " `beta`");
    l.mu = number(require(leads[i], "mu", where), where + " `mu`");
    spec.leads.push_back(l);
  }

  const json& dot = require(j, "dot", "config");
  const json& jdim = require(dot, "dim", "`dot`");
  if (!jdim.is_number_integer() || jdim.get<int>() < 0)
    fail("`dot.dim` must be a non-negative integer");
  const int m = jdim.get<int>();
  const json& jmat = require(dot, "matrix", "`dot`");
  if (!jmat.is_array() || static_cast<int>(jmat.size()) != m * m)
    fail("`dot.matrix` must be a row-major list of dim*dim [re, im] pairs");
  Matrix h(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c)
      h(r, c) = complex_pair(jmat[r * m + c], "`dot.matrix` entry");
  spec.dot.h = h;
  if (m > 0) {
    spec.dot.load_asymmetry = (h - h.adjoint().eval()).cwiseAbs().maxCoeff();
    const double tol = 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff());
    // Exact symmetrization; inputs beyond the tolerance stay raw so that
    // validation can point at the offending entries.
    if (spec.dot.load_asymmetry <= tol) spec.dot.h = 0.5 * (h + h.adjoint().eval());
  }

  const json& couplings = require(j, "couplings", "config");
  if (!couplings.is_array()) fail("`couplings` must be an array");
  for (size_t i = 0; i < couplings.size(); ++i) {
    const std::string where = "coupling " + std::to_string(i + 1);
    const json& jc = couplings[i];
    CouplingTerm t;
    const json& kind = require(jc, "kind", where);
    if (kind == "dot_lead") {
      t.kind = CouplingKind::DotLead;
      const json& jl = require(jc, "lead", where);
      if (!jl.is_number_integer()) fail(where + " `lead` must be a 1-based lead index");
      t.lead_b = jl.get<int>() - 1;
      const json& dv = require(jc, "dot_vector", where);
      if (!dv.is_array()) fail(where + " `dot_vector` must be a list of [re, im] pairs");
      t.dot_vector = Vector(dv.size());
      for (size_t q = 0; q < dv.size(); ++q)
        t.dot_vector(q) = complex_pair(dv[q], where + " `dot_vector` entry");
      t.lead_vector_b = site_map(require(jc, "lead_vector", where), where + " `lead_vector`");
    } else if (kind == "lead_lead") {
      t.kind = CouplingKind::LeadLead;
      const json& ja = require(jc, "lead_a", where);
      const json& jb = require(jc, "lead_b", where);
      if (!ja.is_number_integer() || !jb.is_number_integer())
        fail(where + " `lead_a`/`lead_b` must be 1-based lead indices");
      t.lead_a = ja.get<int>() - 1;
      t.lead_b = jb.get<int>() - 1;
      t.lead_vector_a = site_map(require(jc, "vector_a", where), where + " `vector_a`");
      t.lead_vector_b = site_map(require(jc, "vector_b", where), where + " `vector_b`");
    } else {
      fail(where + " `kind` must be \"dot_lead\" or \"lead_lead\"");
    }
    t.amplitude = complex_pair(require(jc, "amplitude", where), where + " `amplitude`");
    spec.couplings.push_back(std::move(t));
  }

  return spec;
}

nlohmann::ordered_json system_to_json(const SystemSpec& spec) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["charge"] = spec.charge;
  j["leads"] = nlohmann::ordered_json::array();
  for (const LeadSpec& l : spec.leads) {
    nlohmann::ordered_json jl;
    jl["hopping"] = l.hopping;
    jl["onsite"] = l.onsite;
    if (l.beta == kInfinity)
      jl["beta"] = "inf";
    else
      jl["beta"] = l.beta;
    jl["mu"] = l.mu;
    j["leads"].push_back(jl);
  }
  const int m = static_cast<int>(spec.dot.dim());
  j["dot"]["dim"] = m;
  j["dot"]["matrix"] = nlohmann::ordered_json::array();
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c)
      j["dot"]["matrix"].push_back({spec.dot.h(r, c).real(), spec.dot.h(r, c).imag()});
  j["couplings"] = nlohmann::ordered_json::array();
  for (const CouplingTerm& t : spec.couplings) {
    nlohmann::ordered_json jc;
    auto site_json = [](const SiteAmplitudes& v) {
      nlohmann::ordered_json out = nlohmann::ordered_json::object();
      for (const auto& [site, a] : v)
        out[std::to_string(site)] = {a.real(), a.imag()};
      return out;
    };
    if (t.kind == CouplingKind::DotLead) {
      jc["kind"] = "dot_lead";
      jc["lead"] = t.lead_b + 1;
      jc["amplitude"] = {t.amplitude.real(), t.amplitude.imag()};
      jc["dot_vector"] = nlohmann::ordered_json::array();
      for (Eigen::Index q = 0; q < t.dot_vector.size(); ++q)
        jc["dot_vector"].push_back({t.dot_vector(q).real(), t.dot_vector(q).imag()});
      jc["lead_vector"] = site_json(t.lead_vector_b);
    } else {
      jc["kind"] = "lead_lead";
      jc["lead_a"] = t.lead_a + 1;
      jc["lead_b"] = t.lead_b + 1;
      jc["amplitude"] = {t.amplitude.real(), t.amplitude.imag()};
      jc["vector_a"] = site_json(t.lead_vector_a);
      jc["vector_b"] = site_json(t.lead_vector_b);
    }
    j["couplings"].push_back(jc);
  }
  return j;
}

SystemSpec load_system(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open `" + path + "`");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail("JSON parse failure in `" + path + "`: " + e.what());
  }
  return system_from_json(j);
}

}  // namespace lbness
