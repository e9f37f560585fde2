#include "scm/scenario.hpp"

#include "scm/errors.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace scm {

using nlohmann::json;

std::vector<std::string> Scenario::clusters() const {
  std::vector<std::string> out;
  for (const auto& m : members) out.push_back(m.cluster);
  return out;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw DomainError(where + ": missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DomainError(where + ": bad '" + key + "': " + e.what());
  }
}

MemberSpec parse_member(const json& j, int index) {
  const std::string where = "member " + std::to_string(index);
  if (!j.is_object()) throw DomainError(where + ": expected an object");
  MemberSpec m;
  m.label = j.contains("label") ? get<std::string>(j, "label", where) : "R" + std::to_string(index + 1);
  m.cluster = j.contains("cluster") ? get<std::string>(j, "cluster", where) : m.label;
  if (j.contains("rho")) m.rho = get<double>(j, "rho", where);
  if (j.contains("eigenvalues")) {
    PopulationSpectrum sp;
    sp.eigenvalues = get<std::vector<double>>(j, "eigenvalues", where);
    sp.multiplicities = get<std::vector<int>>(j, "multiplicities", where);
    if (sp.eigenvalues.size() != sp.multiplicities.size() || sp.eigenvalues.empty())
      throw DomainError(where + ": eigenvalues and multiplicities differ in length");
    m.spectrum = sp;
  }
  if (m.rho.has_value() == m.spectrum.has_value())
    throw DomainError(where + ": give exactly one of 'rho' or 'eigenvalues'");
  int given = 0;
  if (j.contains("N")) m.N = get<int>(j, "N", where), ++given;
  if (j.contains("n_ratio")) m.n_ratio = get<double>(j, "n_ratio", where), ++given;
  if (j.contains("c")) m.c = get<double>(j, "c", where), ++given;
  if (given != 1) throw DomainError(where + ": give exactly one of 'N', 'n_ratio' or 'c'");
  return m;
}

}  // namespace

Scenario parse_scenario(const json& j) {
  if (!j.is_object()) throw DomainError("scenario: expected a JSON object");
  Scenario s;
  s.name = j.value("name", std::string("scenario"));
  s.note = j.value("note", std::string());
  s.M = get<int>(j, "M", "scenario");
  if (j.contains("varsigma"))
    s.field = field_from_varsigma(get<int>(j, "varsigma", "scenario"));
  else if (j.contains("field")) {
    auto f = get<std::string>(j, "field", "scenario");
    if (f == "real")
      s.field = Field::Real;
    else if (f == "complex")
      s.field = Field::Complex;
    else
      throw DomainError("scenario: field must be 'real' or 'complex'");
  }
  if (j.contains("kinds"))
    for (const auto& k : get<std::vector<std::string>>(j, "kinds", "scenario")) s.kinds.push_back(parse_kind(k));
  if (!j.contains("members") || !j.at("members").is_array() || j.at("members").empty())
    throw DomainError("scenario: 'members' must be a non-empty array");
  int idx = 0;
  for (const auto& m : j.at("members")) {
    s.members.push_back(parse_member(m, idx++));
    for (size_t k = 0; k + 1 < s.members.size(); ++k)
      if (s.members[k].label == s.members.back().label)
        throw DomainError("scenario: duplicate member label '" + s.members.back().label + "'");
  }
  if (j.contains("sweep_m")) s.sweep_m = get<std::vector<int>>(j, "sweep_m", "scenario");
  if (j.contains("drho")) {
    const json& d = j.at("drho");
    DrhoSweep sw;
    sw.base = get<double>(d, "base", "drho");
    sw.values = get<std::vector<double>>(d, "values", "drho");
    sw.members = get<std::vector<std::string>>(d, "members", "drho");
    for (const auto& lbl : sw.members) {
      bool found = false;
      for (const auto& m : s.members) found |= m.label == lbl && m.rho.has_value();
      if (!found) throw DomainError("drho: '" + lbl + "' is not a Toeplitz member");
    }
    s.drho = sw;
  }
  s.representative = j.value("representative", false);
  s.hash = fnv1a_hex(j.dump());
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open scenario file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DomainError("scenario " + path + ": " + e.what());
  }
  return parse_scenario(j);
}

int sample_count(const MemberSpec& spec, int M) {
  double n = 0;
  if (spec.N)
    n = *spec.N;
  else if (spec.n_ratio)
    n = std::round(*spec.n_ratio * M);
  else if (spec.c) {
    if (*spec.c <= 0) throw DomainError("member " + spec.label + ": c must be positive");
    n = std::round(M / *spec.c);
  }
  if (n < 1) throw DomainError("member " + spec.label + ": sample count below 1");
  return static_cast<int>(n);
}

Ensemble build_ensemble(const Scenario& s, std::optional<int> M_override, std::optional<double> drho) {
  const int M = M_override.value_or(s.M);
  if (M < 1) throw DomainError("M must be positive");
  Ensemble e;
  e.M = M;
  e.field = s.field;
  for (const auto& spec : s.members) {
    PopulationCovariance cov;
    if (spec.rho) {
      double rho = *spec.rho;
      if (drho && s.drho)
        for (const auto& lbl : s.drho->members)
          if (lbl == spec.label) rho = s.drho->base + *drho;
      cov = toeplitz_covariance(rho, M);
    } else {
      if (spec.spectrum->dimension() != M)
        throw DomainError("member " + spec.label + ": multiplicities do not sum to M");
      cov = covariance_from_spectrum(*spec.spectrum);
    }
    e.members.push_back(make_member(spec.label, std::move(cov), sample_count(spec, M)));
  }
  return e;
}

ClusterScenario build_cluster_scenario(const Scenario& s, std::optional<int> M, std::optional<double> drho) {
  return make_cluster_scenario(build_ensemble(s, M, drho), s.clusters());
}

std::vector<DistanceKind> admissible_kinds(const Ensemble& e) {
  std::vector<DistanceKind> out{DistanceKind::Euclidean};
  bool any_square = false, all_under = true;
  for (const auto& m : e.members) {
    any_square |= m.N() == m.M();
    all_under &= m.undersampled();
  }
  if (!any_square) out.push_back(DistanceKind::SymmetrizedKL);
  if (all_under) out.push_back(DistanceKind::Subspace);
  return out;
}

}  // namespace scm
