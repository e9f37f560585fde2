#pragma once

#include "scm/clustering.hpp"
#include "scm/descriptors.hpp"
#include "scm/model.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace scm {

// Population and sampling of one member. Exactly one of rho / spectrum and
// exactly one of N / n_ratio / c is set.
//   n_ratio: N = round(n_ratio * M)      c: N = round(M / c)
struct MemberSpec {
  std::string label;
  std::string cluster;
  std::optional<double> rho;
  std::optional<PopulationSpectrum> spectrum;
  std::optional<int> N;
  std::optional<double> n_ratio;
  std::optional<double> c;
};

// rho of the listed members becomes base + value for each value.
struct DrhoSweep {
  double base = 0.0;
  std::vector<double> values;
  std::vector<std::string> members;
};

struct Scenario {
  std::string name;
  std::string note;
  int M = 0;
  Field field = Field::Real;
  std::vector<DistanceKind> kinds;  // empty: every kind the regime allows
  std::vector<MemberSpec> members;
  std::vector<int> sweep_m;
  std::optional<DrhoSweep> drho;
  bool representative = false;
  std::string hash;  // FNV-1a of the canonical JSON

  std::vector<std::string> clusters() const;
};

Scenario parse_scenario(const nlohmann::json& j);
Scenario load_scenario(const std::string& path);  // DomainError on I/O or schema problems

int sample_count(const MemberSpec& spec, int M);

Ensemble build_ensemble(const Scenario& s, std::optional<int> M = std::nullopt,
                        std::optional<double> drho = std::nullopt);
ClusterScenario build_cluster_scenario(const Scenario& s, std::optional<int> M = std::nullopt,
                                       std::optional<double> drho = std::nullopt);

// Kinds whose regime constraints every pair of the ensemble satisfies.
std::vector<DistanceKind> admissible_kinds(const Ensemble& e);

std::string fnv1a_hex(const std::string& text);

}  // namespace scm
