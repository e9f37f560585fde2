#pragma once

#include "scm/descriptors.hpp"
#include "scm/options.hpp"
#include "scm/scenario.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace scm {

struct RunConfig {
  std::string scenario_path;
  std::string out_dir;  // empty: stdout only
  std::string format = "json";
  std::vector<DistanceKind> kinds;  // empty: scenario kinds, else every admissible kind
  std::optional<int> M;
  std::vector<int> sweep_m;
  std::vector<double> sweep_drho;
  int trials = 10000;
  int samples = kDefaultGaussianSamples;
  std::uint64_t seed = 1;
  int nodes = 0;  // 0: library defaults
  int threads = 0;
};

LawOptions law_options(const RunConfig& cfg);

nlohmann::json law_to_json(const GaussianLaw& law);
nlohmann::json result_to_json(const PredictionResult& r, const Scenario& s, DistanceKind kind, int M);
void write_describe_csv(const GaussianLaw& law, std::ostream& os);

// Each command writes its summary to `out` and files under cfg.out_dir.
// Library exceptions propagate; warnings go to `err` as JSON lines.
int cmd_describe(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace scm
