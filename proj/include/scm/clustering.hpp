#pragma once

#include "scm/descriptors.hpp"
#include "scm/montecarlo.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace scm {

struct TaggedPair {
  int i = 0;
  int j = 0;
  bool within = false;
};

// All unordered pairs i < j, tagged within when the cluster labels match.
std::vector<TaggedPair> enumerate_pairs(const std::vector<std::string>& clusters);

struct ClusterScenario {
  Ensemble ensemble;
  std::vector<std::string> clusters;  // cluster id per member
  std::vector<std::pair<int, int>> pairs;
  std::vector<bool> within;
};

ClusterScenario make_cluster_scenario(Ensemble ensemble, std::vector<std::string> clusters);

// max(within) < min(between), strictly. An empty side imposes no constraint.
bool success_event(const Eigen::VectorXd& distances, const std::vector<bool>& within);
inline bool success_event(const Eigen::VectorXd& distances, const ClusterScenario& s) {
  return success_event(distances, s.within);
}

struct PredictionResult {
  double probability = 0.0;
  double se = 0.0;
  long samples = 0;
};

PredictionResult make_result(long successes, long samples);

PredictionResult empirical_probability(const TrialStatistics& trials, const ClusterScenario& scenario);

inline constexpr int kDefaultGaussianSamples = 100000;

// Fraction of Gaussian draws from the law that satisfy the success event.
// Chunks of draws are seeded by (seed, chunk) so the result does not depend on
// the thread count.
PredictionResult theoretical_probability(const GaussianLaw& law, const ClusterScenario& scenario,
                                         int samples = kDefaultGaussianSamples, std::uint64_t seed = 0,
                                         int threads = 0);

// Lower Cholesky factor of S, adding diagonal jitter if needed.
Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& S);

}  // namespace scm
