#include "scm/clustering.hpp"

#include "scm/errors.hpp"
#include "scm/parallel.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace scm {

std::vector<TaggedPair> enumerate_pairs(const std::vector<std::string>& clusters) {
  const int J = static_cast<int>(clusters.size());
  if (J < 2) throw DomainError("clustering needs at least two members");
  std::vector<TaggedPair> out;
  for (int i = 0; i < J; ++i)
    for (int j = i + 1; j < J; ++j) out.push_back({i, j, clusters[i] == clusters[j]});
  return out;
}

ClusterScenario make_cluster_scenario(Ensemble ensemble, std::vector<std::string> clusters) {
  if (static_cast<int>(clusters.size()) != ensemble.size())
    throw DomainError("one cluster label per member is required");
  ClusterScenario s;
  s.ensemble = std::move(ensemble);
  s.clusters = std::move(clusters);
  for (const auto& tp : enumerate_pairs(s.clusters)) {
    s.pairs.emplace_back(tp.i, tp.j);
    s.within.push_back(tp.within);
  }
  return s;
}

bool success_event(const Eigen::VectorXd& d, const std::vector<bool>& within) {
  if (static_cast<size_t>(d.size()) != within.size()) throw DomainError("distance vector does not match the pairs");
  double wmax = -std::numeric_limits<double>::infinity();
  double bmin = std::numeric_limits<double>::infinity();
  bool any_w = false, any_b = false;
  for (Eigen::Index p = 0; p < d.size(); ++p) {
    if (within[p]) {
      wmax = std::max(wmax, d[p]);
      any_w = true;
    } else {
      bmin = std::min(bmin, d[p]);
      any_b = true;
    }
  }
  if (!any_w || !any_b) return true;
  return wmax < bmin;
}

PredictionResult make_result(long successes, long samples) {
  PredictionResult r;
  r.samples = samples;
  if (samples > 0) {
    r.probability = static_cast<double>(successes) / samples;
    r.se = std::sqrt(r.probability * (1 - r.probability) / samples);
  }
  return r;
}

PredictionResult empirical_probability(const TrialStatistics& trials, const ClusterScenario& scenario) {
  if (trials.pairs != scenario.pairs) throw DomainError("trials were not computed on the scenario pairs");
  long hits = 0;
  for (int t = 0; t < trials.trials(); ++t)
    if (success_event(trials.distances.row(t).transpose(), scenario.within)) ++hits;
  return make_result(hits, trials.trials());
}

Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& S) {
  const auto R = S.rows();
  Eigen::MatrixXd sym = 0.5 * (S + S.transpose());
  double scale = std::max(sym.diagonal().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(sym + jitter * Eigen::MatrixXd::Identity(R, R));
    if (llt.info() == Eigen::Success) return llt.matrixL();
    jitter = jitter == 0.0 ? 1e-14 * scale : jitter * 100;
  }
  throw NumericError("Cholesky failed after jitter", jitter);
}

PredictionResult theoretical_probability(const GaussianLaw& law, const ClusterScenario& scenario, int samples,
                                         std::uint64_t seed, int threads) {
  if (law.descriptors.pairs != scenario.pairs) throw DomainError("law was not computed on the scenario pairs");
  if (samples <= 0) throw DomainError("sample count must be positive");
  const Eigen::MatrixXd L = jittered_cholesky(law.covariance);
  const int P = law.size();
  constexpr int kChunk = 4096;
  const int chunks = (samples + kChunk - 1) / kChunk;
  std::vector<long> hits(chunks, 0);
  parallel_for(
      chunks,
      [&](int c) {
        boost::random::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(c), 0x5eed));
        boost::random::normal_distribution<double> gauss;
        const int n = std::min(kChunk, samples - c * kChunk);
        Eigen::MatrixXd Z(P, n);
        for (Eigen::Index k = 0; k < Z.size(); ++k) Z.data()[k] = gauss(rng);
        Eigen::MatrixXd X = (L * Z).colwise() + law.mean;
        long h = 0;
        for (int k = 0; k < n; ++k)
          if (success_event(X.col(k), scenario.within)) ++h;
        hits[c] = h;
      },
      threads);
  long total = 0;
  for (long h : hits) total += h;
  return make_result(total, samples);
}

}  // namespace scm
