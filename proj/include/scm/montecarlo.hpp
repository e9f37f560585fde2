#pragma once

#include "scm/descriptors.hpp"
#include "scm/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace scm {

// One realisation Y (M x N) and its SCM YY^H / N. Real data keeps real
// storage; complex data fills the *_c members.
struct ScmSample {
  std::string label;
  Field field = Field::Real;
  Eigen::MatrixXd data;
  Eigen::MatrixXd scm;
  Eigen::MatrixXcd data_c;
  Eigen::MatrixXcd scm_c;

  int M() const { return static_cast<int>(field == Field::Real ? data.rows() : data_c.rows()); }
  int N() const { return static_cast<int>(field == Field::Real ? data.cols() : data_c.cols()); }
  int rank() const { return std::min(M(), N()); }
  Eigen::MatrixXcd scm_complex() const { return field == Field::Real ? Eigen::MatrixXcd(scm.cast<cd>()) : scm_c; }
};

ScmSample sample_covariance(const Eigen::MatrixXd& Y, std::string label = {});
ScmSample sample_covariance(const Eigen::MatrixXcd& Y, std::string label = {});

// Counter-based seed for (seed, trial, member).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t trial, std::uint64_t member);

// Y = R^{1/2} X with X standard real Gaussian (Real) or circular complex
// Gaussian with E|x|^2 = 1 (Complex). Real data has zero imaginary part.
Eigen::MatrixXcd sample_observations(const PopulationCovariance& cov, int N, Field field, std::uint64_t seed);

// Draw + SCM in one step, reusing a precomputed R^{1/2}.
ScmSample draw_sample(const Eigen::MatrixXd& sqrt_cov, int N, Field field, std::uint64_t seed, std::string label = {});

// Subspace distance needs N < M for both samples (DomainError otherwise).
double empirical_distance(const ScmSample& a, const ScmSample& b, DistanceKind kind);

struct TrialStatistics {
  DistanceKind kind = DistanceKind::Euclidean;
  std::uint64_t seed = 0;
  std::vector<std::pair<int, int>> pairs;
  std::vector<std::string> labels;  // member labels
  Eigen::MatrixXd distances;        // trials x pairs

  int trials() const { return static_cast<int>(distances.rows()); }
  std::string pair_label(int p) const;
  void write_csv(std::ostream& os) const;  // trial,pair,distance
};

// One statistics block per kind. Every trial draws fresh data for each member
// that appears in a pair; all kinds share the same draws.
std::vector<TrialStatistics> run_trials(const Ensemble& ensemble, const std::vector<std::pair<int, int>>& pairs,
                                        const std::vector<DistanceKind>& kinds, int trials, std::uint64_t seed,
                                        int threads = 0);
TrialStatistics run_trials(const Ensemble& ensemble, const std::vector<std::pair<int, int>>& pairs, DistanceKind kind,
                           int trials, std::uint64_t seed, int threads = 0);

struct NormalLaw {
  double mean = 0.0;
  double sd = 1.0;
};

// (Phi^-1(p_k) sd + mean, x_(k)) with p_k = (k - 0.5) / T. Needs >= 10 samples.
std::vector<std::pair<double, double>> qq_points(std::vector<double> samples, const NormalLaw& law = {});

// sup |F_T - Phi| against the Gaussian law. Needs >= 10 samples.
double ks_statistic(std::vector<double> samples, const NormalLaw& law = {});

// 1% critical value of the one-sample KS statistic, 1.63 / sqrt(T).
inline double ks_critical_1pct(int T) { return 1.63 / std::sqrt(static_cast<double>(T)); }

}  // namespace scm
