#include "scm/montecarlo.hpp"

#include "scm/errors.hpp"
#include "scm/parallel.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <type_traits>

namespace scm {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <class Mat>
Mat gram_scm(const Mat& Y) {
  const auto M = Y.rows();
  Mat S = Mat::Zero(M, M);
  if (Y.cols() == 0) return S;
  S.template selfadjointView<Eigen::Lower>().rankUpdate(Y, 1.0 / static_cast<double>(Y.cols()));
  return S.template selfadjointView<Eigen::Lower>();
}

// Factorisations that make tr[S_a S_b^+] and the projector distance cheap.
template <class Mat>
struct Prepared {
  const Mat* Y = nullptr;
  int M = 0, N = 0;
  Eigen::LLT<Mat> llt;  // S (N >= M) or the Gram matrix Y^H Y (N < M)
  Mat Q;                // orthonormal basis of col(Y)

  void factor_kl() {
    if (N >= M)
      llt.compute(gram_scm(*Y));
    else
      llt.compute(Mat(Y->adjoint() * *Y));
    if (llt.info() != Eigen::Success) throw NumericError("sample covariance is numerically singular");
  }
  void factor_ss() {
    Eigen::HouseholderQR<Mat> qr(*Y);
    Q = qr.householderQ() * Mat::Identity(M, N);
  }
};

template <class Mat>
Prepared<Mat> prepare(const Mat& Y, bool kl, bool ss) {
  Prepared<Mat> p;
  p.Y = &Y;
  p.M = static_cast<int>(Y.rows());
  p.N = static_cast<int>(Y.cols());
  if (kl) p.factor_kl();
  if (ss) p.factor_ss();
  return p;
}

// tr[S_a S_b^+], keeping exactly min(M, N_b) directions of S_b.
template <class Mat>
double trace_ratio(const Prepared<Mat>& a, const Prepared<Mat>& b) {
  if (b.N >= b.M) {
    Mat X = b.llt.matrixL().solve(*a.Y);
    return X.squaredNorm() / a.N;
  }
  Mat Z = b.Y->adjoint() * *a.Y;
  b.llt.solveInPlace(Z);
  return static_cast<double>(b.N) / a.N * Z.squaredNorm();
}

template <class Mat>
double distance(const Prepared<Mat>& a, const Mat& Sa, const Prepared<Mat>& b, const Mat& Sb, DistanceKind kind) {
  const double M = a.M;
  switch (kind) {
    case DistanceKind::Euclidean: return (Sa - Sb).squaredNorm() / M;
    case DistanceKind::SymmetrizedKL: return (trace_ratio(a, b) + trace_ratio(b, a)) / (2 * M) - 1.0;
    case DistanceKind::Subspace: return (a.N + b.N - 2.0 * (a.Q.adjoint() * b.Q).squaredNorm()) / M;
  }
  return 0.0;
}

void check_pair(int Ma, int Na, int Mb, int Nb, DistanceKind kind) {
  if (Ma != Mb) throw DomainError("samples have different dimensions");
  if (kind == DistanceKind::Subspace && (Na >= Ma || Nb >= Mb))
    throw DomainError("subspace distance requires N < M for both samples");
}

}  // namespace

ScmSample sample_covariance(const MatrixXd& Y, std::string label) {
  ScmSample s;
  s.label = std::move(label);
  s.field = Field::Real;
  s.data = Y;
  s.scm = gram_scm(Y);
  return s;
}

ScmSample sample_covariance(const MatrixXcd& Y, std::string label) {
  ScmSample s;
  s.label = std::move(label);
  s.field = Field::Complex;
  s.data_c = Y;
  s.scm_c = gram_scm(Y);
  return s;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t trial, std::uint64_t member) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ splitmix64(2 * trial + 1));
  h = splitmix64(h ^ splitmix64(2 * member + 0x632be59bd9b4e019ULL));
  return h;
}

ScmSample draw_sample(const MatrixXd& sqrt_cov, int N, Field field, std::uint64_t seed, std::string label) {
  const auto M = sqrt_cov.rows();
  boost::random::mt19937_64 rng(seed);
  boost::random::normal_distribution<double> gauss;
  if (field == Field::Real) {
    MatrixXd X(M, N);
    for (Eigen::Index j = 0; j < X.size(); ++j) X.data()[j] = gauss(rng);
    return sample_covariance(MatrixXd(sqrt_cov * X), std::move(label));
  }
  MatrixXcd X(M, N);
  const double s = std::sqrt(0.5);
  for (Eigen::Index j = 0; j < X.size(); ++j) {
    double re = gauss(rng), im = gauss(rng);
    X.data()[j] = cd(s * re, s * im);
  }
  return sample_covariance(MatrixXcd(sqrt_cov.cast<cd>() * X), std::move(label));
}

MatrixXcd sample_observations(const PopulationCovariance& cov, int N, Field field, std::uint64_t seed) {
  ScmSample s = draw_sample(cov.sqrt(), N, field, seed);
  return field == Field::Real ? MatrixXcd(s.data.cast<cd>()) : s.data_c;
}

double empirical_distance(const ScmSample& a, const ScmSample& b, DistanceKind kind) {
  check_pair(a.M(), a.N(), b.M(), b.N(), kind);
  if (a.field != b.field) throw DomainError("samples mix real and complex data");
  const bool kl = kind == DistanceKind::SymmetrizedKL, ss = kind == DistanceKind::Subspace;
  if (a.field == Field::Real)
    return distance(prepare(a.data, kl, ss), a.scm, prepare(b.data, kl, ss), b.scm, kind);
  return distance(prepare(a.data_c, kl, ss), a.scm_c, prepare(b.data_c, kl, ss), b.scm_c, kind);
}

std::string TrialStatistics::pair_label(int p) const {
  auto [i, j] = pairs.at(p);
  return labels.at(i) + "-" + labels.at(j);
}

void TrialStatistics::write_csv(std::ostream& os) const {
  os << "trial,pair,distance\n";
  os.precision(17);
  for (int t = 0; t < trials(); ++t)
    for (int p = 0; p < static_cast<int>(pairs.size()); ++p) os << t << ',' << pair_label(p) << ',' << distances(t, p) << '\n';
}

std::vector<TrialStatistics> run_trials(const Ensemble& ensemble, const std::vector<std::pair<int, int>>& pairs,
                                        const std::vector<DistanceKind>& kinds, int trials, std::uint64_t seed,
                                        int threads) {
  if (trials < 0) throw DomainError("trial count must be non-negative");
  const int J = ensemble.size();
  const int P = static_cast<int>(pairs.size());
  std::vector<char> used(J, 0);
  for (auto [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= J || j >= J || i == j) throw DomainError("invalid pair index");
    used[i] = used[j] = 1;
  }
  bool kl = false, ss = false;
  for (DistanceKind k : kinds) {
    kl |= k == DistanceKind::SymmetrizedKL;
    ss |= k == DistanceKind::Subspace;
    for (auto [i, j] : pairs)
      check_pair(ensemble[i].M(), ensemble[i].N(), ensemble[j].M(), ensemble[j].N(), k);
  }

  std::vector<TrialStatistics> out(kinds.size());
  std::vector<std::string> labels;
  for (const auto& m : ensemble.members) labels.push_back(m.label);
  for (size_t k = 0; k < kinds.size(); ++k) {
    out[k].kind = kinds[k];
    out[k].seed = seed;
    out[k].pairs = pairs;
    out[k].labels = labels;
    out[k].distances.resize(trials, P);
  }
  if (trials == 0 || P == 0) return out;

  std::vector<MatrixXd> roots(J);
  for (int m = 0; m < J; ++m)
    if (used[m]) roots[m] = ensemble[m].covariance.sqrt();

  auto run = [&](auto tag, int t) {
    using Mat = decltype(tag);
    std::vector<ScmSample> samples(J);
    std::vector<Prepared<Mat>> prep(J);
    for (int m = 0; m < J; ++m) {
      if (!used[m]) continue;
      samples[m] = draw_sample(roots[m], ensemble[m].N(), ensemble.field, stream_seed(seed, t, m), labels[m]);
      if constexpr (std::is_same_v<Mat, MatrixXd>)
        prep[m] = prepare(samples[m].data, kl, ss);
      else
        prep[m] = prepare(samples[m].data_c, kl, ss);
    }
    for (size_t k = 0; k < kinds.size(); ++k)
      for (int p = 0; p < P; ++p) {
        auto [i, j] = pairs[p];
        if constexpr (std::is_same_v<Mat, MatrixXd>)
          out[k].distances(t, p) = distance(prep[i], samples[i].scm, prep[j], samples[j].scm, kinds[k]);
        else
          out[k].distances(t, p) = distance(prep[i], samples[i].scm_c, prep[j], samples[j].scm_c, kinds[k]);
      }
  };
  parallel_for(
      trials,
      [&](int t) {
        if (ensemble.field == Field::Real)
          run(MatrixXd(), t);
        else
          run(MatrixXcd(), t);
      },
      threads);
  return out;
}

TrialStatistics run_trials(const Ensemble& ensemble, const std::vector<std::pair<int, int>>& pairs, DistanceKind kind,
                           int trials, std::uint64_t seed, int threads) {
  return run_trials(ensemble, pairs, std::vector<DistanceKind>{kind}, trials, seed, threads).front();
}

namespace {

void require_samples(const std::vector<double>& s) {
  if (s.size() < 10) throw DomainError("at least 10 samples are required");
}

}  // namespace

std::vector<std::pair<double, double>> qq_points(std::vector<double> samples, const NormalLaw& law) {
  require_samples(samples);
  std::stable_sort(samples.begin(), samples.end());
  const boost::math::normal_distribution<double> nd(law.mean, law.sd);
  const double T = static_cast<double>(samples.size());
  std::vector<std::pair<double, double>> pts;
  pts.reserve(samples.size());
  for (size_t k = 0; k < samples.size(); ++k)
    pts.emplace_back(boost::math::quantile(nd, (static_cast<double>(k) + 0.5) / T), samples[k]);
  return pts;
}

double ks_statistic(std::vector<double> samples, const NormalLaw& law) {
  require_samples(samples);
  std::sort(samples.begin(), samples.end());
  const boost::math::normal_distribution<double> nd(law.mean, law.sd);
  const double T = static_cast<double>(samples.size());
  double d = 0.0;
  for (size_t k = 0; k < samples.size(); ++k) {
    double F = boost::math::cdf(nd, samples[k]);
    d = std::max({d, (k + 1) / T - F, F - k / T});
  }
  return d;
}

}  // namespace scm
