#include "scm/descriptors.hpp"
#include "scm/errors.hpp"
#include "scm/montecarlo.hpp"
#include "scm/quadrature.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace scm;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ScmSample from_diag(std::initializer_list<double> d) {
  // two columns of norm sqrt(2 d_i) along the axes give YY^T / 2 = diag(d)
  const int M = static_cast<int>(d.size());
  MatrixXd Y = MatrixXd::Zero(M, M);
  int i = 0;
  for (double v : d) {
    Y(i, i) = std::sqrt(M * v);
    ++i;
  }
  return sample_covariance(Y);
}

Ensemble identity_ensemble(int members, int M, int N, Field field) {
  Ensemble e;
  e.M = M;
  e.field = field;
  for (int k = 0; k < members; ++k)
    e.members.push_back(make_member(std::string(1, char('A' + k)), covariance_from_spectrum({{1.0}, {M}}), N));
  return e;
}

struct Moments {
  double mean = 0, var = 0;
};

Moments moments(const Eigen::VectorXd& x) {
  Moments m;
  m.mean = x.mean();
  m.var = (x.array() - m.mean).square().sum() / (x.size() - 1);
  return m;
}

}  // namespace

TEST_CASE("sample covariance examples", "[montecarlo]") {
  Eigen::VectorXd y(3);
  y << 1.0, -2.0, 0.5;
  auto one = sample_covariance(MatrixXd(y));
  CHECK((one.scm - y * y.transpose()).norm() < 1e-15);
  CHECK(one.rank() == 1);

  // orthogonal columns of norm sqrt(N)
  MatrixXd Q = Eigen::HouseholderQR<MatrixXd>(MatrixXd::Random(6, 3)).householderQ() * MatrixXd::Identity(6, 3);
  auto s = sample_covariance(MatrixXd(Q * std::sqrt(3.0)));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s.scm);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(es.eigenvalues()[k]) < 1e-12);
  for (int k = 3; k < 6; ++k) CHECK(std::abs(es.eigenvalues()[k] - 1.0) < 1e-12);

  MatrixXcd Yc = MatrixXcd::Random(5, 7);
  auto c = sample_covariance(Yc);
  CHECK(c.scm_complex().isApprox(c.scm_c));
  CHECK((c.scm_c - c.scm_c.adjoint()).norm() == 0.0);
  CHECK(std::abs(c.scm_c.trace().real() - Yc.squaredNorm() / 7.0) < 1e-12);
}

TEST_CASE("sampling is deterministic and has the right moments", "[montecarlo]") {
  auto cov = covariance_from_spectrum({{1.0}, {5}});
  for (Field f : {Field::Real, Field::Complex}) {
    MatrixXcd a = sample_observations(cov, 10, f, 42), b = sample_observations(cov, 10, f, 42);
    CHECK((a - b).norm() == 0.0);
    CHECK((a - sample_observations(cov, 10, f, 43)).norm() > 0.0);
  }
  CHECK(sample_observations(cov, 4, Field::Real, 1).imag().norm() == 0.0);

  // column sample covariance of the identity population
  const int T = 10000;
  MatrixXcd Y = sample_observations(cov, T, Field::Real, 7);
  MatrixXd S = (Y * Y.adjoint()).real() / T;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      double se = std::sqrt((i == j ? 2.0 : 1.0) / T);
      CHECK(std::abs(S(i, j) - (i == j ? 1.0 : 0.0)) < 4 * se);
    }

  // circular complex entries: E|x|^2 = 1, real and imaginary variance 1/2
  const int T2 = 100000;
  MatrixXcd Z = sample_observations(covariance_from_spectrum({{1.0}, {1}}), T2, Field::Complex, 9);
  VectorXd re = Z.real().transpose(), im = Z.imag().transpose(), ab = Z.cwiseAbs2().transpose();
  CHECK(std::abs(moments(ab).mean - 1.0) < 4 * std::sqrt(1.0 / T2));
  CHECK(std::abs(re.squaredNorm() / T2 - 0.5) < 4 * std::sqrt(0.5 / T2));
  CHECK(std::abs(im.squaredNorm() / T2 - 0.5) < 4 * std::sqrt(0.5 / T2));
  CHECK(std::abs(re.dot(im) / T2) < 4 * std::sqrt(0.25 / T2));
}

TEST_CASE("empirical distance hand values", "[montecarlo][hand]") {
  CHECK(empirical_distance(from_diag({1, 1}), from_diag({3, 1}), DistanceKind::Euclidean) == Catch::Approx(2.0));
  CHECK(empirical_distance(from_diag({1, 1}), from_diag({2, 2}), DistanceKind::SymmetrizedKL) ==
        Catch::Approx(0.25));
  MatrixXd e1 = MatrixXd::Zero(2, 1), e2 = MatrixXd::Zero(2, 1);
  e1(0, 0) = 1.0;
  e2(1, 0) = 3.0;
  CHECK(empirical_distance(sample_covariance(e1), sample_covariance(e2), DistanceKind::Subspace) ==
        Catch::Approx(1.0));
}

TEST_CASE("distance of a sample to itself", "[montecarlo][property]") {
  auto cov = toeplitz_covariance(0.6, 12);
  MatrixXd R = cov.sqrt();
  auto over = draw_sample(R, 20, Field::Real, 3), under = draw_sample(R, 5, Field::Real, 4);
  auto under_c = draw_sample(R, 5, Field::Complex, 4);
  CHECK(empirical_distance(over, over, DistanceKind::Euclidean) == 0.0);
  CHECK(std::abs(empirical_distance(over, over, DistanceKind::SymmetrizedKL)) < 1e-12);
  CHECK(std::abs(empirical_distance(under, under, DistanceKind::Subspace)) < 1e-12);
  CHECK(std::abs(empirical_distance(under_c, under_c, DistanceKind::Subspace)) < 1e-12);
  // the pseudo-inverse keeps N directions: tr[S S^+] = N
  CHECK(std::abs(empirical_distance(under, under, DistanceKind::SymmetrizedKL) - (5.0 / 12.0 - 1.0)) < 1e-12);
}

TEST_CASE("distance input checks", "[montecarlo]") {
  auto R = toeplitz_covariance(0.6, 6).sqrt();
  auto a = draw_sample(R, 10, Field::Real, 1), b = draw_sample(R, 3, Field::Real, 2);
  auto c = draw_sample(R, 3, Field::Complex, 2);
  CHECK_THROWS_AS(empirical_distance(a, b, DistanceKind::Subspace), DomainError);
  CHECK_THROWS_AS(empirical_distance(b, c, DistanceKind::Euclidean), DomainError);
  auto d = draw_sample(toeplitz_covariance(0.6, 7).sqrt(), 3, Field::Real, 2);
  CHECK_THROWS_AS(empirical_distance(b, d, DistanceKind::Euclidean), DomainError);
}

TEST_CASE("scale equivariance", "[montecarlo][property]") {
  auto R = toeplitz_covariance(0.5, 10).sqrt();
  const double t = 3.0;
  for (Field f : {Field::Real, Field::Complex})
    for (int trial = 0; trial < 20; ++trial) {
      auto a = draw_sample(R, 6, f, stream_seed(5, trial, 0)), b = draw_sample(R, 8, f, stream_seed(5, trial, 1));
      auto as = draw_sample(std::sqrt(t) * R, 6, f, stream_seed(5, trial, 0));
      auto bs = draw_sample(std::sqrt(t) * R, 8, f, stream_seed(5, trial, 1));
      double eu = empirical_distance(a, b, DistanceKind::Euclidean);
      CHECK(std::abs(empirical_distance(as, bs, DistanceKind::Euclidean) - t * t * eu) < 1e-10 * t * t * eu);
      double ss = empirical_distance(a, b, DistanceKind::Subspace);
      CHECK(std::abs(empirical_distance(as, bs, DistanceKind::Subspace) - ss) < 1e-10);
      double kl = empirical_distance(a, b, DistanceKind::SymmetrizedKL);
      CHECK(std::abs(empirical_distance(as, bs, DistanceKind::SymmetrizedKL) - kl) < 1e-9 * std::max(1.0, kl));
    }
}

TEST_CASE("undersampled KL matches an SVD pseudo-inverse", "[montecarlo]") {
  auto R = toeplitz_covariance(0.7, 9).sqrt();
  for (int trial = 0; trial < 5; ++trial) {
    auto a = draw_sample(R, 4, Field::Real, stream_seed(1, trial, 0));
    auto b = draw_sample(R, 6, Field::Real, stream_seed(1, trial, 1));
    auto pinv = [](const MatrixXd& S, int rank) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
      VectorXd inv = VectorXd::Zero(S.rows());
      for (int k = S.rows() - rank; k < S.rows(); ++k) inv[k] = 1.0 / es.eigenvalues()[k];
      return MatrixXd(es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose());
    };
    double ref = ((a.scm * pinv(b.scm, 6)).trace() + (b.scm * pinv(a.scm, 4)).trace()) / 18.0 - 1.0;
    CHECK(std::abs(empirical_distance(a, b, DistanceKind::SymmetrizedKL) - ref) < 1e-9 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("sample eigenvalues stay near the support", "[montecarlo][property]") {
  auto cov = toeplitz_covariance(0.7, 100);
  const int N = 50;
  Interval sup = support_interval(cov.spectrum, N);
  const double eps = 0.05 * sup.upper;
  MatrixXd R = cov.sqrt();
  double lo = 1e300, hi = 0;
  for (int t = 0; t < 1000; ++t) {
    auto s = draw_sample(R, N, Field::Real, stream_seed(11, t, 0));
    // positive eigenvalues of YY^T / N are those of Y^T Y / N
    MatrixXd G = s.data.transpose() * s.data / N;
    VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(G, Eigen::EigenvaluesOnly).eigenvalues();
    lo = std::min(lo, ev.minCoeff());
    hi = std::max(hi, ev.maxCoeff());
  }
  CHECK(lo >= sup.lower - eps);
  CHECK(hi <= sup.upper + eps);
}

TEST_CASE("trial runs", "[montecarlo]") {
  Ensemble e = identity_ensemble(3, 10, 5, Field::Real);
  auto pairs = all_pairs(3);
  auto zero = run_trials(e, pairs, DistanceKind::Euclidean, 0, 1);
  CHECK(zero.trials() == 0);
  CHECK(zero.distances.cols() == 3);

  auto a = run_trials(e, pairs, DistanceKind::Subspace, 50, 8, 1);
  auto b = run_trials(e, pairs, DistanceKind::Subspace, 50, 8, 4);
  CHECK((a.distances - b.distances).norm() == 0.0);
  CHECK(a.pair_label(2) == "B-C");
  std::ostringstream os;
  a.write_csv(os);
  CHECK(os.str().rfind("trial,pair,distance\n0,A-B,", 0) == 0);

  auto multi = run_trials(e, pairs, {DistanceKind::Euclidean, DistanceKind::Subspace}, 50, 8, 2);
  REQUIRE(multi.size() == 2);
  CHECK((multi[1].distances - a.distances).norm() == 0.0);

  Ensemble over = identity_ensemble(2, 10, 20, Field::Real);
  CHECK_THROWS_AS(run_trials(over, all_pairs(2), DistanceKind::Subspace, 5, 1), DomainError);
  CHECK_THROWS_AS(run_trials(e, pairs, DistanceKind::Euclidean, -1, 1), DomainError);
}

TEST_CASE("field factor in simulated moments", "[montecarlo]") {
  // complex data: M(d - dbar) has zero mean and half the real-data variance
  for (Field f : {Field::Real, Field::Complex}) {
    Ensemble e = identity_ensemble(2, 40, 20, f);
    ArmState a(e[0]), b(e[1]);
    auto st = run_trials(e, all_pairs(2), DistanceKind::Euclidean, 10000, 3);
    VectorXd x = 40.0 * (st.distances.col(0).array() - deterministic_equivalent(a, b, DistanceKind::Euclidean));
    Moments m = moments(x);
    double mean2 = second_order_mean(a, b, DistanceKind::Euclidean, f);
    double var = variance(a, b, DistanceKind::Euclidean, f);
    CHECK(std::abs(m.mean - mean2) < 4 * std::sqrt(m.var / 10000));
    CHECK(std::abs(m.var - var) < 4 * var * std::sqrt(2.0 / 9999));
  }
}

TEST_CASE("identity EU mean", "[montecarlo]") {
  Ensemble e = identity_ensemble(2, 100, 50, Field::Real);
  auto st = run_trials(e, all_pairs(2), DistanceKind::Euclidean, 10000, 21);
  Moments m = moments(st.distances.col(0));
  CHECK(std::abs(m.mean - (4.0 + 4.0 / 100)) < 4 * std::sqrt(m.var / 10000));
}

namespace {

struct CrossCheck {
  double simulated, se, theory;
};

CrossCheck shared_member_cross_covariance(int M, int T, std::uint64_t seed) {
  Ensemble e = identity_ensemble(3, M, M / 2, Field::Real);
  auto st = run_trials(e, {{0, 1}, {0, 2}}, DistanceKind::Euclidean, T, seed);
  ArmState a(e[0]), b(e[1]);
  const double dbar = deterministic_equivalent(a, b, DistanceKind::Euclidean);
  VectorXd x = M * (st.distances.col(0).array() - dbar), y = M * (st.distances.col(1).array() - dbar);
  VectorXd prod = (x.array() - x.mean()) * (y.array() - y.mean());
  Moments m = moments(prod);
  return {m.mean, std::sqrt(m.var / T), cross_covariance(e, {0, 1}, {0, 2}, DistanceKind::Euclidean)};
}

}  // namespace

// At M = 50 the O(1/M) bias of the simulated covariance is several standard
// errors at this trial count; see the companion case at M = 200.
TEST_CASE("cross covariance against simulation", "[montecarlo]") {
  auto c = shared_member_cross_covariance(50, 100000, 77);
  INFO("simulated " << c.simulated << " theory " << c.theory);
  CHECK(std::abs(c.simulated - c.theory) < 3 * c.se);
}

TEST_CASE("cross covariance against simulation at larger dimension", "[montecarlo]") {
  auto c = shared_member_cross_covariance(200, 20000, 78);
  INFO("simulated " << c.simulated << " theory " << c.theory);
  CHECK(c.theory == Catch::Approx(80.0).epsilon(1e-8));
  CHECK(std::abs(c.simulated - c.theory) < 3 * c.se);
}

TEST_CASE("QQ points", "[montecarlo]") {
  const int T = 100000;
  std::mt19937_64 rng(4);
  NormalLaw law{2.0, 3.0};
  std::normal_distribution<double> n(law.mean, law.sd);
  std::vector<double> x(T);
  for (auto& v : x) v = n(rng);
  auto pts = qq_points(x, law);
  REQUIRE(pts.size() == static_cast<size_t>(T));
  for (int k = 1; k < T; ++k) {
    CHECK(pts[k].first > pts[k - 1].first);
    CHECK(pts[k].second >= pts[k - 1].second);
  }
  boost::math::normal_distribution<double> nd(law.mean, law.sd);
  CHECK(pts.front().first == Catch::Approx(boost::math::quantile(nd, 0.5 / T)));
  // DKW bound in the probability domain at level 1e-3, quantile gap over the central 98%
  const double dkw = std::sqrt(std::log(2.0 / 1e-3) / (2.0 * T));
  double cdf_gap = 0, q_gap = 0;
  for (int k = 0; k < T; ++k) {
    double p = (k + 0.5) / T;
    cdf_gap = std::max(cdf_gap, std::abs(boost::math::cdf(nd, pts[k].second) - p));
    if (p > 0.01 && p < 0.99) q_gap = std::max(q_gap, std::abs(pts[k].first - pts[k].second));
  }
  CHECK(cdf_gap < dkw + 0.5 / T);
  CHECK(q_gap < 5 * law.sd / std::sqrt(T) * 3);

  auto flat = qq_points(std::vector<double>(20, 1.5), law);
  for (auto [th, em] : flat) CHECK(em == 1.5);
  CHECK_THROWS_AS(qq_points(std::vector<double>(9, 0.0)), DomainError);
}

TEST_CASE("KS statistic", "[montecarlo]") {
  const int T = 1000;
  boost::math::normal_distribution<double> nd;
  std::vector<double> q(T);
  for (int k = 0; k < T; ++k) q[k] = boost::math::quantile(nd, (k + 0.5) / T);
  CHECK(ks_statistic(q) <= 1.0 / T);
  std::vector<double> shifted(q);
  for (auto& v : shifted) v += 10.0;
  CHECK(ks_statistic(shifted) > 0.999);
  CHECK(ks_critical_1pct(10000) == Catch::Approx(0.0163));
  CHECK_THROWS_AS(ks_statistic({1, 2, 3}), DomainError);
}

TEST_CASE("KS for the identity EU case", "[montecarlo]") {
  Ensemble e = identity_ensemble(2, 200, 100, Field::Real);
  ArmState a(e[0]), b(e[1]);
  const int T = 10000;
  auto st = run_trials(e, all_pairs(2), DistanceKind::Euclidean, T, 2024);
  const double dbar = deterministic_equivalent(a, b, DistanceKind::Euclidean);
  const double m = second_order_mean(a, b, DistanceKind::Euclidean, Field::Real);
  const double sd = std::sqrt(variance(a, b, DistanceKind::Euclidean, Field::Real));
  std::vector<double> z(T);
  for (int t = 0; t < T; ++t) z[t] = (200.0 * (st.distances(t, 0) - dbar) - m) / sd;
  CHECK(ks_statistic(z) < ks_critical_1pct(T));
}
