#include "scm/descriptors.hpp"
#include "scm/errors.hpp"
#include "scm/quadrature.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace scm;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;

namespace {

Member identity_member(const std::string& label, int M, int N) {
  return make_member(label, covariance_from_spectrum({{1.0}, {M}}), N);
}

ArmState identity_arm(int M, int N, const std::string& label = "a") { return ArmState(identity_member(label, M, N)); }

ArmState toeplitz_arm(double rho, int M, int N, const std::string& label) {
  return ArmState(make_member(label, toeplitz_covariance(rho, M), N));
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

MatrixXcd random_hermitian(int M, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  MatrixXcd X(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) X(i, j) = cd(n(rng), n(rng));
  return 0.5 * (X + X.adjoint());
}

Ensemble identity_ensemble(int members, int M, int N, Field field) {
  Ensemble e;
  e.M = M;
  e.field = field;
  for (int k = 0; k < members; ++k) e.members.push_back(identity_member(std::string(1, char('A' + k)), M, N));
  return e;
}

const DistanceKind kAllKinds[] = {DistanceKind::Euclidean, DistanceKind::SymmetrizedKL, DistanceKind::Subspace};

}  // namespace

TEST_CASE("kind names", "[descriptors]") {
  for (auto k : kAllKinds) CHECK(parse_kind(to_string(k)) == k);
  CHECK(to_string(DistanceKind::SymmetrizedKL) == "kl");
  CHECK_THROWS_AS(parse_kind("riemann"), DomainError);
}

TEST_CASE("omega correction hand values", "[descriptors][hand]") {
  ArmState a = identity_arm(50, 25);
  MatrixXcd I = MatrixXcd::Identity(50, 50);
  auto oc = omega_correction(a, -2.0, I);
  CHECK(std::abs(oc.phi - (-4.0 / 7.0)) < 1e-10);
  CHECK((oc.Omega - (3.0 / 7.0) * I).norm() < 1e-10);
  auto at_mu = omega_correction(a, -1.0, I);
  CHECK(std::abs(at_mu.phi + 1.0) < 1e-10);
  CHECK(at_mu.Omega.norm() < 1e-10);
  CHECK(std::abs(basis::phi(a, -2.0, VectorXcd::Ones(50)) - (-4.0 / 7.0)) < 1e-10);
}

TEST_CASE("omega correction is linear in A", "[descriptors][property]") {
  ArmState a = toeplitz_arm(0.6, 12, 20, "a");
  std::mt19937_64 rng(5);
  MatrixXcd A = random_hermitian(12, rng), B = random_hermitian(12, rng);
  cd w(-0.4, 0.3), x(1.5, -0.5), y(-0.7, 2.0);
  cd lhs = omega_correction(a, w, x * A + y * B).phi;
  cd rhs = x * omega_correction(a, w, A).phi + y * omega_correction(a, w, B).phi;
  CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(rhs)));
}

TEST_CASE("little m hand values", "[descriptors][hand]") {
  ArmState a = identity_arm(50, 25);
  MatrixXcd I = MatrixXcd::Identity(50, 50);
  CHECK(std::abs(little_m(a, -2.0, I) - 2.0 / 49.0) < 1e-10);
  CHECK(std::abs(little_m(a, -1.0, I)) < 1e-12);
  ArmState big = identity_arm(50, 50'000'000);
  CHECK(std::abs(little_m(big, -2.0, I)) < 1e-5);
}

TEST_CASE("sigma squared hand values and symmetry", "[descriptors][hand]") {
  ArmState a = identity_arm(50, 25);
  MatrixXcd I = MatrixXcd::Identity(50, 50);
  CHECK(std::abs(sigma_sq(a, -2.0, -2.0, I, I) - 18.0 / 2401.0) < 1e-10);
  CHECK(std::abs(sigma_sq(a, -1.0, -1.0, I, I)) < 1e-12);

  ArmState t = toeplitz_arm(0.5, 10, 14, "t");
  std::mt19937_64 rng(9);
  for (int k = 0; k < 5; ++k) {
    MatrixXcd A = random_hermitian(10, rng), B = random_hermitian(10, rng);
    cd w(-0.3, 0.2 + k), wp(2.5, -1.0 - k);
    cd s1 = sigma_sq(t, w, wp, A, B), s2 = sigma_sq(t, wp, w, B, A);
    CHECK(std::abs(s1 - s2) < 1e-12 * std::max(1.0, std::abs(s1)));
  }
}

TEST_CASE("varrho hand values and structure", "[descriptors][hand]") {
  ArmState a = identity_arm(50, 25, "a"), b = identity_arm(50, 25, "b");
  CHECK(std::abs(varrho(a, b, -1.0, -1.0, -1.0, -1.0) - 0.0625) < 1e-10);

  ArmState s = toeplitz_arm(0.4, 10, 7, "s"), t = toeplitz_arm(0.8, 10, 6, "t");
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, -0.05);
  for (int k = 0; k < 10; ++k) {
    double wi = u(rng) * s.ctx.support().lower, wip = u(rng) * s.ctx.support().lower;
    double wj = u(rng) * t.ctx.support().lower, wjp = u(rng) * t.ctx.support().lower;
    cd v = varrho(s, t, wi, wj, wip, wjp);
    CHECK(v.real() >= 0.0);
    CHECK(std::abs(v.imag()) < 1e-14);
    CHECK(std::abs(v - varrho(s, t, wip, wj, wi, wjp)) < 1e-14 * std::max(1.0, std::abs(v)));
  }
}

TEST_CASE("closed-form hand values", "[descriptors][hand]") {
  ArmState a = identity_arm(50, 25, "a"), b = identity_arm(50, 25, "b");
  ArmState c = identity_arm(50, 100, "c"), d = identity_arm(50, 100, "d");
  CHECK(std::abs(deterministic_equivalent(a, b, DistanceKind::Euclidean) - 4.0) < 1e-10);
  CHECK(std::abs(deterministic_equivalent(c, d, DistanceKind::SymmetrizedKL) - 1.0) < 1e-10);
  CHECK(std::abs(deterministic_equivalent(a, b, DistanceKind::Subspace) - 0.5) < 1e-10);

  CHECK(std::abs(second_order_mean(a, b, DistanceKind::Euclidean, Field::Real) - 4.0) < 1e-10);
  CHECK(std::abs(second_order_mean(a, b, DistanceKind::Subspace, Field::Real)) < 1e-10);

  CHECK(std::abs(variance(a, b, DistanceKind::Euclidean, Field::Complex) - 96.0) < 1e-10);
  CHECK(std::abs(variance(c, d, DistanceKind::SymmetrizedKL, Field::Complex) - 4.5) < 1e-10);
  CHECK(std::abs(variance(a, b, DistanceKind::Subspace, Field::Complex) - 0.25) < 1e-10);
  CHECK(std::abs(variance(a, b, DistanceKind::Euclidean, Field::Real) - 192.0) < 1e-10);
}

TEST_CASE("field factor structure", "[descriptors][property]") {
  ArmState o1 = toeplitz_arm(0.5, 20, 40, "a"), o2 = toeplitz_arm(0.8, 20, 25, "b");
  ArmState u1 = toeplitz_arm(0.5, 20, 10, "a"), u2 = toeplitz_arm(0.8, 20, 13, "b");
  for (auto k : kAllKinds) {
    for (auto* p : {&o1, &u1}) {
      const ArmState& a = *p;
      const ArmState& b = (p == &o1) ? o2 : u2;
      if (k == DistanceKind::Subspace && !a.undersampled()) continue;
      CHECK(second_order_mean(a, b, k, Field::Complex) == 0.0);
      double v1 = variance(a, b, k, Field::Real), v0 = variance(a, b, k, Field::Complex);
      CHECK(v0 > 0.0);
      CHECK(v1 / v0 == 2.0);
    }
  }
}

TEST_CASE("oversampled KL shortcut matches the general path", "[descriptors][property]") {
  for (auto [rho1, rho2, N1, N2] : {std::tuple{0.5, 0.8, 64, 40}, std::tuple{0.2, 0.9, 45, 90}}) {
    ArmState a = toeplitz_arm(rho1, 32, N1, "a"), b = toeplitz_arm(rho2, 32, N2, "b");
    CHECK(rel_err(kl_dbar_general(a, b), kl_dbar_oversampled(a, b)) < 1e-8);
    CHECK(rel_err(kl_mean2_general(a, b, Field::Real), kl_mean2_oversampled(a, b, Field::Real)) < 1e-8);
    CHECK(rel_err(kl_variance_general(a, b, Field::Real), kl_variance_oversampled(a, b, Field::Real)) < 1e-8);
  }
}

TEST_CASE("closed forms agree with quadrature", "[descriptors][property]") {
  for (auto [N1, N2] : {std::pair{40, 25}, std::pair{10, 13}}) {
    ArmState a = toeplitz_arm(0.5, 20, N1, "a"), b = toeplitz_arm(0.8, 20, N2, "b");
    for (auto k : kAllKinds) {
      if (k == DistanceKind::Subspace && !a.undersampled()) continue;
      auto spec = spec_for(k);
      INFO(to_string(k) << " N=(" << N1 << "," << N2 << ")");
      CHECK(rel_err(dbar_numeric(a, b, spec), deterministic_equivalent(a, b, k)) < 1e-6);
      double m = second_order_mean(a, b, k, Field::Real);
      CHECK(std::abs(mean2_numeric(a, b, spec, Field::Real) - m) < 1e-6 * std::max(1.0, std::abs(m)));
      CHECK(rel_err(cov_numeric(a, b, spec, Field::Real), variance(a, b, k, Field::Real)) < 1e-6);
    }
  }
}

TEST_CASE("subspace variance dominates its varrho term", "[descriptors][property]") {
  for (auto [rho1, rho2, N1, N2] : {std::tuple{0.5, 0.8, 16, 20}, std::tuple{0.1, 0.95, 5, 30}}) {
    ArmState a = toeplitz_arm(rho1, 32, N1, "a"), b = toeplitz_arm(rho2, 32, N2, "b");
    auto rhoterm = [](const ArmState& x, const ArmState& y) {
      MatrixXd Rx = x.basis * x.lambda.asDiagonal() * x.basis.transpose();
      MatrixXd Ry = y.basis * y.lambda.asDiagonal() * y.basis.transpose();
      MatrixXd I = MatrixXd::Identity(x.M, x.M);
      double mx = x.mu0(), my = y.mu0();
      MatrixXd Qx = (Rx - mx * I).inverse(), Qy = (Ry - my * I).inverse();
      double Gx = (Rx * Qx * Rx * Qx).trace() / x.N, Gy = (Ry * Qy * Ry * Qy).trace() / y.N;
      double t = (Rx * Qx * Qx * Ry * Qy * Qy).trace();
      return 4 * mx * mx * my * my * t * t / (x.N * y.N * (1 - Gx) * (1 - Gy));
    };
    double v = variance(a, b, DistanceKind::Subspace, Field::Complex);
    CHECK(v >= rhoterm(a, b) - 1e-12);
  }
}

TEST_CASE("regime checks", "[descriptors]") {
  ArmState over = identity_arm(20, 40), under = identity_arm(20, 10);
  CHECK_THROWS_AS(identity_arm(20, 20), DomainError);
  CHECK_THROWS_AS(deterministic_equivalent(over, under, DistanceKind::Subspace), DomainError);
  CHECK_THROWS_AS(variance(under, over, DistanceKind::Subspace, Field::Real), DomainError);
  CHECK_NOTHROW(deterministic_equivalent(over, under, DistanceKind::SymmetrizedKL));
  CHECK_NOTHROW(deterministic_equivalent(over, under, DistanceKind::Euclidean));
  ArmState other = identity_arm(21, 10);
  CHECK_THROWS_AS(deterministic_equivalent(other, under, DistanceKind::Euclidean), DomainError);
}

TEST_CASE("law assembly for the identity pair", "[descriptors]") {
  Ensemble e = identity_ensemble(2, 50, 25, Field::Real);
  auto law = gaussian_law(e, all_pairs(2), DistanceKind::Euclidean);
  REQUIRE(law.size() == 1);
  CHECK(std::abs(law.mean[0] - (4.0 + 4.0 / 50.0)) < 1e-10);
  CHECK(std::abs(law.covariance(0, 0) - 2.0 * 96.0 / 2500.0) < 1e-10);
  auto scaled = law.scaled(7.0);
  CHECK(std::abs(scaled.mean[0] - 7.0 * law.mean[0]) < 1e-12);
  CHECK(std::abs(scaled.covariance(0, 0) - 49.0 * law.covariance(0, 0)) < 1e-12);
}

TEST_CASE("cross covariance of disjoint and identical pairs", "[descriptors]") {
  Ensemble e = identity_ensemble(4, 16, 8, Field::Complex);
  CHECK(cross_covariance(e, {0, 1}, {2, 3}, DistanceKind::Euclidean) == 0.0);
  ArmState a(e[0]), b(e[1]);
  for (auto k : kAllKinds) {
    double self = cross_covariance(e, {0, 1}, {0, 1}, k);
    CHECK(rel_err(self, variance(a, b, k, Field::Complex)) < 1e-6);
  }
  CHECK_THROWS_AS(cross_covariance(e, {0, 0}, {0, 1}, DistanceKind::Euclidean), DomainError);
}

TEST_CASE("law covariance sparsity follows shared members", "[descriptors]") {
  Ensemble e;
  e.M = 10;
  e.field = Field::Real;
  const double rho[] = {0.3, 0.3, 0.6, 0.6, 0.9, 0.9};
  for (int k = 0; k < 6; ++k)
    e.members.push_back(make_member(std::string(1, char('A' + k)), toeplitz_covariance(rho[k], 10), 20));
  auto pairs = all_pairs(6);
  REQUIRE(pairs.size() == 15);
  LawOptions opt;
  opt.eigen_floor = 0.0;
  auto law = gaussian_law(e, pairs, DistanceKind::Euclidean, opt);
  CHECK((law.covariance - law.covariance.transpose()).norm() == 0.0);
  for (int p = 0; p < 15; ++p)
    for (int q = 0; q < 15; ++q) {
      auto r = pairs[p], s = pairs[q];
      bool shared = r.first == s.first || r.first == s.second || r.second == s.first || r.second == s.second;
      if (!shared) CHECK(law.descriptors.cov(p, q) == 0.0);
      else CHECK(law.descriptors.cov(p, q) != 0.0);
    }
}

TEST_CASE("field toggle halves the law covariance", "[descriptors][property]") {
  Ensemble r;
  r.M = 12;
  r.field = Field::Real;
  for (auto [l, rho, N] : {std::tuple{"A", 0.3, 6}, std::tuple{"B", 0.5, 8}, std::tuple{"C", 0.7, 5}})
    r.members.push_back(make_member(l, toeplitz_covariance(rho, 12), N));
  Ensemble c = r;
  c.field = Field::Complex;
  for (auto k : kAllKinds) {
    auto lr = gaussian_law(r, all_pairs(3), k), lc = gaussian_law(c, all_pairs(3), k);
    CHECK(lc.descriptors.mean2.cwiseAbs().maxCoeff() == 0.0);
    CHECK((lr.descriptors.dbar - lc.descriptors.dbar).norm() == 0.0);
    CHECK((lr.descriptors.cov - 2.0 * lc.descriptors.cov).norm() <= 1e-12 * lr.descriptors.cov.norm());
  }
}

TEST_CASE("law input checks", "[descriptors]") {
  Ensemble e = identity_ensemble(3, 10, 5, Field::Real);
  CHECK_THROWS_AS(gaussian_law(e, {}, DistanceKind::Euclidean), DomainError);
  CHECK_THROWS_AS(gaussian_law(e, {{0, 1}, {1, 0}}, DistanceKind::Euclidean), DomainError);
  CHECK_THROWS_AS(gaussian_law(e, {{0, 3}}, DistanceKind::Euclidean), DomainError);
  CHECK_THROWS_AS(gaussian_law(e, {{1, 1}}, DistanceKind::Euclidean), DomainError);
}

TEST_CASE("eigenvalue floor", "[descriptors]") {
  MatrixXd S(2, 2);
  S << 1.0, 1.0, 1.0, 1.0;  // eigenvalues 0 and 2
  MatrixXd F = floor_eigenvalues(S, 0.1);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(F);
  CHECK(es.eigenvalues()[0] == Catch::Approx(0.1));
  CHECK(es.eigenvalues()[1] == Catch::Approx(2.0));
  MatrixXd P = MatrixXd::Identity(3, 3) * 2.0;
  CHECK((floor_eigenvalues(P, 1e-12) - P).norm() == 0.0);
}
