#include "scm/model.hpp"

#include "scm/errors.hpp"

#include <cmath>
#include <numeric>
#include <set>

namespace scm {

int PopulationSpectrum::dimension() const {
  return std::accumulate(multiplicities.begin(), multiplicities.end(), 0);
}

Eigen::MatrixXd PopulationCovariance::sqrt() const {
  return eigenbasis * eigenvalues.cwiseSqrt().asDiagonal() * eigenbasis.transpose();
}

int Ensemble::index_of(const std::string& label) const {
  for (int i = 0; i < size(); ++i)
    if (members[i].label == label) return i;
  throw DomainError("unknown member label '" + label + "'");
}

std::string to_string(Diagnostic::Code code) {
  switch (code) {
    case Diagnostic::Code::DimensionMismatch: return "dimension-mismatch";
    case Diagnostic::Code::RatioGuard: return "ratio-guard";
    case Diagnostic::Code::NotPositiveDefinite: return "not-positive-definite";
    case Diagnostic::Code::TooFewSamples: return "too-few-samples";
    case Diagnostic::Code::DuplicateLabel: return "duplicate-label";
    case Diagnostic::Code::Empty: return "empty-ensemble";
  }
  return "unknown";
}

namespace {

PopulationSpectrum cluster(const Eigen::VectorXd& ascending, double tol) {
  PopulationSpectrum s;
  for (Eigen::Index k = 0; k < ascending.size(); ++k) {
    double v = ascending[k];
    if (!s.eigenvalues.empty()) {
      double last = s.eigenvalues.back();
      if (std::abs(v - last) <= tol * std::max(std::abs(v), std::abs(last))) {
        ++s.multiplicities.back();
        continue;
      }
    }
    s.eigenvalues.push_back(v);
    s.multiplicities.push_back(1);
  }
  return s;
}

void check_symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw DomainError("covariance must be a non-empty square matrix");
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError("covariance is not symmetric");
}

}  // namespace

PopulationSpectrum build_spectrum(const Eigen::MatrixXd& matrix, double tol) {
  check_symmetric(matrix);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  if (es.eigenvalues()[0] <= 0.0) throw DomainError("covariance is not positive definite");
  return cluster(es.eigenvalues(), tol);
}

PopulationCovariance covariance_from_matrix(const Eigen::MatrixXd& matrix, double tol) {
  check_symmetric(matrix);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix);
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  if (es.eigenvalues()[0] <= 0.0) throw DomainError("covariance is not positive definite");
  PopulationCovariance cov;
  cov.matrix = 0.5 * (matrix + matrix.transpose());
  cov.eigenvalues = es.eigenvalues();
  cov.eigenbasis = es.eigenvectors();
  cov.spectrum = cluster(cov.eigenvalues, tol);
  return cov;
}

PopulationCovariance covariance_from_spectrum(const PopulationSpectrum& spectrum, const Eigen::MatrixXd& basis) {
  if (spectrum.eigenvalues.empty() || spectrum.eigenvalues.size() != spectrum.multiplicities.size())
    throw DomainError("spectrum needs matching eigenvalue and multiplicity lists");
  for (std::size_t m = 0; m < spectrum.eigenvalues.size(); ++m) {
    if (!(spectrum.eigenvalues[m] > 0.0)) throw DomainError("eigenvalues must be positive");
    if (spectrum.multiplicities[m] < 1) throw DomainError("multiplicities must be positive");
    if (m > 0 && !(spectrum.eigenvalues[m] > spectrum.eigenvalues[m - 1]))
      throw DomainError("eigenvalues must be strictly ascending");
  }
  const int M = spectrum.dimension();
  PopulationCovariance cov;
  cov.spectrum = spectrum;
  cov.eigenvalues.resize(M);
  int k = 0;
  for (std::size_t m = 0; m < spectrum.eigenvalues.size(); ++m)
    for (int r = 0; r < spectrum.multiplicities[m]; ++r) cov.eigenvalues[k++] = spectrum.eigenvalues[m];
  if (basis.size() == 0) {
    cov.eigenbasis = Eigen::MatrixXd::Identity(M, M);
  } else {
    if (basis.rows() != M || basis.cols() != M) throw DomainError("basis dimension does not match spectrum");
    if ((basis.transpose() * basis - Eigen::MatrixXd::Identity(M, M)).norm() > 1e-10 * M)
      throw DomainError("basis is not orthogonal");
    cov.eigenbasis = basis;
  }
  cov.matrix = cov.eigenbasis * cov.eigenvalues.asDiagonal() * cov.eigenbasis.transpose();
  cov.matrix = 0.5 * (cov.matrix + cov.matrix.transpose()).eval();
  return cov;
}

PopulationCovariance toeplitz_covariance(double rho, int M) {
  if (!(std::abs(rho) < 1.0)) throw DomainError("toeplitz rho must lie in (-1, 1)");
  if (M < 2) throw DomainError("toeplitz dimension must be at least 2");
  Eigen::MatrixXd T(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) T(i, j) = std::pow(rho, std::abs(i - j));
  if (rho == 0.0) return covariance_from_spectrum({{1.0}, {M}});
  return covariance_from_matrix(T);
}

SamplingConfig sampling_from_count(int M, int N) {
  if (N < 1) throw DomainError("sample count must be positive");
  return {N, static_cast<double>(M) / N};
}

Member make_member(std::string label, PopulationCovariance cov, int N) {
  Member m;
  m.label = std::move(label);
  m.sampling = sampling_from_count(cov.dimension(), N);
  m.covariance = std::move(cov);
  return m;
}

std::vector<Diagnostic> validate_ensemble(const Ensemble& e, double guard) {
  std::vector<Diagnostic> out;
  using C = Diagnostic::Code;
  if (e.members.empty()) out.push_back({C::Empty, "", "ensemble has no members"});
  std::set<std::string> seen;
  for (const auto& m : e.members) {
    if (!seen.insert(m.label).second) out.push_back({C::DuplicateLabel, m.label, "label used twice"});
    if (m.M() != e.M)
      out.push_back({C::DimensionMismatch, m.label,
                     "member dimension " + std::to_string(m.M()) + " differs from ensemble M=" + std::to_string(e.M)});
    if (m.covariance.eigenvalues.size() == 0 || m.covariance.eigenvalues.minCoeff() <= 0.0)
      out.push_back({C::NotPositiveDefinite, m.label, "covariance is not positive definite"});
    if (m.sampling.N < 2) out.push_back({C::TooFewSamples, m.label, "need N >= 2"});
    if (std::abs(m.sampling.c - 1.0) < guard)
      out.push_back({C::RatioGuard, m.label,
                     "c = M/N = " + std::to_string(m.sampling.c) + " is within " + std::to_string(guard) + " of 1"});
  }
  return out;
}

void require_valid(const Ensemble& e, double guard) {
  auto d = validate_ensemble(e, guard);
  if (!d.empty()) throw DomainError(to_string(d.front().code) + ": " + d.front().message);
}

}  // namespace scm
