#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace scm {

// Real (varsigma = 1) or circular complex (varsigma = 0) Gaussian observations.
enum class Field { Real, Complex };

inline int varsigma(Field f) { return f == Field::Real ? 1 : 0; }
inline Field field_from_varsigma(int v) { return v ? Field::Real : Field::Complex; }

// Distinct eigenvalues of a population covariance, ascending, with multiplicities.
struct PopulationSpectrum {
  std::vector<double> eigenvalues;
  std::vector<int> multiplicities;

  int dimension() const;
  int distinct() const { return static_cast<int>(eigenvalues.size()); }
  double min() const { return eigenvalues.front(); }
  double max() const { return eigenvalues.back(); }
};

// Real symmetric positive-definite population covariance with its
// eigendecomposition. `eigenvalues` is the full ascending vector (length M)
// matching the columns of `eigenbasis`.
struct PopulationCovariance {
  Eigen::MatrixXd matrix;
  PopulationSpectrum spectrum;
  Eigen::MatrixXd eigenbasis;
  Eigen::VectorXd eigenvalues;

  int dimension() const { return static_cast<int>(matrix.rows()); }
  Eigen::MatrixXd sqrt() const;
};

struct SamplingConfig {
  int N = 0;
  double c = 0.0;  // M / N
};

struct Member {
  std::string label;
  PopulationCovariance covariance;
  SamplingConfig sampling;

  int M() const { return covariance.dimension(); }
  int N() const { return sampling.N; }
  bool undersampled() const { return sampling.N < M(); }
};

struct Ensemble {
  int M = 0;
  Field field = Field::Real;
  std::vector<Member> members;

  int size() const { return static_cast<int>(members.size()); }
  int index_of(const std::string& label) const;  // throws DomainError if absent
  const Member& operator[](int i) const { return members.at(i); }
};

struct Diagnostic {
  enum class Code { DimensionMismatch, RatioGuard, NotPositiveDefinite, TooFewSamples, DuplicateLabel, Empty };
  Code code;
  std::string member;
  std::string message;
};

std::string to_string(Diagnostic::Code code);

PopulationCovariance toeplitz_covariance(double rho, int M);

// Clusters eigenvalues whose relative gap is below tol.
PopulationSpectrum build_spectrum(const Eigen::MatrixXd& matrix, double tol = 1e-8);

PopulationCovariance covariance_from_matrix(const Eigen::MatrixXd& matrix, double tol = 1e-8);

// Diagonal covariance realising a spectrum, or U diag U^T if a basis is given.
PopulationCovariance covariance_from_spectrum(const PopulationSpectrum& spectrum,
                                              const Eigen::MatrixXd& basis = Eigen::MatrixXd());

SamplingConfig sampling_from_count(int M, int N);

Member make_member(std::string label, PopulationCovariance cov, int N);

std::vector<Diagnostic> validate_ensemble(const Ensemble& ensemble, double ratio_guard = 0.02);

// Throws DomainError with the first diagnostic, if any.
void require_valid(const Ensemble& ensemble, double ratio_guard = 0.02);

}  // namespace scm
