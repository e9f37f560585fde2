#pragma once

#include "scm/model.hpp"
#include "scm/options.hpp"
#include "scm/spectral.hpp"

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace scm {

enum class DistanceKind { Euclidean, SymmetrizedKL, Subspace };

std::string to_string(DistanceKind kind);       // "eu", "kl", "ss"
DistanceKind parse_kind(const std::string& s);  // throws DomainError

// Per-population numerics: full eigenvalues, eigenbasis and the scalar context.
struct ArmState {
  std::string label;
  int M = 0;
  int N = 0;
  Eigen::VectorXd lambda;  // ascending, length M
  Eigen::MatrixXd basis;
  OmegaContext ctx;

  explicit ArmState(const Member& member);

  bool undersampled() const { return N < M; }
  double mu0() const { return ctx.mu0(); }
  Eigen::VectorXcd resolvent(cd w) const;  // diag of Q(w) = (R - w)^-1 in the eigenbasis
};

// Rotation between the eigenbases of two members.
struct PairHandle {
  int i = 0;
  int j = 0;
  Eigen::MatrixXd V;  // U_i^T U_j
  Eigen::MatrixXd W;  // |V|^2 elementwise

  // diag(f) in member j's basis, expressed as a full matrix in member i's basis.
  template <class Vec>
  auto to_i(const Vec& diag_j) const {
    return (V * diag_j.asDiagonal() * V.transpose()).eval();
  }
};

PairHandle make_pair_handle(const ArmState& a, const ArmState& b, int i = 0, int j = 1);

// ---- Fluctuation building blocks. Matrices are given in the original coordinates.

struct OmegaCorrection {
  cd phi;
  Eigen::MatrixXcd Omega;
};

OmegaCorrection omega_correction(const ArmState& arm, cd w, const Eigen::MatrixXcd& A);
cd little_m(const ArmState& arm, cd w, const Eigen::MatrixXcd& A);
cd sigma_sq(const ArmState& arm, cd w, cd wp, const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B);
cd varrho(const ArmState& ai, const ArmState& aj, cd wi, cd wj, cd wip, cd wjp);
// Same with the squared rotation W = |U_i^T U_j|^2 already known.
cd varrho(const ArmState& ai, const ArmState& aj, const Eigen::MatrixXd& W, cd wi, cd wj, cd wip, cd wjp);

// Same quantities with matrices already rotated into the arm's eigenbasis.
namespace basis {
cd phi(const ArmState& arm, cd w, const Eigen::VectorXcd& A_diag);
cd little_m(const ArmState& arm, cd w, const Eigen::VectorXcd& A_diag);
cd sigma_sq(const ArmState& arm, cd w, cd wp, const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B);
}  // namespace basis

// ---- Closed forms for one pair.

void check_regime(const ArmState& a, const ArmState& b, DistanceKind kind);

double deterministic_equivalent(const ArmState& a, const ArmState& b, DistanceKind kind);
double second_order_mean(const ArmState& a, const ArmState& b, DistanceKind kind, Field field);
double variance(const ArmState& a, const ArmState& b, DistanceKind kind, Field field);

// KL through the general mu0 path even when both members are oversampled.
double kl_dbar_general(const ArmState& a, const ArmState& b);
double kl_mean2_general(const ArmState& a, const ArmState& b, Field field);
double kl_variance_general(const ArmState& a, const ArmState& b, Field field);
// Shortcuts valid when both N > M.
double kl_dbar_oversampled(const ArmState& a, const ArmState& b);
double kl_mean2_oversampled(const ArmState& a, const ArmState& b, Field field);
double kl_variance_oversampled(const ArmState& a, const ArmState& b, Field field);

// Nodes on the circle used for the derivatives at mu0.
inline constexpr int kCauchyNodes = 64;

// ---- Ensemble-level law.

struct DescriptorSet {
  std::vector<std::pair<int, int>> pairs;  // member indices, i < j
  std::vector<std::string> labels;         // member labels
  Eigen::VectorXd dbar;
  Eigen::VectorXd mean2;
  Eigen::MatrixXd cov;  // Sigma_M (not divided by M^2)
};

struct GaussianLaw {
  int M = 0;
  DistanceKind kind = DistanceKind::Euclidean;
  Field field = Field::Real;
  DescriptorSet descriptors;
  Eigen::VectorXd mean;        // dbar + mean2 / M
  Eigen::MatrixXd covariance;  // floored cov / M^2

  int size() const { return static_cast<int>(mean.size()); }
  GaussianLaw scaled(double t) const;  // mean * t, covariance * t^2
};

std::vector<std::pair<int, int>> all_pairs(int members);

// Sigma(r, s) by quadrature. Zero when the pairs share no member.
double cross_covariance(const Ensemble& ensemble, std::pair<int, int> r, std::pair<int, int> s, DistanceKind kind,
                        const QuadratureOptions& options = {});

GaussianLaw gaussian_law(const Ensemble& ensemble, const std::vector<std::pair<int, int>>& pairs, DistanceKind kind,
                         const LawOptions& options = {});

// Clips eigenvalues of a symmetric matrix below floor * trace / R.
Eigen::MatrixXd floor_eigenvalues(const Eigen::MatrixXd& S, double floor);

}  // namespace scm
