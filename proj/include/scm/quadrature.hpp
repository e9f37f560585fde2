#pragma once

#include "scm/descriptors.hpp"
#include "scm/options.hpp"

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

namespace scm {

using ScalarFn = std::function<cd(cd)>;

struct FunctionalTerm {
  ScalarFn f1;
  bool zero1 = true;  // contour of the first member encloses the origin
  ScalarFn f2;
  bool zero2 = true;
};

// d = sum_l (1/M) tr[f1_l(R1^) f2_l(R2^)] (+ (N1 + N2) / M when rank_offset).
struct FunctionalSpec {
  std::string name;
  std::vector<FunctionalTerm> terms;
  bool rank_offset = false;
};

FunctionalSpec euclidean_spec();
FunctionalSpec kl_spec();
FunctionalSpec subspace_spec();
FunctionalSpec spec_for(DistanceKind kind);

// One member on one omega contour. u(k, a) = 1 / (lambda_a - w_k).
struct NodeSet {
  OmegaContour contour;
  Eigen::MatrixXcd u;
  Eigen::VectorXcd gamma;  // Gamma(w_k, w_k)

  int size() const { return contour.size(); }
  // -weight * z' * (w / z) * f(z): the per-node factor that turns a sum over
  // nodes into the integral of f(z) (w / z) (.) dz / (2 pi i).
  Eigen::VectorXcd coefficients(const ScalarFn& f) const;
};

NodeSet make_node_set(const ArmState& arm, bool enclose_zero, int nodes, const ContourShape& shape = {});

// Deterministic equivalent of (1/2 pi i) oint f(z) (R^ - z)^-1 dz, diagonal in
// the member's eigenbasis. f(z) = z gives R.
Eigen::VectorXcd resolvent_functional(const ArmState& arm, const NodeSet& nodes, const ScalarFn& f);

// (1/2 pi i)^2 oint oint fA(z) fB(z') (w/z)(w'/z') sigma^2(w, w'; A, B) dz dz'
// with A, B in the arm's eigenbasis.
cd sigma_sq_double_integral(const ArmState& arm, const NodeSet& nA, const ScalarFn& fA, const NodeSet& nB,
                            const ScalarFn& fB, const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B);

// G[a, b] = sum over node pairs of the two-point kernel that, contracted with
// the same object of the other member, gives the varrho terms.
Eigen::MatrixXcd varrho_kernel(const ArmState& arm, const NodeSet& nA, const ScalarFn& fA, const NodeSet& nB,
                               const ScalarFn& fB);

// Contour integrals over a fixed set of members. Node sets are cached per
// (member, enclosure, node count); the cache is safe to use from several threads.
class QuadratureEngine {
 public:
  QuadratureEngine(std::vector<ArmState> arms, Field field, QuadratureOptions options = {});

  const ArmState& arm(int i) const { return arms_.at(i); }
  int size() const { return static_cast<int>(arms_.size()); }
  const QuadratureOptions& options() const { return options_; }
  const NodeSet& nodes(int member, bool enclose_zero, int n) const;
  const PairHandle& pair(int i, int j) const;

  double dbar(int i, int j, const FunctionalSpec& spec) const;
  double mean2(int i, int j, const FunctionalSpec& spec) const;
  double cov(std::pair<int, int> r, std::pair<int, int> s, const FunctionalSpec& spec_r,
             const FunctionalSpec& spec_s) const;
  // Unfactored 4-fold sum with dense building blocks. Reference path for small M.
  double cov_full(std::pair<int, int> r, std::pair<int, int> s, const FunctionalSpec& spec_r,
                  const FunctionalSpec& spec_s, int nodes) const;

  // Budget for cov_full: M * nodes^4 above this raises DomainError.
  static constexpr double kFullCostBudget = 5e8;

 private:
  cd dbar_at(int i, int j, const FunctionalSpec& spec, int n) const;
  cd mean2_at(int i, int j, const FunctionalSpec& spec, int n) const;
  cd cov_at(std::pair<int, int> r, std::pair<int, int> s, const FunctionalSpec& spec_r,
            const FunctionalSpec& spec_s, int n) const;
  template <class F>
  double converge(F eval, int n0, const char* what) const;

  std::vector<ArmState> arms_;
  Field field_;
  QuadratureOptions options_;
  mutable std::mutex mutex_;
  mutable std::map<std::tuple<int, bool, int>, std::unique_ptr<NodeSet>> node_cache_;
  mutable std::map<std::pair<int, int>, std::unique_ptr<PairHandle>> pair_cache_;
};

// Two-member conveniences (member 0 and 1 of the arms).
double dbar_numeric(const ArmState& a, const ArmState& b, const FunctionalSpec& spec,
                    const QuadratureOptions& options = {});
double mean2_numeric(const ArmState& a, const ArmState& b, const FunctionalSpec& spec, Field field,
                     const QuadratureOptions& options = {});
double cov_numeric(const ArmState& a, const ArmState& b, const FunctionalSpec& spec, Field field,
                   const QuadratureOptions& options = {});

}  // namespace scm
