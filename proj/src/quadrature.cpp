#include "scm/quadrature.hpp"

#include "scm/errors.hpp"

#include <cmath>
#include <sstream>

namespace scm {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Column p of the packed upper triangle holds (a, b) with a <= b.
struct Packing {
  std::vector<int> a, b;
  explicit Packing(int M) {
    for (int j = 0; j < M; ++j)
      for (int i = 0; i <= j; ++i) {
        a.push_back(i);
        b.push_back(j);
      }
  }
  int size() const { return static_cast<int>(a.size()); }
};

// X[k, p] = U[k, a_p] U[k, b_p]
MatrixXcd pair_products(const MatrixXcd& U, const Packing& P) {
  MatrixXcd X(U.rows(), P.size());
  for (int p = 0; p < P.size(); ++p) X.col(p) = U.col(P.a[p]).cwiseProduct(U.col(P.b[p]));
  return X;
}

bool shares(std::pair<int, int> r, std::pair<int, int> s) {
  return r.first == s.first || r.first == s.second || r.second == s.first || r.second == s.second;
}

}  // namespace

FunctionalSpec euclidean_spec() {
  FunctionalSpec s;
  s.name = "eu";
  auto one = [](cd) { return cd(1.0); };
  s.terms.push_back({[](cd z) { return z * z; }, true, one, true});
  s.terms.push_back({[](cd z) { return z; }, true, [](cd z) { return -2.0 * z; }, true});
  s.terms.push_back({one, true, [](cd z) { return z * z; }, true});
  return s;
}

FunctionalSpec kl_spec() {
  FunctionalSpec s;
  s.name = "kl";
  auto id = [](cd z) { return z; };
  auto half_inv = [](cd z) { return 0.5 / z; };
  s.terms.push_back({half_inv, false, id, false});
  s.terms.push_back({id, false, half_inv, false});
  s.terms.push_back({[](cd) { return cd(-1.0); }, true, [](cd) { return cd(1.0); }, true});
  return s;
}

FunctionalSpec subspace_spec() {
  FunctionalSpec s;
  s.name = "ss";
  s.terms.push_back({[](cd) { return cd(-2.0); }, false, [](cd) { return cd(1.0); }, false});
  s.rank_offset = true;
  return s;
}

FunctionalSpec spec_for(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::Euclidean: return euclidean_spec();
    case DistanceKind::SymmetrizedKL: return kl_spec();
    case DistanceKind::Subspace: return subspace_spec();
  }
  throw DomainError("unknown distance kind");
}

VectorXcd NodeSet::coefficients(const ScalarFn& f) const {
  const int n = size();
  VectorXcd c(n);
  for (int k = 0; k < n; ++k) {
    cd w = contour.omega[k], z = contour.z[k];
    c[k] = -contour.weight[k] * contour.zprime[k] * (w / z) * f(z);
  }
  return c;
}

NodeSet make_node_set(const ArmState& arm, bool enclose_zero, int nodes, const ContourShape& shape) {
  NodeSet ns;
  ns.contour = build_omega_contour(arm.ctx, enclose_zero, nodes, shape);
  const int n = ns.size();
  ns.u.resize(n, arm.M);
  ns.gamma.resize(n);
  for (int k = 0; k < n; ++k) {
    cd w = ns.contour.omega[k];
    for (int a = 0; a < arm.M; ++a) ns.u(k, a) = 1.0 / (arm.lambda[a] - w);
    ns.gamma[k] = 1.0 - ns.contour.zprime[k];
  }
  return ns;
}

VectorXcd resolvent_functional(const ArmState& arm, const NodeSet& nodes, const ScalarFn& f) {
  (void)arm;
  return nodes.u.transpose() * nodes.coefficients(f);
}

cd sigma_sq_double_integral(const ArmState& arm, const NodeSet& nA, const ScalarFn& fA, const NodeSet& nB,
                            const ScalarFn& fB, const MatrixXcd& A, const MatrixXcd& B) {
  const int M = arm.M;
  const double N = arm.N;
  const VectorXcd lam = arm.lambda.cast<cd>();
  const VectorXcd lam2 = lam.cwiseAbs2().cast<cd>();
  const VectorXcd cA = nA.coefficients(fA), cB = nB.coefficients(fB);
  const VectorXcd Ad = A.diagonal(), Bd = B.diagonal();
  const MatrixXcd& UA = nA.u;
  const MatrixXcd& UB = nB.u;
  const MatrixXcd UA2 = UA.cwiseProduct(UA), UB2 = UB.cwiseProduct(UB);
  const int na = nA.size(), nb = nB.size();

  VectorXcd phiA(na), phiB(nb);
  {
    VectorXcd sA = UA2 * lam.cwiseProduct(Ad) / N;
    VectorXcd sB = UB2 * lam.cwiseProduct(Bd) / N;
    for (int k = 0; k < na; ++k) phiA[k] = nA.contour.omega[k] / (1.0 - nA.gamma[k]) * sA[k];
    for (int k = 0; k < nb; ++k) phiB[k] = nB.contour.omega[k] / (1.0 - nB.gamma[k]) * sB[k];
  }

  // d^T (A o B^T) d through the packed upper triangle
  Packing P(M);
  VectorXcd h(P.size());
  for (int p = 0; p < P.size(); ++p) {
    int a = P.a[p], b = P.b[p];
    cd hab = A(a, b) * B(b, a);
    if (a != b) hab += A(b, a) * B(a, b);
    h[p] = lam[a] * lam[b] * hab;
  }
  const MatrixXcd XA = pair_products(UA, P);
  const MatrixXcd XB = pair_products(UB, P);
  MatrixXcd T = XA * h.asDiagonal() * XB.transpose();

  const MatrixXcd Gkk = UA * lam2.asDiagonal() * UB.transpose() / N;
  const MatrixXcd P1 = UA2 * lam2.cwiseProduct(Ad).asDiagonal() * UB2.transpose();
  const MatrixXcd P2 = UA2 * lam2.cwiseProduct(Bd).asDiagonal() * UB2.transpose();
  const MatrixXcd P3 = UA2 * lam2.asDiagonal() * UB2.transpose();
  const MatrixXcd S1a = UA2 * lam2.cwiseProduct(Ad).asDiagonal() * UB.transpose() / N;
  const MatrixXcd S1b = UA2 * lam2.asDiagonal() * UB.transpose() / N;
  const MatrixXcd S2a = UA * lam2.cwiseProduct(Bd).asDiagonal() * UB2.transpose() / N;
  const MatrixXcd S2b = UA * lam2.asDiagonal() * UB2.transpose() / N;

  cd total = 0.0;
  for (int k = 0; k < na; ++k) {
    cd row = 0.0;
    for (int l = 0; l < nb; ++l) {
      cd t1 = (T(k, l) + phiB[l] * P1(k, l) + phiA[k] * P2(k, l) + phiA[k] * phiB[l] * P3(k, l)) / N;
      cd s1 = S1a(k, l) + phiA[k] * S1b(k, l);
      cd s2 = S2a(k, l) + phiB[l] * S2b(k, l);
      cd D = 1.0 - Gkk(k, l);
      row += cB[l] * (t1 / D + s1 * s2 / (D * D));
    }
    total += cA[k] * row;
  }
  return total;
}

MatrixXcd varrho_kernel(const ArmState& arm, const NodeSet& nA, const ScalarFn& fA, const NodeSet& nB,
                        const ScalarFn& fB) {
  const int M = arm.M;
  const double N = arm.N;
  const VectorXcd lam = arm.lambda.cast<cd>();
  const VectorXcd lam2 = arm.lambda.cwiseAbs2().cast<cd>();
  const VectorXcd cA = nA.coefficients(fA), cB = nB.coefficients(fB);
  const MatrixXcd Gkk = nA.u * lam2.asDiagonal() * nB.u.transpose() / N;
  MatrixXcd C = cA * cB.transpose();
  C.array() /= (1.0 - Gkk.array());
  Packing P(M);
  const MatrixXcd XA = pair_products(nA.u, P);
  const MatrixXcd Y = C * pair_products(nB.u, P);
  MatrixXcd G(M, M);
  for (int p = 0; p < P.size(); ++p) {
    int a = P.a[p], b = P.b[p];
    cd v = lam[a] * lam[b] * XA.col(p).cwiseProduct(Y.col(p)).sum();
    G(a, b) = v;
    G(b, a) = v;
  }
  return G;
}

// ---------------------------------------------------------------------------

QuadratureEngine::QuadratureEngine(std::vector<ArmState> arms, Field field, QuadratureOptions options)
    : arms_(std::move(arms)), field_(field), options_(options) {
  if (arms_.size() < 2) throw DomainError("quadrature needs at least two members");
}

const NodeSet& QuadratureEngine::nodes(int member, bool enclose_zero, int n) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto key = std::make_tuple(member, enclose_zero, n);
  auto it = node_cache_.find(key);
  if (it == node_cache_.end())
    it = node_cache_
             .emplace(key, std::make_unique<NodeSet>(make_node_set(arms_.at(member), enclose_zero, n, options_.shape)))
             .first;
  return *it->second;
}

const PairHandle& QuadratureEngine::pair(int i, int j) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = pair_cache_.find({i, j});
  if (it == pair_cache_.end())
    it = pair_cache_.emplace(std::make_pair(i, j), std::make_unique<PairHandle>(make_pair_handle(arms_.at(i), arms_.at(j), i, j)))
             .first;
  return *it->second;
}

template <class F>
double QuadratureEngine::converge(F eval, int n0, const char* what) const {
  int n = n0;
  for (;;) {
    cd v = eval(n);
    double resid = std::abs(v.imag());
    if (resid <= options_.imag_tol * std::max(1.0, std::abs(v.real()))) return v.real();
    if (2 * n > options_.max_nodes) {
      std::ostringstream os;
      os << what << ": imaginary residue " << resid << " at " << n << " nodes";
      throw ConvergenceError(os.str(), resid, n);
    }
    n *= 2;
  }
}

cd QuadratureEngine::dbar_at(int i, int j, const FunctionalSpec& spec, int n) const {
  const ArmState& a = arms_.at(i);
  const ArmState& b = arms_.at(j);
  const PairHandle& ph = pair(i, j);
  cd total = 0.0;
  for (const auto& t : spec.terms) {
    VectorXcd F1 = resolvent_functional(a, nodes(i, t.zero1, n), t.f1);
    VectorXcd F2 = resolvent_functional(b, nodes(j, t.zero2, n), t.f2);
    total += (F1.transpose() * (ph.W.cast<cd>() * F2)).value();
  }
  total /= static_cast<double>(a.M);
  if (spec.rank_offset) total += static_cast<double>(a.N + b.N) / a.M;
  return total;
}

double QuadratureEngine::dbar(int i, int j, const FunctionalSpec& spec) const {
  return converge([&](int n) { return dbar_at(i, j, spec, n); }, options_.nodes, "dbar quadrature");
}

cd QuadratureEngine::mean2_at(int i, int j, const FunctionalSpec& spec, int n) const {
  const int idx[2] = {i, j};
  const PairHandle& ph = pair(i, j);
  const Eigen::MatrixXcd W = ph.W.cast<cd>();
  cd total = 0.0;
  for (const auto& t : spec.terms) {
    const ScalarFn* f[2] = {&t.f1, &t.f2};
    const bool zero[2] = {t.zero1, t.zero2};
    for (int s = 0; s < 2; ++s) {
      const int o = 1 - s;
      const ArmState& ms = arms_.at(idx[s]);
      VectorXcd Fo = resolvent_functional(arms_.at(idx[o]), nodes(idx[o], zero[o], n), *f[o]);
      VectorXcd Ad = s == 0 ? VectorXcd(W * Fo) : VectorXcd(W.transpose() * Fo);
      const NodeSet& ns = nodes(idx[s], zero[s], n);
      VectorXcd c = ns.coefficients(*f[s]);
      for (int k = 0; k < ns.size(); ++k) total += c[k] * basis::little_m(ms, ns.contour.omega[k], Ad);
    }
  }
  return static_cast<double>(varsigma(field_)) * total;
}

double QuadratureEngine::mean2(int i, int j, const FunctionalSpec& spec) const {
  if (varsigma(field_) == 0) return 0.0;
  return converge([&](int n) { return mean2_at(i, j, spec, n); }, options_.nodes, "mean2 quadrature");
}

cd QuadratureEngine::cov_at(std::pair<int, int> r, std::pair<int, int> s, const FunctionalSpec& spec_r,
                            const FunctionalSpec& spec_s, int n) const {
  const int R[2] = {r.first, r.second};
  const int S[2] = {s.first, s.second};
  cd total = 0.0;
  for (const auto& tr : spec_r.terms) {
    for (const auto& ts : spec_s.terms) {
      const ScalarFn* fr[2] = {&tr.f1, &tr.f2};
      const ScalarFn* fs[2] = {&ts.f1, &ts.f2};
      const bool er[2] = {tr.zero1, tr.zero2};
      const bool es[2] = {ts.zero1, ts.zero2};
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          if (R[a] != S[b]) continue;
          const int m = R[a], oa = R[1 - a], ob = S[1 - b];
          const ArmState& arm = arms_.at(m);
          VectorXcd Fa = resolvent_functional(arms_.at(oa), nodes(oa, er[1 - a], n), *fr[1 - a]);
          VectorXcd Fb = resolvent_functional(arms_.at(ob), nodes(ob, es[1 - b], n), *fs[1 - b]);
          Eigen::MatrixXcd A = pair(m, oa).to_i(Fa);
          Eigen::MatrixXcd B = pair(m, ob).to_i(Fb);
          total += sigma_sq_double_integral(arm, nodes(m, er[a], n), *fr[a], nodes(m, es[b], n), *fs[b], A, B);
        }
      }
      // varrho terms: both members shared, in either order
      for (int swap = 0; swap < 2; ++swap) {
        const int p0 = swap, p1 = 1 - swap;
        if (R[0] != S[p0] || R[1] != S[p1]) continue;
        const int i = R[0], j = R[1];
        Eigen::MatrixXcd Gi = varrho_kernel(arms_.at(i), nodes(i, er[0], n), *fr[0], nodes(i, es[p0], n), *fs[p0]);
        Eigen::MatrixXcd Gj = varrho_kernel(arms_.at(j), nodes(j, er[1], n), *fr[1], nodes(j, es[p1], n), *fs[p1]);
        const Eigen::MatrixXcd W = pair(i, j).W.cast<cd>();
        Eigen::MatrixXcd WGW = W * Gj * W.transpose();
        total += Gi.cwiseProduct(WGW).sum() / (static_cast<double>(arms_.at(i).N) * arms_.at(j).N);
      }
    }
  }
  return (1.0 + varsigma(field_)) * total;
}

double QuadratureEngine::cov(std::pair<int, int> r, std::pair<int, int> s, const FunctionalSpec& spec_r,
                             const FunctionalSpec& spec_s) const {
  if (!shares(r, s)) return 0.0;
  return converge([&](int n) { return cov_at(r, s, spec_r, spec_s, n); }, options_.cov_nodes, "covariance quadrature");
}

double QuadratureEngine::cov_full(std::pair<int, int> r, std::pair<int, int> s, const FunctionalSpec& spec_r,
                                  const FunctionalSpec& spec_s, int n) const {
  if (!shares(r, s)) return 0.0;
  const int M = arms_.front().M;
  if (static_cast<double>(M) * std::pow(static_cast<double>(n), 4) > kFullCostBudget)
    throw DomainError("4-fold covariance exceeds the cost budget; reduce M or nodes");
  const int R[2] = {r.first, r.second};
  const int S[2] = {s.first, s.second};

  // resolvent of member o at each node, as a full matrix in member m's basis
  auto resolvents = [&](int m, int o, const NodeSet& ns) {
    std::vector<Eigen::MatrixXcd> out(ns.size());
    const PairHandle& ph = pair(m, o);
    for (int k = 0; k < ns.size(); ++k) out[k] = ph.to_i(VectorXcd(ns.u.row(k).transpose()));
    return out;
  };

  cd total = 0.0;
  for (const auto& tr : spec_r.terms) {
    for (const auto& ts : spec_s.terms) {
      const ScalarFn* fr[2] = {&tr.f1, &tr.f2};
      const ScalarFn* fs[2] = {&ts.f1, &ts.f2};
      const bool er[2] = {tr.zero1, tr.zero2};
      const bool es[2] = {ts.zero1, ts.zero2};
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          if (R[a] != S[b]) continue;
          const int m = R[a], oa = R[1 - a], ob = S[1 - b];
          const NodeSet& n1 = nodes(m, er[a], n);
          const NodeSet& n2 = nodes(oa, er[1 - a], n);
          const NodeSet& n3 = nodes(m, es[b], n);
          const NodeSet& n4 = nodes(ob, es[1 - b], n);
          VectorXcd c1 = n1.coefficients(*fr[a]), c2 = n2.coefficients(*fr[1 - a]);
          VectorXcd c3 = n3.coefficients(*fs[b]), c4 = n4.coefficients(*fs[1 - b]);
          auto QA = resolvents(m, oa, n2);
          auto QB = resolvents(m, ob, n4);
          for (int k1 = 0; k1 < n; ++k1)
            for (int k3 = 0; k3 < n; ++k3) {
              cd inner = 0.0;
              for (int k2 = 0; k2 < n; ++k2)
                for (int k4 = 0; k4 < n; ++k4)
                  inner += c2[k2] * c4[k4] *
                           basis::sigma_sq(arms_.at(m), n1.contour.omega[k1], n3.contour.omega[k3], QA[k2], QB[k4]);
              total += c1[k1] * c3[k3] * inner;
            }
        }
      }
      for (int swap = 0; swap < 2; ++swap) {
        const int p0 = swap, p1 = 1 - swap;
        if (R[0] != S[p0] || R[1] != S[p1]) continue;
        const int i = R[0], j = R[1];
        const NodeSet& ni = nodes(i, er[0], n);
        const NodeSet& nj = nodes(j, er[1], n);
        const NodeSet& nip = nodes(i, es[p0], n);
        const NodeSet& njp = nodes(j, es[p1], n);
        VectorXcd ci = ni.coefficients(*fr[0]), cj = nj.coefficients(*fr[1]);
        VectorXcd cip = nip.coefficients(*fs[p0]), cjp = njp.coefficients(*fs[p1]);
        const Eigen::MatrixXd& W = pair(i, j).W;
        for (int k1 = 0; k1 < n; ++k1)
          for (int k2 = 0; k2 < n; ++k2)
            for (int k3 = 0; k3 < n; ++k3)
              for (int k4 = 0; k4 < n; ++k4)
                total += ci[k1] * cj[k2] * cip[k3] * cjp[k4] *
                         varrho(arms_.at(i), arms_.at(j), W, ni.contour.omega[k1], nj.contour.omega[k2],
                                nip.contour.omega[k3], njp.contour.omega[k4]);
      }
    }
  }
  total *= 1.0 + varsigma(field_);
  return total.real();
}

double dbar_numeric(const ArmState& a, const ArmState& b, const FunctionalSpec& spec, const QuadratureOptions& o) {
  QuadratureEngine e({a, b}, Field::Real, o);
  return e.dbar(0, 1, spec);
}

double mean2_numeric(const ArmState& a, const ArmState& b, const FunctionalSpec& spec, Field field,
                     const QuadratureOptions& o) {
  QuadratureEngine e({a, b}, field, o);
  return e.mean2(0, 1, spec);
}

double cov_numeric(const ArmState& a, const ArmState& b, const FunctionalSpec& spec, Field field,
                   const QuadratureOptions& o) {
  QuadratureEngine e({a, b}, field, o);
  return e.cov({0, 1}, {0, 1}, spec, spec);
}

}  // namespace scm
