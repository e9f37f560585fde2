#include "scm/descriptors.hpp"

#include "scm/errors.hpp"
#include "scm/parallel.hpp"
#include "scm/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace scm {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

std::string to_string(DistanceKind kind) {
  switch (kind) {
    case DistanceKind::Euclidean: return "eu";
    case DistanceKind::SymmetrizedKL: return "kl";
    case DistanceKind::Subspace: return "ss";
  }
  return "?";
}

DistanceKind parse_kind(const std::string& s) {
  if (s == "eu" || s == "euclidean") return DistanceKind::Euclidean;
  if (s == "kl") return DistanceKind::SymmetrizedKL;
  if (s == "ss" || s == "subspace") return DistanceKind::Subspace;
  throw DomainError("unknown distance kind '" + s + "' (expected eu, kl or ss)");
}

ArmState::ArmState(const Member& member)
    : label(member.label),
      M(member.M()),
      N(member.N()),
      lambda(member.covariance.eigenvalues),
      basis(member.covariance.eigenbasis),
      ctx(member.covariance.spectrum, member.N()) {}

VectorXcd ArmState::resolvent(cd w) const {
  VectorXcd q(M);
  for (int a = 0; a < M; ++a) {
    cd d = lambda[a] - w;
    if (std::abs(d) < 1e-14 * std::max(1.0, std::abs(w))) throw SingularityError("omega hits an eigenvalue");
    q[a] = 1.0 / d;
  }
  return q;
}

PairHandle make_pair_handle(const ArmState& a, const ArmState& b, int i, int j) {
  if (a.M != b.M) throw DomainError("members have different dimensions");
  PairHandle h;
  h.i = i;
  h.j = j;
  h.V = a.basis.transpose() * b.basis;
  h.W = h.V.cwiseAbs2();
  return h;
}

namespace {

cd one_minus(cd g, const char* what) {
  cd d = 1.0 - g;
  if (std::abs(d) < 1e-13) throw SingularityError(std::string(what) + ": 1 - Gamma vanishes", std::abs(d));
  return d;
}

MatrixXcd to_basis(const ArmState& arm, const MatrixXcd& A) {
  return arm.basis.transpose().cast<cd>() * A * arm.basis.cast<cd>();
}

double tr_sq(const VectorXd& lam) { return lam.squaredNorm(); }

// sum_ab x_a W_ab y_b
template <class X, class Y>
auto bilinear(const X& x, const MatrixXd& W, const Y& y) {
  return (x.transpose() * W.cast<typename Y::Scalar>() * y).value();
}

// Mean of f(x0 + r e^{it}) / (r e^{it}) over n equispaced t: f'(x0).
template <class F>
cd cauchy_d1(F f, double x0, double r, int n = kCauchyNodes) {
  cd s = 0.0;
  for (int k = 0; k < n; ++k) {
    cd e = std::polar(1.0, 2.0 * M_PI * k / n);
    s += f(x0 + r * e) / (r * e);
  }
  return s / static_cast<double>(n);
}

// d^2 f / dx dy at (x0, y0) from values precomputed on the two circles.
template <class F>
cd cauchy_d11(F f, double x0, double y0, double rx, double ry, int n = kCauchyNodes) {
  std::vector<cd> ex(n);
  for (int k = 0; k < n; ++k) ex[k] = std::polar(1.0, 2.0 * M_PI * k / n);
  cd s = 0.0;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) s += f(k, l) / (rx * ex[k] * ry * ex[l]);
  (void)x0;
  (void)y0;
  return s / static_cast<double>(n * n);
}

std::vector<cd> circle(double x0, double r, int n = kCauchyNodes) {
  std::vector<cd> w(n);
  for (int k = 0; k < n; ++k) w[k] = x0 + r * std::polar(1.0, 2.0 * M_PI * k / n);
  return w;
}

double cauchy_radius(const ArmState& a) { return 0.5 * (a.ctx.left_critical() - a.mu0()); }

void check_sign(double v, double scale, const char* what) {
  if (v < -1e-9 * std::max(scale, 1e-300)) {
    std::ostringstream os;
    os << what << ": negative variance " << v;
    throw NumericError(os.str(), v);
  }
}

}  // namespace

// ---- building blocks ------------------------------------------------------

namespace basis {

cd phi(const ArmState& arm, cd w, const VectorXcd& A_diag) {
  VectorXcd q = arm.resolvent(w);
  cd G = 0.0, s = 0.0;
  for (int a = 0; a < arm.M; ++a) {
    cd q2 = q[a] * q[a];
    G += arm.lambda[a] * arm.lambda[a] * q2;
    s += arm.lambda[a] * q2 * A_diag[a];
  }
  G /= arm.N;
  s /= arm.N;
  return w / one_minus(G, "phi") * s;
}

cd little_m(const ArmState& arm, cd w, const VectorXcd& A_diag) {
  VectorXcd q = arm.resolvent(w);
  cd G = 0.0, s = 0.0;
  for (int a = 0; a < arm.M; ++a) {
    cd q2 = q[a] * q[a];
    G += arm.lambda[a] * arm.lambda[a] * q2;
    s += arm.lambda[a] * q2 * A_diag[a];
  }
  G /= arm.N;
  s /= arm.N;
  cd D = one_minus(G, "little_m");
  cd ph = w / D * s;
  cd t = 0.0;
  for (int a = 0; a < arm.M; ++a) t += arm.lambda[a] * arm.lambda[a] * q[a] * q[a] * q[a] * (A_diag[a] + ph);
  return t / static_cast<double>(arm.N) / D;
}

cd sigma_sq(const ArmState& arm, cd w, cd wp, const MatrixXcd& A, const MatrixXcd& B) {
  const VectorXcd q = arm.resolvent(w), qp = arm.resolvent(wp);
  const VectorXcd Ad = A.diagonal(), Bd = B.diagonal();
  const cd phA = phi(arm, w, Ad), phB = phi(arm, wp, Bd);
  const double N = arm.N;
  const VectorXcd lam = arm.lambda.cast<cd>();
  const VectorXcd d = lam.cwiseProduct(q).cwiseProduct(qp);
  const cd G = (lam.cwiseProduct(d)).sum() / N;
  const cd D = one_minus(G, "sigma_sq");
  // sum_ab d_a (A + phA I)_ab d_b (B + phB I)_ba
  cd t1 = (d * d.transpose()).cwiseProduct(A).cwiseProduct(B.transpose()).sum();
  const VectorXcd dd = d.cwiseProduct(d);
  t1 += phB * dd.cwiseProduct(Ad).sum() + phA * dd.cwiseProduct(Bd).sum() + phA * phB * dd.sum();
  const VectorXcd lq = lam.cwiseProduct(d);  // lambda^2 q q'
  cd s1 = (lq.cwiseProduct(q).cwiseProduct(Ad + VectorXcd::Constant(arm.M, phA))).sum() / N;
  cd s2 = (lq.cwiseProduct(qp).cwiseProduct(Bd + VectorXcd::Constant(arm.M, phB))).sum() / N;
  return t1 / N / D + s1 * s2 / (D * D);
}

}  // namespace basis

OmegaCorrection omega_correction(const ArmState& arm, cd w, const MatrixXcd& A) {
  OmegaCorrection oc;
  oc.phi = basis::phi(arm, w, to_basis(arm, A).diagonal());
  oc.Omega = A;
  oc.Omega.diagonal().array() += oc.phi;
  return oc;
}

cd little_m(const ArmState& arm, cd w, const MatrixXcd& A) {
  return basis::little_m(arm, w, to_basis(arm, A).diagonal());
}

cd sigma_sq(const ArmState& arm, cd w, cd wp, const MatrixXcd& A, const MatrixXcd& B) {
  return basis::sigma_sq(arm, w, wp, to_basis(arm, A), to_basis(arm, B));
}

cd varrho(const ArmState& ai, const ArmState& aj, const MatrixXd& W, cd wi, cd wj, cd wip, cd wjp) {
  VectorXcd x = ai.lambda.cast<cd>().cwiseProduct(ai.resolvent(wi)).cwiseProduct(ai.resolvent(wip));
  VectorXcd y = aj.lambda.cast<cd>().cwiseProduct(aj.resolvent(wj)).cwiseProduct(aj.resolvent(wjp));
  cd t = bilinear(x, W, y);
  cd Di = one_minus(ai.ctx.gamma(wi, wip), "varrho");
  cd Dj = one_minus(aj.ctx.gamma(wj, wjp), "varrho");
  return t * t / (static_cast<double>(ai.N) * aj.N * Di * Dj);
}

cd varrho(const ArmState& ai, const ArmState& aj, cd wi, cd wj, cd wip, cd wjp) {
  return varrho(ai, aj, make_pair_handle(ai, aj).W, wi, wj, wip, wjp);
}

// ---- closed forms ---------------------------------------------------------

void check_regime(const ArmState& a, const ArmState& b, DistanceKind kind) {
  if (a.M != b.M) throw DomainError("members have different dimensions");
  if (kind == DistanceKind::Subspace && (!a.undersampled() || !b.undersampled()))
    throw DomainError("subspace distance requires N < M for both members (" + a.label + ", " + b.label + ")");
  if (kind == DistanceKind::SymmetrizedKL && (a.N == a.M || b.N == b.M))
    throw DomainError("KL distance is undefined at N = M");
}

namespace {

double eu_dbar(const ArmState& a, const ArmState& b, const PairHandle& h) {
  const double M = a.M;
  double cross = bilinear(a.lambda, h.W, b.lambda);
  double sa = a.lambda.sum(), sb = b.lambda.sum();
  return (tr_sq(a.lambda) + tr_sq(b.lambda) - 2 * cross) / M + sa * sa / (M * a.N) + sb * sb / (M * b.N);
}

double eu_mean2(const ArmState& a, const ArmState& b) {
  return tr_sq(a.lambda) / a.N + tr_sq(b.lambda) / b.N;
}

// tr[R P R P] with P = R - R_other + (tr R / N) I, all in R's eigenbasis.
double eu_psi_term(const ArmState& a, const MatrixXd& other_in_a) {
  MatrixXd P = -other_in_a;
  P.diagonal() += a.lambda + VectorXd::Constant(a.M, a.lambda.sum() / a.N);
  double s = 0.0;
  for (int i = 0; i < a.M; ++i)
    for (int j = 0; j < a.M; ++j) s += a.lambda[i] * a.lambda[j] * P(i, j) * P(i, j);
  return s;
}

double eu_variance(const ArmState& a, const ArmState& b, const PairHandle& h) {
  const double Na = a.N, Nb = b.N;
  double ta = tr_sq(a.lambda) / Na, tb = tr_sq(b.lambda) / Nb;
  double cross = bilinear(a.lambda, h.W, b.lambda);
  MatrixXd Rb_in_a = h.V * b.lambda.asDiagonal() * h.V.transpose();
  MatrixXd Ra_in_b = h.V.transpose() * a.lambda.asDiagonal() * h.V;
  double terms[5] = {2 * ta * ta, 2 * tb * tb, 4 * cross * cross / (Na * Nb), 4 / Na * eu_psi_term(a, Rb_in_a),
                     4 / Nb * eu_psi_term(b, Ra_in_b)};
  double v = 0, scale = 0;
  for (double t : terms) {
    v += t;
    scale += std::abs(t);
  }
  check_sign(v, scale, "euclidean variance");
  return v;
}

// lambda q^2 at mu0 and 1 - Gamma(mu0)
struct MuState {
  double mu;
  VectorXd q;
  double D;
};

MuState mu_state(const ArmState& a) {
  MuState s;
  s.mu = a.mu0();
  s.q = (a.lambda.array() - s.mu).inverse().matrix();
  double G = (a.lambda.array().square() * s.q.array().square()).sum() / a.N;
  s.D = 1.0 - G;
  if (std::abs(s.D) < 1e-13) throw SingularityError("1 - Gamma vanishes at mu0", std::abs(s.D));
  return s;
}

double ss_dbar(const ArmState& a, const ArmState& b, const PairHandle& h) {
  MuState sa = mu_state(a), sb = mu_state(b);
  VectorXd x = a.lambda.cwiseProduct(sa.q), y = b.lambda.cwiseProduct(sb.q);
  return static_cast<double>(a.N + b.N) / a.M - 2.0 / a.M * bilinear(x, h.W, y);
}

double ss_mean2(const ArmState& a, const ArmState& b, const PairHandle& h) {
  MuState sa = mu_state(a), sb = mu_state(b);
  VectorXd x = a.lambda.cwiseProduct(sa.q), y = b.lambda.cwiseProduct(sb.q);
  VectorXcd Ad = (h.W * y).cast<cd>();              // diag of R_b Q_b in a's basis
  VectorXcd Bd = (h.W.transpose() * x).cast<cd>();  // diag of R_a Q_a in b's basis
  return (-2.0 * sa.mu * basis::little_m(a, sa.mu, Ad) - 2.0 * sb.mu * basis::little_m(b, sb.mu, Bd)).real();
}

double ss_variance(const ArmState& a, const ArmState& b, const PairHandle& h) {
  MuState sa = mu_state(a), sb = mu_state(b);
  VectorXd x = a.lambda.cwiseProduct(sa.q), y = b.lambda.cwiseProduct(sb.q);
  MatrixXcd Ab = (h.V * y.asDiagonal() * h.V.transpose()).cast<cd>();
  MatrixXcd Ba = (h.V.transpose() * x.asDiagonal() * h.V).cast<cd>();
  double t1 = 4 * sa.mu * sa.mu * basis::sigma_sq(a, sa.mu, sa.mu, Ab, Ab).real();
  double t2 = 4 * sb.mu * sb.mu * basis::sigma_sq(b, sb.mu, sb.mu, Ba, Ba).real();
  double t = bilinear(VectorXd(x.cwiseProduct(sa.q)), h.W, VectorXd(y.cwiseProduct(sb.q)));
  double t3 = 4 * std::pow(sa.mu * sb.mu, 2) * t * t / (static_cast<double>(a.N) * b.N * sa.D * sb.D);
  double v = t1 + t2 + t3;
  check_sign(v, std::abs(t1) + std::abs(t2) + std::abs(t3), "subspace variance");
  return v;
}

}  // namespace

double kl_dbar_general(const ArmState& a, const ArmState& b) {
  PairHandle h = make_pair_handle(a, b);
  MuState sa = mu_state(a), sb = mu_state(b);
  VectorXd x = a.lambda.cwiseProduct(sa.q).cwiseProduct(sa.q);
  VectorXd y = b.lambda.cwiseProduct(sb.q).cwiseProduct(sb.q);
  double M = a.M;
  return bilinear(x, h.W, b.lambda) / (2 * M * sa.D) + bilinear(a.lambda, h.W, y) / (2 * M * sb.D) - 1.0;
}

double kl_mean2_general(const ArmState& a, const ArmState& b, Field field) {
  if (varsigma(field) == 0) return 0.0;
  PairHandle h = make_pair_handle(a, b);
  double s = 0.0;
  for (int side = 0; side < 2; ++side) {
    const ArmState& mi = side == 0 ? a : b;
    const ArmState& mo = side == 0 ? b : a;
    VectorXcd Ad = side == 0 ? VectorXcd((h.W * mo.lambda).cast<cd>()) : VectorXcd((h.W.transpose() * mo.lambda).cast<cd>());
    MuState st = mu_state(mi);
    cd d = cauchy_d1([&](cd w) { return w * basis::little_m(mi, w, Ad); }, st.mu, cauchy_radius(mi));
    s += d.real() / (2 * st.D);
  }
  return varsigma(field) * s;
}

double kl_variance_general(const ArmState& a, const ArmState& b, Field field) {
  PairHandle h = make_pair_handle(a, b);
  const int n = kCauchyNodes;
  double v = 0.0;

  // Upsilon_ii terms, each in its own basis.
  for (int side = 0; side < 2; ++side) {
    const ArmState& mi = side == 0 ? a : b;
    const ArmState& mo = side == 0 ? b : a;
    const MatrixXd& V = h.V;
    MatrixXd Ro = side == 0 ? MatrixXd(V * mo.lambda.asDiagonal() * V.transpose())
                            : MatrixXd(V.transpose() * mo.lambda.asDiagonal() * V);
    const MatrixXcd RoC = Ro.cast<cd>();
    const MatrixXcd Ro2 = Ro.cwiseAbs2().cast<cd>();
    const VectorXcd rod = Ro.diagonal().cast<cd>();
    MuState st = mu_state(mi);
    const double r = cauchy_radius(mi);
    std::vector<cd> w = circle(st.mu, r);
    std::vector<VectorXcd> q(n);
    for (int k = 0; k < n; ++k) q[k] = mi.resolvent(w[k]);
    const VectorXcd lam = mi.lambda.cast<cd>();
    auto f = [&](int k, int l) {
      VectorXcd d = lam.cwiseProduct(q[k]).cwiseProduct(q[l]);
      cd t = d.cwiseProduct(rod).sum();
      cd D = one_minus(mi.ctx.gamma(w[k], w[l]), "kl variance");
      cd u = t * t / (static_cast<double>(mi.N) * mo.N * D) + basis::sigma_sq(mi, w[k], w[l], RoC, RoC) +
             (q[k].transpose() * Ro2 * q[l]).value() / static_cast<double>(mo.N);
      return w[k] * w[l] * u;
    };
    cd d = cauchy_d11(f, st.mu, st.mu, r, r);
    v += d.real() / (4 * st.D * st.D);
  }

  // Upsilon_12 in a's basis
  {
    MuState sa = mu_state(a), sb = mu_state(b);
    const double ra = cauchy_radius(a), rb = cauchy_radius(b);
    std::vector<cd> wa = circle(sa.mu, ra), wb = circle(sb.mu, rb);
    const MatrixXcd V = h.V.cast<cd>();
    const MatrixXcd W = h.W.cast<cd>();
    const VectorXcd la = a.lambda.cast<cd>(), lb = b.lambda.cast<cd>();
    std::vector<VectorXcd> qa(n), qb(n), Ka(n), Kb(n), xa(n), xb(n), a2(n), b2(n);
    std::vector<cd> phia(n), phib(n);
    for (int k = 0; k < n; ++k) {
      qa[k] = a.resolvent(wa[k]);
      xa[k] = la.cwiseProduct(qa[k]);
      MatrixXcd C = V.transpose() * xa[k].asDiagonal() * V;
      Ka[k] = C.cwiseProduct(C) * lb;
      a2[k] = W.transpose() * xa[k].cwiseProduct(xa[k]);
      cd Ga = la.cwiseProduct(la).cwiseProduct(qa[k]).cwiseProduct(qa[k]).sum() / static_cast<double>(a.N);
      phia[k] = wa[k] / one_minus(Ga, "kl variance") * (xa[k].cwiseProduct(qa[k]).transpose() * W * lb).value() /
                static_cast<double>(a.N);

      qb[k] = b.resolvent(wb[k]);
      xb[k] = lb.cwiseProduct(qb[k]);
      MatrixXcd Cb = V * xb[k].asDiagonal() * V.transpose();
      Kb[k] = Cb.cwiseProduct(Cb) * la;
      b2[k] = W * xb[k].cwiseProduct(xb[k]);
      cd Gb = lb.cwiseProduct(lb).cwiseProduct(qb[k]).cwiseProduct(qb[k]).sum() / static_cast<double>(b.N);
      phib[k] = wb[k] / one_minus(Gb, "kl variance") * (la.transpose() * W * xb[k].cwiseProduct(qb[k])).value() /
                static_cast<double>(b.N);
    }
    auto f = [&](int k, int l) {
      cd t = (xa[k].transpose() * W * xb[l]).value();
      cd t2 = Ka[k].cwiseProduct(qb[l]).sum() + phia[k] * a2[k].cwiseProduct(qb[l]).sum();
      cd t3 = Kb[l].cwiseProduct(qa[k]).sum() + phib[l] * b2[l].cwiseProduct(qa[k]).sum();
      cd u = t * t / (static_cast<double>(a.N) * b.N) - t2 / static_cast<double>(a.N) - t3 / static_cast<double>(b.N);
      return wa[k] * wb[l] * u;
    };
    cd d = cauchy_d11(f, sa.mu, sb.mu, ra, rb);
    v += d.real() / (2 * sa.D * sb.D);
  }
  return (1 + varsigma(field)) * v;
}

double kl_dbar_oversampled(const ArmState& a, const ArmState& b) {
  if (a.undersampled() || b.undersampled()) throw DomainError("oversampled KL shortcut needs N > M for both members");
  PairHandle h = make_pair_handle(a, b);
  const double M = a.M, Na = a.N, Nb = b.N;
  double tab = bilinear(VectorXd(a.lambda.cwiseInverse()), h.W, b.lambda);  // tr R_a^-1 R_b
  double tba = bilinear(a.lambda, h.W, VectorXd(b.lambda.cwiseInverse()));
  return (Na * tab / (Na - M) + Nb * tba / (Nb - M)) / (2 * M) - 1.0;
}

double kl_mean2_oversampled(const ArmState& a, const ArmState& b, Field field) {
  if (a.undersampled() || b.undersampled()) throw DomainError("oversampled KL shortcut needs N > M for both members");
  if (varsigma(field) == 0) return 0.0;
  PairHandle h = make_pair_handle(a, b);
  const double M = a.M, Na = a.N, Nb = b.N;
  double tab = bilinear(VectorXd(a.lambda.cwiseInverse()), h.W, b.lambda);
  double tba = bilinear(a.lambda, h.W, VectorXd(b.lambda.cwiseInverse()));
  return varsigma(field) * 0.5 * (Na * tab / ((Na - M) * (Na - M)) + Nb * tba / ((Nb - M) * (Nb - M)));
}

double kl_variance_oversampled(const ArmState& a, const ArmState& b, Field field) {
  if (a.undersampled() || b.undersampled()) throw DomainError("oversampled KL shortcut needs N > M for both members");
  PairHandle h = make_pair_handle(a, b);
  const double M = a.M, Na = a.N, Nb = b.N;
  // tr[(R_i^-1 R_o)^k] for k = 1, 2 in R_i's basis
  auto traces = [&](const ArmState& mi, const MatrixXd& Ro) {
    VectorXd inv = mi.lambda.cwiseInverse();
    double t1 = inv.dot(Ro.diagonal());
    MatrixXd S = inv.asDiagonal() * Ro;
    double t2 = S.cwiseProduct(S.transpose()).sum();
    return std::make_pair(t1, t2);
  };
  auto [ta1, ta2] = traces(a, h.V * b.lambda.asDiagonal() * h.V.transpose());
  auto [tb1, tb2] = traces(b, h.V.transpose() * a.lambda.asDiagonal() * h.V);
  auto U = [&](double Ni, double No, double t1, double t2) {
    return (Ni + No - M) / (No * (Ni - M)) * (t2 + t1 * t1 / (Ni - M));
  };
  double U11 = U(Na, Nb, ta1, ta2), U22 = U(Nb, Na, tb1, tb2);
  double U12 = M * M / (Na * Nb) - M / Na - M / Nb;
  double v = Na * Na * U11 / (4 * (Na - M) * (Na - M)) + Nb * Nb * U22 / (4 * (Nb - M) * (Nb - M)) +
             Na * Nb * U12 / (2 * (Na - M) * (Nb - M));
  return (1 + varsigma(field)) * v;
}

double deterministic_equivalent(const ArmState& a, const ArmState& b, DistanceKind kind) {
  check_regime(a, b, kind);
  switch (kind) {
    case DistanceKind::Euclidean: return eu_dbar(a, b, make_pair_handle(a, b));
    case DistanceKind::SymmetrizedKL:
      return (a.undersampled() || b.undersampled()) ? kl_dbar_general(a, b) : kl_dbar_oversampled(a, b);
    case DistanceKind::Subspace: return ss_dbar(a, b, make_pair_handle(a, b));
  }
  throw DomainError("unknown distance kind");
}

double second_order_mean(const ArmState& a, const ArmState& b, DistanceKind kind, Field field) {
  check_regime(a, b, kind);
  if (varsigma(field) == 0) return 0.0;
  switch (kind) {
    case DistanceKind::Euclidean: return eu_mean2(a, b);
    case DistanceKind::SymmetrizedKL:
      return (a.undersampled() || b.undersampled()) ? kl_mean2_general(a, b, field) : kl_mean2_oversampled(a, b, field);
    case DistanceKind::Subspace: return ss_mean2(a, b, make_pair_handle(a, b));
  }
  throw DomainError("unknown distance kind");
}

double variance(const ArmState& a, const ArmState& b, DistanceKind kind, Field field) {
  check_regime(a, b, kind);
  double v = 0.0;
  switch (kind) {
    case DistanceKind::Euclidean: v = eu_variance(a, b, make_pair_handle(a, b)); break;
    case DistanceKind::SymmetrizedKL:
      v = (a.undersampled() || b.undersampled()) ? kl_variance_general(a, b, Field::Complex)
                                                 : kl_variance_oversampled(a, b, Field::Complex);
      check_sign(v, std::abs(v), "kl variance");
      break;
    case DistanceKind::Subspace: v = ss_variance(a, b, make_pair_handle(a, b)); break;
  }
  return (1 + varsigma(field)) * v;
}

// ---- ensemble law ---------------------------------------------------------

std::vector<std::pair<int, int>> all_pairs(int members) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < members; ++i)
    for (int j = i + 1; j < members; ++j) out.emplace_back(i, j);
  return out;
}

GaussianLaw GaussianLaw::scaled(double t) const {
  GaussianLaw g = *this;
  g.mean *= t;
  g.covariance *= t * t;
  return g;
}

MatrixXd floor_eigenvalues(const MatrixXd& S, double floor) {
  const int R = static_cast<int>(S.rows());
  if (R == 0) return S;
  MatrixXd sym = 0.5 * (S + S.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  VectorXd ev = es.eigenvalues();
  double level = floor * std::max(sym.trace(), 0.0) / R;
  bool changed = false;
  for (int i = 0; i < R; ++i)
    if (ev[i] < level) {
      ev[i] = level;
      changed = true;
    }
  if (!changed) return sym;
  MatrixXd out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

namespace {

std::vector<ArmState> make_arms(const Ensemble& e) {
  std::vector<ArmState> arms;
  arms.reserve(e.size());
  for (const auto& m : e.members) arms.emplace_back(m);
  return arms;
}

}  // namespace

double cross_covariance(const Ensemble& ensemble, std::pair<int, int> r, std::pair<int, int> s, DistanceKind kind,
                        const QuadratureOptions& options) {
  const int J = ensemble.size();
  for (int idx : {r.first, r.second, s.first, s.second})
    if (idx < 0 || idx >= J) throw DomainError("pair index out of range");
  if (r.first == r.second || s.first == s.second) throw DomainError("pair needs two distinct members");
  QuadratureEngine engine(make_arms(ensemble), ensemble.field, options);
  FunctionalSpec spec = spec_for(kind);
  return engine.cov(r, s, spec, spec);
}

GaussianLaw gaussian_law(const Ensemble& ensemble, const std::vector<std::pair<int, int>>& pairs, DistanceKind kind,
                         const LawOptions& options) {
  require_valid(ensemble);
  const int P = static_cast<int>(pairs.size());
  if (P == 0) throw DomainError("no pairs requested");
  for (int p = 0; p < P; ++p) {
    auto [i, j] = pairs[p];
    if (i < 0 || j < 0 || i >= ensemble.size() || j >= ensemble.size() || i == j)
      throw DomainError("invalid pair index");
    for (int q = 0; q < p; ++q)
      if ((pairs[q].first == i && pairs[q].second == j) || (pairs[q].first == j && pairs[q].second == i))
        throw DomainError("duplicate pair");
  }
  std::vector<ArmState> arms = make_arms(ensemble);
  for (auto [i, j] : pairs) check_regime(arms[i], arms[j], kind);

  GaussianLaw law;
  law.M = ensemble.M;
  law.kind = kind;
  law.field = ensemble.field;
  DescriptorSet& ds = law.descriptors;
  ds.pairs = pairs;
  for (const auto& m : ensemble.members) ds.labels.push_back(m.label);
  ds.dbar.resize(P);
  ds.mean2.resize(P);
  ds.cov = MatrixXd::Zero(P, P);

  QuadratureEngine engine(arms, ensemble.field, options.quadrature);
  const FunctionalSpec spec = spec_for(kind);
  const int threads = options.quadrature.threads;

  // Entries: diagonal first, then the off-diagonal ones with a shared member.
  std::vector<std::pair<int, int>> entries;
  for (int p = 0; p < P; ++p) entries.emplace_back(p, p);
  for (int p = 0; p < P; ++p)
    for (int q = p + 1; q < P; ++q) {
      auto r = pairs[p], s = pairs[q];
      if (r.first == s.first || r.first == s.second || r.second == s.first || r.second == s.second)
        entries.emplace_back(p, q);
    }

  parallel_for(
      static_cast<int>(entries.size()),
      [&](int e) {
        auto [p, q] = entries[e];
        auto [i, j] = pairs[p];
        if (p == q) {
          if (options.closed_form_diagonal) {
            ds.dbar[p] = deterministic_equivalent(arms[i], arms[j], kind);
            ds.mean2[p] = second_order_mean(arms[i], arms[j], kind, ensemble.field);
            ds.cov(p, p) = variance(arms[i], arms[j], kind, ensemble.field);
          } else {
            ds.dbar[p] = engine.dbar(i, j, spec);
            ds.mean2[p] = engine.mean2(i, j, spec);
            ds.cov(p, p) = engine.cov(pairs[p], pairs[p], spec, spec);
          }
        } else {
          double v = engine.cov(pairs[p], pairs[q], spec, spec);
          ds.cov(p, q) = v;
          ds.cov(q, p) = v;
        }
      },
      threads);

  const double M = ensemble.M;
  law.mean = ds.dbar + ds.mean2 / M;
  law.covariance = floor_eigenvalues(ds.cov, options.eigen_floor) / (M * M);
  return law;
}

}  // namespace scm
