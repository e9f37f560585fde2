#include "scm/spectral.hpp"

#include "scm/errors.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <numbers>

namespace scm {

namespace {

constexpr double kPi = std::numbers::pi;

// Root of a monotone function on [a, b] to full double precision.
template <class F>
double bracketed_root(F f, double a, double b) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0) == (fb > 0)) throw NumericError("root is not bracketed", std::min(std::abs(fa), std::abs(fb)));
  boost::uintmax_t iters = 300;
  auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

void check_pole(const PopulationSpectrum& s, cd w) {
  for (double g : s.eigenvalues)
    if (std::abs(w - g) <= 1e-14 * std::max(1.0, g))
      throw SingularityError("omega coincides with a population eigenvalue", std::abs(w - g));
}

// Polynomial helpers, coefficients in increasing degree.
using Poly = std::vector<cd>;

Poly mul_linear(const Poly& p, cd root_shift) {  // p(w) * (root_shift - w)
  Poly out(p.size() + 1, cd(0.0));
  for (std::size_t k = 0; k < p.size(); ++k) {
    out[k] += root_shift * p[k];
    out[k + 1] -= p[k];
  }
  return out;
}

std::vector<cd> poly_roots(const Poly& p) {
  int deg = static_cast<int>(p.size()) - 1;
  while (deg > 0 && std::abs(p[deg]) == 0.0) --deg;
  if (deg < 1) return {};
  Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(deg, deg);
  for (int k = 1; k < deg; ++k) C(k, k - 1) = 1.0;
  for (int k = 0; k < deg; ++k) C(k, deg - 1) = -p[k] / p[deg];
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C, false);
  std::vector<cd> r(es.eigenvalues().data(), es.eigenvalues().data() + deg);
  return r;
}

}  // namespace

Interval support_interval(const PopulationSpectrum& s, int N) {
  if (N < 1) throw DomainError("sample count must be positive");
  double c = static_cast<double>(s.dimension()) / N;
  double r = std::sqrt(c);
  return {s.min() * (1.0 - r) * (1.0 - r), s.max() * (1.0 + r) * (1.0 + r)};
}

double solve_mu0(const PopulationSpectrum& s, int N) {
  const int M = s.dimension();
  if (N > M) return 0.0;
  if (N == M) throw DomainError("mu0 is undefined for c = 1");
  auto g = [&](double mu) {
    double acc = 0.0;
    for (std::size_t m = 0; m < s.eigenvalues.size(); ++m)
      acc += s.multiplicities[m] * s.eigenvalues[m] / (s.eigenvalues[m] - mu);
    return acc - N;
  };
  double lo = -s.max() * static_cast<double>(M) / N;
  for (int k = 0; g(lo) > 0.0; ++k) {
    if (k > 200) throw NumericError("mu0 bracket expansion failed", g(lo));
    lo *= 2.0;
  }
  double hi = -std::numeric_limits<double>::min();
  double mu = bracketed_root(g, lo, hi);
  double res = std::abs(g(mu));
  if (res > 1e-12 * N) throw NumericError("mu0 residual too large", res);
  return mu;
}

OmegaContext::OmegaContext(PopulationSpectrum spectrum, int N)
    : spectrum_(std::move(spectrum)), N_(N), M_(spectrum_.dimension()) {
  if (N_ < 1) throw DomainError("sample count must be positive");
  if (spectrum_.eigenvalues.empty()) throw DomainError("empty spectrum");
  mu0_ = solve_mu0(spectrum_, N_);
  support_ = support_interval(spectrum_, N_);
  auto G = [this](double w) { return gamma(w, w).real(); };
  const double lmin = spectrum_.min(), lmax = spectrum_.max();
  // Gamma is increasing on (-inf, lmin) and decreasing on (lmax, inf).
  double a = mu0_, b = std::nextafter(lmin, -1.0);
  while (G(b) < 1.0) b = 0.5 * (b + lmin);
  left_critical_ = bracketed_root([&](double w) { return G(w) - 1.0; }, a, b);
  double lo = std::nextafter(lmax, 2.0 * lmax);
  while (G(lo) < 1.0) lo = 0.5 * (lo + lmax);
  double hi = 2.0 * lmax + 1.0;
  while (G(hi) > 1.0) hi *= 2.0;
  right_critical_ = bracketed_root([&](double w) { return G(w) - 1.0; }, lo, hi);
}

cd OmegaContext::z(cd w) const {
  cd acc = 0.0;
  for (std::size_t m = 0; m < spectrum_.eigenvalues.size(); ++m) {
    double g = spectrum_.eigenvalues[m];
    acc += static_cast<double>(spectrum_.multiplicities[m]) * g / (g - w);
  }
  return w * (1.0 - acc / static_cast<double>(N_));
}

cd OmegaContext::gamma(cd w, cd wp) const {
  cd acc = 0.0;
  for (std::size_t m = 0; m < spectrum_.eigenvalues.size(); ++m) {
    double g = spectrum_.eigenvalues[m];
    acc += static_cast<double>(spectrum_.multiplicities[m]) * g * g / ((g - w) * (g - wp));
  }
  return acc / static_cast<double>(N_);
}

ZValue z_of_omega(const OmegaContext& ctx, cd w) {
  check_pole(ctx.spectrum(), w);
  return {ctx.z(w), 1.0 - ctx.gamma(w, w)};
}

cd gamma(const OmegaContext& ctx, cd w, cd wp) {
  check_pole(ctx.spectrum(), w);
  check_pole(ctx.spectrum(), wp);
  return ctx.gamma(w, wp);
}

namespace {

bool on_branch(const OmegaContext& ctx, cd z, cd w) {
  if (z.imag() != 0.0) return w.imag() * z.imag() > 0.0;
  return std::abs(w.imag()) <= 1e-12 * std::max(1.0, std::abs(w)) && ctx.gamma(w.real(), w.real()).real() < 1.0;
}

std::optional<cd> newton(const OmegaContext& ctx, cd z, cd w, double tol) {
  const bool complex_target = z.imag() != 0.0;
  cd g = ctx.z(w) - z;
  for (int it = 0; it < 100; ++it) {
    if (std::abs(g) <= tol) return w;
    cd d = 1.0 - ctx.gamma(w, w);
    if (std::abs(d) < 1e-300) return std::nullopt;
    cd step = g / d;
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h < 40; ++h, t *= 0.5) {
      cd wn = w - t * step;
      if (complex_target && wn.imag() * z.imag() <= 0.0) continue;
      bool hits_pole = false;
      for (double e : ctx.spectrum().eigenvalues)
        if (std::abs(wn - e) < 1e-14 * std::max(1.0, e)) hits_pole = true;
      if (hits_pole) continue;
      cd gn = ctx.z(wn) - z;
      if (std::abs(gn) < std::abs(g) || h == 39) {
        w = wn;
        g = gn;
        accepted = true;
        break;
      }
    }
    if (!accepted) return std::nullopt;
  }
  if (std::abs(g) <= tol) return w;
  return std::nullopt;
}

cd companion_solve(const OmegaContext& ctx, cd z, double tol) {
  const auto& s = ctx.spectrum();
  const double N = ctx.N();
  // (w - z) prod(g_l - w) - (w / N) sum_m K_m g_m prod_{l != m}(g_l - w)
  Poly prod{cd(1.0)};
  for (double g : s.eigenvalues) prod = mul_linear(prod, g);
  Poly p(prod.size() + 1, cd(0.0));
  for (std::size_t k = 0; k < prod.size(); ++k) {
    p[k + 1] += prod[k];
    p[k] -= z * prod[k];
  }
  for (std::size_t m = 0; m < s.eigenvalues.size(); ++m) {
    Poly part{cd(1.0)};
    for (std::size_t l = 0; l < s.eigenvalues.size(); ++l)
      if (l != m) part = mul_linear(part, s.eigenvalues[l]);
    double coef = s.multiplicities[m] * s.eigenvalues[m] / N;
    for (std::size_t k = 0; k < part.size(); ++k) p[k + 1] -= coef * part[k];
  }
  double best_res = std::numeric_limits<double>::infinity();
  std::optional<cd> best;
  for (cd r : poly_roots(p)) {
    if (z.imag() == 0.0) r = cd(r.real(), 0.0);
    if (auto pol = newton(ctx, z, r, tol)) r = *pol;
    if (!on_branch(ctx, z, r)) continue;
    double res = std::abs(ctx.z(r) - z);
    if (res < best_res) {
      best_res = res;
      best = r;
    }
  }
  if (!best || best_res > tol) throw NumericError("omega(z) did not converge", best_res);
  return *best;
}

}  // namespace

cd solve_omega(const OmegaContext& ctx, cd z, std::optional<cd> guess) {
  const double tol = 1e-13 * std::max(1.0, std::abs(z));
  const Interval& S = ctx.support();
  if (z.imag() == 0.0) {
    // Real branch: the solution with Gamma(w) < 1, bracketed on the monotone
    // pieces outside the critical points.
    const double x = z.real();
    const double zl = ctx.z(ctx.left_critical()).real();
    const double zr = ctx.z(ctx.right_critical()).real();
    auto f = [&](double w) { return ctx.z(w).real() - x; };
    if (x <= zl) {
      double lo = ctx.left_critical() - std::max(1.0, std::abs(x));
      while (f(lo) > 0.0) lo = ctx.left_critical() - 2.0 * (ctx.left_critical() - lo);
      return bracketed_root(f, lo, ctx.left_critical());
    }
    if (x >= zr) {
      double hi = ctx.right_critical() + std::max(1.0, std::abs(x));
      while (f(hi) < 0.0) hi = ctx.right_critical() + 2.0 * (hi - ctx.right_critical());
      return bracketed_root(f, ctx.right_critical(), hi);
    }
    // gap between clusters of the support, if any
    return companion_solve(ctx, z, tol);
  }
  cd w0;
  if (guess && guess->imag() * z.imag() > 0.0) {
    w0 = *guess;
  } else if (std::abs(z) > 4.0 * S.upper) {
    w0 = z;
  } else {
    w0 = S.upper * cd(1.0, z.imag() > 0 ? 1.0 : -1.0);
  }
  if (auto w = newton(ctx, z, w0, tol)) return *w;
  return companion_solve(ctx, z, tol);
}

Contour build_contour(const OmegaContext& ctx, bool enclose_zero, int nodes, double delta) {
  if (nodes < 16 || nodes % 2) throw DomainError("contour needs an even node count >= 16");
  if (!(delta > 0.0)) throw DomainError("contour margin must be positive");
  const Interval& S = ctx.support();
  double b = S.upper * (1.0 + delta);
  double a;
  if (enclose_zero) {
    a = std::min(0.0, ctx.mu0() * (1.0 + delta)) - delta * S.upper;
  } else {
    if (!(S.lower > 0.0)) throw GeometryError("support touches zero; a contour cannot exclude the origin");
    a = S.lower * (1.0 - delta);
  }
  Contour c;
  c.encloses_zero = enclose_zero;
  c.center = 0.5 * (a + b);
  c.semi_real = 0.5 * (b - a);
  c.semi_imag = delta * S.upper;
  const double h = 2.0 * kPi / nodes;
  c.nodes.resize(nodes);
  c.weights.resize(nodes);
  for (int k = 0; k < nodes; ++k) {
    double t = h * (k + 0.5);
    c.nodes[k] = cd(c.center + c.semi_real * std::cos(t), c.semi_imag * std::sin(t));
    c.weights[k] = cd(-c.semi_real * std::sin(t), c.semi_imag * std::cos(t)) * h;
  }
  return c;
}

int winding_number(const std::vector<cd>& curve, cd s) {
  double total = 0.0;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    cd a = curve[k] - s, b = curve[(k + 1) % curve.size()] - s;
    total += std::arg(b / a);
  }
  return static_cast<int>(std::lround(total / (2.0 * kPi)));
}

std::vector<cd> invert_contour(const OmegaContext& ctx, const Contour& contour) {
  std::vector<cd> out(contour.nodes.size());
  std::optional<cd> prev;
  for (std::size_t k = 0; k < contour.nodes.size(); ++k) {
    out[k] = solve_omega(ctx, contour.nodes[k], prev);
    prev = out[k];
  }
  return out;
}

OmegaContour build_omega_contour(const OmegaContext& ctx, bool enclose_zero, int nodes, const ContourShape& shape) {
  if (nodes < 8) throw DomainError("quadrature needs at least 8 nodes");
  if (!(shape.margin > 0.0 && shape.margin < 1.0)) throw DomainError("contour margin must lie in (0, 1)");
  OmegaContour oc;
  oc.encloses_zero = enclose_zero;
  oc.omega.resize(nodes);
  oc.weight.resize(nodes);
  oc.z.resize(nodes);
  oc.zprime.resize(nodes);
  const double mu = ctx.mu0();
  const double span = ctx.right_critical() - mu;
  const double h = 2.0 * kPi / nodes;
  const double dir = shape.clockwise ? -1.0 : 1.0;
  const cd I(0.0, 1.0);
  for (int k = 0; k < nodes; ++k) {
    double t = dir * h * (k + 0.5);
    cd w, dw;
    if (enclose_zero) {
      // circle over [mu - m span, right + m span]
      double lo = mu - shape.margin * span, hi = ctx.right_critical() + shape.margin * span;
      double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
      w = c + r * std::exp(I * t);
      dw = I * r * std::exp(I * t);
    } else {
      // ellipse in u = log(w - mu): keeps mu (the preimage of z = 0) outside
      // while hugging the left critical point
      double uL = std::log((1.0 - shape.margin) * (ctx.left_critical() - mu));
      double uR = std::log((1.0 + 2.0 * shape.margin) * span);
      double uc = 0.5 * (uL + uR), a = 0.5 * (uR - uL);
      double b = std::min(0.8 * kPi, std::max(a, 1.0));
      cd u(uc + a * std::cos(t), b * std::sin(t));
      cd du(-a * std::sin(t), b * std::cos(t));
      w = mu + std::exp(u);
      dw = std::exp(u) * du;
    }
    oc.omega[k] = w;
    oc.weight[k] = dir * dw * h / (2.0 * kPi * I);
    ZValue zv = z_of_omega(ctx, w);
    oc.z[k] = zv.z;
    oc.zprime[k] = zv.dz;
    oc.max_gamma = std::max(oc.max_gamma, ctx.gamma(w, std::conj(w)).real());
  }
  if (!(oc.max_gamma < 1.0))
    throw NumericError("quadrature contour leaves the domain of the inverse map", oc.max_gamma);
  return oc;
}

}  // namespace scm
