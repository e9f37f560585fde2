#pragma once

#include "scm/model.hpp"

#include <complex>
#include <optional>
#include <vector>

namespace scm {

using cd = std::complex<double>;

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Scalar functions of one population that only depend on its spectrum and N.
class OmegaContext {
 public:
  OmegaContext(PopulationSpectrum spectrum, int N);

  const PopulationSpectrum& spectrum() const { return spectrum_; }
  int N() const { return N_; }
  int M() const { return M_; }
  double c() const { return static_cast<double>(M_) / N_; }
  double mu0() const { return mu0_; }
  const Interval& support() const { return support_; }
  // Real points where Gamma(w) = 1, left of the smallest and right of the
  // largest eigenvalue. The image of the real line outside [left, right]
  // under z(.) is the real axis outside the support.
  double left_critical() const { return left_critical_; }
  double right_critical() const { return right_critical_; }

  cd z(cd w) const;
  cd gamma(cd w, cd wp) const;

 private:
  PopulationSpectrum spectrum_;
  int N_;
  int M_;
  double mu0_;
  Interval support_;
  double left_critical_;
  double right_critical_;
};

Interval support_interval(const PopulationSpectrum& spectrum, int N);

double solve_mu0(const PopulationSpectrum& spectrum, int N);
inline double solve_mu0(const OmegaContext& ctx) { return ctx.mu0(); }

struct ZValue {
  cd z;
  cd dz;  // z'(w) = 1 - Gamma(w, w)
};
ZValue z_of_omega(const OmegaContext& ctx, cd w);

cd gamma(const OmegaContext& ctx, cd w, cd wp);

// Inverse of z(.). `guess` warm-starts Newton (contour continuation).
cd solve_omega(const OmegaContext& ctx, cd z, std::optional<cd> guess = std::nullopt);

// z-plane contour: ellipse around the support, counter-clockwise.
// weights satisfy  oint g(z) dz  ~  sum_k weights[k] g(nodes[k]).
struct Contour {
  std::vector<cd> nodes;
  std::vector<cd> weights;
  bool encloses_zero = false;
  double center = 0.0;
  double semi_real = 0.0;
  double semi_imag = 0.0;
};

Contour build_contour(const OmegaContext& ctx, bool enclose_zero, int nodes, double delta = 0.1);

// Discrete argument principle around s.
int winding_number(const std::vector<cd>& closed_curve, cd s);

// omega(z_k) along a contour with continuation from node to node.
std::vector<cd> invert_contour(const OmegaContext& ctx, const Contour& contour);

// Quadrature contour in the omega plane. With z = z(w), dz = z'(w) dw maps an
// integral around the support onto a curve that encloses the eigenvalues (and
// mu0 when the zero-enclosing variant is requested). Every node satisfies
// Gamma(w, conj w) < 1, so 1 - Gamma(w, w') never vanishes between nodes.
//   weight[k] = dw_k * (2 pi / n) / (2 pi i), counter-clockwise
struct OmegaContour {
  std::vector<cd> omega;
  std::vector<cd> weight;
  std::vector<cd> z;
  std::vector<cd> zprime;
  bool encloses_zero = false;
  double max_gamma = 0.0;  // max Gamma(w, conj w) over nodes

  int size() const { return static_cast<int>(omega.size()); }
};

struct ContourShape {
  double margin = 0.5;   // relative clearance around the critical points
  bool clockwise = false;
};

OmegaContour build_omega_contour(const OmegaContext& ctx, bool enclose_zero, int nodes,
                                 const ContourShape& shape = {});

}  // namespace scm
