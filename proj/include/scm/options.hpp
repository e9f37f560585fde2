#pragma once

#include "scm/spectral.hpp"

namespace scm {

struct QuadratureOptions {
  int nodes = 128;       // per contour, first-order and 𝔪 integrals
  int cov_nodes = 64;    // per contour, covariance integrals
  int max_nodes = 1024;  // retry cap when the imaginary residue is too large
  double imag_tol = 1e-8;
  ContourShape shape;
  int threads = 0;       // 0: SCM_ASYM_THREADS or hardware concurrency
};

struct LawOptions {
  QuadratureOptions quadrature;
  bool closed_form_diagonal = true;  // variances from closed forms, off-diagonal by quadrature
  double eigen_floor = 1e-12;        // relative to trace / R
};

}  // namespace scm
