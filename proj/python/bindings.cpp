#include "scm/commands.hpp"
#include "scm/descriptors.hpp"
#include "scm/errors.hpp"
#include "scm/montecarlo.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;

namespace {

scm::Member member_from(const Eigen::MatrixXd& R, int N, const std::string& label) {
  return scm::make_member(label, scm::covariance_from_matrix(R), N);
}

scm::RunConfig config(const std::string& path, const std::vector<std::string>& kinds, int M, std::uint64_t seed,
                      int trials, int samples, const std::vector<int>& sweep_m) {
  scm::RunConfig cfg;
  cfg.scenario_path = path;
  for (const auto& k : kinds) cfg.kinds.push_back(scm::parse_kind(k));
  if (M > 0) cfg.M = M;
  cfg.seed = seed;
  cfg.trials = trials;
  cfg.samples = samples;
  cfg.sweep_m = sweep_m;
  return cfg;
}

template <class F>
std::string run(F f, const scm::RunConfig& cfg) {
  std::ostringstream out, err;
  f(cfg, out, err);
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Asymptotic laws of distances between sample covariance matrices";

  py::register_exception<scm::DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<scm::NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("mu0", [](std::vector<double> ev, std::vector<int> mult, int N) {
    return scm::solve_mu0(scm::PopulationSpectrum{std::move(ev), std::move(mult)}, N);
  }, py::arg("eigenvalues"), py::arg("multiplicities"), py::arg("N"));

  auto pair_fn = [&m](const char* name, auto fn, const char* doc) {
    m.def(name, [fn](const Eigen::MatrixXd& R1, int N1, const Eigen::MatrixXd& R2, int N2, const std::string& kind,
                     int varsigma) {
      scm::ArmState a(member_from(R1, N1, "1")), b(member_from(R2, N2, "2"));
      return fn(a, b, scm::parse_kind(kind), scm::field_from_varsigma(varsigma));
    }, py::arg("R1"), py::arg("N1"), py::arg("R2"), py::arg("N2"), py::arg("kind"), py::arg("varsigma") = 1, doc);
  };
  pair_fn("deterministic_equivalent",
          [](const scm::ArmState& a, const scm::ArmState& b, scm::DistanceKind k, scm::Field) {
            return scm::deterministic_equivalent(a, b, k);
          },
          "Deterministic equivalent dbar of the distance between the two SCMs.");
  pair_fn("second_order_mean", [](const scm::ArmState& a, const scm::ArmState& b, scm::DistanceKind k, scm::Field f) {
    return scm::second_order_mean(a, b, k, f);
  }, "Second-order mean of M (d - dbar).");
  pair_fn("variance", [](const scm::ArmState& a, const scm::ArmState& b, scm::DistanceKind k, scm::Field f) {
    return scm::variance(a, b, k, f);
  }, "Asymptotic variance of M (d - dbar).");

  m.def("empirical_distance", [](const Eigen::MatrixXd& Y1, const Eigen::MatrixXd& Y2, const std::string& kind) {
    return scm::empirical_distance(scm::sample_covariance(Y1), scm::sample_covariance(Y2), scm::parse_kind(kind));
  }, py::arg("Y1"), py::arg("Y2"), py::arg("kind"), "Distance between the SCMs of two real data matrices.");

  m.def("sample_observations", [](const Eigen::MatrixXd& R, int N, int varsigma, std::uint64_t seed) {
    return scm::sample_observations(scm::covariance_from_matrix(R), N, scm::field_from_varsigma(varsigma), seed);
  }, py::arg("R"), py::arg("N"), py::arg("varsigma") = 1, py::arg("seed") = 0);

  m.def("toeplitz", [](double rho, int M) { return scm::toeplitz_covariance(rho, M).matrix; }, py::arg("rho"),
        py::arg("M"));

  m.def("_describe", [](const std::string& path, const std::vector<std::string>& kinds, int M) {
    return run(scm::cmd_describe, config(path, kinds, M, 1, 0, 1, {}));
  }, py::arg("scenario"), py::arg("kinds") = std::vector<std::string>{}, py::arg("M") = 0);

  m.def("_predict", [](const std::string& path, const std::vector<std::string>& kinds, const std::vector<int>& sweep_m,
                       int trials, int samples, std::uint64_t seed) {
    return run(scm::cmd_predict, config(path, kinds, 0, seed, trials, samples, sweep_m));
  }, py::arg("scenario"), py::arg("kinds") = std::vector<std::string>{}, py::arg("sweep_m") = std::vector<int>{},
     py::arg("trials") = 0, py::arg("samples") = scm::kDefaultGaussianSamples, py::arg("seed") = 1);
}
