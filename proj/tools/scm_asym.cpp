#include "scm/commands.hpp"
#include "scm/errors.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

namespace {

int fail(int code, const std::string& type, const std::string& msg) {
  std::cerr << nlohmann::json{{"error", type}, {"message", msg}, {"exit_code", code}}.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asymptotic laws of distances between sample covariance matrices"};
  app.require_subcommand(1);

  scm::RunConfig cfg;
  std::vector<std::string> kinds;
  int M = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", cfg.scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--kind", kinds, "Distance kind(s): eu, kl, ss")->delimiter(',');
    sub->add_option("--out", cfg.out_dir, "Output directory");
    sub->add_option("--m", M, "Override the scenario dimension M");
    sub->add_option("--seed", cfg.seed, "Random seed");
    sub->add_option("--nodes", cfg.nodes, "Quadrature nodes per contour");
    sub->add_option("--threads", cfg.threads, "Worker threads (default: SCM_ASYM_THREADS or all cores)");
    sub->add_option("--format", cfg.format, "Stdout format")->check(CLI::IsMember({"json", "csv"}));
  };

  auto* describe = app.add_subcommand("describe", "Deterministic equivalents, second-order means and covariances");
  add_common(describe);

  auto* validate = app.add_subcommand("validate", "Monte Carlo check of the Gaussian law (QQ points, KS)");
  add_common(validate);
  validate->add_option("--trials", cfg.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);

  auto* predict = app.add_subcommand("predict", "Probability of correct clustering");
  add_common(predict);
  predict->add_option("--trials", cfg.trials, "Data trials for the empirical probability (0: theory only)")
      ->check(CLI::NonNegativeNumber);
  predict->add_option("--samples", cfg.samples, "Gaussian draws for the theoretical probability")
      ->check(CLI::PositiveNumber);
  predict->add_option("--sweep-m", cfg.sweep_m, "Values of M")->delimiter(',');
  predict->add_option("--sweep-drho", cfg.sweep_drho, "Values of the rho separation")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }

  try {
    for (const auto& k : kinds) cfg.kinds.push_back(scm::parse_kind(k));
    if (M > 0) cfg.M = M;
    if (*describe) return scm::cmd_describe(cfg, std::cout, std::cerr);
    if (*validate) return scm::cmd_validate(cfg, std::cout, std::cerr);
    if (*predict) return scm::cmd_predict(cfg, std::cout, std::cerr);
  } catch (const scm::DomainError& e) {
    return fail(2, "domain", e.what());
  } catch (const scm::ConvergenceError& e) {
    return fail(3, "convergence", e.what());
  } catch (const scm::NumericError& e) {
    return fail(3, "numeric", e.what());
  } catch (const std::exception& e) {
    return fail(3, "internal", e.what());
  }
  return 0;
}
