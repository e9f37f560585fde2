#include "scm/commands.hpp"

#include "scm/clustering.hpp"
#include "scm/errors.hpp"
#include "scm/montecarlo.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace scm {

using nlohmann::json;
namespace fs = std::filesystem;

LawOptions law_options(const RunConfig& cfg) {
  LawOptions o;
  if (cfg.nodes > 0) {
    o.quadrature.nodes = cfg.nodes;
    o.quadrature.cov_nodes = std::max(16, cfg.nodes / 2);
  }
  o.quadrature.threads = cfg.threads;
  return o;
}

namespace {

std::ofstream open_output(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  fs::path p = fs::path(cfg.out_dir) / name;
  std::ofstream f(p);
  if (!f) throw DomainError("cannot write " + p.string());
  f.precision(17);
  return f;
}

std::vector<DistanceKind> resolve_kinds(const RunConfig& cfg, const Scenario& s, const Ensemble& e) {
  if (!cfg.kinds.empty()) return cfg.kinds;
  std::vector<DistanceKind> allowed = admissible_kinds(e);
  if (s.kinds.empty()) return allowed;
  std::vector<DistanceKind> out;
  for (DistanceKind k : s.kinds)
    if (std::find(allowed.begin(), allowed.end(), k) != allowed.end()) out.push_back(k);
  if (out.empty()) throw DomainError("no distance kind of the scenario is admissible for its regime");
  return out;
}

std::string file_safe(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

json matrix_json(const Eigen::MatrixXd& A) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < A.cols(); ++j) r.push_back(A(i, j));
    rows.push_back(r);
  }
  return rows;
}

void warn(std::ostream& err, const std::string& msg) { err << json{{"warning", msg}}.dump() << '\n'; }

}  // namespace

json law_to_json(const GaussianLaw& law) {
  const DescriptorSet& d = law.descriptors;
  json pairs = json::array();
  for (size_t p = 0; p < d.pairs.size(); ++p) {
    auto [i, j] = d.pairs[p];
    pairs.push_back({{"i", i},
                     {"j", j},
                     {"label_i", d.labels[i]},
                     {"label_j", d.labels[j]},
                     {"dbar", d.dbar[p]},
                     {"mean2", d.mean2[p]},
                     {"var", d.cov(p, p)}});
  }
  return {{"kind", to_string(law.kind)},
          {"M", law.M},
          {"varsigma", varsigma(law.field)},
          {"pairs", pairs},
          {"Sigma", matrix_json(d.cov)},
          {"mean", std::vector<double>(law.mean.data(), law.mean.data() + law.mean.size())},
          {"covariance", matrix_json(law.covariance)}};
}

json result_to_json(const PredictionResult& r, const Scenario& s, DistanceKind kind, int M) {
  return {{"scenario", s.hash}, {"kind", to_string(kind)}, {"M", M},
          {"probability", r.probability}, {"se", r.se}, {"samples", r.samples}};
}

void write_describe_csv(const GaussianLaw& law, std::ostream& os) {
  const DescriptorSet& d = law.descriptors;
  os.precision(17);
  os << "pair_i,pair_j,dbar,mean2,var\n";
  for (size_t p = 0; p < d.pairs.size(); ++p) {
    auto [i, j] = d.pairs[p];
    os << d.labels[i] << ',' << d.labels[j] << ',' << d.dbar[p] << ',' << d.mean2[p] << ',' << d.cov(p, p) << '\n';
  }
}

int cmd_describe(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  (void)err;
  const Scenario s = load_scenario(cfg.scenario_path);
  const Ensemble e = build_ensemble(s, cfg.M);
  const auto kinds = resolve_kinds(cfg, s, e);
  const auto pairs = all_pairs(e.size());
  if (cfg.format != "json" && cfg.format != "csv") throw DomainError("format must be json or csv");
  if (cfg.format == "csv" && kinds.size() != 1) throw DomainError("--format csv needs exactly one --kind");

  json results = json::array();
  std::vector<GaussianLaw> laws;
  for (DistanceKind k : kinds) {
    laws.push_back(gaussian_law(e, pairs, k, law_options(cfg)));
    results.push_back(law_to_json(laws.back()));
    if (!cfg.out_dir.empty()) {
      auto f = open_output(cfg, "describe_" + to_string(k) + ".csv");
      write_describe_csv(laws.back(), f);
    }
  }
  json doc = {{"scenario", s.name}, {"hash", s.hash}, {"M", e.M}, {"varsigma", varsigma(e.field)}, {"results", results}};
  if (!cfg.out_dir.empty()) open_output(cfg, "describe.json") << doc.dump(2) << '\n';
  if (cfg.format == "csv")
    write_describe_csv(laws.front(), out);
  else
    out << doc.dump(2) << '\n';
  return 0;
}

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Scenario s = load_scenario(cfg.scenario_path);
  const Ensemble e = build_ensemble(s, cfg.M);
  const auto kinds = resolve_kinds(cfg, s, e);
  const auto pairs = all_pairs(e.size());
  if (cfg.trials < 10) throw DomainError("validate needs at least 10 trials");
  const bool few = cfg.trials < 100;
  if (few) warn(err, "insufficient samples: " + std::to_string(cfg.trials) + " trials");

  const auto stats = run_trials(e, pairs, kinds, cfg.trials, cfg.seed, cfg.threads);
  const double crit = ks_critical_1pct(cfg.trials);
  json results = json::array();
  for (size_t k = 0; k < kinds.size(); ++k) {
    const GaussianLaw law = gaussian_law(e, pairs, kinds[k], law_options(cfg));
    for (size_t p = 0; p < pairs.size(); ++p) {
      const double mu = law.mean[p], sd = std::sqrt(law.covariance(p, p));
      std::vector<double> z(cfg.trials);
      for (int t = 0; t < cfg.trials; ++t) z[t] = (stats[k].distances(t, p) - mu) / sd;
      const double ks = ks_statistic(z);
      double zm = 0, zv = 0;
      for (double v : z) zm += v;
      zm /= cfg.trials;
      for (double v : z) zv += (v - zm) * (v - zm);
      zv /= cfg.trials - 1;
      const std::string pl = stats[k].pair_label(static_cast<int>(p));
      if (!cfg.out_dir.empty()) {
        auto f = open_output(cfg, "qq_" + to_string(kinds[k]) + "_" + file_safe(pl) + ".csv");
        f << "theoretical,empirical\n";
        for (auto [x, y] : qq_points(z)) f << x << ',' << y << '\n';
      }
      const bool pass = ks < crit;
      if (!pass) warn(err, to_string(kinds[k]) + " " + pl + ": KS above the 1% critical value");
      results.push_back({{"kind", to_string(kinds[k])},
                         {"pair", pl},
                         {"ks", ks},
                         {"critical", crit},
                         {"pass", pass},
                         {"z_mean", zm},
                         {"z_var", zv}});
    }
  }
  json doc = {{"scenario", s.name}, {"hash", s.hash},   {"M", e.M},
              {"trials", cfg.trials}, {"seed", cfg.seed}, {"insufficient_samples", few},
              {"results", results}};
  if (!cfg.out_dir.empty()) open_output(cfg, "validate.json") << doc.dump(2) << '\n';
  out << doc.dump(2) << '\n';
  return 0;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  (void)err;
  const Scenario s = load_scenario(cfg.scenario_path);
  struct Point {
    int M;
    std::optional<double> drho;
  };
  std::vector<Point> points;
  std::vector<double> drhos = cfg.sweep_drho;
  if (drhos.empty() && cfg.sweep_m.empty() && s.drho) drhos = s.drho->values;
  if (!drhos.empty()) {
    if (!s.drho) throw DomainError("scenario has no 'drho' block for a separation sweep");
    for (double d : drhos) points.push_back({cfg.M.value_or(s.M), d});
  } else {
    std::vector<int> ms = cfg.sweep_m;
    if (ms.empty() && cfg.M) ms = {*cfg.M};
    if (ms.empty()) ms = s.sweep_m.empty() ? std::vector<int>{s.M} : s.sweep_m;
    for (int m : ms) points.push_back({m, std::nullopt});
  }

  std::ostringstream csv;
  csv.precision(17);
  csv << "kind,M,drho,empirical,empirical_se,theoretical,theoretical_se\n";
  json rows = json::array();
  for (size_t pt = 0; pt < points.size(); ++pt) {
    const auto [M, drho] = points[pt];
    const ClusterScenario cs = build_cluster_scenario(s, M, drho);
    const auto kinds = resolve_kinds(cfg, s, cs.ensemble);
    std::vector<TrialStatistics> stats;
    if (cfg.trials > 0) stats = run_trials(cs.ensemble, cs.pairs, kinds, cfg.trials, stream_seed(cfg.seed, pt, 1), cfg.threads);
    for (size_t k = 0; k < kinds.size(); ++k) {
      const GaussianLaw law = gaussian_law(cs.ensemble, cs.pairs, kinds[k], law_options(cfg));
      const PredictionResult th = theoretical_probability(law, cs, cfg.samples, stream_seed(cfg.seed, pt, 2), cfg.threads);
      json row = {{"kind", to_string(kinds[k])}, {"M", M}, {"theoretical", result_to_json(th, s, kinds[k], M)}};
      row["drho"] = drho ? json(*drho) : json(nullptr);
      csv << to_string(kinds[k]) << ',' << M << ',' << (drho ? std::to_string(*drho) : std::string()) << ',';
      if (cfg.trials > 0) {
        const PredictionResult em = empirical_probability(stats[k], cs);
        row["empirical"] = result_to_json(em, s, kinds[k], M);
        csv << em.probability << ',' << em.se << ',';
      } else {
        row["empirical"] = nullptr;
        csv << ",,";
      }
      csv << th.probability << ',' << th.se << '\n';
      rows.push_back(row);
    }
  }
  json doc = {{"scenario", s.name}, {"hash", s.hash}, {"representative", s.representative},
              {"trials", cfg.trials}, {"samples", cfg.samples}, {"seed", cfg.seed}, {"rows", rows}};
  if (!cfg.out_dir.empty()) {
    open_output(cfg, "predict.csv") << csv.str();
    open_output(cfg, "predict.json") << doc.dump(2) << '\n';
  }
  if (cfg.format == "csv")
    out << csv.str();
  else
    out << doc.dump(2) << '\n';
  return 0;
}

}  // namespace scm
