// Command-line front end: simulate panels, fit segmented ZIP mixed models,
// run the replicate benchmark, and dump diagnostics.
//
// Exit codes: 0 success, 2 parse/config error, 3 non-convergence under
// --strict.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "segzip/bench.hpp"
#include "segzip/csv.hpp"
#include "segzip/errors.hpp"
#include "segzip/segfit.hpp"
#include "segzip/simulate.hpp"

using nlohmann::json;
using namespace segzip;

namespace {

struct CommonModel {
  CsvSchema schema;
  std::string segmentation = "linear";
  std::string cp = "random";  // known / random / none
  double known_psi = 39.0;
  double l1 = 1.0, l2 = 48.0;
  bool random_delta = true;
  bool random_lambda = true;
  std::string zeta = "per_cluster_month";  // none / per_cluster_month / shared_month
  double grid_step = 0.25;
  double init_psi = 0.0;
  bool use_grid = true;
  int max_outer = 500;
  int max_algo = 50;
};

void load_config(const std::string& path, CommonModel& m) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path, 0);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  }
  const json s = j.value("schema", json::object());
  m.schema.id = s.value("id", m.schema.id);
  m.schema.time = s.value("time", m.schema.time);
  m.schema.count = s.value("count", m.schema.count);
  m.schema.exposure = s.value("exposure", m.schema.exposure);
  m.schema.type_col = s.value("type_col", m.schema.type_col);
  m.schema.private_level = s.value("private_level", m.schema.private_level);
  if (s.contains("extra_count_covariates"))
    m.schema.extra_count_covariates =
        s["extra_count_covariates"].get<std::vector<std::string>>();
  const json mo = j.value("model", json::object());
  m.segmentation = mo.value("segmentation", m.segmentation);
  m.cp = mo.value("changepoint", m.cp);
  m.known_psi = mo.value("psi", m.known_psi);
  m.l1 = mo.value("l1", m.l1);
  m.l2 = mo.value("l2", m.l2);
  m.random_delta = mo.value("random_delta", m.random_delta);
  m.random_lambda = mo.value("random_lambda", m.random_lambda);
  m.zeta = mo.value("zeta", m.zeta);
  const json f = j.value("fit", json::object());
  m.grid_step = f.value("grid_step", m.grid_step);
  m.max_outer = f.value("max_outer_iterations", m.max_outer);
  m.max_algo = f.value("max_algorithm_iterations", m.max_algo);
}

ModelSpec spec_from(const CommonModel& m, const IngestResult& ing) {
  ModelSpec spec;
  spec.p_count = ing.p_count;
  spec.p_zero = ing.p_zero;
  spec.q_cluster = ing.q_cluster;
  spec.seg_kind = m.segmentation == "quadratic" ? SegmentationKind::Quadratic
                                                : SegmentationKind::Linear;
  if (m.cp == "known") {
    spec.cp_mode = ChangepointMode::known(m.known_psi);
    spec.random_lambda = false;
    spec.random_delta = m.random_delta;
  } else if (m.cp == "none") {
    spec.cp_mode = ChangepointMode::none();
    spec.random_delta = false;
    spec.random_lambda = false;
  } else {
    spec.cp_mode = ChangepointMode::random(ChangepointBounds{m.l1, m.l2});
    spec.random_delta = m.random_delta;
    spec.random_lambda = m.random_lambda;
  }
  spec.zeta_mode = m.zeta == "none" ? ZetaMode::None
                   : m.zeta == "shared_month" ? ZetaMode::SharedMonth
                                              : ZetaMode::PerClusterMonth;
  return spec;
}

void write_scenario_csv(const SimulatedData& sim, const std::string& path) {
  CsvTable t;
  t.header = {"id", "x", "y", "offset"};
  for (const auto& c : sim.dataset.clusters)
    for (const auto& o : c.observations)
      t.rows.push_back({c.id, format_double(o.t), std::to_string(o.y),
                        format_double(o.offset)});
  write_csv(path, t);
}

void write_crbsi_csv(const SimulatedData& sim, const std::string& path) {
  CsvTable t;
  t.header = {"id", "month", "BSI", "CVC", "NAT"};
  for (std::size_t i = 0; i < sim.dataset.clusters.size(); ++i) {
    const auto& c = sim.dataset.clusters[i];
    const char* nat = sim.truth.type_private[i] ? "Private" : "Public";
    for (const auto& o : c.observations)
      t.rows.push_back({c.id, format_double(o.t), std::to_string(o.y),
                        format_double(o.offset), nat});
  }
  write_csv(path, t);
}

void write_truth_json(const SimulatedData& sim, const std::string& path) {
  json j;
  j["b0"] = sim.truth.b0;
  j["b1"] = sim.truth.b1;
  j["d"] = sim.truth.d;
  j["l"] = sim.truth.l;
  j["psi"] = sim.truth.psi;
  if (!sim.truth.type_private.empty()) j["type_private"] = sim.truth.type_private;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

int run_simulate(const std::string& kind, int n, int m, std::uint64_t seed,
                 const std::string& out, const std::string& truth_out) {
  SimulatedData sim;
  if (kind == "1" || kind == "2") {
    const ScenarioConfig cfg = kind == "1" ? ScenarioConfig::scenario1(n, m, seed)
                                           : ScenarioConfig::scenario2(n, m, seed);
    sim = gen_scenario(cfg);
    write_scenario_csv(sim, out);
  } else if (kind == "crbsi") {
    CrbsiConfig cfg;
    cfg.n_hospitals = n;
    cfg.n_months = m;
    cfg.master_seed = seed;
    sim = gen_crbsi(cfg);
    write_crbsi_csv(sim, out);
  } else {
    throw ParseError("unknown scenario '" + kind + "' (use 1, 2, or crbsi)", 0);
  }
  if (!truth_out.empty()) write_truth_json(sim, truth_out);
  std::cout << "wrote " << sim.dataset.n_observations() << " observations to "
            << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmented zero-inflated Poisson mixed-effects models"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP thread count (0: default)");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic panel");
  std::string sim_kind = "1", sim_out = "data.csv", sim_truth;
  int sim_n = 300, sim_m = 20;
  std::uint64_t seed = 1;
  sim_cmd->add_option("--scenario", sim_kind, "1, 2, or crbsi");
  sim_cmd->add_option("--n", sim_n, "clusters");
  sim_cmd->add_option("--m", sim_m, "observations per cluster / months");
  sim_cmd->add_option("--seed", seed, "master seed");
  sim_cmd->add_option("--out", sim_out, "output CSV");
  sim_cmd->add_option("--truth", sim_truth, "also write the latent truth JSON");

  // shared fit/diagnose options; flags override config-file values
  CommonModel model;
  CommonModel flags;  // CLI-provided values, applied after the config loads
  std::string data_path, config_path, fit_out = "fit.json", diag_out;
  bool strict = false, deterministic = true;
  struct FitOptionRefs {
    CLI::Option *known_cp, *cp, *l1, *l2, *seg, *zeta, *grid_step, *init_psi;
  };
  std::map<const CLI::App*, FitOptionRefs> fit_refs;
  auto add_fit_options = [&](CLI::App* cmd) {
    FitOptionRefs r;
    cmd->add_option("--data", data_path, "input CSV")->required();
    cmd->add_option("--config", config_path, "JSON config (schema + model)");
    r.known_cp = cmd->add_option("--known-cp", flags.known_psi,
                                 "fix the changepoint");
    r.cp = cmd->add_option("--changepoint", flags.cp, "known | random | none");
    r.l1 = cmd->add_option("--l1", flags.l1, "lower changepoint bound");
    r.l2 = cmd->add_option("--l2", flags.l2, "upper changepoint bound");
    r.seg = cmd->add_option("--segmentation", flags.segmentation,
                            "linear | quadratic");
    r.zeta = cmd->add_option("--zeta", flags.zeta,
                             "none | per_cluster_month | shared_month");
    r.grid_step =
        cmd->add_option("--grid-step", flags.grid_step, "grid search step");
    r.init_psi = cmd->add_option("--init-psi", flags.init_psi,
                                 "skip the grid and start the algorithm here");
    cmd->add_flag("--strict", strict, "exit 3 when the fit did not converge");
    cmd->add_flag("--deterministic,!--no-deterministic", deterministic,
                  "deterministic mode (default on)");
    fit_refs[cmd] = r;
  };

  auto* fit_cmd = app.add_subcommand("fit", "fit a segmented ZIP mixed model");
  add_fit_options(fit_cmd);
  fit_cmd->add_option("--out", fit_out, "output JSON");
  fit_cmd->add_option("--diagnostics", diag_out, "also write diagnostics CSV");

  auto* diag_cmd =
      app.add_subcommand("diagnose", "fit and write residual diagnostics");
  add_fit_options(diag_cmd);
  diag_cmd->add_option("--out", diag_out, "output CSV (long plot format)");

  // bench
  auto* bench_cmd =
      app.add_subcommand("bench", "replicate study with summaries");
  std::string bench_kind = "1", bench_out = "replicates.csv", bench_summary,
              bench_recipe = "random";
  int bench_n = 300, bench_m = 20, replicates = 50;
  double bench_known_psi = 0.0, bench_grid_step = 0.25;
  bool bench_json = false;
  bench_cmd->add_option("--scenario", bench_kind, "1 or 2");
  bench_cmd->add_option("--n", bench_n, "clusters");
  bench_cmd->add_option("--m", bench_m, "observations per cluster");
  bench_cmd->add_option("--replicates", replicates, "replicate count");
  bench_cmd->add_option("--seed", seed, "master seed");
  bench_cmd->add_option("--recipe", bench_recipe, "random | known");
  bench_cmd->add_option("--known-cp", bench_known_psi,
                        "changepoint for the known recipe");
  bench_cmd->add_option("--grid-step", bench_grid_step, "grid search step");
  bench_cmd->add_option("--out", bench_out, "replicate table CSV");
  bench_cmd->add_option("--summary", bench_summary, "summary CSV");
  bench_cmd->add_flag("--json", bench_json, "write JSON instead of CSV");
  bench_cmd->add_flag("--deterministic,!--no-deterministic", deterministic,
                      "deterministic mode (default on)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  try {
    if (sim_cmd->parsed())
      return run_simulate(sim_kind, sim_n, sim_m, seed, sim_out, sim_truth);

    if (fit_cmd->parsed() || diag_cmd->parsed()) {
      if (!config_path.empty()) load_config(config_path, model);
      const CLI::App* cmd = fit_cmd->parsed() ? fit_cmd : diag_cmd;
      const FitOptionRefs& r = fit_refs[cmd];
      if (r.known_cp->count()) {
        model.known_psi = flags.known_psi;
        if (!r.cp->count()) model.cp = "known";
      }
      if (r.cp->count()) model.cp = flags.cp;
      if (r.l1->count()) model.l1 = flags.l1;
      if (r.l2->count()) model.l2 = flags.l2;
      if (r.seg->count()) model.segmentation = flags.segmentation;
      if (r.zeta->count()) model.zeta = flags.zeta;
      if (r.grid_step->count()) model.grid_step = flags.grid_step;
      if (r.init_psi->count()) {
        model.init_psi = flags.init_psi;
        model.use_grid = false;
      }
      const IngestResult ing = ingest_csv(data_path, model.schema);
      if (ing.rows_dropped_zero_exposure > 0)
        std::cerr << "dropped " << ing.rows_dropped_zero_exposure
                  << " rows with zero exposure\n";
      const ModelSpec spec = spec_from(model, ing);
      FitOptions fopts;
      fopts.outer.bfgs.max_iterations = model.max_outer;
      fopts.max_algorithm_iterations = model.max_algo;
      SegFitResult fit;
      if (spec.cp_mode.kind == ChangepointKind::Random) {
        if (!model.use_grid) {
          fit = fit_random(ing.dataset, spec, model.init_psi, fopts);
        } else {
          GridOptions gopts;
          gopts.step = model.grid_step;
          fit = fit_random(ing.dataset, spec, gopts, fopts);
        }
      } else {
        fit = fit_known(ing.dataset, spec, fopts);
      }
      if (fit_cmd->parsed()) {
        export_fit(fit, fit_out);
        std::cout << "loglik " << fit.loglik << "  aic " << fit.criteria.aic
                  << "  converged " << (fit.converged ? "yes" : "no") << "\n";
      }
      if (!diag_out.empty()) {
        DiagnosticsBundle bundle = residuals(fit, ing.dataset);
        if (spec.q_total() > 0) mahalanobis_qq(fit, bundle);
        export_diagnostics(bundle, ExportFormat::Csv, diag_out);
      }
      if (strict && !fit.converged) return 3;
      return 0;
    }

    if (bench_cmd->parsed()) {
      if (bench_kind != "1" && bench_kind != "2")
        throw ParseError("bench: scenario must be 1 or 2", 0);
      const ScenarioConfig cfg =
          bench_kind == "1" ? ScenarioConfig::scenario1(bench_n, bench_m, seed)
                            : ScenarioConfig::scenario2(bench_n, bench_m, seed);
      FitRecipe recipe;
      recipe.deterministic = deterministic;
      recipe.grid.step = bench_grid_step;
      if (bench_recipe == "known") {
        recipe.kind = FitRecipe::Kind::Known;
        recipe.known_psi = bench_known_psi;
      }
      const ReplicateTable table = run_replicates(cfg, replicates, recipe);
      export_table(table,
                   bench_json ? ExportFormat::Json : ExportFormat::Csv,
                   bench_out);
      if (!bench_summary.empty())
        export_summary(summarize(table),
                       bench_json ? ExportFormat::Json : ExportFormat::Csv,
                       bench_summary);
      std::cout << "wrote " << table.rows.size() << " rows to " << bench_out
                << "\n";
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
