#include "segzip/bench.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "segzip/csv.hpp"
#include "segzip/errors.hpp"
#include "segzip/zip.hpp"

namespace segzip {

namespace {

bool same(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return a == b;
}

}  // namespace

bool ReplicateTable::operator==(const ReplicateTable& other) const {
  if (rows.size() != other.rows.size() || metadata != other.metadata)
    return false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& a = rows[i];
    const auto& b = other.rows[i];
    if (a.replicate != b.replicate || a.parameter != b.parameter ||
        !same(a.truth, b.truth) || !same(a.estimate, b.estimate) ||
        !same(a.se, b.se) || a.converged != b.converged ||
        a.iterations != b.iterations || !same(a.wall_ms, b.wall_ms))
      return false;
  }
  return true;
}

ReplicateTable run_replicates(const ScenarioConfig& cfg, int n_replicates,
                              const FitRecipe& recipe) {
  if (n_replicates < 1)
    throw std::invalid_argument("run_replicates: need at least one replicate");
  cfg.validate();

  struct ParamDef {
    std::string name;
    double truth;
  };
  std::vector<ParamDef> params = {{"beta0", cfg.beta0},
                                  {"beta1", cfg.beta1},
                                  {"delta", cfg.delta}};
  const bool random_cp = recipe.kind == FitRecipe::Kind::Random;
  if (random_cp) params.push_back({"lambda", cfg.lambda});
  params.push_back({"gamma0", cfg.gamma0});
  if (recipe.variance_rows) {
    params.push_back({"var_b0", cfg.sd_b0 * cfg.sd_b0});
    params.push_back({"var_b1", cfg.sd_b1 * cfg.sd_b1});
    params.push_back({"var_d", cfg.sd_d * cfg.sd_d});
    if (random_cp) params.push_back({"var_l", cfg.sd_l * cfg.sd_l});
  }
  const int np = static_cast<int>(params.size());

  std::vector<std::vector<ReplicateRow>> slots(n_replicates);
  std::vector<char> failed(n_replicates, 0);

#pragma omp parallel for schedule(dynamic) if (n_replicates > 1)
  for (int r = 0; r < n_replicates; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<ReplicateRow> rows(np);
    for (int k = 0; k < np; ++k) {
      rows[k].replicate = r;
      rows[k].parameter = params[k].name;
      rows[k].truth = params[k].truth;
    }
    try {
      ScenarioConfig rcfg = cfg;
      rcfg.master_seed = derive_seed(cfg.master_seed, static_cast<std::uint64_t>(r));
      const SimulatedData sim = gen_scenario(rcfg);
      ModelSpec spec = scenario_fit_spec(rcfg);
      SegFitResult fit;
      if (random_cp) {
        if (recipe.use_grid)
          fit = fit_random(sim.dataset, spec, recipe.grid, recipe.fit);
        else
          fit = fit_random(sim.dataset, spec, recipe.init_psi, recipe.fit);
      } else {
        spec.cp_mode = ChangepointMode::known(recipe.known_psi);
        spec.random_lambda = false;
        fit = fit_known(sim.dataset, spec, recipe.fit);
      }
      auto by_name = [&](const std::string& nm) {
        for (const auto& fe : fit.fixed)
          if (fe.name == nm) return fe;
        return FixedEffect{};
      };
      const double wall =
          recipe.deterministic
              ? 0.0
              : std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
      for (int k = 0; k < np; ++k) {
        ReplicateRow& row = rows[k];
        row.converged = fit.converged;
        row.iterations = fit.iterations;
        row.wall_ms = wall;
        const std::string& nm = params[k].name;
        if (nm.rfind("var_", 0) == 0) {
          const int vi = nm == "var_b0"   ? 0
                         : nm == "var_b1" ? 1
                         : nm == "var_d"  ? 2
                                          : 3;
          if (vi < static_cast<int>(fit.g_variances.size()))
            row.estimate = fit.g_variances[vi];
          if (vi < static_cast<int>(fit.g_variance_se.size()))
            row.se = fit.g_variance_se[vi];
        } else {
          const FixedEffect fe = by_name(nm);
          row.estimate = fe.estimate;
          row.se = fe.se;
        }
      }
    } catch (const std::exception&) {
      failed[r] = 1;  // rows stay flagged non-converged with NaN estimates
    }
    slots[r] = std::move(rows);
  }

  int n_failed = 0;
  for (char f : failed) n_failed += f;
  if (n_failed == n_replicates)
    throw std::runtime_error("run_replicates: every replicate failed");

  ReplicateTable table;
  table.metadata["sd_scaling"] =
      "reported unscaled; the reference tables print sd values x 10";
  table.metadata["arb"] = "100*|mean(estimates)-truth|/|truth| over converged replicates";
  table.metadata["wall_ms"] =
      recipe.deterministic ? "zeroed (deterministic mode)" : "per replicate";
  for (auto& s : slots)
    for (auto& row : s) table.rows.push_back(std::move(row));
  return table;
}

std::vector<SummaryRow> summarize(const ReplicateTable& table) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> est;
  std::map<std::string, double> truth;
  std::map<std::string, int> totals;
  for (const auto& row : table.rows) {
    if (!est.count(row.parameter)) {
      order.push_back(row.parameter);
      est[row.parameter] = {};
      truth[row.parameter] = row.truth;
      totals[row.parameter] = 0;
    }
    ++totals[row.parameter];
    if (row.converged && std::isfinite(row.estimate))
      est[row.parameter].push_back(row.estimate);
  }
  std::vector<SummaryRow> out;
  for (const auto& name : order) {
    auto& v = est[name];
    if (v.size() < 2)
      throw std::invalid_argument("summarize: parameter " + name +
                                  " has fewer than 2 converged replicates");
    std::sort(v.begin(), v.end());  // order-invariant accumulation
    SummaryRow s;
    s.parameter = name;
    s.truth = truth[name];
    s.n_converged = static_cast<int>(v.size());
    s.n_total = totals[name];
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    const std::size_t n = v.size();
    s.median = (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(n - 1));
    s.absolute_bias = std::abs(s.mean - s.truth);
    if (s.truth != 0.0) {
      s.arb_percent = 100.0 * s.absolute_bias / std::abs(s.truth);
    } else {
      s.arb_defined = false;
    }
    out.push_back(s);
  }
  return out;
}

DiagnosticsBundle residuals(const SegFitResult& fit, const Dataset& data) {
  const Predictions pred = predict(fit, data);
  DiagnosticsBundle b;
  for (std::size_t i = 0; i < data.clusters.size(); ++i) {
    for (std::size_t j = 0; j < data.clusters[i].observations.size(); ++j) {
      const double y = static_cast<double>(data.clusters[i].observations[j].y);
      const double yhat = pred.y_hat[i][j];
      const bool tiny = !(yhat > 1e-12);
      ZipParams zp{pred.mu_hat[i][j], pred.pi_hat[i][j]};
      const double var = zip_var(zp);
      b.fitted.push_back(yhat);
      b.near_zero_fitted.push_back(tiny);
      b.pearson.push_back((y - yhat) / std::sqrt(std::max(var, 1e-300)));
      b.working.push_back((y - yhat) / std::max(yhat, 1e-300));
    }
  }
  return b;
}

void mahalanobis_qq(const SegFitResult& fit, DiagnosticsBundle& bundle) {
  const int q = static_cast<int>(fit.g_matrix.rows());
  if (q < 1)
    throw std::invalid_argument("mahalanobis_qq: model has no random effects");
  Eigen::LLT<Eigen::MatrixXd> llt(fit.g_matrix);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.g_matrix);
    std::string dirs;
    for (int k = 0; k < q; ++k)
      if (es.eigenvalues()[k] <= 0.0) dirs += " " + std::to_string(k);
    throw std::runtime_error(
        "mahalanobis_qq: G-hat singular in eigen-directions" + dirs);
  }
  bundle.mahalanobis_sq.clear();
  for (const auto& cm : fit.cluster_modes) {
    const Eigen::VectorXd s = llt.matrixL().solve(cm.b);
    bundle.mahalanobis_sq.push_back(s.squaredNorm());
  }
  std::sort(bundle.mahalanobis_sq.begin(), bundle.mahalanobis_sq.end());
  const std::size_t n = bundle.mahalanobis_sq.size();
  bundle.chisq_quantiles.resize(n);
  const boost::math::chi_squared chi(q);
  for (std::size_t i = 0; i < n; ++i)
    bundle.chisq_quantiles[i] = boost::math::quantile(
        chi, (static_cast<double>(i) + 0.5) / static_cast<double>(n));
}

// ----------------------------------------------------------------------

namespace {

double parse_num(const std::string& cell, std::size_t line) {
  const char* s = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw ParseError("non-numeric cell '" + cell + "'", line);
  return v;
}

}  // namespace

IngestResult ingest_csv(const std::string& path, const CsvSchema& schema) {
  const CsvTable t = read_csv(path);
  const int ci = t.column(schema.id);
  const int ct = t.column(schema.time);
  const int cy = t.column(schema.count);
  const int ce = t.column(schema.exposure);
  if (ci < 0 || ct < 0 || cy < 0 || ce < 0)
    throw ParseError("missing required column (need " + schema.id + ", " +
                         schema.time + ", " + schema.count + ", " +
                         schema.exposure + ")",
                     1);
  const int ctype = schema.type_col.empty() ? -1 : t.column(schema.type_col);
  if (!schema.type_col.empty() && ctype < 0)
    throw ParseError("missing type column " + schema.type_col, 1);
  std::vector<int> cextras;
  for (const auto& name : schema.extra_count_covariates) {
    const int c = t.column(name);
    if (c < 0) throw ParseError("missing covariate column " + name, 1);
    cextras.push_back(c);
  }

  IngestResult res;
  res.rows_total = t.rows.size();
  std::vector<std::string> id_order;
  std::map<std::string, std::size_t> id_index;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::size_t line = r + 2;  // header is line 1
    const auto& row = t.rows[r];
    const double time = parse_num(row[ct], line);
    const double count = parse_num(row[cy], line);
    const double exposure = parse_num(row[ce], line);
    if (count < 0.0) throw ParseError("negative count", line);
    if (exposure < 0.0) throw ParseError("negative exposure", line);
    if (std::floor(count) != count)
      throw ParseError("non-integer count", line);
    if (exposure == 0.0) {
      ++res.rows_dropped_zero_exposure;
      continue;
    }
    const std::string& id = row[ci];
    if (!id_index.count(id)) {
      id_index[id] = id_order.size();
      id_order.push_back(id);
      res.dataset.clusters.push_back(Cluster{id, {}});
    }
    Observation o;
    o.y = static_cast<long long>(count);
    o.t = time;
    o.offset = exposure;
    o.x_row = {1.0};
    if (schema.time_in_count_model) o.x_row.push_back(time);
    o.w_row = {1.0};
    if (ctype >= 0) {
      const double priv = row[ctype] == schema.private_level ? 1.0 : 0.0;
      o.x_row.push_back(priv);
      o.w_row.push_back(priv);
    }
    for (int c : cextras) o.x_row.push_back(parse_num(row[c], line));
    o.z_row = {1.0, time};
    res.dataset.clusters[id_index[id]].observations.push_back(o);
    res.rates.push_back(count / exposure);
    ++res.rows_ingested;
  }
  res.dataset.rebuild_time_levels();
  if (!res.dataset.clusters.empty()) {
    res.p_count = static_cast<int>(
        res.dataset.clusters[0].observations[0].x_row.size());
    res.p_zero = static_cast<int>(
        res.dataset.clusters[0].observations[0].w_row.size());
    res.q_cluster = 2;
  }
  return res;
}

// ----------------------------------------------------------------------
// exports

namespace {

using nlohmann::json;

json row_to_json(const ReplicateRow& r) {
  return json{{"replicate", r.replicate},   {"parameter", r.parameter},
              {"truth", r.truth},           {"estimate", r.estimate},
              {"se", r.se},                 {"converged", r.converged},
              {"iterations", r.iterations}, {"wall_ms", r.wall_ms}};
}

double json_num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

}  // namespace

void export_table(const ReplicateTable& table, ExportFormat format,
                  const std::string& path) {
  if (format == ExportFormat::Json) {
    json j;
    j["metadata"] = table.metadata;
    j["rows"] = json::array();
    for (const auto& r : table.rows) j["rows"].push_back(row_to_json(r));
    write_text(path, j.dump(2) + "\n");
    return;
  }
  CsvTable t;
  t.header = {"replicate", "parameter", "truth",      "estimate",
              "se",        "converged", "iterations", "wall_ms"};
  for (const auto& r : table.rows)
    t.rows.push_back({std::to_string(r.replicate), r.parameter,
                      format_double(r.truth), format_double(r.estimate),
                      format_double(r.se), r.converged ? "1" : "0",
                      std::to_string(r.iterations),
                      format_double(r.wall_ms)});
  write_csv(path, t);
}

ReplicateTable import_table_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  ReplicateTable out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    ReplicateRow x;
    x.replicate = std::atoi(row[0].c_str());
    x.parameter = row[1];
    x.truth = std::strtod(row[2].c_str(), nullptr);
    x.estimate = std::strtod(row[3].c_str(), nullptr);
    x.se = std::strtod(row[4].c_str(), nullptr);
    x.converged = row[5] == "1";
    x.iterations = std::atoi(row[6].c_str());
    x.wall_ms = std::strtod(row[7].c_str(), nullptr);
    out.rows.push_back(x);
  }
  return out;
}

ReplicateTable import_table_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j;
  in >> j;
  ReplicateTable out;
  for (auto& [k, v] : j["metadata"].items()) out.metadata[k] = v;
  for (const auto& r : j["rows"]) {
    ReplicateRow x;
    x.replicate = r["replicate"].get<int>();
    x.parameter = r["parameter"].get<std::string>();
    x.truth = json_num(r["truth"]);
    x.estimate = json_num(r["estimate"]);
    x.se = json_num(r["se"]);
    x.converged = r["converged"].get<bool>();
    x.iterations = r["iterations"].get<int>();
    x.wall_ms = json_num(r["wall_ms"]);
    out.rows.push_back(x);
  }
  return out;
}

void export_fit(const SegFitResult& fit, const std::string& path) {
  json j;
  j["loglik"] = fit.loglik;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["loglik_trace"] = fit.loglik_trace;
  j["mse"] = fit.mse;
  j["n_obs"] = fit.n_obs;
  j["n_parameters"] = fit.n_parameters;
  j["criteria"] = {{"aic", fit.criteria.aic},
                   {"bic", fit.criteria.bic},
                   {"deviance", fit.criteria.deviance}};
  j["fixed"] = json::array();
  for (const auto& fe : fit.fixed)
    j["fixed"].push_back({{"name", fe.name},
                          {"estimate", fe.estimate},
                          {"se", fe.se},
                          {"p_value", fe.p_value}});
  j["g_variances"] = fit.g_variances;
  j["g_variance_se"] = fit.g_variance_se;
  const int q = static_cast<int>(fit.g_matrix.rows());
  json gcorr = json::array();
  for (int i = 0; i < q; ++i) {
    json row = json::array();
    for (int k = 0; k < q; ++k) row.push_back(fit.g_correlations(i, k));
    gcorr.push_back(row);
  }
  j["g_correlations"] = gcorr;
  j["sigma_zeta2"] = fit.sigma_zeta2;
  j["lambda_hat"] = fit.lambda_hat;
  j["lambda_se"] = fit.lambda_se;
  j["population_changepoint"] = fit.population_changepoint;
  j["population_changepoint_se"] = fit.population_changepoint_se;
  j["rank_deficient"] = fit.rank_deficient;
  j["lambda_frozen"] = fit.lambda_frozen;
  j["cluster_changepoints"] = fit.cluster_changepoints;
  j["theta"] = std::vector<double>(fit.theta.data(),
                                   fit.theta.data() + fit.theta.size());
  j["clusters"] = json::array();
  for (const auto& cm : fit.cluster_modes) {
    json c;
    c["id"] = cm.id;
    c["modes"] = std::vector<double>(cm.b.data(), cm.b.data() + cm.b.size());
    c["d"] = cm.d;
    c["l"] = cm.l;
    j["clusters"].push_back(c);
  }
  write_text(path, j.dump(2) + "\n");
}

void export_summary(const std::vector<SummaryRow>& summary,
                    ExportFormat format, const std::string& path) {
  if (format == ExportFormat::Json) {
    json j = json::array();
    for (const auto& s : summary)
      j.push_back({{"parameter", s.parameter},
                   {"truth", s.truth},
                   {"mean", s.mean},
                   {"median", s.median},
                   {"sd", s.sd},
                   {"arb_percent", s.arb_percent},
                   {"absolute_bias", s.absolute_bias},
                   {"arb_defined", s.arb_defined},
                   {"n_converged", s.n_converged},
                   {"n_total", s.n_total}});
    write_text(path, j.dump(2) + "\n");
    return;
  }
  CsvTable t;
  t.header = {"parameter", "truth",         "mean",        "median",
              "sd",        "arb_percent",   "absolute_bias", "arb_defined",
              "n_converged", "n_total"};
  for (const auto& s : summary)
    t.rows.push_back({s.parameter, format_double(s.truth),
                      format_double(s.mean), format_double(s.median),
                      format_double(s.sd), format_double(s.arb_percent),
                      format_double(s.absolute_bias),
                      s.arb_defined ? "1" : "0",
                      std::to_string(s.n_converged),
                      std::to_string(s.n_total)});
  write_csv(path, t);
}

void export_diagnostics(const DiagnosticsBundle& bundle, ExportFormat format,
                        const std::string& path) {
  if (format == ExportFormat::Json) {
    json j;
    j["fitted"] = bundle.fitted;
    j["pearson"] = bundle.pearson;
    j["working"] = bundle.working;
    j["mahalanobis_sq"] = bundle.mahalanobis_sq;
    j["chisq_quantiles"] = bundle.chisq_quantiles;
    write_text(path, j.dump(2) + "\n");
    return;
  }
  // long plot-ready format: channel, index, x, y
  CsvTable t;
  t.header = {"channel", "index", "x", "y"};
  for (std::size_t i = 0; i < bundle.pearson.size(); ++i)
    t.rows.push_back({"pearson", std::to_string(i),
                      format_double(bundle.fitted[i]),
                      format_double(bundle.pearson[i])});
  for (std::size_t i = 0; i < bundle.working.size(); ++i)
    t.rows.push_back({"working", std::to_string(i),
                      format_double(bundle.fitted[i]),
                      format_double(bundle.working[i])});
  for (std::size_t i = 0; i < bundle.mahalanobis_sq.size(); ++i)
    t.rows.push_back({"mahalanobis_qq", std::to_string(i),
                      format_double(bundle.chisq_quantiles[i]),
                      format_double(bundle.mahalanobis_sq[i])});
  write_csv(path, t);
}

}  // namespace segzip
