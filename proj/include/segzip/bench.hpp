#ifndef SEGZIP_BENCH_HPP
#define SEGZIP_BENCH_HPP

#include <map>
#include <string>
#include <vector>

#include "segzip/segfit.hpp"
#include "segzip/simulate.hpp"

namespace segzip {

struct ReplicateRow {
  int replicate = 0;
  std::string parameter;
  double truth = 0.0;
  double estimate = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iterations = 0;
  double wall_ms = 0.0;
};

struct ReplicateTable {
  std::vector<ReplicateRow> rows;
  // presentation notes carried into exports (the source tables print sd
  // scaled by 10; ARB is |mean - truth| / |truth| on the mean)
  std::map<std::string, std::string> metadata;

  bool operator==(const ReplicateTable& other) const;
};

struct FitRecipe {
  enum class Kind { Random, Known } kind = Kind::Random;
  double known_psi = 0.0;
  bool use_grid = true;
  double init_psi = 0.0;  // when use_grid is false
  GridOptions grid;
  FitOptions fit;
  bool deterministic = true;  // zero wall-clock columns so exports reproduce
  bool variance_rows = true;  // include variance-component rows
};

// One row per (replicate, parameter).  Replicates run concurrently on
// derived seeds; failures are recorded per row, never silently dropped.
ReplicateTable run_replicates(const ScenarioConfig& cfg, int n_replicates,
                              const FitRecipe& recipe);

struct SummaryRow {
  std::string parameter;
  double truth = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double arb_percent = std::numeric_limits<double>::quiet_NaN();
  double absolute_bias = std::numeric_limits<double>::quiet_NaN();
  bool arb_defined = true;  // false when truth == 0
  int n_converged = 0;
  int n_total = 0;
};

// Mean / median / sd / ARB% over converged replicates (>= 2 required per
// parameter).  Estimates are sorted first, so the output is invariant to
// replicate order.
std::vector<SummaryRow> summarize(const ReplicateTable& table);

struct DiagnosticsBundle {
  std::vector<double> fitted;    // y_hat per observation
  std::vector<double> pearson;   // (y - y_hat) / sqrt(zip_var)
  std::vector<double> working;   // (y - y_hat) / y_hat
  std::vector<bool> near_zero_fitted;
  std::vector<double> mahalanobis_sq;  // sorted d^2 per cluster
  std::vector<double> chisq_quantiles; // chi-square(q) at (i - 0.5) / n
};

// Residual channels of Pearson and working type.
DiagnosticsBundle residuals(const SegFitResult& fit, const Dataset& data);

// Sorted squared Mahalanobis distances of the cluster random-effect modes
// against chi-square quantiles; throws when G-hat is singular, naming the
// degenerate directions.
void mahalanobis_qq(const SegFitResult& fit, DiagnosticsBundle& bundle);

// --- CSV ingestion ------------------------------------------------------

struct CsvSchema {
  std::string id = "id";
  std::string time = "month";
  std::string count = "BSI";
  std::string exposure = "CVC";
  std::string type_col;                 // e.g. "NAT"; empty: no type term
  std::string private_level = "Private";
  std::vector<std::string> extra_count_covariates;  // appended to x_row
  bool time_in_count_model = true;
};

struct IngestResult {
  Dataset dataset;
  std::size_t rows_total = 0;
  std::size_t rows_ingested = 0;
  std::size_t rows_dropped_zero_exposure = 0;
  std::vector<double> rates;  // count / exposure per ingested row
  int p_count = 0, p_zero = 0, q_cluster = 0;
};

// Build a panel from a CSV file.  Rows with zero exposure are dropped and
// counted; malformed cells raise ParseError with the file line.  The design
// follows the application model: x = (1, t, type?, extras...), w = (1,
// type?), z = (1, t).
IngestResult ingest_csv(const std::string& path, const CsvSchema& schema);

// --- exports ------------------------------------------------------------

enum class ExportFormat { Json, Csv };

void export_table(const ReplicateTable& table, ExportFormat format,
                  const std::string& path);
ReplicateTable import_table_csv(const std::string& path);
ReplicateTable import_table_json(const std::string& path);

void export_fit(const SegFitResult& fit, const std::string& path);  // JSON
void export_summary(const std::vector<SummaryRow>& summary,
                    ExportFormat format, const std::string& path);
void export_diagnostics(const DiagnosticsBundle& bundle, ExportFormat format,
                        const std::string& path);

}  // namespace segzip

#endif
