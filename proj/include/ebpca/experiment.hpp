#pragma once

// Experiment harness behind the command-line tool: simulation studies over
// seeds, fitting a user matrix, and spectral diagnostics. Everything here
// writes plain CSV/JSON.

#include "ebpca/amp.hpp"
#include "ebpca/matrix_io.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ebpca {

inline constexpr const char* kVersion = "0.1.0";

/// Flat key=value configuration for `simulate`. Blank lines and lines
/// starting with '#' are ignored; unknown keys are rejected.
///
///   n, d             dimensions (default 1000, 2000)
///   k                optional; must equal the number of signals if given
///   signals          comma list, strictly decreasing (default 2.0)
///   prior_u, prior_v gaussian | uniform | two_point | point_normal[:eps] |
///                    circle | three_point (default two_point)
///   methods          comma list of pca, ebpca, ebpca_marginal, oracle, vb
///                    (default pca,ebpca)
///   iters            AMP iterations T (default 10)
///   seeds            number of seeds (default 1)
///   seed_base        first seed (default 1)
///   out              output directory (default ebpca_out)
///   support_cap      NPMLE exemplar cap (default 2000)
///   npmle_tol        optimality tolerance (default 1e-7)
///   npmle_max_iter   (default 500)
///   solver           newton | em (default newton)
struct RunConfig {
  Index n = 1000;
  Index d = 2000;
  std::vector<double> signals{2.0};
  std::string prior_u = "two_point";
  std::string prior_v = "two_point";
  std::vector<std::string> methods{"pca", "ebpca"};
  int iters = 10;
  int seeds = 1;
  std::uint64_t seed_base = 1;
  std::string out = "ebpca_out";
  Index support_cap = 2000;
  double npmle_tol = 1e-7;
  int npmle_max_iter = 500;
  std::string solver = "newton";

  Index k() const { return static_cast<Index>(signals.size()); }
  AmpOptions amp_options() const;
  void validate() const;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
};

/// Known method names, in output order.
const std::vector<std::string>& known_methods();

/// One row of the per-seed table: a method's estimate at one iteration.
/// PCA is recorded at iteration -1.
struct MethodRecord {
  std::string method;
  std::uint64_t seed = 0;
  int iteration = 0;
  Accuracy acc_u;
  Accuracy acc_v;
  Vector sigma;     // diag Sigma_t (empty for PCA)
  Vector sigmabar;  // diag Sigmabar_t
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::uint64_t y_hash = 0;
  std::vector<MethodRecord> records;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, double>> seconds;  // per method
};

struct SimulationOutput {
  RunConfig config;
  std::vector<SeedOutcome> seeds;  // in seed order
  int workers = 1;
};

/// Final-iteration summary of one metric: mean and sample sd over seeds.
struct SummaryRow {
  std::string method;
  std::string metric;
  int pc = 0;  // 0 for joint metrics, else 1-based
  double mean = 0.0;
  double sd = 0.0;
  Index count = 0;
};

/// Worker count from EBPCA_THREADS (default 1, capped by hardware and the
/// number of jobs).
int worker_count(int jobs);

/// Runs every configured method on one shared instance per seed. Results do
/// not depend on the worker count.
SimulationOutput run_simulation(const RunConfig& config, int workers = 1);

std::vector<SummaryRow> summarize(const SimulationOutput& out);

/// "mean(sd)" with three decimals and no leading zero, e.g. ".067(.025)".
std::string format_mean_sd(double mean, double sd);

/// per_seed.csv, summary.csv, manifest.json.
void write_simulation(const SimulationOutput& out, const std::string& dir);

struct FitRequest {
  std::string input;
  std::string format = "auto";  // csv | bin | auto
  Index k = 1;
  int iters = 10;
  bool standardize = true;
  std::string out;
};

/// U.csv, V.csv, S_hat.csv, history.csv, report.json. Returns the result.
EBPCAResult run_fit(const FitRequest& req);

struct DiagnoseRequest {
  std::string input;
  std::string format = "auto";  // csv | bin | auto
  Index k = 1;
  bool standardize = true;
  std::string out;
};

struct Diagnosis {
  Index n = 0, d = 0;
  double gamma = 1.0;
  double tau_hat = 1.0;
  Vector singular_values;  // of the normalized matrix, descending
  double lambda_minus = 0.0, lambda_plus = 0.0;
  double threshold = 0.0;  // outlier cut used (edge plus fluctuation margin)
  Index outliers = 0;
  std::vector<double> s_hat;  // per outlier
  double ks_bulk = 0.0;       // KS distance of the non-outlier values to the MP law
};

/// singular_values.csv, histogram.csv, mp_overlay.csv, summary.json.
Diagnosis run_diagnose(const DiagnoseRequest& req);

/// Spectral diagnostics of an already-loaded matrix (no file output).
Diagnosis diagnose_matrix(const Matrix& Y_obs, Index k);

}  // namespace ebpca
