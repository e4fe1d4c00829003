#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "addrate/estimators.hpp"

namespace addrate {

enum class Regime { sparse, smooth };
std::string regime_name(Regime r);

struct RateBreakdown {
  double sparse_term = 0.0;  // (log d / n)^{1 - q/2}
  double smooth_term = 0.0;  // n^{-2a/(2a+1)}
  double total = 0.0;
};

RateBreakdown theoretical_rate(int n, double d, double q, double alpha);
RateBreakdown theoretical_rate_logd(int n, double log_d, double q, double alpha);

// Phase-transition exponent: for alpha below the 1/q - 1/2 boundary the
// sparse term takes over exactly when log d exceeds n^E.
double regime_threshold_exponent(double q, double alpha);

// Sparse when alpha clears the boundary, or otherwise when log d >= n^E;
// ties classify as sparse.
Regime regime_classify(int n, double d, double q, double alpha);
Regime regime_classify_logd(int n, double log_d, double q, double alpha);

struct SweepSpec {
  std::vector<int> n_grid;
  std::vector<int> d_grid;
  std::vector<double> q_grid;
  std::vector<double> alpha_grid;
  int replicates = 30;
  double sigma = 0.5;
  double R = 1.0;
  int s_active = 1;
  int k_max = 64;
  std::string estimator = "oracle";  // oracle | lq | mixed
  int oracle_j = 0;                  // <= 0: truth's first active component
  double ridge_c = 1.0;  // oracle ridge = ridge_c * n^{-2a/(2a+1)}
  FitConfig fit;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string csv_path;  // empty disables the incremental CSV
};

struct SweepRecord {
  int n = 0;
  int d = 0;
  double q = 0.0;
  double alpha = 0.0;
  std::string estimator;
  double median_error_sq = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double rate_total = 0.0;
  Regime regime = Regime::smooth;
  int replicates = 0;
  int failures = 0;
  std::uint64_t seed = 0;
};

// Full grid in a fixed order; the per-cell truth and per-replicate datasets
// are seeded by grid position, so identical specs reproduce identical files
// regardless of thread count. Rows are appended to csv_path as cells finish.
std::vector<SweepRecord> run_rate_sweep(const SweepSpec& spec);

enum class SweepAxis { n, d };

struct SlopeReport {
  double slope = 0.0;
  double std_error = 0.0;
  int points = 0;
};

// Least squares slope of log median error against log n (axis n) or
// log log d (axis d). Requires >= 4 records sharing all other parameters.
SlopeReport fit_rate_exponent(const std::vector<SweepRecord>& records, SweepAxis axis);

// Classifies every (alpha, v) cell where log d = n^v, writes a long-format
// CSV plus a python script that renders the diagram with the analytic
// boundary overlaid.
void phase_diagram(const std::vector<double>& alpha_grid, const std::vector<double>& v_grid, int n,
                   double q, const std::string& csv_path, const std::string& script_path);

// For smooth-regime cells, compares the mixed-penalty fit at scaled penalty
// levels (multiplier * default a_n) against the constrained fit on identical
// data. Exploratory: writes rows, asserts nothing.
void suboptimality_experiment(const SweepSpec& base, const std::vector<double>& multipliers,
                              const std::string& csv_path);

}  // namespace addrate
