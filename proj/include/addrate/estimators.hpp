#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "addrate/additive_model.hpp"
#include "addrate/eigenbasis.hpp"
#include "addrate/synthgen.hpp"

namespace addrate {

enum class EstimatorKind { lq_constrained, mixed_penalty, oracle_single, brute_force };

std::string estimator_kind_name(EstimatorKind kind);

struct FitConfig {
  double q = 0.5;
  double R = 1.0;
  double a_n = 0.0;      // <= 0 selects n^{-alpha/(2 alpha + 1)}
  double mu_tol = 1e-3;  // constrained fit targets mass in [R (1 - mu_tol), R]
  double tol = 1e-8;     // relative objective-change stop for coordinate sweeps
  int max_outer = 60;    // sweep budget per penalized solve
  int max_inner = 8;     // reweighting iterations per block step
  int mu_iters = 48;     // penalized-solve budget for the mu search
  int restarts = 5;      // extra random initializations for the nonconvex fit
  double ridge = 0.0;    // oracle baseline penalty level
  std::uint64_t seed = 0;
  int threads = 1;
};

struct FitResult {
  AdditiveFunction fhat;
  EstimatorKind kind = EstimatorKind::oracle_single;
  FitConfig cfg;
  double empirical_risk = 0.0;
  double population_error_sq = std::numeric_limits<double>::quiet_NaN();
  double lq_mass_value = 0.0;
  double mu = 0.0;          // selected multiplier of the constrained fit
  double a_n = 0.0;         // resolved penalty level of the mixed fit
  bool converged = false;
  int iterations = 0;       // coordinate sweeps of the selected solve
  int restart_best_index = 0;
  std::vector<int> active_set;
  std::vector<double> objective_trace;  // per-sweep objective of the selected solve
};

// Penalized surrogate for least squares over the lq mass ball: block
// coordinate descent with an exact zero-block test, plus a bisection on the
// penalty multiplier that lands the mass in [R (1 - mu_tol), R] unless the
// unconstrained fit is already interior.
FitResult fit_lq_constrained(const EigenSystem& es, const Dataset& ds, const FitConfig& cfg);

// Convex two-term penalty a_n^2 * rkhs norm + a_n * empirical l2 norm per
// component, solved by block coordinate descent with a proximal-gradient
// block solver. cfg.restarts is ignored (the objective is convex).
FitResult fit_mixed_penalty(const EigenSystem& es, const Dataset& ds, const FitConfig& cfg);

// Closed-form generalized ridge on a single known coordinate j (1-based).
// ridge == 0 requires a nonsingular block design.
FitResult fit_oracle_single(const EigenSystem& es, const Dataset& ds, int j, double ridge);

// Exhaustive grid search over coefficient boxes subject to the lq mass
// constraint. bound <= 0 selects per-frequency boxes from the ball radius.
// Refuses grids beyond 1e8 points.
FitResult brute_force_lse(const EigenSystem& es, const Dataset& ds, double grid_step, double bound,
                          double q, double R);

struct BasicInequality {
  bool applicable = false;  // constrained fit with a feasible recorded truth
  bool pass = false;
  double fit_risk = 0.0;
  double truth_risk = 0.0;
};

// The fitted empirical risk can never exceed the risk of any feasible point,
// in particular the truth; inapplicable when the truth is infeasible.
BasicInequality basic_inequality_check(const EigenSystem& es, const FitResult& fit,
                                       const Dataset& ds);

}  // namespace addrate
