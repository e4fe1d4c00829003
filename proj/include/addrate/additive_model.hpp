#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "addrate/eigenbasis.hpp"

namespace addrate {

// d-variate additive function in the shared truncated basis: row j of theta
// holds the coefficients of the component acting on coordinate j. The basis
// has no constant term, so this coefficient representation is unique and all
// norms are computed directly on it. alpha tags the generating spectrum so
// serialized functions can be rebound to their EigenSystem.
struct AdditiveFunction {
  double alpha = 1.0;
  Eigen::MatrixXd theta;

  Eigen::Index d() const { return theta.rows(); }
  Eigen::Index k_max() const { return theta.cols(); }
};

AdditiveFunction zero_additive(Eigen::Index d, Eigen::Index k_max, double alpha = 1.0);
AdditiveFunction difference(const AdditiveFunction& f, const AdditiveFunction& g);

double eval_additive(const AdditiveFunction& f, const Eigen::Ref<const Eigen::RowVectorXd>& x);
Eigen::VectorXd eval_additive_batch(const AdditiveFunction& f,
                                    const Eigen::Ref<const Eigen::MatrixXd>& X);

// sum_j ||f_j||_H^q; membership in the radius-R ball is mass <= R.
double lq_mass(const EigenSystem& es, const AdditiveFunction& f, double q);

double additive_kernel_eval(const EigenSystem& es, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                            const Eigen::Ref<const Eigen::RowVectorXd>& y);

// Exact squared population distance under the product-uniform marginal:
// coefficient arithmetic only, no quadrature.
double l2_pi_distance_sq(const AdditiveFunction& f, const AdditiveFunction& g);
double l2_pi_norm_sq(const AdditiveFunction& f);

std::vector<int> active_components(const AdditiveFunction& f, double tol = 0.0);

struct RatioReport {
  double ratio = 1.0;
  double ci_lo = 1.0;  // 3-sigma Monte Carlo interval
  double ci_hi = 1.0;
  bool exact = false;  // single-component shortcut, identity holds without sampling
};

// Estimates sum_j ||f_j||^2 / ||f||^2; the numerator is exact, the denominator
// is Monte Carlo unless only one component is active.
RatioReport re_condition_check(const AdditiveFunction& f, int n_mc, std::uint64_t seed);

}  // namespace addrate
