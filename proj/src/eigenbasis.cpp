#include "addrate/eigenbasis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace addrate {

namespace {

void check_unit_interval(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::domain_error(std::string(what) + " must lie in [0,1]");
  }
}

}  // namespace

EigenSystem make_eigen_system(double alpha, int k_max) {
  if (!(alpha > 0.5)) throw std::invalid_argument("alpha must exceed 1/2");
  if (k_max < 1) throw std::invalid_argument("k_max must be positive");
  EigenSystem es;
  es.alpha = alpha;
  es.k_max = k_max;
  es.lambdas.resize(k_max);
  for (int k = 1; k <= k_max; ++k) {
    es.lambdas[k - 1] = std::pow(static_cast<double>(k), -2.0 * alpha);
  }
  es.norm_const = 2.0 * es.lambdas.sum();
  return es;
}

double eigenfunction_eval(int k, double x) {
  if (k < 1) throw std::invalid_argument("basis index must be positive");
  check_unit_interval(x, "evaluation point");
  return std::numbers::sqrt2 * std::cos(k * std::numbers::pi * x);
}

Eigen::MatrixXd basis_matrix(int k_max, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (k_max < 1) throw std::invalid_argument("k_max must be positive");
  const Eigen::Index n = x.size();
  Eigen::MatrixXd phi(n, k_max);
  for (Eigen::Index i = 0; i < n; ++i) {
    check_unit_interval(x[i], "evaluation point");
    const double px = std::numbers::pi * x[i];
    for (int k = 1; k <= k_max; ++k) {
      phi(i, k - 1) = std::numbers::sqrt2 * std::cos(k * px);
    }
  }
  return phi;
}

double kernel_eval(const EigenSystem& es, double x, double y) {
  check_unit_interval(x, "evaluation point");
  check_unit_interval(y, "evaluation point");
  const double px = std::numbers::pi * x;
  const double py = std::numbers::pi * y;
  double acc = 0.0;
  for (int k = 1; k <= es.k_max; ++k) {
    acc += es.lambdas[k - 1] * 2.0 * std::cos(k * px) * std::cos(k * py);
  }
  return acc / es.norm_const;
}

double rkhs_norm(const EigenSystem& es, const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != es.k_max) throw std::invalid_argument("coefficient length must equal k_max");
  const double sq = (theta.array().square() * es.norm_const / es.lambdas).sum();
  return std::sqrt(sq);
}

double sup_norm_estimate(const Eigen::Ref<const Eigen::VectorXd>& theta, int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("grid needs at least two points");
  const int k_max = static_cast<int>(theta.size());
  double best = 0.0;
  for (int g = 0; g < grid_points; ++g) {
    const double x = static_cast<double>(g) / (grid_points - 1);
    const double px = std::numbers::pi * x;
    double v = 0.0;
    for (int k = 1; k <= k_max; ++k) {
      v += theta[k - 1] * std::numbers::sqrt2 * std::cos(k * px);
    }
    best = std::max(best, std::abs(v));
  }
  return best;
}

ComponentNorms component_norms(const EigenSystem& es,
                               const Eigen::Ref<const Eigen::VectorXd>& theta,
                               int grid_points) {
  ComponentNorms out;
  out.rkhs = rkhs_norm(es, theta);
  out.l2 = theta.norm();
  out.sup_estimate = sup_norm_estimate(theta, grid_points);
  return out;
}

}  // namespace addrate
