#include "addrate/additive_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "addrate/rng.hpp"

namespace addrate {

namespace {

void check_same_shape(const AdditiveFunction& f, const AdditiveFunction& g) {
  if (f.d() != g.d() || f.k_max() != g.k_max()) {
    throw std::invalid_argument("additive functions must share (d, k_max)");
  }
}

double component_value(const Eigen::Ref<const Eigen::RowVectorXd>& theta_row, double x) {
  const double px = std::numbers::pi * x;
  double v = 0.0;
  for (Eigen::Index k = 0; k < theta_row.size(); ++k) {
    v += theta_row[k] * std::numbers::sqrt2 * std::cos((k + 1) * px);
  }
  return v;
}

}  // namespace

AdditiveFunction zero_additive(Eigen::Index d, Eigen::Index k_max, double alpha) {
  if (d < 1 || k_max < 1) throw std::invalid_argument("d and k_max must be positive");
  AdditiveFunction f;
  f.alpha = alpha;
  f.theta = Eigen::MatrixXd::Zero(d, k_max);
  return f;
}

AdditiveFunction difference(const AdditiveFunction& f, const AdditiveFunction& g) {
  check_same_shape(f, g);
  AdditiveFunction h;
  h.alpha = f.alpha;
  h.theta = f.theta - g.theta;
  return h;
}

double eval_additive(const AdditiveFunction& f, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  if (x.size() != f.d()) throw std::invalid_argument("point dimension must equal d");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < f.d(); ++j) {
    if (f.theta.row(j).isZero(0.0)) continue;
    if (!(x[j] >= 0.0 && x[j] <= 1.0)) throw std::domain_error("evaluation point must lie in [0,1]^d");
    acc += component_value(f.theta.row(j), x[j]);
  }
  return acc;
}

Eigen::VectorXd eval_additive_batch(const AdditiveFunction& f,
                                    const Eigen::Ref<const Eigen::MatrixXd>& X) {
  if (X.cols() != f.d()) throw std::invalid_argument("data dimension must equal d");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  for (Eigen::Index j = 0; j < f.d(); ++j) {
    if (f.theta.row(j).isZero(0.0)) continue;
    out.noalias() += basis_matrix(static_cast<int>(f.k_max()), X.col(j)) * f.theta.row(j).transpose();
  }
  return out;
}

double lq_mass(const EigenSystem& es, const AdditiveFunction& f, double q) {
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in (0,1]");
  if (f.k_max() != es.k_max) throw std::invalid_argument("function k_max must match the eigen-system");
  const Eigen::ArrayXd weights = es.norm_const / es.lambdas;
  double mass = 0.0;
  for (Eigen::Index j = 0; j < f.d(); ++j) {
    const double norm_sq = (f.theta.row(j).transpose().array().square() * weights).sum();
    if (norm_sq > 0.0) mass += std::pow(std::sqrt(norm_sq), q);
  }
  return mass;
}

double additive_kernel_eval(const EigenSystem& es, const Eigen::Ref<const Eigen::RowVectorXd>& x,
                            const Eigen::Ref<const Eigen::RowVectorXd>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("points must share dimension");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) acc += kernel_eval(es, x[j], y[j]);
  return acc;
}

double l2_pi_distance_sq(const AdditiveFunction& f, const AdditiveFunction& g) {
  check_same_shape(f, g);
  return (f.theta - g.theta).squaredNorm();
}

double l2_pi_norm_sq(const AdditiveFunction& f) { return f.theta.squaredNorm(); }

std::vector<int> active_components(const AdditiveFunction& f, double tol) {
  std::vector<int> idx;
  for (Eigen::Index j = 0; j < f.d(); ++j) {
    if (f.theta.row(j).norm() > tol) idx.push_back(static_cast<int>(j));
  }
  return idx;
}

RatioReport re_condition_check(const AdditiveFunction& f, int n_mc, std::uint64_t seed) {
  if (n_mc < 10000) throw std::invalid_argument("re_condition_check needs at least 1e4 samples");
  const double numerator = f.theta.squaredNorm();
  if (numerator == 0.0) throw std::invalid_argument("ratio undefined for the zero function");

  RatioReport rep;
  const std::vector<int> active = active_components(f);
  if (active.size() == 1) {
    rep.exact = true;  // a single component integrates to its own marginal norm
    return rep;
  }

  auto rng = make_stream(seed, "additive_model:re_check");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double mean = 0.0;
  double m2 = 0.0;
  for (int i = 0; i < n_mc; ++i) {
    double v = 0.0;
    for (int j : active) v += component_value(f.theta.row(j), unif(rng));
    const double sq = v * v;
    const double delta = sq - mean;
    mean += delta / (i + 1);
    m2 += delta * (sq - mean);
  }
  const double se = std::sqrt(m2 / n_mc / (n_mc - 1));
  rep.ratio = numerator / mean;
  const double se_ratio = numerator * se / (mean * mean);
  rep.ci_lo = rep.ratio - 3.0 * se_ratio;
  rep.ci_hi = rep.ratio + 3.0 * se_ratio;
  return rep;
}

}  // namespace addrate
