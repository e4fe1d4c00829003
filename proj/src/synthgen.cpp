#include "addrate/synthgen.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "addrate/rng.hpp"

namespace addrate {

void validate(const GenConfig& cfg) {
  if (cfg.n < 1) throw std::invalid_argument("n must be positive");
  if (cfg.d < 1) throw std::invalid_argument("d must be positive");
  if (cfg.k_max < 1) throw std::invalid_argument("k_max must be positive");
  if (cfg.s_active < 1 || cfg.s_active > cfg.d) {
    throw std::invalid_argument("s_active must lie in [1, d]");
  }
  if (!(cfg.q > 0.0 && cfg.q <= 1.0)) throw std::invalid_argument("q must lie in (0,1]");
  if (!(cfg.R > 0.0)) throw std::invalid_argument("R must be positive");
  if (cfg.sigma < 0.0) throw std::invalid_argument("sigma must be nonnegative");
}

AdditiveFunction sample_truth(const EigenSystem& es, const GenConfig& cfg) {
  validate(cfg);
  if (es.k_max != cfg.k_max) throw std::invalid_argument("cfg.k_max must match the eigen-system");

  auto rng = make_stream(cfg.seed, "synthgen:truth");
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Partial Fisher-Yates picks s_active coordinates without replacement.
  std::vector<int> coords(cfg.d);
  std::iota(coords.begin(), coords.end(), 0);
  for (int i = 0; i < cfg.s_active; ++i) {
    const int j = i + static_cast<int>(unif(rng) * (cfg.d - i));
    std::swap(coords[i], coords[std::min(j, cfg.d - 1)]);
  }

  const double target_norm = std::pow(cfg.R / cfg.s_active, 1.0 / cfg.q);
  const Eigen::ArrayXd lam_eff = es.lambdas_eff();

  AdditiveFunction f = zero_additive(cfg.d, cfg.k_max, cfg.alpha);
  for (int i = 0; i < cfg.s_active; ++i) {
    Eigen::VectorXd theta(cfg.k_max);
    for (int k = 1; k <= cfg.k_max; ++k) {
      const double sign = unif(rng) < 0.5 ? -1.0 : 1.0;
      theta[k - 1] = sign * std::sqrt(lam_eff[k - 1]) * std::pow(static_cast<double>(k), -0.51);
    }
    theta *= target_norm / rkhs_norm(es, theta);
    f.theta.row(coords[i]) = theta.transpose();
  }
  return f;
}

Dataset sample_dataset_from(const AdditiveFunction& truth, int n, double sigma,
                            std::uint64_t seed, std::uint64_t replicate) {
  if (n < 1) throw std::invalid_argument("n must be positive");
  if (sigma < 0.0) throw std::invalid_argument("sigma must be nonnegative");

  Dataset ds;
  ds.truth = truth;
  ds.sigma = sigma;
  ds.seed = seed;

  auto x_rng = make_stream(seed, "synthgen:x", replicate);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ds.X.resize(n, truth.d());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < truth.d(); ++j) ds.X(i, j) = unif(x_rng);
  }

  ds.Y = eval_additive_batch(truth, ds.X);
  if (sigma > 0.0) {
    auto z_rng = make_stream(seed, "synthgen:noise", replicate);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) ds.Y[i] += sigma * gauss(z_rng);
  }
  return ds;
}

Dataset sample_dataset(const EigenSystem& es, const GenConfig& cfg) {
  return sample_dataset_from(sample_truth(es, cfg), cfg.n, cfg.sigma, cfg.seed);
}

double empirical_l2_sq(const AdditiveFunction& g, const Dataset& ds) {
  if (g.d() != ds.d()) throw std::invalid_argument("function dimension must match the dataset");
  return eval_additive_batch(g, ds.X).squaredNorm() / static_cast<double>(ds.n());
}

bool outside_dimension_band(const GenConfig& cfg) {
  const double lower = std::pow(static_cast<double>(cfg.n), cfg.q / 2.0);
  return cfg.d < lower || std::log(static_cast<double>(cfg.d)) > cfg.n;
}

}  // namespace addrate
