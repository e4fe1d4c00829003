#include "addrate/complexity.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "addrate/parallel.hpp"
#include "addrate/rng.hpp"

namespace addrate {

namespace {

// Maximizes btilde . y over {||y||^2 <= 1, sum gamma_i y_i^2 <= u^2} after the
// problem has been whitened so the ellipsoid constraint is the unit ball.
// Dual form: value = min over t in [0,1] of sqrt(sum btilde^2 / m(t)) with
// m_i(t) = (1 - t) + t gamma_i / u^2, a convex scan refined by golden section.
struct WhitenedMax {
  double value = 0.0;
  Eigen::VectorXd y;
};

double dual_sq(const Eigen::ArrayXd& b2, const Eigen::ArrayXd& gamma_over_u2, double t) {
  return (b2 / ((1.0 - t) + t * gamma_over_u2)).sum();
}

WhitenedMax whitened_max(const Eigen::ArrayXd& btilde, const Eigen::ArrayXd& gamma, double u) {
  const int k = static_cast<int>(btilde.size());
  WhitenedMax out;
  out.y = Eigen::VectorXd::Zero(k);
  const double bnorm = std::sqrt(btilde.square().sum());
  if (bnorm == 0.0) return out;

  if (u == 0.0) {
    // Only null directions of the ball constraint can move.
    Eigen::ArrayXd masked = (gamma <= 0.0).select(btilde, Eigen::ArrayXd::Zero(k));
    const double norm = std::sqrt(masked.square().sum());
    if (norm > 0.0) {
      out.value = norm;
      out.y = (masked / norm).matrix();
    }
    return out;
  }

  const double gmax = gamma.maxCoeff();
  if (u * u >= gmax) {
    // Ball inactive: plain unit-sphere maximum.
    out.value = bnorm;
    out.y = (btilde / bnorm).matrix();
    return out;
  }

  const Eigen::ArrayXd b2 = btilde.square();
  const Eigen::ArrayXd g_u2 = gamma / (u * u);

  const int grid = 1024;
  double best_t = 0.0;
  double best_f = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= grid; ++i) {
    const double t = static_cast<double>(i) / grid;
    if (t == 1.0 && gamma.minCoeff() <= 0.0) continue;  // m hits 0 there
    const double f = dual_sq(b2, g_u2, t);
    if (f < best_f) {
      best_f = f;
      best_t = t;
    }
  }
  double lo = std::max(0.0, best_t - 1.0 / grid);
  double hi = std::min(1.0, best_t + 1.0 / grid);
  if (hi == 1.0 && gamma.minCoeff() <= 0.0) hi = 1.0 - 1e-12;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - phi * (hi - lo);
  double x2 = lo + phi * (hi - lo);
  double f1 = dual_sq(b2, g_u2, x1);
  double f2 = dual_sq(b2, g_u2, x2);
  for (int it = 0; it < 90 && hi - lo > 1e-16; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = dual_sq(b2, g_u2, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = dual_sq(b2, g_u2, x2);
    }
  }
  const double t_star = 0.5 * (lo + hi);

  // Primal reconstruction, rescaled onto the feasible set so the returned
  // point satisfies both constraints exactly.
  Eigen::ArrayXd m = (1.0 - t_star) + t_star * g_u2;
  Eigen::ArrayXd yhat = btilde / m;
  const double r1 = std::sqrt(yhat.square().sum());
  const double r2 = std::sqrt((gamma * yhat.square()).sum()) / u;
  const double scale = 1.0 / std::max({r1, r2, 1e-300});
  out.y = (yhat * scale).matrix();
  out.value = (btilde * yhat).sum() * scale;
  return out;
}

struct PencilBasis {
  Eigen::MatrixXd v;       // columns map whitened coords back to theta
  Eigen::ArrayXd gamma;    // ball-constraint curvatures in whitened coords
};

// Simultaneously diagonalizes diag(1/lambda_eff) (to identity) and the ball
// matrix: with S = diag(sqrt(lambda_eff)) and S G S = Q diag(gamma) Q', the
// map theta = S Q y whitens both constraints.
PencilBasis pencil_basis(const Eigen::ArrayXd& lambdas_eff, const Eigen::MatrixXd* gram) {
  const int k = static_cast<int>(lambdas_eff.size());
  const Eigen::ArrayXd s = lambdas_eff.sqrt();
  PencilBasis out;
  if (gram == nullptr) {
    out.v = s.matrix().asDiagonal();
    out.gamma = lambdas_eff;
    return out;
  }
  if (gram->rows() != k || gram->cols() != k)
    throw std::invalid_argument("gram matrix shape must match lambdas_eff");
  Eigen::MatrixXd m = s.matrix().asDiagonal() * (*gram) * s.matrix().asDiagonal();
  m = 0.5 * (m + m.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw std::runtime_error("pencil eigendecomposition failed");
  const double gmax = std::max(0.0, eig.eigenvalues().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, gmax))
    throw std::invalid_argument("gram matrix must be positive semidefinite");
  out.gamma = eig.eigenvalues().array().max(0.0);
  out.v = s.matrix().asDiagonal() * eig.eigenvectors();
  return out;
}

}  // namespace

InnerMax sup_linear_over_ellipsoid_and_ball(const Eigen::VectorXd& b,
                                            const Eigen::ArrayXd& lambdas_eff, double u,
                                            const Eigen::MatrixXd* gram) {
  if (b.size() != lambdas_eff.size())
    throw std::invalid_argument("b and lambdas_eff must have matching length");
  if (lambdas_eff.size() == 0) throw std::invalid_argument("empty coefficient space");
  if ((lambdas_eff <= 0.0).any()) throw std::invalid_argument("lambdas_eff must be positive");
  if (!(u >= 0.0)) throw std::invalid_argument("u must be >= 0");

  const PencilBasis basis = pencil_basis(lambdas_eff, gram);
  const Eigen::ArrayXd btilde = (basis.v.transpose() * b).array();
  const WhitenedMax wm = whitened_max(btilde, basis.gamma, u);
  InnerMax out;
  out.value = wm.value;
  out.theta = basis.v * wm.y;
  return out;
}

Eigen::ArrayXd ComplexityCurve::quantile(double beta) const {
  if (samples.rows() == 0) throw std::invalid_argument("curve has no samples");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  const double level = 1.0 - std::pow(static_cast<double>(std::max(d, 2)), -beta);
  const int r = static_cast<int>(samples.rows());
  // Conservative upper order statistic at the requested level.
  int idx = static_cast<int>(std::ceil(level * r)) - 1;
  idx = std::clamp(idx, 0, r - 1);
  Eigen::ArrayXd out(samples.cols());
  std::vector<double> col(static_cast<std::size_t>(r));
  for (int c = 0; c < samples.cols(); ++c) {
    for (int i = 0; i < r; ++i) col[static_cast<std::size_t>(i)] = samples(i, c);
    std::nth_element(col.begin(), col.begin() + idx, col.end());
    out(c) = col[static_cast<std::size_t>(idx)];
  }
  return out;
}

ComplexityCurve complexity_curve(const EigenSystem& es, int n, int d,
                                 const std::vector<double>& u_grid, int replicates,
                                 std::uint64_t seed, Multipliers multipliers,
                                 NormConstraint constraint, int threads) {
  if (n < 1) throw std::invalid_argument("curve needs n >= 1");
  if (d < 1) throw std::invalid_argument("curve needs d >= 1");
  if (replicates < 1) throw std::invalid_argument("curve needs replicates >= 1");
  if (u_grid.empty()) throw std::invalid_argument("u grid must be nonempty");
  for (double u : u_grid)
    if (!(u > 0.0 && u <= 1.0)) throw std::invalid_argument("u grid values must lie in (0,1]");

  ComplexityCurve curve;
  curve.u_grid = Eigen::Map<const Eigen::ArrayXd>(u_grid.data(),
                                                  static_cast<Eigen::Index>(u_grid.size()));
  std::sort(curve.u_grid.begin(), curve.u_grid.end());
  curve.n = n;
  curve.d = d;
  curve.alpha = es.alpha;
  curve.replicates = replicates;
  curve.seed = seed;
  curve.multipliers = multipliers;
  curve.constraint = constraint;
  curve.samples.resize(replicates, curve.u_grid.size());

  const Eigen::ArrayXd lam_eff = es.lambdas_eff();
  const char* stream =
      multipliers == Multipliers::sign ? "complexity:rademacher" : "complexity:gaussian";

  parallel_for(replicates, threads, [&](int r) {
    auto rng = make_stream(seed, stream, static_cast<std::uint64_t>(r));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = unif(rng);
    Eigen::VectorXd mult(n);
    if (multipliers == Multipliers::sign) {
      std::bernoulli_distribution coin(0.5);
      for (int i = 0; i < n; ++i) mult(i) = coin(rng) ? 1.0 : -1.0;
    } else {
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (int i = 0; i < n; ++i) mult(i) = gauss(rng);
    }

    const Eigen::MatrixXd phi = basis_matrix(es.k_max, x);
    const Eigen::VectorXd b = phi.transpose() * mult / n;

    PencilBasis basis;
    if (constraint == NormConstraint::empirical) {
      Eigen::MatrixXd gram = phi.transpose() * phi / n;
      basis = pencil_basis(lam_eff, &gram);
    } else {
      basis = pencil_basis(lam_eff, nullptr);
    }
    const Eigen::ArrayXd btilde = (basis.v.transpose() * b).array();

    double prev = 0.0;  // smaller-u optimum stays feasible, so the curve is monotone
    for (Eigen::Index c = 0; c < curve.u_grid.size(); ++c) {
      const double v = whitened_max(btilde, basis.gamma, curve.u_grid(c)).value;
      prev = std::max(prev, v);
      curve.samples(r, c) = prev;
    }
  });

  curve.mean = curve.samples.colwise().mean().array();
  return curve;
}

ComplexityCurve rademacher_curve(const EigenSystem& es, int n, int d,
                                 const std::vector<double>& u_grid, int replicates,
                                 std::uint64_t seed, int threads) {
  return complexity_curve(es, n, d, u_grid, replicates, seed, Multipliers::sign,
                          NormConstraint::population, threads);
}

ComplexityCurve gaussian_curve(const EigenSystem& es, int n, int d,
                               const std::vector<double>& u_grid, int replicates,
                               std::uint64_t seed, int threads) {
  return complexity_curve(es, n, d, u_grid, replicates, seed, Multipliers::gauss,
                          NormConstraint::empirical, threads);
}

double envelope_value(double u, int n, int d, double alpha, double beta, EnvelopeForm form) {
  if (!(u >= 0.0)) throw std::invalid_argument("u must be >= 0");
  if (n < 1 || d < 1) throw std::invalid_argument("envelope needs n >= 1 and d >= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  if (!(alpha > 0.5)) throw std::invalid_argument("alpha must exceed 1/2");
  const double logd = std::log(static_cast<double>(d));
  double inner = std::pow(u, 1.0 - 1.0 / (2.0 * alpha)) + u * std::sqrt(beta * logd) +
                 std::exp(-static_cast<double>(d));
  if (form == EnvelopeForm::with_sample_term) inner += beta * logd / std::sqrt(static_cast<double>(n));
  return inner / std::sqrt(static_cast<double>(n));
}

EnvelopeReport envelope_check(const ComplexityCurve& curve, double beta, EnvelopeForm form) {
  if (curve.u_grid.size() == 0) throw std::invalid_argument("curve has no u grid");
  EnvelopeReport rep;
  rep.beta = beta;
  rep.form = form;
  rep.quantiles = curve.quantile(beta);
  rep.envelope.resize(curve.u_grid.size());
  rep.ratios.resize(curve.u_grid.size());
  for (Eigen::Index c = 0; c < curve.u_grid.size(); ++c) {
    rep.envelope(c) = envelope_value(curve.u_grid(c), curve.n, curve.d, curve.alpha, beta, form);
    rep.ratios(c) = rep.quantiles(c) / rep.envelope(c);
    if (rep.ratios(c) > rep.c_hat) {
      rep.c_hat = rep.ratios(c);
      rep.arg_u = static_cast<int>(c);
    }
  }
  return rep;
}

EnvelopeReport envelope_check(const ComplexityCurve& curve, double beta) {
  const EnvelopeForm form = curve.multipliers == Multipliers::sign
                                ? EnvelopeForm::with_sample_term
                                : EnvelopeForm::without_sample_term;
  return envelope_check(curve, beta, form);
}

NormTransferReport norm_transfer_check(const EigenSystem& es, int n, int d, double beta, int trials,
                                       std::uint64_t seed) {
  if (n < 1 || d < 1) throw std::invalid_argument("norm transfer check needs n >= 1 and d >= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  if (trials < 100) throw std::invalid_argument("norm transfer check needs trials >= 100");

  NormTransferReport rep;
  rep.trials = trials;
  rep.penalty = std::pow(static_cast<double>(n), -es.alpha / (2.0 * es.alpha + 1.0)) +
                std::sqrt((beta + 1.0) * std::log(static_cast<double>(std::max(d, 2))) / n);

  const Eigen::ArrayXd lam_eff = es.lambdas_eff();
  const int k = es.k_max;
  auto rng = make_stream(seed, "complexity:transfer");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> pick_k(0, k - 1);

  for (int t = 0; t < trials; ++t) {
    // Cycle three shapes of unit-RKHS-norm test functions: a single basis
    // direction, a smooth random profile, and a rough tail-concentrated one.
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(k);
    const int shape = t % 3;
    if (shape == 0) {
      const int k0 = pick_k(rng);
      theta(k0) = std::sqrt(lam_eff(k0));
    } else {
      const int lo = shape == 1 ? 0 : (3 * k) / 4;
      for (int i = lo; i < k; ++i) theta(i) = lam_eff(i) * gauss(rng);
      double h2 = 0.0;
      for (int i = 0; i < k; ++i) h2 += theta(i) * theta(i) / lam_eff(i);
      if (h2 <= 0.0) continue;
      theta /= std::sqrt(h2);
    }

    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x(i) = unif(rng);
    const Eigen::MatrixXd phi = basis_matrix(k, x);
    const double emp = (phi * theta).norm() / std::sqrt(static_cast<double>(n));
    const double pop = theta.norm();

    rep.c2_forward = std::max(rep.c2_forward, pop / (emp + rep.penalty));
    rep.c2_reverse = std::max(rep.c2_reverse, emp / (pop + rep.penalty));
  }
  return rep;
}

}  // namespace addrate
