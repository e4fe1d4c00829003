#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <addrate/complexity.hpp>
#include <addrate/rng.hpp>

using namespace addrate;

namespace {

// Dense grid search over three coefficients under both constraints; the grid
// is refined around the incumbent once to shave discretization error.
double brute_force_max(const Eigen::VectorXd& b, const Eigen::ArrayXd& lam, double u,
                       const Eigen::MatrixXd* gram) {
  const auto feasible = [&](const Eigen::Vector3d& t) {
    double e = 0.0;
    for (int i = 0; i < 3; ++i) e += t(i) * t(i) / lam(i);
    if (e > 1.0) return false;
    const double ball = gram ? t.dot(*gram * t) : t.squaredNorm();
    return ball <= u * u;
  };
  double best = 0.0;
  Eigen::Vector3d arg = Eigen::Vector3d::Zero();
  Eigen::Vector3d lo, hi;
  for (int i = 0; i < 3; ++i) {
    hi(i) = std::sqrt(lam(i));
    lo(i) = -hi(i);
  }
  for (int pass = 0; pass < 3; ++pass) {
    const int steps = 80;
    Eigen::Vector3d t;
    for (int i0 = 0; i0 <= steps; ++i0) {
      t(0) = lo(0) + (hi(0) - lo(0)) * i0 / steps;
      for (int i1 = 0; i1 <= steps; ++i1) {
        t(1) = lo(1) + (hi(1) - lo(1)) * i1 / steps;
        for (int i2 = 0; i2 <= steps; ++i2) {
          t(2) = lo(2) + (hi(2) - lo(2)) * i2 / steps;
          if (!feasible(t)) continue;
          const double v = b.dot(t);
          if (v > best) {
            best = v;
            arg = t;
          }
        }
      }
    }
    for (int i = 0; i < 3; ++i) {
      const double w = (hi(i) - lo(i)) / steps * 2.0;
      lo(i) = arg(i) - w;
      hi(i) = arg(i) + w;
    }
  }
  return best;
}

void check_feasible(const InnerMax& im, const Eigen::ArrayXd& lam, double u,
                    const Eigen::MatrixXd* gram) {
  double e = 0.0;
  for (int i = 0; i < im.theta.size(); ++i) e += im.theta(i) * im.theta(i) / lam(i);
  CHECK(e <= 1.0 + 1e-8);
  const double ball = gram ? im.theta.dot(*gram * im.theta) : im.theta.squaredNorm();
  CHECK(ball <= u * u + 1e-8);
}

}  // namespace

TEST_CASE("maximizer closed form when the ball is inactive") {
  const EigenSystem es = make_eigen_system(1.0, 8);
  const Eigen::ArrayXd lam = es.lambdas_eff();
  auto rng = make_stream(31, "test:ball_inactive");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd b(8);
  for (int i = 0; i < 8; ++i) b(i) = gauss(rng);

  // u = 1 dominates every ellipsoid radius, so only the rkhs constraint binds
  // and the supremum is the weighted norm sqrt(sum lam b^2).
  const InnerMax im = sup_linear_over_ellipsoid_and_ball(b, lam, 1.0);
  const double closed = std::sqrt((lam * b.array().square()).sum());
  CHECK(im.value == doctest::Approx(closed).epsilon(1e-12));
  check_feasible(im, lam, 1.0, nullptr);
  CHECK(b.dot(im.theta) == doctest::Approx(im.value).epsilon(1e-12));
}

TEST_CASE("maximizer closed form when the ellipsoid is inactive") {
  // Concentrating b on the first coordinate keeps the ellipsoid slack for
  // small u; the supremum is then u ||b||.
  const EigenSystem es = make_eigen_system(1.0, 4);
  const Eigen::ArrayXd lam = es.lambdas_eff();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(4);
  b(0) = 2.0;
  const double u = 0.05;
  const InnerMax im = sup_linear_over_ellipsoid_and_ball(b, lam, u);
  CHECK(im.value == doctest::Approx(u * b.norm()).epsilon(1e-10));
  check_feasible(im, lam, u, nullptr);
}

TEST_CASE("maximizer edge cases") {
  const EigenSystem es = make_eigen_system(1.0, 4);
  const Eigen::ArrayXd lam = es.lambdas_eff();
  Eigen::VectorXd b(4);
  b << 1.0, -2.0, 0.5, 0.0;
  const InnerMax at_zero = sup_linear_over_ellipsoid_and_ball(b, lam, 0.0);
  CHECK(at_zero.value == 0.0);
  const InnerMax no_b = sup_linear_over_ellipsoid_and_ball(Eigen::VectorXd::Zero(4), lam, 0.3);
  CHECK(no_b.value == 0.0);
  CHECK_THROWS(sup_linear_over_ellipsoid_and_ball(b, lam, -0.1));
  CHECK_THROWS(sup_linear_over_ellipsoid_and_ball(Eigen::VectorXd::Zero(3), lam, 0.5));
}

TEST_CASE("maximizer matches brute force on three coefficients") {
  const EigenSystem es = make_eigen_system(1.0, 3);
  const Eigen::ArrayXd lam = es.lambdas_eff();
  auto rng = make_stream(8, "test:brute");
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int t = 0; t < 6; ++t) {
    Eigen::VectorXd b(3);
    for (int i = 0; i < 3; ++i) b(i) = gauss(rng);
    for (double u : {0.05, 0.2, 0.45}) {
      const InnerMax im = sup_linear_over_ellipsoid_and_ball(b, lam, u);
      const double ref = brute_force_max(b, lam, u, nullptr);
      CHECK(std::abs(im.value - ref) <= 1e-3);
      CHECK(im.value >= ref - 1e-9);  // grid points are feasible, solver must dominate
      check_feasible(im, lam, u, nullptr);
    }
  }
}

TEST_CASE("maximizer handles an empirical gram constraint") {
  const EigenSystem es = make_eigen_system(1.0, 3);
  const Eigen::ArrayXd lam = es.lambdas_eff();
  auto rng = make_stream(9, "test:brute_gram");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd x(40);
  for (int i = 0; i < 40; ++i) x(i) = unif(rng);
  const Eigen::MatrixXd phi = basis_matrix(3, x);
  const Eigen::MatrixXd gram = phi.transpose() * phi / 40;
  Eigen::VectorXd b(3);
  for (int i = 0; i < 3; ++i) b(i) = gauss(rng);
  for (double u : {0.1, 0.3}) {
    const InnerMax im = sup_linear_over_ellipsoid_and_ball(b, lam, u, &gram);
    const double ref = brute_force_max(b, lam, u, &gram);
    CHECK(std::abs(im.value - ref) <= 1e-3);
    CHECK(im.value >= ref - 1e-9);
    check_feasible(im, lam, u, &gram);
  }
  Eigen::MatrixXd negdef = -Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS(sup_linear_over_ellipsoid_and_ball(b, lam, 0.3, &negdef));
}

TEST_CASE("curves are monotone, deterministic, and thread independent") {
  const EigenSystem es = make_eigen_system(1.0, 16);
  const std::vector<double> u_grid{0.02, 0.05, 0.1, 0.3, 0.6, 1.0};
  const ComplexityCurve a = rademacher_curve(es, 80, 10, u_grid, 40, 5, 1);
  const ComplexityCurve b = rademacher_curve(es, 80, 10, u_grid, 40, 5, 3);
  CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() == 0.0);

  REQUIRE(a.samples.rows() == 40);
  REQUIRE(a.samples.cols() == 6);
  for (int r = 0; r < a.samples.rows(); ++r)
    for (int c = 1; c < a.samples.cols(); ++c) CHECK(a.samples(r, c) >= a.samples(r, c - 1));
  CHECK((a.samples.array() >= 0.0).all());
  for (int c = 0; c < 6; ++c)
    CHECK(a.mean(c) == doctest::Approx(a.samples.col(c).mean()).epsilon(1e-14));

  const ComplexityCurve other = rademacher_curve(es, 80, 10, u_grid, 40, 6, 1);
  CHECK((a.samples - other.samples).cwiseAbs().maxCoeff() > 0.0);

  // The u grid is sorted on entry.
  const ComplexityCurve shuffled = rademacher_curve(es, 80, 10, {0.6, 0.02, 1.0}, 5, 5, 1);
  CHECK(shuffled.u_grid(0) == 0.02);
  CHECK(shuffled.u_grid(2) == 1.0);
}

TEST_CASE("curve input contracts") {
  const EigenSystem es = make_eigen_system(1.0, 8);
  CHECK_THROWS(rademacher_curve(es, 0, 10, {0.5}, 5, 1));
  CHECK_THROWS(rademacher_curve(es, 10, 10, {}, 5, 1));
  CHECK_THROWS(rademacher_curve(es, 10, 10, {1.5}, 5, 1));
  CHECK_THROWS(rademacher_curve(es, 10, 10, {0.5}, 0, 1));
}

TEST_CASE("quantile uses a conservative upper order statistic") {
  const EigenSystem es = make_eigen_system(1.0, 8);
  const ComplexityCurve curve = rademacher_curve(es, 50, 20, {0.1, 0.5}, 200, 3, 2);
  const Eigen::ArrayXd q1 = curve.quantile(1.0);
  const Eigen::ArrayXd q1b = curve.quantile(1.0);
  CHECK((q1 - q1b).abs().maxCoeff() == 0.0);
  for (int c = 0; c < 2; ++c) {
    std::vector<double> col(200);
    for (int r = 0; r < 200; ++r) col[static_cast<std::size_t>(r)] = curve.samples(r, c);
    std::sort(col.begin(), col.end());
    // level 1 - 20^{-1} = 0.95 over 200 draws: element ceil(0.95*200) - 1 = 189.
    CHECK(q1(c) == col[189]);
    CHECK(q1(c) >= col[99]);  // above the median
    CHECK(q1(c) <= col[199]);
  }
  // Higher beta moves the level toward the maximum.
  const Eigen::ArrayXd q3 = curve.quantile(3.0);
  for (int c = 0; c < 2; ++c) CHECK(q3(c) >= q1(c));
  CHECK_THROWS(curve.quantile(0.0));
}

TEST_CASE("empirical constraint approaches the population one for large n") {
  const EigenSystem es = make_eigen_system(1.0, 8);
  const std::vector<double> u_grid{0.2};
  const int reps = 20;
  const ComplexityCurve emp = complexity_curve(es, 4000, 5, u_grid, reps, 17, Multipliers::gauss,
                                               NormConstraint::empirical, 2);
  const ComplexityCurve pop = complexity_curve(es, 4000, 5, u_grid, reps, 17, Multipliers::gauss,
                                               NormConstraint::population, 2);
  // Identical multiplier streams, so the only gap is the gram vs identity.
  for (int r = 0; r < reps; ++r)
    CHECK(emp.samples(r, 0) == doctest::Approx(pop.samples(r, 0)).epsilon(0.15));
}

TEST_CASE("envelope formula frozen values") {
  CHECK(envelope_value(0.5, 100, 20, 1.0, 1.0, EnvelopeForm::with_sample_term) ==
        doctest::Approx(0.18720892019042429).epsilon(1e-14));
  CHECK(envelope_value(0.5, 100, 20, 1.0, 1.0, EnvelopeForm::without_sample_term) ==
        doctest::Approx(0.15725159745488438).epsilon(1e-14));
  CHECK(envelope_value(0.1, 400, 50, 2.0, 1.5, EnvelopeForm::with_sample_term) ==
        doctest::Approx(0.035673496477063635).epsilon(1e-14));
  CHECK_THROWS(envelope_value(-0.1, 100, 20, 1.0, 1.0, EnvelopeForm::with_sample_term));
  CHECK_THROWS(envelope_value(0.5, 100, 20, 0.5, 1.0, EnvelopeForm::with_sample_term));
}

TEST_CASE("envelope check derives its form from the multipliers") {
  const EigenSystem es = make_eigen_system(1.0, 16);
  const std::vector<double> u_grid{0.05, 0.2, 0.8};
  const ComplexityCurve sign = rademacher_curve(es, 100, 12, u_grid, 60, 2, 2);
  const EnvelopeReport rs = envelope_check(sign, 1.0);
  CHECK(rs.form == EnvelopeForm::with_sample_term);
  const ComplexityCurve gauss = gaussian_curve(es, 100, 12, u_grid, 60, 2, 2);
  const EnvelopeReport rg = envelope_check(gauss, 1.0);
  CHECK(rg.form == EnvelopeForm::without_sample_term);

  for (const EnvelopeReport* rep : {&rs, &rg}) {
    REQUIRE(rep->ratios.size() == 3);
    double best = 0.0;
    for (int c = 0; c < 3; ++c) {
      CHECK(rep->ratios(c) ==
            doctest::Approx(rep->quantiles(c) / rep->envelope(c)).epsilon(1e-13));
      best = std::max(best, rep->ratios(c));
    }
    CHECK(rep->c_hat == doctest::Approx(best).epsilon(1e-13));
    CHECK(rep->ratios(rep->arg_u) == doctest::Approx(rep->c_hat).epsilon(1e-13));
    CHECK(rep->c_hat > 0.0);
  }
}

TEST_CASE("norm transfer calibration") {
  const EigenSystem es = make_eigen_system(1.0, 16);
  CHECK_THROWS(norm_transfer_check(es, 200, 10, 1.0, 99, 1));
  const NormTransferReport rep = norm_transfer_check(es, 200, 10, 1.0, 150, 1);
  CHECK(rep.trials == 150);
  CHECK(rep.penalty == doctest::Approx(std::pow(200.0, -1.0 / 3.0) +
                                       std::sqrt(2.0 * std::log(10.0) / 200.0))
                           .epsilon(1e-13));
  CHECK(rep.c2_forward > 0.0);
  CHECK(rep.c2_reverse > 0.0);
  // Unit-norm test functions keep both constants modest.
  CHECK(rep.c2_forward < 10.0);
  CHECK(rep.c2_reverse < 10.0);
}
