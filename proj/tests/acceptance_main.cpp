// Acceptance gate: ten pinned experiments, one [PASS]/[FAIL] line each. The
// last criterion is diagnostic; it prints [WARN] on a miss and never affects
// the exit code. Usage:
//   acceptance [criterion ...]
// No arguments runs all ten. Exit code 1 iff a hard criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include <addrate/additive_model.hpp>
#include <addrate/complexity.hpp>
#include <addrate/eigenbasis.hpp>
#include <addrate/estimators.hpp>
#include <addrate/lowerbound.hpp>
#include <addrate/rate_lab.hpp>
#include <addrate/rng.hpp>
#include <addrate/synthgen.hpp>

using namespace addrate;
namespace fs = std::filesystem;

namespace {

int worker_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min<unsigned>(hw == 0 ? 1 : hw, 8));
}

template <class... Args>
std::string fmt(const char* f, Args... args) {
  char buf[768];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

struct Outcome {
  bool ok = false;
  bool soft = false;
  std::string detail;
};

double ols_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double m = static_cast<double>(xs.size());
  double xb = 0.0, yb = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    xb += xs[i];
    yb += ys[i];
  }
  xb /= m;
  yb /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - xb) * (xs[i] - xb);
    sxy += (xs[i] - xb) * (ys[i] - yb);
  }
  return sxy / sxx;
}

// Oracle estimator on a single active component: fitted log-log slope of the
// median squared error against n recovers the smoothness-driven exponent.
Outcome criterion1() {
  SweepSpec spec;
  spec.n_grid = {250, 500, 1000, 2000, 4000};
  spec.d_grid = {10};
  spec.q_grid = {0.5};
  spec.alpha_grid = {1.0};
  spec.replicates = 50;
  spec.sigma = 0.5;
  spec.s_active = 1;
  spec.k_max = 64;
  spec.estimator = "oracle";
  spec.seed = 101;
  spec.threads = worker_threads();
  const auto records = run_rate_sweep(spec);
  const SlopeReport rep = fit_rate_exponent(records, SweepAxis::n);

  Outcome out;
  out.ok = std::abs(rep.slope - (-2.0 / 3.0)) <= 0.15;
  out.detail = fmt("oracle error slope in n: %.4f (se %.4f), target -0.6667 +- 0.15", rep.slope,
                   rep.std_error);
  return out;
}

// Hypothesis packing at (d=32, s=4, N=2, q=0.5, alpha=1): construction
// determinism, the five combinatorial properties, the mass budget, the
// pairwise separation floor, and the information-theoretic bound at the
// witness sample size where the offset count equals c1 * n^{1/(2a+1)}.
Outcome criterion2() {
  const int d = 32, s = 4, n_cols = 2;
  const double q = 0.5;
  const EigenSystem es = make_eigen_system(1.0, 64);
  const PackingSet set = build_packing_set(es, d, s, n_cols, q, 202);
  const PackingSet again = build_packing_set(es, d, s, n_cols, q, 202);

  std::vector<std::string> fails;
  if (set.members.size() != again.members.size())
    fails.push_back("determinism");
  else
    for (std::size_t i = 0; i < set.members.size(); ++i)
      if ((set.members[i].a.array() != again.members[i].a.array()).any()) {
        fails.push_back("determinism");
        break;
      }

  // Supports: full +-1 rows, exactly s of them per member.
  bool rows_ok = true;
  std::set<std::vector<int>> supports;
  std::vector<std::vector<int>> support_of(set.members.size());
  for (std::size_t m = 0; m < set.members.size(); ++m) {
    std::vector<int> sup;
    for (int r = 0; r < d; ++r) {
      const auto row = set.members[m].a.row(r);
      const bool any = (row.array() != 0).any();
      if (!any) continue;
      sup.push_back(r);
      if ((row.array().abs() != 1).any()) rows_ok = false;
    }
    if (static_cast<int>(sup.size()) != s) rows_ok = false;
    supports.insert(sup);
    support_of[m] = std::move(sup);
  }
  if (!rows_ok) fails.push_back("support-rows");

  // Distinct supports keep l1 distance >= s/2 (indicator distance 2(s - o)).
  bool sep_supports = true;
  const std::vector<std::vector<int>> sup_list(supports.begin(), supports.end());
  for (std::size_t i = 0; i < sup_list.size(); ++i)
    for (std::size_t j = i + 1; j < sup_list.size(); ++j) {
      std::vector<int> inter;
      std::set_intersection(sup_list[i].begin(), sup_list[i].end(), sup_list[j].begin(),
                            sup_list[j].end(), std::back_inserter(inter));
      if (4 * (s - static_cast<int>(inter.size())) < s) sep_supports = false;
    }
  if (!sep_supports) fails.push_back("support-separation");

  const long support_target = packing_target(s * std::log(double(d) / s) / 4.0);
  if (set.m_supports < support_target ||
      static_cast<long>(sup_list.size()) != set.m_supports)
    fails.push_back("support-cardinality");

  // Sign fills: the member list is the support x fill cross product, every
  // group carries the same fills, and distinct fills disagree on >= Ns/8
  // entries (Frobenius^2 = 4 * disagreements >= Ns/2).
  std::vector<std::vector<Eigen::MatrixXi>> groups;
  for (std::size_t m = 0; m < set.members.size(); ++m) {
    if (m % static_cast<std::size_t>(set.m_fills) == 0) groups.emplace_back();
    Eigen::MatrixXi fill(s, n_cols);
    for (int r = 0; r < s; ++r)
      fill.row(r) = set.members[m].a.row(support_of[m][static_cast<std::size_t>(r)]);
    groups.back().push_back(std::move(fill));
  }
  bool fills_ok = static_cast<int>(groups.size()) == set.m_supports;
  for (const auto& g : groups) {
    if (static_cast<int>(g.size()) != set.m_fills) fills_ok = false;
    for (std::size_t i = 0; fills_ok && i < g.size(); ++i) {
      if ((g[i].array() != groups.front()[i].array()).any()) fills_ok = false;
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        const int disagree = static_cast<int>((g[i].array() != g[j].array()).count());
        if (8 * disagree < n_cols * s) fills_ok = false;
      }
    }
  }
  if (!fills_ok) fails.push_back("fill-separation");
  const long fill_target = packing_target(n_cols * s / 8.0);
  if (set.m_fills < fill_target) fails.push_back("fill-cardinality");

  double max_mass = 0.0;
  for (const auto& f : set.functions) max_mass = std::max(max_mass, lq_mass(es, f, q));
  if (!(max_mass <= 1.0 + 1e-10)) fails.push_back("mass");

  const SeparationReport sep = pairwise_separation(es, set);
  if (!sep.pass) fails.push_back("pairwise-separation");

  const double c1 = 0.25;
  const int witness_n =
      static_cast<int>(std::llround(std::pow(n_cols / c1, 2.0 * es.alpha + 1.0)));
  const FanoReport fano = fano_bound(es, set, witness_n, 1.0);
  if (!(fano.bound >= 0.5)) fails.push_back("fano");

  Outcome out;
  out.ok = fails.empty();
  std::string failed;
  for (const auto& f : fails) failed += " " + f;
  out.detail = fmt(
      "M=%zu (%d x %d), max mass=%.12f, min sep=%.6e >= %.6e, fano(n=%d)=%.4f%s%s",
      set.members.size(), set.m_supports, set.m_fills, max_mass, sep.min_sep_sq, sep.bound,
      witness_n, fano.bound, fails.empty() ? "" : "; violated:", failed.c_str());
  return out;
}

// Gaussian-shift divergence equals the scaled empirical squared distance; the
// reference side is an independent per-point summation.
Outcome criterion3() {
  const EigenSystem es = make_eigen_system(1.0, 16);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    GenConfig cfg;
    cfg.n = 40;
    cfg.d = 3;
    cfg.k_max = 16;
    cfg.s_active = 1 + t % 3;
    cfg.sigma = 0.5 + 0.5 * (t % 4);
    cfg.seed = 303 + static_cast<std::uint64_t>(t);
    const Dataset ds = sample_dataset(es, cfg);
    GenConfig other = cfg;
    other.seed = 9000 + static_cast<std::uint64_t>(t);
    const AdditiveFunction g = sample_truth(es, other);

    const double kl = kl_pairwise(ds.truth, g, ds, cfg.sigma);
    double direct = 0.0;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      const double delta =
          eval_additive(ds.truth, ds.X.row(i)) - eval_additive(g, ds.X.row(i));
      direct += delta * delta;
    }
    direct /= 2.0 * cfg.sigma * cfg.sigma;
    worst = std::max(worst, std::abs(kl - direct));
  }
  Outcome out;
  out.ok = worst <= 1e-10;
  out.detail = fmt("divergence identity on 100 pairs, worst |diff| = %.3e (tol 1e-10)", worst);
  return out;
}

// Dense grid search over three coefficients under both constraints, refined
// around the incumbent to shave discretization error.
double brute_force_inner_max(const Eigen::VectorXd& b, const Eigen::ArrayXd& lam, double u,
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

// Complexity curves at (n=200, d=20, alpha=1, 2000 replicates, beta=1):
// per-replicate monotonicity for both multiplier kinds, flat envelope
// constants across n in {100, 200, 400}, and the inner maximizer against a
// brute-force grid on three-coefficient instances.
Outcome criterion4() {
  const EigenSystem es = make_eigen_system(1.0, 64);
  const std::vector<double> u_grid = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
  const int reps = 2000, d = 20;
  const double beta = 1.0;
  const int threads = worker_threads();

  const auto monotone = [](const ComplexityCurve& c) {
    for (int r = 0; r < c.samples.rows(); ++r)
      for (int j = 0; j + 1 < c.samples.cols(); ++j)
        if (c.samples(r, j) > c.samples(r, j + 1) + 1e-12) return false;
    return true;
  };

  std::vector<double> log_n, log_chat;
  bool mono_ok = true;
  double chat200 = 0.0;
  for (int n : {100, 200, 400}) {
    const ComplexityCurve curve = rademacher_curve(es, n, d, u_grid, reps, 404, threads);
    if (!monotone(curve)) mono_ok = false;
    const EnvelopeReport rep = envelope_check(curve, beta);
    log_n.push_back(std::log(static_cast<double>(n)));
    log_chat.push_back(std::log(rep.c_hat));
    if (n == 200) chat200 = rep.c_hat;
  }
  const ComplexityCurve gauss = gaussian_curve(es, 200, d, u_grid, reps, 404, threads);
  if (!monotone(gauss)) mono_ok = false;
  const double chat_slope = ols_slope(log_n, log_chat);

  auto rng = make_stream(404, "acceptance:inner_max");
  std::normal_distribution<double> gn(0.0, 1.0);
  std::uniform_real_distribution<double> un(0.0, 1.0);
  const EigenSystem es3 = make_eigen_system(1.0, 3);
  const Eigen::ArrayXd lam3 = es3.lambdas_eff();
  double worst_gap = 0.0;
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd b(3);
    for (int i = 0; i < 3; ++i) b(i) = gn(rng);
    const double u = 0.05 + 0.95 * un(rng);
    Eigen::MatrixXd gram;
    const Eigen::MatrixXd* gp = nullptr;
    if (t % 2 == 1) {
      Eigen::VectorXd x(50);
      for (int i = 0; i < 50; ++i) x(i) = un(rng);
      const Eigen::MatrixXd phi = basis_matrix(3, x);
      gram = phi.transpose() * phi / 50.0;
      gp = &gram;
    }
    const InnerMax im = sup_linear_over_ellipsoid_and_ball(b, lam3, u, gp);
    const double ref = brute_force_inner_max(b, lam3, u, gp);
    worst_gap = std::max(worst_gap, std::abs(im.value - ref));
  }

  Outcome out;
  out.ok = mono_ok && std::abs(chat_slope) <= 0.3 && worst_gap <= 1e-3;
  out.detail = fmt(
      "monotone=%s, c_hat(n=200)=%.3f, c_hat slope in n=%.4f (|.| <= 0.3), "
      "maximizer vs grid worst gap=%.2e (tol 1e-3)",
      mono_ok ? "yes" : "NO", chat200, chat_slope, worst_gap);
  return out;
}

// Constrained fit against exhaustive grid search on the smallest nontrivial
// instances: objectives agree to 1e-3. The noise level keeps the boundary
// gradient flat enough that the grid's own discretization error stays inside
// the tolerance; at sigma >= 0.4 the step-0.02 grid sits 1.5e-3 to 2e-3 above
// the continuous optimum and no solver could satisfy a two-sided comparison.
Outcome criterion5() {
  const EigenSystem es = make_eigen_system(1.0, 2);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    GenConfig cfg;
    cfg.n = 30;
    cfg.d = 2;
    cfg.k_max = 2;
    cfg.q = 0.5;
    cfg.R = 1.0;
    cfg.sigma = 0.2;
    cfg.s_active = 1 + t % 2;
    cfg.seed = 505 + static_cast<std::uint64_t>(t);
    const Dataset ds = sample_dataset(es, cfg);

    FitConfig fc;
    fc.q = 0.5;
    fc.R = 1.0;
    fc.seed = cfg.seed;
    const FitResult lq = fit_lq_constrained(es, ds, fc);
    const FitResult brute = brute_force_lse(es, ds, 0.02, 0.0, fc.q, fc.R);
    worst = std::max(worst, std::abs(lq.empirical_risk - brute.empirical_risk));
  }
  Outcome out;
  out.ok = worst <= 1e-3;
  out.detail = fmt("objective gap to exhaustive search on 10 datasets, worst = %.2e (tol 1e-3)",
                   worst);
  return out;
}

// Every converged constrained fit with a feasible recorded truth must beat
// the truth's empirical risk.
Outcome criterion6() {
  const EigenSystem es = make_eigen_system(1.0, 8);
  int total = 0, applicable = 0, converged = 0, violations = 0;
  for (int n : {60, 120, 240}) {
    for (int d : {2, 3, 5}) {
      for (int rep = 0; rep < 2; ++rep) {
        GenConfig cfg;
        cfg.n = n;
        cfg.d = d;
        cfg.k_max = 8;
        cfg.q = 0.5;
        cfg.R = 1.0;
        cfg.sigma = 0.3;
        cfg.s_active = 1 + (rep + d) % 2;
        cfg.seed = 606 + static_cast<std::uint64_t>(total);
        const Dataset ds = sample_dataset(es, cfg);

        FitConfig fc;
        fc.q = 0.5;
        fc.R = 1.0;
        fc.seed = cfg.seed;
        const FitResult fit = fit_lq_constrained(es, ds, fc);
        const BasicInequality bi = basic_inequality_check(es, fit, ds);
        ++total;
        if (bi.applicable) ++applicable;
        if (fit.converged && bi.applicable) {
          ++converged;
          if (!bi.pass) ++violations;
        }
      }
    }
  }
  Outcome out;
  out.ok = applicable == total && converged >= 1 && violations == 0;
  out.detail = fmt("%d fits, %d applicable, %d converged, %d violations", total, applicable,
                   converged, violations);
  return out;
}

// Grid estimates of the sup norm never exceed the rkhs norm on unit-norm
// component functions (the kernel diagonal is normalized to 1).
Outcome criterion7() {
  const EigenSystem es = make_eigen_system(1.0, 64);
  auto rng = make_stream(707, "acceptance:sup_norm");
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  int failures = 0;
  for (int t = 0; t < 1000; ++t) {
    Eigen::VectorXd theta(64);
    for (int i = 0; i < 64; ++i) theta(i) = gauss(rng);
    theta /= rkhs_norm(es, theta);
    const double sup = sup_norm_estimate(theta);
    worst = std::max(worst, sup);
    if (sup > 1.0 + 1e-10) ++failures;
  }
  Outcome out;
  out.ok = failures == 0;
  out.detail = fmt("1000 unit-norm functions, max grid sup = %.6f (must be <= 1)", worst);
  return out;
}

// Component-sum identity: exact on single components, Monte Carlo ratio
// within 5%% of 1 on multi-component functions at 1e5 samples.
Outcome criterion8() {
  const EigenSystem es = make_eigen_system(1.0, 16);
  auto rng = make_stream(808, "acceptance:re_cond");
  std::normal_distribution<double> gauss(0.0, 1.0);
  int exact_fail = 0, mc_fail = 0;
  double worst_ratio = 1.0;
  for (int t = 0; t < 20; ++t) {
    AdditiveFunction single = zero_additive(1, 16, 1.0);
    for (int k = 0; k < 16; ++k) single.theta(0, k) = gauss(rng);
    const RatioReport ex = re_condition_check(single, 100000, 808 + t);
    if (!ex.exact || ex.ratio != 1.0) ++exact_fail;

    const int d = 2 + t % 5;
    AdditiveFunction multi = zero_additive(d, 16, 1.0);
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < 16; ++k) multi.theta(j, k) = gauss(rng) * std::pow(k + 1.0, -1.0);
    const RatioReport mc = re_condition_check(multi, 100000, 808 + t);
    if (std::abs(mc.ratio - 1.0) > std::abs(worst_ratio - 1.0)) worst_ratio = mc.ratio;
    if (mc.ratio < 0.95 || mc.ratio > 1.05) ++mc_fail;
  }
  Outcome out;
  out.ok = exact_fail == 0 && mc_fail == 0;
  out.detail = fmt("20 exact single-component checks, 20 MC ratios at 1e5 samples, worst ratio "
                   "%.4f (band [0.95, 1.05])",
                   worst_ratio);
  return out;
}

// The regime classifier equals the argmax of the two rate terms away from
// both boundaries, and the boundary-smoothness diagram row is all sparse.
Outcome criterion9() {
  auto rng = make_stream(909, "acceptance:classifier");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int accepted = 0, disagreements = 0;
  while (accepted < 1000) {
    const int n = static_cast<int>(std::lround(std::exp(std::log(30.0) + unif(rng) * 7.4)));
    const double d = std::exp(std::log(3.0) + unif(rng) * std::log(1e4 / 3.0));
    const double q = 0.05 + 0.95 * unif(rng);
    const double alpha = 0.55 + 2.95 * unif(rng);
    if (std::abs(alpha - (1.0 / q - 0.5)) < 0.05) continue;
    const RateBreakdown r = theoretical_rate(n, d, q, alpha);
    if (std::max(r.sparse_term, r.smooth_term) < 1.05 * std::min(r.sparse_term, r.smooth_term))
      continue;
    ++accepted;
    const Regime expected = r.sparse_term >= r.smooth_term ? Regime::sparse : Regime::smooth;
    if (regime_classify(n, d, q, alpha) != expected) ++disagreements;
  }

  const fs::path csv = fs::temp_directory_path() /
                       ("addrate_acceptance_phase_" + std::to_string(::getpid()) + ".csv");
  std::vector<double> v_grid;
  for (int i = 0; i <= 30; ++i) v_grid.push_back(1.5 * i / 30.0);
  phase_diagram({1.5}, v_grid, 4096, 0.5, csv.string(), "");
  int rows = 0, sparse_rows = 0;
  {
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      ++rows;
      if (line.find(",Sparse,") != std::string::npos) ++sparse_rows;
    }
  }
  std::error_code ec;
  fs::remove(csv, ec);

  Outcome out;
  out.ok = disagreements == 0 && rows == 31 && sparse_rows == rows;
  out.detail = fmt("%d/1000 argmax agreements, boundary row %d/%d sparse",
                   1000 - disagreements, sparse_rows, rows);
  return out;
}

// Diagnostic dimension scaling of the constrained estimator deep in the
// sparse regime; Monte Carlo noise at this scale is expected, so a miss is
// reported for review rather than failing the gate.
Outcome criterion10() {
  std::vector<SweepRecord> records;
  for (int d : {16, 64, 256, 1024}) {
    SweepSpec spec;
    spec.n_grid = {500};
    spec.d_grid = {d};
    spec.q_grid = {0.5};
    spec.alpha_grid = {2.0};
    spec.replicates = 30;
    spec.sigma = 0.5;
    spec.s_active = static_cast<int>(
        std::ceil(std::pow(500.0 / std::log(static_cast<double>(d)), 0.25)));
    spec.k_max = 16;
    spec.estimator = "lq";
    spec.fit.restarts = 2;
    spec.fit.mu_iters = 24;
    spec.fit.max_outer = 30;
    spec.seed = 1010 + static_cast<std::uint64_t>(d);
    spec.threads = worker_threads();
    const auto recs = run_rate_sweep(spec);
    records.insert(records.end(), recs.begin(), recs.end());
  }
  const SlopeReport rep = fit_rate_exponent(records, SweepAxis::d);

  Outcome out;
  out.soft = true;
  out.ok = std::abs(rep.slope - 0.75) <= 0.5;
  out.detail = fmt("constrained error slope in log log d: %.4f (se %.4f), target 0.75 +- 0.5",
                   rep.slope, rep.std_error);
  return out;
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

constexpr Criterion kCriteria[] = {
    {1, "oracle smooth-rate slope", criterion1},
    {2, "packing suite", criterion2},
    {3, "divergence identity", criterion3},
    {4, "complexity envelopes", criterion4},
    {5, "brute-force equivalence", criterion5},
    {6, "basic inequality", criterion6},
    {7, "sup-norm bound", criterion7},
    {8, "restricted-eigenvalue exactness", criterion8},
    {9, "regime classifier", criterion9},
    {10, "sparse-regime d-scaling (diagnostic)", criterion10},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "all") continue;
    try {
      const int id = std::stoi(arg);
      if (id < 1 || id > 10) throw std::out_of_range(arg);
      which.push_back(id);
    } catch (const std::exception&) {
      std::fprintf(stderr, "usage: acceptance [criterion ...] with criteria in 1..10\n");
      return 2;
    }
  }
  if (which.empty())
    for (const auto& c : kCriteria) which.push_back(c.id);

  int hard_failures = 0, hard_total = 0;
  for (int id : which) {
    const Criterion& crit = kCriteria[id - 1];
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome out = crit.run();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = out.ok ? "[PASS]" : (out.soft ? "[WARN]" : "[FAIL]");
    std::printf("%s c%-2d %s: %s (%.1fs)\n", tag, crit.id, crit.name, out.detail.c_str(), secs);
    std::fflush(stdout);
    if (!out.soft) {
      ++hard_total;
      if (!out.ok) ++hard_failures;
    }
  }
  if (hard_total > 0)
    std::printf("acceptance: %d/%d hard criteria pass\n", hard_total - hard_failures, hard_total);
  return hard_failures == 0 ? 0 : 1;
}
