#include "addrate/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>

#include "addrate/rng.hpp"

namespace addrate {

std::string estimator_kind_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::lq_constrained:
      return "lq_constrained";
    case EstimatorKind::mixed_penalty:
      return "mixed_penalty";
    case EstimatorKind::oracle_single:
      return "oracle_single";
    case EstimatorKind::brute_force:
      return "brute_force";
  }
  return "unknown";
}

namespace {

struct DesignCache {
  int n = 0, d = 0, k = 0;
  std::vector<Eigen::MatrixXd> phi;   // per coordinate: n x k basis columns
  std::vector<Eigen::MatrixXd> gram;  // per coordinate: phi' phi / n
};

DesignCache build_cache(const EigenSystem& es, const Dataset& ds) {
  DesignCache c;
  c.n = ds.n();
  c.d = ds.d();
  c.k = es.k_max;
  c.phi.reserve(static_cast<std::size_t>(c.d));
  c.gram.reserve(static_cast<std::size_t>(c.d));
  for (int j = 0; j < c.d; ++j) {
    c.phi.push_back(basis_matrix(c.k, ds.X.col(j)));
    c.gram.push_back(c.phi.back().transpose() * c.phi.back() / c.n);
  }
  return c;
}

double rkhs_norm_from(const Eigen::VectorXd& theta, const Eigen::ArrayXd& lam_eff) {
  return std::sqrt((theta.array().square() / lam_eff).sum());
}

double mass_q_of(const Eigen::MatrixXd& theta, const Eigen::ArrayXd& lam_eff, double q) {
  double m = 0.0;
  for (Eigen::Index j = 0; j < theta.rows(); ++j) {
    const double h = rkhs_norm_from(theta.row(j).transpose(), lam_eff);
    if (h > 0.0) m += std::pow(h, q);
  }
  return m;
}

Eigen::VectorXd residual_of(const DesignCache& c, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& theta) {
  Eigen::VectorXd r = y;
  for (int j = 0; j < c.d; ++j) {
    if (theta.row(j).squaredNorm() == 0.0) continue;
    r.noalias() -= c.phi[static_cast<std::size_t>(j)] * theta.row(j).transpose();
  }
  return r;
}

struct BcdOut {
  Eigen::MatrixXd theta;
  double risk = 0.0;
  double mass_q = 0.0;
  bool converged = false;
  int sweeps = 0;
  std::vector<double> trace;
};

// One penalized solve at fixed mu: cyclic block descent where each block step
// compares the exact block objective of {zero, current block, reweighted
// ridge candidate} and keeps the smallest, so the objective never increases.
BcdOut bcd_lq(const DesignCache& c, const Eigen::VectorXd& y, const Eigen::ArrayXd& lam_eff,
              double q, double mu, const Eigen::MatrixXd& init, const FitConfig& cfg) {
  BcdOut out;
  out.theta = init;
  Eigen::VectorXd r = residual_of(c, y, out.theta);
  double obj = r.squaredNorm() / c.n + mu * mass_q_of(out.theta, lam_eff, q);
  out.trace.push_back(obj);
  const Eigen::ArrayXd dinv = 1.0 / lam_eff;

  Eigen::VectorXd theta_j(c.k), cvec(c.k), cand(c.k);
  for (int sweep = 0; sweep < cfg.max_outer; ++sweep) {
    for (int j = 0; j < c.d; ++j) {
      const auto& phi = c.phi[static_cast<std::size_t>(j)];
      const auto& g = c.gram[static_cast<std::size_t>(j)];
      theta_j = out.theta.row(j).transpose();
      const bool was_zero = theta_j.squaredNorm() == 0.0;
      if (!was_zero) r.noalias() += phi * theta_j;  // residual without block j
      cvec.noalias() = phi.transpose() * r / c.n;
      const double rr = r.squaredNorm() / c.n;

      auto block_obj = [&](const Eigen::VectorXd& t) {
        double v = rr - 2.0 * cvec.dot(t) + t.dot(g * t);
        const double h = rkhs_norm_from(t, lam_eff);
        if (h > 0.0) v += mu * std::pow(h, q);
        return v;
      };

      double best_val = rr;  // zero block
      Eigen::VectorXd best = Eigen::VectorXd::Zero(c.k);
      if (!was_zero) {
        const double cur = block_obj(theta_j);
        if (cur < best_val) {
          best_val = cur;
          best = theta_j;
        }
      }

      // Reweighted candidate; the scale seed for a zero block comes from a
      // lightly regularized least squares probe.
      double gamma;
      if (!was_zero) {
        gamma = rkhs_norm_from(theta_j, lam_eff);
      } else {
        Eigen::MatrixXd a = g;
        a.diagonal().array() += 1e-10 * (1.0 + g.trace() / c.k);
        gamma = rkhs_norm_from(Eigen::VectorXd(a.ldlt().solve(cvec)), lam_eff);
        // Interpolating designs blow this probe up; no feasible block can
        // exceed R^{1/q}, so seed the reweighting inside that range.
        if (mu > 0.0) gamma = std::min(gamma, std::pow(std::max(cfg.R, 1e-12), 1.0 / q));
      }
      if (gamma > 0.0 || mu == 0.0) {
        for (int it = 0; it < std::max(1, cfg.max_inner); ++it) {
          Eigen::MatrixXd a = g;
          if (mu > 0.0) {
            const double w = mu * 0.5 * q * std::pow(gamma, q - 2.0);
            a.diagonal() += (w * dinv).matrix();
          } else {
            a.diagonal().array() += 1e-12 * (1.0 + g.trace() / c.k);
          }
          cand = a.ldlt().solve(cvec);
          const double gnew = rkhs_norm_from(cand, lam_eff);
          if (mu == 0.0 || gnew <= 0.0) {
            gamma = gnew;
            break;
          }
          const bool settled = std::abs(gnew - gamma) <= 1e-10 * std::max(1.0, gamma);
          gamma = gnew;
          if (settled) break;
        }
        if (gamma > 0.0) {
          const double val = block_obj(cand);
          if (val < best_val) {
            best_val = val;
            best = cand;
          }
        }
      }

      out.theta.row(j) = best.transpose();
      if (best.squaredNorm() != 0.0) r.noalias() -= phi * best;
    }
    r = residual_of(c, y, out.theta);  // kill incremental-update drift
    const double prev = obj;
    obj = r.squaredNorm() / c.n + mu * mass_q_of(out.theta, lam_eff, q);
    out.trace.push_back(obj);
    out.sweeps = sweep + 1;
    if (std::abs(prev - obj) <= cfg.tol * std::max(1.0, std::abs(prev))) {
      out.converged = true;
      break;
    }
  }
  out.risk = r.squaredNorm() / c.n;
  out.mass_q = mass_q_of(out.theta, lam_eff, q);
  return out;
}

struct MuSearchOut {
  BcdOut fit;
  double mu = 0.0;
  bool band_hit = false;
};

// Along theta -> c theta the risk is an exact quadratic in c while the mass
// scales as c^q, so the ray minimizer clamped to the mass boundary is always
// feasible and never raises the risk. Applied to an infeasible iterate the
// clamp projects it onto the boundary.
void radial_polish(const DesignCache& c, const Eigen::VectorXd& y, const Eigen::ArrayXd& lam_eff,
                   const FitConfig& cfg, BcdOut& fit) {
  if (!(fit.mass_q > 0.0) || !(cfg.R > 0.0)) return;
  const Eigen::VectorXd pred = y - residual_of(c, y, fit.theta);
  const double denom = pred.squaredNorm();
  if (!(denom > 0.0)) return;
  const double c_bound = std::pow(cfg.R / fit.mass_q, 1.0 / cfg.q);
  const double c_opt = std::clamp(y.dot(pred) / denom, 0.0, c_bound);
  if (c_opt == 1.0) return;
  fit.theta *= c_opt;
  fit.risk = residual_of(c, y, fit.theta).squaredNorm() / c.n;
  fit.mass_q = mass_q_of(fit.theta, lam_eff, cfg.q);
  fit.trace.push_back(fit.risk);
}

// Exact minimizer of rr - 2 b.w + w' G w over ||w|| <= t in whitened block
// coordinates. G is positive semidefinite, so the problem is convex: either
// the unconstrained stationary point is interior, or a unique Lagrange
// multiplier puts the solution on the sphere; bisection finds it because the
// solution norm is strictly decreasing in the multiplier.
Eigen::VectorXd trs_block_min(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& eig,
                              const Eigen::VectorXd& b, double t) {
  const Eigen::ArrayXd e = eig.eigenvalues().array().max(0.0);
  const Eigen::VectorXd cb = eig.eigenvectors().transpose() * b;
  const double floor = 1e-14 * std::max(e.maxCoeff(), 1e-300);

  bool interior = true;
  double n2 = 0.0;
  Eigen::ArrayXd w = Eigen::ArrayXd::Zero(cb.size());
  for (Eigen::Index i = 0; i < cb.size(); ++i) {
    if (e(i) > floor) {
      w(i) = cb(i) / e(i);
      n2 += w(i) * w(i);
    } else if (std::abs(cb(i)) > 0.0) {
      interior = false;  // gain along a flat direction: push to the boundary
    }
  }
  if (interior && n2 <= t * t) return eig.eigenvectors() * w.matrix();

  double lo = 0.0, hi = cb.norm() / t;  // ||w(nu)|| <= ||b|| / nu caps the root
  if (!(hi > 0.0)) return Eigen::VectorXd::Zero(cb.size());
  for (int it = 0; it < 90; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double norm2 = (cb.array().square() / (e + mid).square()).sum();
    (norm2 > t * t ? lo : hi) = mid;
  }
  Eigen::VectorXd out = eig.eigenvectors() * (cb.array() / (e + hi)).matrix();
  const double wn = out.norm();
  if (wn > 0.0) out *= t / wn;
  return out;
}

// Feasibility-preserving refinement: cyclic descent where each block solves
// its exact trust-region subproblem under the rkhs-norm cap left over by the
// other blocks' mass, followed by pairwise budget reallocation. The current
// block always satisfies its own cap, so no step can raise the risk, and
// total mass stays <= R throughout. This lands the mu-search output, whose
// mass path can jump across the target band when a whole block drops out at
// once, onto a feasible point no single-block or pair move can improve.
class FeasibleDescent {
 public:
  FeasibleDescent(const DesignCache& c, const Eigen::VectorXd& y, const Eigen::ArrayXd& lam_eff,
                  const FitConfig& cfg, BcdOut& fit)
      : c_(c), y_(y), lam_eff_(lam_eff), cfg_(cfg), fit_(fit), s_(lam_eff.sqrt()) {
    eig_.reserve(static_cast<std::size_t>(c.d));
    for (int j = 0; j < c.d; ++j)
      eig_.emplace_back(s_.matrix().asDiagonal() * c.gram[static_cast<std::size_t>(j)] *
                        s_.matrix().asDiagonal());
    r_ = residual_of(c, y, fit.theta);
    block_m_.resize(static_cast<std::size_t>(c.d));
    for (int j = 0; j < c.d; ++j) {
      const double h = rkhs_norm_from(fit.theta.row(j).transpose(), lam_eff);
      block_m_[static_cast<std::size_t>(j)] = h > 0.0 ? std::pow(h, cfg.q) : 0.0;
      total_ += block_m_[static_cast<std::size_t>(j)];
    }
    risk_ = r_.squaredNorm() / c.n;
  }

  void run() {
    for (int pass = 0; pass < 12; ++pass)
      if (!single_pass()) break;
    for (int round = 0; round < 3; ++round) {
      if (!pair_round()) break;
      single_pass();
    }
    fit_.risk = risk_;
    fit_.mass_q = mass_q_of(fit_.theta, lam_eff_, cfg_.q);
  }

 private:
  // Solves block j's trust-region subproblem at rkhs cap budget^{1/q} against
  // residual-without-j; keeps the best of {zero, current, solution} among
  // those within the budget (pair splits can put the cap below the current
  // block's mass, so the incumbent is not automatically admissible).
  Eigen::VectorXd block_solve(int j, const Eigen::VectorXd& cvec, double budget,
                              const Eigen::VectorXd& current) const {
    const auto& g = c_.gram[static_cast<std::size_t>(j)];
    const auto block_risk = [&](const Eigen::VectorXd& t) {
      return t.dot(g * t) - 2.0 * cvec.dot(t);
    };
    Eigen::VectorXd best = Eigen::VectorXd::Zero(c_.k);
    double best_val = 0.0;
    const double h_cur = rkhs_norm_from(current, lam_eff_);
    if ((h_cur > 0.0 ? std::pow(h_cur, cfg_.q) : 0.0) <= budget * (1.0 + 1e-12)) {
      const double val = block_risk(current);
      if (val < best_val) {
        best_val = val;
        best = current;
      }
    }
    if (budget > 0.0) {
      const Eigen::VectorXd w =
          trs_block_min(eig_[static_cast<std::size_t>(j)], (s_ * cvec.array()).matrix(),
                        std::pow(budget, 1.0 / cfg_.q));
      const Eigen::VectorXd cand = (s_ * w.array()).matrix();
      if (block_risk(cand) < best_val) best = cand;
    }
    return best;
  }

  void set_block(int j, const Eigen::VectorXd& v) {
    const double h = rkhs_norm_from(v, lam_eff_);
    total_ -= block_m_[static_cast<std::size_t>(j)];
    block_m_[static_cast<std::size_t>(j)] = h > 0.0 ? std::pow(h, cfg_.q) : 0.0;
    total_ += block_m_[static_cast<std::size_t>(j)];
    fit_.theta.row(j) = v.transpose();
  }

  // Returns false once a full sweep no longer moves the risk.
  bool single_pass() {
    Eigen::VectorXd theta_j(c_.k), cvec(c_.k);
    for (int j = 0; j < c_.d; ++j) {
      const auto& phi = c_.phi[static_cast<std::size_t>(j)];
      theta_j = fit_.theta.row(j).transpose();
      if (theta_j.squaredNorm() != 0.0) r_.noalias() += phi * theta_j;
      cvec.noalias() = phi.transpose() * r_ / c_.n;
      // max() guards the budget against rounding in the running mass total.
      const double m_j = block_m_[static_cast<std::size_t>(j)];
      const Eigen::VectorXd best =
          block_solve(j, cvec, std::max(cfg_.R - (total_ - m_j), m_j), theta_j);
      set_block(j, best);
      if (best.squaredNorm() != 0.0) r_.noalias() -= phi * best;
    }
    r_ = residual_of(c_, y_, fit_.theta);  // kill incremental-update drift
    const double prev = risk_;
    risk_ = r_.squaredNorm() / c_.n;
    fit_.trace.push_back(risk_);
    return std::abs(prev - risk_) > cfg_.tol * std::max(1.0, std::abs(prev));
  }

  // Exact two-block subproblem under the pair's combined budget: for a fixed
  // split both caps are fixed, so alternating trust-region solves converge to
  // the convex joint optimum; a grid plus golden refinement searches the
  // split. Single-block steps cannot shift mass between boundary-constrained
  // blocks (each always absorbs exactly the leftover budget), so this is the
  // move that escapes locked allocations.
  bool pair_round() {
    std::vector<int> order(static_cast<std::size_t>(c_.d));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return block_m_[static_cast<std::size_t>(a)] > block_m_[static_cast<std::size_t>(b)];
    });
    const int top = std::min(c_.d, 8);

    bool improved = false;
    for (int a = 0; a < top; ++a) {
      for (int b = a + 1; b < top; ++b) {
        const int i = order[static_cast<std::size_t>(a)];
        const int j = order[static_cast<std::size_t>(b)];
        const double cap = block_m_[static_cast<std::size_t>(i)] +
                           block_m_[static_cast<std::size_t>(j)] +
                           std::max(cfg_.R - total_, 0.0);
        if (!(cap > 0.0)) continue;
        if (try_pair(i, j, cap)) improved = true;
      }
    }
    if (improved) {
      r_ = residual_of(c_, y_, fit_.theta);
      risk_ = r_.squaredNorm() / c_.n;
      fit_.trace.push_back(risk_);
    }
    return improved;
  }

  bool try_pair(int i, int j, double cap) {
    const auto& phi_i = c_.phi[static_cast<std::size_t>(i)];
    const auto& phi_j = c_.phi[static_cast<std::size_t>(j)];
    const Eigen::VectorXd ti0 = fit_.theta.row(i).transpose();
    const Eigen::VectorXd tj0 = fit_.theta.row(j).transpose();
    Eigen::VectorXd r_ij = r_;
    if (ti0.squaredNorm() != 0.0) r_ij.noalias() += phi_i * ti0;
    if (tj0.squaredNorm() != 0.0) r_ij.noalias() += phi_j * tj0;
    const double base = (r_ij - (phi_i * ti0 + phi_j * tj0)).squaredNorm() / c_.n;

    Eigen::VectorXd best_i = ti0, best_j = tj0;
    double best_risk = base;
    const auto eval_split = [&](double x) {
      Eigen::VectorXd vi = ti0, vj = tj0;
      for (int it = 0; it < 4; ++it) {
        const Eigen::VectorXd ci = phi_i.transpose() * (r_ij - phi_j * vj) / c_.n;
        vi = block_solve(i, ci, x, vi);
        const Eigen::VectorXd cj = phi_j.transpose() * (r_ij - phi_i * vi) / c_.n;
        vj = block_solve(j, cj, cap - x, vj);
      }
      const double risk = (r_ij - (phi_i * vi + phi_j * vj)).squaredNorm() / c_.n;
      if (risk < best_risk) {
        best_risk = risk;
        best_i = vi;
        best_j = vj;
      }
      return risk;
    };

    double xs[5], fs[5];
    int best_k = 0;
    for (int k = 0; k < 5; ++k) {
      xs[k] = cap * k / 4.0;
      fs[k] = eval_split(xs[k]);
      if (fs[k] < fs[best_k]) best_k = k;
    }
    double lo = xs[std::max(best_k - 1, 0)], hi = xs[std::min(best_k + 1, 4)];
    constexpr double kGolden = 0.38196601125010515;
    double x1 = lo + kGolden * (hi - lo), x2 = hi - kGolden * (hi - lo);
    double f1 = eval_split(x1), f2 = eval_split(x2);
    for (int it = 0; it < 8; ++it) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = lo + kGolden * (hi - lo);
        f1 = eval_split(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = hi - kGolden * (hi - lo);
        f2 = eval_split(x2);
      }
    }

    if (!(best_risk < base - 1e-15 * std::max(1.0, base))) return false;
    r_ = r_ij;
    set_block(i, best_i);
    set_block(j, best_j);
    if (best_i.squaredNorm() != 0.0) r_.noalias() -= phi_i * best_i;
    if (best_j.squaredNorm() != 0.0) r_.noalias() -= phi_j * best_j;
    return true;
  }

  const DesignCache& c_;
  const Eigen::VectorXd& y_;
  const Eigen::ArrayXd& lam_eff_;
  const FitConfig& cfg_;
  BcdOut& fit_;
  Eigen::ArrayXd s_;
  std::vector<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>> eig_;
  Eigen::VectorXd r_;
  std::vector<double> block_m_;
  double total_ = 0.0;
  double risk_ = 0.0;
};

void feasible_block_descent(const DesignCache& c, const Eigen::VectorXd& y,
                            const Eigen::ArrayXd& lam_eff, const FitConfig& cfg, BcdOut& fit) {
  if (!(cfg.R > 0.0)) return;
  FeasibleDescent(c, y, lam_eff, cfg, fit).run();
}

// Bisection on the penalty multiplier: mass is decreasing in mu, so bracket
// the constraint boundary and keep the smallest mu whose mass lands in
// [R (1 - mu_tol), R]. A mu = 0 fit that is already interior short-circuits.
MuSearchOut mu_search(const DesignCache& c, const Eigen::VectorXd& y,
                      const Eigen::ArrayXd& lam_eff, const FitConfig& cfg,
                      const Eigen::MatrixXd& init) {
  MuSearchOut out;
  int evals = 0;

  BcdOut fit0 = bcd_lq(c, y, lam_eff, cfg.q, 0.0, init, cfg);
  ++evals;
  if (fit0.mass_q <= cfg.R) {
    out.fit = std::move(fit0);
    out.mu = 0.0;
    out.band_hit = true;
    return out;
  }
  const double lo_band = cfg.R * (1.0 - cfg.mu_tol);

  double mu_lo = 0.0;
  Eigen::MatrixXd theta_lo = fit0.theta;
  // Seed the penalized ladder from the restart init, not from the mu = 0
  // solution: least squares is convex, so warm-starting everything off fit0
  // would erase the diversity the restarts exist to provide.
  double mu_hi = std::max((y.squaredNorm() / c.n) / std::max(cfg.R, 1e-12), 1e-8);
  Eigen::MatrixXd theta_hi = init;
  bool have_hi = false;
  BcdOut feas;
  double mu_feas = 0.0;
  while (evals < cfg.mu_iters) {
    BcdOut f = bcd_lq(c, y, lam_eff, cfg.q, mu_hi, theta_hi, cfg);
    ++evals;
    theta_hi = f.theta;
    if (f.mass_q <= cfg.R) {
      have_hi = true;
      feas = std::move(f);
      mu_feas = mu_hi;
      break;
    }
    mu_lo = mu_hi;
    theta_lo = f.theta;
    mu_hi *= 4.0;
  }
  if (!have_hi) {
    // Budget exhausted while still infeasible; fall back to the empty model.
    out.fit.theta = Eigen::MatrixXd::Zero(init.rows(), init.cols());
    out.fit.risk = y.squaredNorm() / c.n;
    out.fit.trace = {out.fit.risk};
    out.mu = mu_hi;
    return out;
  }

  bool have_cand = feas.mass_q >= lo_band;
  BcdOut cand_fit;
  double mu_cand = mu_feas;
  if (have_cand) cand_fit = feas;

  while (evals < cfg.mu_iters && mu_hi - mu_lo > 1e-12 * mu_hi) {
    const double mid = 0.5 * (mu_lo + mu_hi);
    const Eigen::MatrixXd& warm = (mid - mu_lo <= mu_hi - mid) ? theta_lo : theta_hi;
    BcdOut f = bcd_lq(c, y, lam_eff, cfg.q, mid, warm, cfg);
    ++evals;
    if (f.mass_q > cfg.R) {
      mu_lo = mid;
      theta_lo = std::move(f.theta);
    } else {
      mu_hi = mid;
      theta_hi = f.theta;
      mu_feas = mid;
      if (f.mass_q >= lo_band) {
        have_cand = true;
        mu_cand = mid;
        cand_fit = f;
      }
      feas = std::move(f);
    }
  }

  BcdOut best = have_cand ? std::move(cand_fit) : std::move(feas);
  double best_mu = have_cand ? mu_cand : mu_feas;
  radial_polish(c, y, lam_eff, cfg, best);
  feasible_block_descent(c, y, lam_eff, cfg, best);

  // Mass can jump across the band when a whole block drops out at once; the
  // last infeasible iterate projected onto the boundary is a second candidate
  // that often sits in the basin the feasible side just left.
  const double mass_lo = mass_q_of(theta_lo, lam_eff, cfg.q);
  if (mass_lo > cfg.R) {
    BcdOut proj;
    proj.theta = theta_lo;
    proj.mass_q = mass_lo;
    proj.converged = true;
    radial_polish(c, y, lam_eff, cfg, proj);
    proj.trace = {proj.risk};
    feasible_block_descent(c, y, lam_eff, cfg, proj);
    if (proj.mass_q <= cfg.R && proj.risk < best.risk) {
      best = std::move(proj);
      best_mu = mu_lo;
    }
  }

  out.fit = std::move(best);
  out.mu = best_mu;
  out.band_hit =
      out.fit.mass_q >= lo_band && out.fit.mass_q <= cfg.R * (1.0 + 1e-12);
  return out;
}

void finalize_common(FitResult& res, const EigenSystem& es, const Dataset& ds) {
  res.lq_mass_value = lq_mass(es, res.fhat, res.cfg.q);
  if (ds.truth.theta.rows() == res.fhat.theta.rows() &&
      ds.truth.theta.cols() == res.fhat.theta.cols())
    res.population_error_sq = l2_pi_distance_sq(res.fhat, ds.truth);
  res.active_set = active_components(res.fhat);
}

void validate_common(const EigenSystem& es, const Dataset& ds, double q, double r_cap) {
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in (0,1]");
  if (!(r_cap >= 0.0)) throw std::invalid_argument("R must be >= 0");
  if (ds.n() < 1 || ds.d() < 1) throw std::invalid_argument("dataset must be nonempty");
  if (es.k_max < 1) throw std::invalid_argument("eigen system must have k_max >= 1");
}

}  // namespace

FitResult fit_lq_constrained(const EigenSystem& es, const Dataset& ds, const FitConfig& cfg) {
  validate_common(es, ds, cfg.q, cfg.R);
  if (!(cfg.mu_tol > 0.0 && cfg.mu_tol < 1.0))
    throw std::invalid_argument("mu_tol must lie in (0,1)");
  if (cfg.max_outer < 1 || cfg.mu_iters < 2)
    throw std::invalid_argument("iteration budgets must be positive");

  FitResult res;
  res.kind = EstimatorKind::lq_constrained;
  res.cfg = cfg;

  if (cfg.R == 0.0) {
    res.fhat = zero_additive(ds.d(), es.k_max, es.alpha);
    res.empirical_risk = ds.Y.squaredNorm() / ds.n();
    res.converged = true;
    res.objective_trace = {res.empirical_risk};
    finalize_common(res, es, ds);
    return res;
  }

  const DesignCache cache = build_cache(es, ds);
  const Eigen::ArrayXd lam_eff = es.lambdas_eff();

  const int total_runs = std::max(1, cfg.restarts);
  bool have_best = false;
  bool best_feasible = false;
  double best_risk = 0.0;
  MuSearchOut best;
  int best_run = 0;

  for (int run = 0; run < total_runs; ++run) {
    Eigen::MatrixXd init = Eigen::MatrixXd::Zero(cache.d, cache.k);
    if (run > 0) {
      // Random init: a few random components placed at a random fraction of
      // the mass budget, to escape poor basins of the nonconvex objective.
      auto rng =
          make_stream(cfg.seed, "estimators:lq_restart", static_cast<std::uint64_t>(run));
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::uniform_real_distribution<double> unif(0.2, 1.0);
      const int m = std::min(cache.d, 4);
      std::vector<int> coords(static_cast<std::size_t>(cache.d));
      std::iota(coords.begin(), coords.end(), 0);
      for (int i = 0; i < m; ++i) {
        std::uniform_int_distribution<int> pick(i, cache.d - 1);
        std::swap(coords[static_cast<std::size_t>(i)], coords[static_cast<std::size_t>(pick(rng))]);
      }
      const double h_each = std::pow(unif(rng) * cfg.R / m, 1.0 / cfg.q);
      for (int i = 0; i < m; ++i) {
        Eigen::VectorXd v(cache.k);
        for (int t = 0; t < cache.k; ++t) v(t) = std::sqrt(lam_eff(t)) * gauss(rng);
        const double h = rkhs_norm_from(v, lam_eff);
        if (h > 0.0) init.row(coords[static_cast<std::size_t>(i)]) = (v * (h_each / h)).transpose();
      }
    }
    MuSearchOut ms = mu_search(cache, ds.Y, lam_eff, cfg, init);
    const bool feasible = ms.fit.mass_q <= cfg.R * (1.0 + 1e-6);
    const bool better = !have_best || (feasible && !best_feasible) ||
                        (feasible == best_feasible && ms.fit.risk < best_risk);
    if (better) {
      have_best = true;
      best_feasible = feasible;
      best_risk = ms.fit.risk;
      best = std::move(ms);
      best_run = run;
    }
  }

  res.fhat = AdditiveFunction{es.alpha, std::move(best.fit.theta)};
  res.empirical_risk = best.fit.risk;
  res.mu = best.mu;
  res.converged = best.band_hit && best.fit.converged && best_feasible;
  res.iterations = best.fit.sweeps;
  res.restart_best_index = best_run;
  res.objective_trace = std::move(best.fit.trace);
  finalize_common(res, es, ds);
  return res;
}

namespace {

// Block solver for the two-term convex penalty in whitened coordinates
// w = theta / sqrt(lambda_eff): the rkhs term becomes an_sq * ||w||_2 handled
// by its prox, the empirical-norm term is smoothed with a tiny epsilon and
// folded into the gradient, and step sizes come from backtracking.
struct MixedBlock {
  Eigen::VectorXd w;
  double value = 0.0;
};

MixedBlock mixed_block_solve(const Eigen::MatrixXd& gt, const Eigen::VectorXd& ct, double rr,
                             double a_n, double an_sq, const Eigen::VectorXd& w_init) {
  constexpr double kEps = 1e-12;
  const auto smooth = [&](const Eigen::VectorXd& w, const Eigen::VectorXd& gtw) {
    const double s2 = w.dot(gtw);
    return rr - 2.0 * ct.dot(w) + s2 + a_n * std::sqrt(s2 + kEps * kEps);
  };
  const auto full = [&](const Eigen::VectorXd& w, const Eigen::VectorXd& gtw) {
    return smooth(w, gtw) + an_sq * w.norm();
  };

  Eigen::VectorXd w = w_init;
  Eigen::VectorXd gtw = gt * w;
  double eta = 1.0 / std::max(2.0 * gt.trace(), 1e-12);
  const double eta_cap = eta * 100.0;
  double val = full(w, gtw);
  for (int it = 0; it < 400; ++it) {
    const double gn = std::sqrt(w.dot(gtw) + kEps * kEps);
    const Eigen::VectorXd grad = -2.0 * ct + 2.0 * gtw + (a_n / gn) * gtw;
    const double sm_w = smooth(w, gtw);
    Eigen::VectorXd z;
    Eigen::VectorXd gtz;
    for (int bt = 0; bt < 60; ++bt) {
      z = w - eta * grad;
      const double zn = z.norm();
      z *= std::max(0.0, 1.0 - eta * an_sq / std::max(zn, 1e-300));
      gtz.noalias() = gt * z;
      const Eigen::VectorXd dz = z - w;
      if (smooth(z, gtz) <= sm_w + grad.dot(dz) + dz.squaredNorm() / (2.0 * eta) + 1e-16) break;
      eta *= 0.5;
      if (eta < 1e-18) break;
    }
    const double val_new = full(z, gtz);
    const bool settled = std::abs(val - val_new) <= 1e-11 * std::max(1.0, std::abs(val));
    w = std::move(z);
    gtw = std::move(gtz);
    val = val_new;
    eta = std::min(eta * 1.25, eta_cap);
    if (settled) break;
  }
  return {std::move(w), val};
}

}  // namespace

FitResult fit_mixed_penalty(const EigenSystem& es, const Dataset& ds, const FitConfig& cfg) {
  validate_common(es, ds, cfg.q, cfg.R);
  const double a_n =
      cfg.a_n > 0.0 ? cfg.a_n
                    : std::pow(static_cast<double>(ds.n()), -es.alpha / (2.0 * es.alpha + 1.0));
  const double an_sq = a_n * a_n;

  const DesignCache cache = build_cache(es, ds);
  const Eigen::ArrayXd lam_eff = es.lambdas_eff();
  const Eigen::ArrayXd s = lam_eff.sqrt();
  std::vector<Eigen::MatrixXd> gt;  // whitened block grams
  gt.reserve(static_cast<std::size_t>(cache.d));
  for (int j = 0; j < cache.d; ++j)
    gt.push_back(s.matrix().asDiagonal() * cache.gram[static_cast<std::size_t>(j)] *
                 s.matrix().asDiagonal());

  const auto penalty_of = [&](const Eigen::MatrixXd& theta) {
    double p = 0.0;
    for (int j = 0; j < cache.d; ++j) {
      const Eigen::VectorXd t = theta.row(j).transpose();
      if (t.squaredNorm() == 0.0) continue;
      p += an_sq * rkhs_norm_from(t, lam_eff) +
           a_n * std::sqrt(t.dot(cache.gram[static_cast<std::size_t>(j)] * t));
    }
    return p;
  };

  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(cache.d, cache.k);
  Eigen::VectorXd r = ds.Y;
  double obj = r.squaredNorm() / cache.n;
  std::vector<double> trace{obj};
  bool converged = false;
  int sweeps = 0;

  Eigen::VectorXd theta_j(cache.k), cvec(cache.k), ct(cache.k);
  for (int sweep = 0; sweep < cfg.max_outer; ++sweep) {
    for (int j = 0; j < cache.d; ++j) {
      const auto& phi = cache.phi[static_cast<std::size_t>(j)];
      theta_j = theta.row(j).transpose();
      const bool was_zero = theta_j.squaredNorm() == 0.0;
      if (!was_zero) r.noalias() += phi * theta_j;
      cvec.noalias() = phi.transpose() * r / cache.n;
      const double rr = r.squaredNorm() / cache.n;
      ct = (s * cvec.array()).matrix();

      double best_val = rr;  // zero block
      Eigen::VectorXd best_w = Eigen::VectorXd::Zero(cache.k);
      // Dual screen: the rkhs term alone absorbs any gradient this small.
      if (2.0 * ct.norm() > an_sq) {
        Eigen::VectorXd w0;
        if (was_zero) {
          // One proximal step from the origin as a probe direction.
          const double eta0 = 1.0 / std::max(2.0 * gt[static_cast<std::size_t>(j)].trace(), 1e-12);
          w0 = 2.0 * eta0 * ct;
          const double zn = w0.norm();
          w0 *= std::max(0.0, 1.0 - eta0 * an_sq / std::max(zn, 1e-300));
        } else {
          w0 = (theta_j.array() / s).matrix();
        }
        MixedBlock mb = mixed_block_solve(gt[static_cast<std::size_t>(j)], ct, rr, a_n, an_sq, w0);
        // Exact arbiter: keep the nonzero block only on strict improvement.
        if (mb.value < best_val - 1e-14 * std::max(1.0, rr)) {
          best_val = mb.value;
          best_w = std::move(mb.w);
        }
      }

      theta.row(j) = (s * best_w.array()).matrix().transpose();
      if (best_w.squaredNorm() != 0.0) r.noalias() -= phi * theta.row(j).transpose();
    }
    r = residual_of(cache, ds.Y, theta);
    const double prev = obj;
    obj = r.squaredNorm() / cache.n + penalty_of(theta);
    trace.push_back(obj);
    sweeps = sweep + 1;
    if (std::abs(prev - obj) <= cfg.tol * std::max(1.0, std::abs(prev))) {
      converged = true;
      break;
    }
  }

  FitResult res;
  res.kind = EstimatorKind::mixed_penalty;
  res.cfg = cfg;
  res.fhat = AdditiveFunction{es.alpha, std::move(theta)};
  res.empirical_risk = r.squaredNorm() / cache.n;
  res.a_n = a_n;
  res.converged = converged;
  res.iterations = sweeps;
  res.objective_trace = std::move(trace);
  finalize_common(res, es, ds);
  return res;
}

FitResult fit_oracle_single(const EigenSystem& es, const Dataset& ds, int j, double ridge) {
  if (j < 1 || j > ds.d()) throw std::invalid_argument("oracle coordinate j must satisfy 1 <= j <= d");
  if (!(ridge >= 0.0)) throw std::invalid_argument("ridge must be >= 0");
  if (ds.n() < 1) throw std::invalid_argument("dataset must be nonempty");

  const Eigen::MatrixXd phi = basis_matrix(es.k_max, ds.X.col(j - 1));
  const Eigen::MatrixXd gram = phi.transpose() * phi / ds.n();
  const Eigen::VectorXd cvec = phi.transpose() * ds.Y / ds.n();
  const Eigen::ArrayXd lam_eff = es.lambdas_eff();

  Eigen::MatrixXd a = gram;
  if (ridge > 0.0) {
    a.diagonal() += (ridge / lam_eff).matrix();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const double emax = std::max(std::abs(eig.eigenvalues().maxCoeff()), 1e-300);
    if (eig.eigenvalues().minCoeff() <= 1e-12 * emax)
      throw std::runtime_error("oracle fit: singular block design needs ridge > 0");
  }
  const Eigen::VectorXd theta_j = a.ldlt().solve(cvec);

  FitResult res;
  res.kind = EstimatorKind::oracle_single;
  res.cfg.ridge = ridge;
  res.fhat = zero_additive(ds.d(), es.k_max, es.alpha);
  res.fhat.theta.row(j - 1) = theta_j.transpose();
  const Eigen::VectorXd r = ds.Y - phi * theta_j;
  res.empirical_risk = r.squaredNorm() / ds.n();
  res.converged = true;
  res.iterations = 1;
  res.objective_trace = {res.empirical_risk};
  finalize_common(res, es, ds);
  return res;
}

FitResult brute_force_lse(const EigenSystem& es, const Dataset& ds, double grid_step, double bound,
                          double q, double R) {
  validate_common(es, ds, q, R);
  if (!(grid_step > 0.0)) throw std::invalid_argument("grid step must be > 0");

  const int d = ds.d();
  const int k = es.k_max;
  const int slots = d * k;
  const Eigen::ArrayXd lam_eff = es.lambdas_eff();

  std::vector<int> half(static_cast<std::size_t>(slots));
  double total = 1.0;
  for (int sidx = 0; sidx < slots; ++sidx) {
    const int t = sidx % k;
    const double cap = bound > 0.0 ? bound : std::sqrt(lam_eff(t)) * std::pow(R, 1.0 / q);
    half[static_cast<std::size_t>(sidx)] = static_cast<int>(std::floor(cap / grid_step));
    total *= 2.0 * half[static_cast<std::size_t>(sidx)] + 1.0;
    if (total > 1e8) throw std::invalid_argument("brute force grid exceeds 1e8 points");
  }

  Eigen::MatrixXd phi_all(ds.n(), slots);
  for (int j = 0; j < d; ++j)
    phi_all.middleCols(j * k, k) = basis_matrix(k, ds.X.col(j));
  const Eigen::MatrixXd gram = phi_all.transpose() * phi_all / ds.n();
  const Eigen::VectorXd cvec = phi_all.transpose() * ds.Y / ds.n();
  const double y2 = ds.Y.squaredNorm() / ds.n();

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(slots);
  Eigen::VectorXd gpart = Eigen::VectorXd::Zero(slots);
  Eigen::VectorXd best_theta = theta;
  double best_obj = std::numeric_limits<double>::infinity();
  long leaves = 0;

  // Depth-first over slots; prefix lq mass grows with every assigned value,
  // so infeasible branches are cut as soon as the partial mass exceeds R.
  const std::function<void(int, double, double)> walk = [&](int sidx, double mass_done,
                                                            double block_sum) {
    if (sidx == slots) {
      const double obj = y2 - 2.0 * cvec.dot(theta) + theta.dot(gpart);
      ++leaves;
      if (obj < best_obj) {
        best_obj = obj;
        best_theta = theta;
      }
      return;
    }
    const int t = sidx % k;
    const bool block_end = t == k - 1;
    for (int i = -half[static_cast<std::size_t>(sidx)]; i <= half[static_cast<std::size_t>(sidx)];
         ++i) {
      const double v = i * grid_step;
      const double bsum = block_sum + v * v / lam_eff(t);
      const double partial = mass_done + (bsum > 0.0 ? std::pow(std::sqrt(bsum), q) : 0.0);
      if (partial > R * (1.0 + 1e-12)) continue;
      theta(sidx) = v;
      if (v != 0.0) gpart.noalias() += gram.col(sidx) * v;
      if (block_end)
        walk(sidx + 1, partial, 0.0);
      else
        walk(sidx + 1, mass_done, bsum);
      if (v != 0.0) gpart.noalias() -= gram.col(sidx) * v;
      theta(sidx) = 0.0;
    }
  };
  walk(0, 0.0, 0.0);

  FitResult res;
  res.kind = EstimatorKind::brute_force;
  res.cfg.q = q;
  res.cfg.R = R;
  res.fhat = zero_additive(d, k, es.alpha);
  for (int j = 0; j < d; ++j) res.fhat.theta.row(j) = best_theta.segment(j * k, k).transpose();
  const Eigen::VectorXd r = ds.Y - phi_all * best_theta;
  res.empirical_risk = r.squaredNorm() / ds.n();
  res.converged = true;
  res.iterations = static_cast<int>(std::min<long>(leaves, std::numeric_limits<int>::max()));
  res.objective_trace = {res.empirical_risk};
  finalize_common(res, es, ds);
  return res;
}

BasicInequality basic_inequality_check(const EigenSystem& es, const FitResult& fit,
                                       const Dataset& ds) {
  BasicInequality out;
  if (fit.kind != EstimatorKind::lq_constrained) return out;
  if (ds.truth.theta.rows() != fit.fhat.theta.rows() ||
      ds.truth.theta.cols() != fit.fhat.theta.cols())
    return out;
  if (lq_mass(es, ds.truth, fit.cfg.q) > fit.cfg.R * (1.0 + 1e-8)) return out;
  out.applicable = true;
  const Eigen::VectorXd fhat_vals = eval_additive_batch(fit.fhat, ds.X);
  const Eigen::VectorXd truth_vals = eval_additive_batch(ds.truth, ds.X);
  out.fit_risk = (ds.Y - fhat_vals).squaredNorm() / ds.n();
  out.truth_risk = (ds.Y - truth_vals).squaredNorm() / ds.n();
  out.pass = out.fit_risk <= out.truth_risk + 1e-8 * (1.0 + out.truth_risk);
  return out;
}

}  // namespace addrate
