#include "addrate/lowerbound.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "addrate/rng.hpp"

namespace addrate {

long packing_target(double log_target) {
  if (!(log_target >= 0.0)) throw std::invalid_argument("packing target exponent must be >= 0");
  return static_cast<long>(std::ceil(std::exp(log_target) - 1e-9));
}

namespace {

int overlap_sorted(const std::vector<int>& a, const std::vector<int>& b) {
  int ov = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++ov;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return ov;
}

}  // namespace

SupportPacking support_packing(int d, int s, std::uint64_t seed) {
  if (s < 1 || s > d) throw std::invalid_argument("support packing needs 1 <= s <= d");
  const long target = packing_target(0.25 * s * std::log(static_cast<double>(d) / s));
  const long budget = 100 * target;

  auto rng = make_stream(seed, "lowerbound:support");
  std::vector<int> pool(static_cast<std::size_t>(d));
  std::iota(pool.begin(), pool.end(), 0);

  SupportPacking out;
  out.d = d;
  out.s = s;
  for (long attempt = 0; attempt < budget && static_cast<long>(out.supports.size()) < target;
       ++attempt) {
    // Partial Fisher-Yates draw of an s-subset, canonicalized by sorting.
    for (int i = 0; i < s; ++i) {
      std::uniform_int_distribution<int> pick(i, d - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<int> cand(pool.begin(), pool.begin() + s);
    std::sort(cand.begin(), cand.end());

    bool ok = true;
    for (const auto& acc : out.supports) {
      // l1 distance of indicators is 2(s - overlap); require >= s/2.
      if (4 * (s - overlap_sorted(cand, acc)) < s) {
        ok = false;
        break;
      }
    }
    if (ok) out.supports.push_back(std::move(cand));
  }
  if (static_cast<long>(out.supports.size()) < target)
    throw std::runtime_error("support packing: retry budget exhausted before reaching target");
  return out;
}

SignPacking sign_packing(int s, int n_cols, std::uint64_t seed) {
  if (s < 1 || n_cols < 1) throw std::invalid_argument("sign packing needs s >= 1 and N >= 1");
  const long target = packing_target(n_cols * s / 8.0);
  const long budget = 100 * target;

  auto rng = make_stream(seed, "lowerbound:sign");
  std::bernoulli_distribution coin(0.5);

  SignPacking out;
  out.s = s;
  out.n_cols = n_cols;
  for (long attempt = 0; attempt < budget && static_cast<long>(out.fills.size()) < target;
       ++attempt) {
    Eigen::MatrixXi cand(s, n_cols);
    for (int i = 0; i < s; ++i)
      for (int k = 0; k < n_cols; ++k) cand(i, k) = coin(rng) ? 1 : -1;

    bool ok = true;
    for (const auto& acc : out.fills) {
      // Frobenius gap is 4 * disagreements; require >= N s / 2.
      const int disagreements = static_cast<int>((cand.array() != acc.array()).count());
      if (8 * disagreements < n_cols * s) {
        ok = false;
        break;
      }
    }
    if (ok) out.fills.push_back(std::move(cand));
  }
  if (static_cast<long>(out.fills.size()) < target)
    throw std::runtime_error("sign packing: retry budget exhausted before reaching target");
  return out;
}

AdditiveFunction packing_function(const EigenSystem& es, const PackingMatrix& m, int n_cols,
                                  double q) {
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in (0,1]");
  if (m.a.cols() != n_cols) throw std::invalid_argument("pattern width must equal N");
  if (2 * n_cols > es.k_max)
    throw std::invalid_argument("packing function needs 2N <= k_max of the eigen system");
  if (m.s < 1) throw std::invalid_argument("pattern must have at least one active row");

  const int d = static_cast<int>(m.a.rows());
  AdditiveFunction f = zero_additive(d, es.k_max, es.alpha);
  const double scale = 1.0 / (std::sqrt(static_cast<double>(n_cols)) *
                              std::pow(static_cast<double>(m.s), 1.0 / q));
  const Eigen::ArrayXd lam_eff = es.lambdas_eff();
  for (int j = 0; j < d; ++j) {
    for (int k = 0; k < n_cols; ++k) {
      const int a = m.a(j, k);
      if (a == 0) continue;
      const int col = n_cols + k;  // 0-based slot of basis index N + k + 1
      f.theta(j, col) = scale * a * std::sqrt(lam_eff(col));
    }
  }
  return f;
}

PackingSet build_packing_set(const EigenSystem& es, int d, int s, int n_cols, double q,
                             std::uint64_t seed) {
  SupportPacking sup = support_packing(d, s, seed);
  SignPacking sgn = sign_packing(s, n_cols, seed);

  PackingSet set;
  set.d = d;
  set.s = s;
  set.n_cols = n_cols;
  set.q = q;
  set.m_supports = static_cast<int>(sup.supports.size());
  set.m_fills = static_cast<int>(sgn.fills.size());
  set.members.reserve(static_cast<std::size_t>(set.m_supports) * set.m_fills);
  set.functions.reserve(set.members.capacity());
  for (const auto& support : sup.supports) {
    for (const auto& fill : sgn.fills) {
      PackingMatrix m;
      m.a = Eigen::MatrixXi::Zero(d, n_cols);
      m.s = s;
      for (int r = 0; r < s; ++r) m.a.row(support[static_cast<std::size_t>(r)]) = fill.row(r);
      set.functions.push_back(packing_function(es, m, n_cols, q));
      set.members.push_back(std::move(m));
    }
  }
  return set;
}

namespace {

double separation_floor(const EigenSystem& es, const PackingSet& set) {
  // 2^{-1-2a} N^{-2a} s^{1-2/q} on the raw eigenvalue scale, then normalized.
  const double a2 = 2.0 * es.alpha;
  return std::pow(2.0, -1.0 - a2) * std::pow(static_cast<double>(set.n_cols), -a2) *
         std::pow(static_cast<double>(set.s), 1.0 - 2.0 / set.q) / es.norm_const;
}

}  // namespace

SeparationReport pairwise_separation(const EigenSystem& es, const PackingSet& set) {
  if (set.functions.size() < 2)
    throw std::invalid_argument("pairwise separation needs at least two members");
  SeparationReport rep;
  rep.bound = separation_floor(es, set);
  rep.min_sep_sq = std::numeric_limits<double>::infinity();
  const int m = static_cast<int>(set.functions.size());
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double dist = l2_pi_distance_sq(set.functions[static_cast<std::size_t>(i)],
                                            set.functions[static_cast<std::size_t>(j)]);
      if (dist < rep.min_sep_sq) {
        rep.min_sep_sq = dist;
        rep.arg_i = i;
        rep.arg_j = j;
      }
    }
  }
  // The minimizing pair can land exactly on the floor; allow 1e-12 relative slack.
  rep.pass = rep.min_sep_sq >= rep.bound * (1.0 - 1e-12);
  return rep;
}

std::vector<PairCheckRow> separation_rows(const EigenSystem& es, const PackingSet& set) {
  const double bound = separation_floor(es, set);
  std::vector<PairCheckRow> rows;
  const int m = static_cast<int>(set.functions.size());
  rows.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      PairCheckRow row;
      row.i = i;
      row.j = j;
      row.distance_sq = l2_pi_distance_sq(set.functions[static_cast<std::size_t>(i)],
                                          set.functions[static_cast<std::size_t>(j)]);
      row.bound = bound;
      row.pass = row.distance_sq >= bound * (1.0 - 1e-12);
      rows.push_back(row);
    }
  }
  return rows;
}

double kl_pairwise(const AdditiveFunction& f, const AdditiveFunction& g, const Dataset& ds,
                   double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("kl divergence needs sigma > 0");
  const double dist = empirical_l2_sq(difference(f, g), ds);
  return ds.n() * dist / (2.0 * sigma * sigma);
}

double fano_from(double log_m, double i_bound) {
  if (!(log_m > 0.0)) throw std::invalid_argument("fano bound needs log M > 0");
  if (!(i_bound >= 0.0)) throw std::invalid_argument("information bound must be >= 0");
  const double v = 1.0 - (i_bound + std::log(2.0)) / log_m;
  return std::clamp(v, 0.0, 1.0);
}

FanoReport fano_bound(const EigenSystem& es, const PackingSet& set, int n, double sigma) {
  if (set.functions.size() < 2) throw std::invalid_argument("fano bound needs at least 2 members");
  if (n < 1) throw std::invalid_argument("fano bound needs n >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("fano bound needs sigma > 0");

  FanoReport rep;
  rep.log_m = std::log(static_cast<double>(set.functions.size()));

  double max_norm_sq = 0.0;
  for (const auto& f : set.functions) max_norm_sq = std::max(max_norm_sq, l2_pi_norm_sq(f));
  rep.i_exact = 2.0 * n * max_norm_sq / (sigma * sigma);

  const double a2 = 2.0 * es.alpha;
  rep.i_envelope = 2.0 * n * std::pow(static_cast<double>(set.n_cols), -a2) *
                   std::pow(static_cast<double>(set.s), 1.0 - 2.0 / set.q) /
                   (es.norm_const * sigma * sigma);

  rep.bound = fano_from(rep.log_m, rep.i_exact);
  rep.bound_envelope = fano_from(rep.log_m, rep.i_envelope);
  return rep;
}

RateWitness lower_rate_witness(int n, int d, double q, double alpha, double c1) {
  if (n < 1) throw std::invalid_argument("rate witness needs n >= 1");
  if (d < 2) throw std::invalid_argument("rate witness needs d >= 2");
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("q must lie in (0,1]");
  if (!(alpha > 0.5)) throw std::invalid_argument("alpha must exceed 1/2");
  if (!(c1 > 0.0)) throw std::invalid_argument("rate witness needs c1 > 0");

  RateWitness w;
  w.c1 = c1;
  const double logd = std::log(static_cast<double>(d));
  w.sparse_value = std::pow(logd / n, 1.0 - q / 2.0);
  w.smooth_value = std::pow(static_cast<double>(n), -2.0 * alpha / (2.0 * alpha + 1.0));
  w.sparse_dominates = w.sparse_value >= w.smooth_value;
  w.s_sparse = std::max(1, static_cast<int>(std::llround(c1 * std::pow(n / logd, q / 2.0))));
  w.n_cols_smooth =
      std::max(1, static_cast<int>(std::llround(c1 * std::pow(n, 1.0 / (2.0 * alpha + 1.0)))));
  return w;
}

}  // namespace addrate
