#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "addrate/additive_model.hpp"
#include "addrate/eigenbasis.hpp"
#include "addrate/synthgen.hpp"

namespace addrate {

// d x N sign pattern with s nonzero rows; entries in {-1, 0, +1}.
struct PackingMatrix {
  Eigen::MatrixXi a;
  int s = 0;
};

struct SupportPacking {
  int d = 0;
  int s = 0;
  std::vector<std::vector<int>> supports;  // each sorted ascending, size s
};

struct SignPacking {
  int s = 0;
  int n_cols = 0;
  std::vector<Eigen::MatrixXi> fills;  // s x N, entries +-1
};

// Cross product of a support packing and a sign packing, with the induced
// hypothesis functions materialized.
struct PackingSet {
  int d = 0;
  int s = 0;
  int n_cols = 0;  // N: number of basis offsets per component
  double q = 0.5;
  int m_supports = 0;
  int m_fills = 0;
  std::vector<PackingMatrix> members;
  std::vector<AdditiveFunction> functions;
};

// ceil(exp(x)) with a one-sided ulp guard so exact-integer targets stay exact.
long packing_target(double log_target);

// Randomized greedy with rejection; retry budget is 100x the target
// cardinality, and properties are re-verified on the returned set.
SupportPacking support_packing(int d, int s, std::uint64_t seed);
SignPacking sign_packing(int s, int n_cols, std::uint64_t seed);

// Hypothesis function for one pattern: component j carries coefficients
// N^{-1/2} s^{-1/q} a_{jk} sqrt(lambda_{N+k}/Z) on basis indices N+1..2N,
// which puts a fully filled pattern exactly on the unit lq ball boundary.
AdditiveFunction packing_function(const EigenSystem& es, const PackingMatrix& m, int n_cols,
                                  double q);

PackingSet build_packing_set(const EigenSystem& es, int d, int s, int n_cols, double q,
                             std::uint64_t seed);

struct SeparationReport {
  double min_sep_sq = 0.0;
  double bound = 0.0;  // same normalized scale as min_sep_sq
  int arg_i = -1;
  int arg_j = -1;
  bool pass = false;
};
SeparationReport pairwise_separation(const EigenSystem& es, const PackingSet& set);

struct PairCheckRow {
  int i = 0;
  int j = 0;
  double distance_sq = 0.0;
  double bound = 0.0;
  bool pass = false;
};
std::vector<PairCheckRow> separation_rows(const EigenSystem& es, const PackingSet& set);

// Gaussian-shift divergence between the laws of Y under f and g on a fixed
// design: (n / 2 sigma^2) * empirical squared distance.
double kl_pairwise(const AdditiveFunction& f, const AdditiveFunction& g, const Dataset& ds,
                   double sigma);

// 1 - (i_bound + log 2) / log_m, clipped to [0,1].
double fano_from(double log_m, double i_bound);

struct FanoReport {
  double bound = 0.0;           // from the exact information term below
  double bound_envelope = 0.0;  // from the analytic envelope term
  double i_exact = 0.0;         // 2 n max_A ||g_A||^2 / sigma^2, closed form
  double i_envelope = 0.0;      // 2 n N^{-2a} s^{1-2/q} / (Z sigma^2), always >= i_exact
  double log_m = 0.0;
};
FanoReport fano_bound(const EigenSystem& es, const PackingSet& set, int n, double sigma);

struct RateWitness {
  double sparse_value = 0.0;  // (log d / n)^{1-q/2}, witness N = 1, s below
  double smooth_value = 0.0;  // n^{-2a/(2a+1)}, witness s = 1, N below
  bool sparse_dominates = false;
  int s_sparse = 1;
  int n_cols_smooth = 1;
  double c1 = 0.25;
};
RateWitness lower_rate_witness(int n, int d, double q, double alpha, double c1 = 0.25);

}  // namespace addrate
