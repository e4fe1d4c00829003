#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "addrate/eigenbasis.hpp"

namespace addrate {

struct InnerMax {
  double value = 0.0;
  Eigen::VectorXd theta;  // attaining coefficient vector, feasible by construction
};

// Maximizes b . theta over the intersection of the scaled RKHS ellipsoid
// { theta' diag(1/lambda_eff) theta <= 1 } and the norm ball
// { theta' B theta <= u^2 }, where B is the identity (population second
// moment of the basis) or an empirical Gram matrix G when supplied.
// G must be positive semidefinite; the returned point satisfies both
// constraints exactly (violation 0 <= 1e-8).
InnerMax sup_linear_over_ellipsoid_and_ball(const Eigen::VectorXd& b,
                                            const Eigen::ArrayXd& lambdas_eff, double u,
                                            const Eigen::MatrixXd* gram = nullptr);

enum class Multipliers { sign, gauss };
enum class NormConstraint { population, empirical };

struct ComplexityCurve {
  Eigen::ArrayXd u_grid;    // ascending, values in (0,1]
  Eigen::MatrixXd samples;  // replicates x |u_grid|, nondecreasing along each row
  Eigen::ArrayXd mean;
  int n = 0;
  int d = 0;
  double alpha = 0.0;
  int replicates = 0;
  std::uint64_t seed = 0;
  Multipliers multipliers = Multipliers::sign;
  NormConstraint constraint = NormConstraint::population;

  // Per-u empirical (1 - d^-beta) quantile of the replicate samples.
  Eigen::ArrayXd quantile(double beta) const;
};

ComplexityCurve complexity_curve(const EigenSystem& es, int n, int d,
                                 const std::vector<double>& u_grid, int replicates,
                                 std::uint64_t seed, Multipliers multipliers,
                                 NormConstraint constraint, int threads = 1);

// Sign multipliers against the population norm constraint.
ComplexityCurve rademacher_curve(const EigenSystem& es, int n, int d,
                                 const std::vector<double>& u_grid, int replicates,
                                 std::uint64_t seed, int threads = 1);

// Gaussian multipliers against the empirical norm constraint.
ComplexityCurve gaussian_curve(const EigenSystem& es, int n, int d,
                               const std::vector<double>& u_grid, int replicates,
                               std::uint64_t seed, int threads = 1);

enum class EnvelopeForm { with_sample_term, without_sample_term };

struct EnvelopeReport {
  double c_hat = 0.0;       // max over u of quantile / envelope
  int arg_u = 0;            // index of the maximizing u
  double beta = 1.0;
  EnvelopeForm form = EnvelopeForm::with_sample_term;
  Eigen::ArrayXd quantiles;  // (1 - d^-beta) curve
  Eigen::ArrayXd envelope;   // unit-constant envelope values
  Eigen::ArrayXd ratios;
};

// envelope(u) = n^{-1/2} (u^{1-1/(2a)} + u sqrt(beta log d)
//               [+ beta log d / sqrt(n) if with_sample_term] + e^{-d}).
// The sample term belongs to the sign-multiplier curve; by default the form
// follows the curve's multiplier kind.
double envelope_value(double u, int n, int d, double alpha, double beta, EnvelopeForm form);
EnvelopeReport envelope_check(const ComplexityCurve& curve, double beta);
EnvelopeReport envelope_check(const ComplexityCurve& curve, double beta, EnvelopeForm form);

struct NormTransferReport {
  double c2_forward = 0.0;  // population <= c2 (empirical + penalty * rkhs)
  double c2_reverse = 0.0;  // empirical <= c2 (population + penalty * rkhs)
  double penalty = 0.0;     // n^{-a/(2a+1)} + sqrt((beta+1) log d / n)
  int trials = 0;
};

// Empirically calibrates the smallest constant making both norm-transfer
// inequalities hold over `trials` random test functions and designs.
NormTransferReport norm_transfer_check(const EigenSystem& es, int n, int d, double beta, int trials,
                                       std::uint64_t seed);

}  // namespace addrate
