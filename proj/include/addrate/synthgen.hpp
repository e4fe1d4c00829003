#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "addrate/additive_model.hpp"
#include "addrate/eigenbasis.hpp"

namespace addrate {

struct GenConfig {
  int n = 100;
  int d = 1;
  int k_max = 64;
  double alpha = 1.0;
  double q = 0.5;
  double R = 1.0;
  double sigma = 1.0;
  int s_active = 1;
  std::uint64_t seed = 0;
};

struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd Y;
  AdditiveFunction truth;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index d() const { return X.cols(); }
};

// Draws exactly s_active components on uniformly chosen coordinates, each with
// RKHS norm (R/s_active)^{1/q}, so the truth sits exactly on the ball boundary.
AdditiveFunction sample_truth(const EigenSystem& es, const GenConfig& cfg);

// X iid product-uniform on [0,1]^d, Y = f(X) + sigma * z. The replicate index
// selects an independent substream of cfg-level randomness.
Dataset sample_dataset_from(const AdditiveFunction& truth, int n, double sigma,
                            std::uint64_t seed, std::uint64_t replicate = 0);

// Convenience: fresh truth plus one dataset from the same config.
Dataset sample_dataset(const EigenSystem& es, const GenConfig& cfg);

// (1/n) sum_i g(X_i)^2.
double empirical_l2_sq(const AdditiveFunction& g, const Dataset& ds);

// True when cfg leaves the n^{q/2} <= d <= e^n band the theory presumes;
// callers warn, generation itself proceeds.
bool outside_dimension_band(const GenConfig& cfg);

void validate(const GenConfig& cfg);

}  // namespace addrate
