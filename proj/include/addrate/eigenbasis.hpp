#pragma once

#include <Eigen/Dense>

namespace addrate {

// Spectrum of the component kernel on [0,1]. Raw decay weights are k^{-2*alpha};
// norm_const Z = 2*sum(lambdas) rescales the kernel so sup_x K(x,x) = 1, hence
// the effective eigenvalues are lambdas/Z and unit RKHS norm bounds the sup norm.
struct EigenSystem {
  double alpha = 1.0;
  int k_max = 0;
  Eigen::ArrayXd lambdas;
  double norm_const = 1.0;

  Eigen::ArrayXd lambdas_eff() const { return lambdas / norm_const; }
  double lambda_eff(int k) const { return lambdas[k - 1] / norm_const; }
};

// Requires alpha > 1/2 (summable spectrum) and k_max >= 1.
EigenSystem make_eigen_system(double alpha, int k_max);

// sqrt(2)*cos(k*pi*x): orthonormal, mean zero, |phi_k| <= sqrt(2) on [0,1].
double eigenfunction_eval(int k, double x);

// Rows follow x; column k-1 holds phi_k at each point.
Eigen::MatrixXd basis_matrix(int k_max, const Eigen::Ref<const Eigen::VectorXd>& x);

// (1/Z) * sum_k lambda_k phi_k(x) phi_k(y).
double kernel_eval(const EigenSystem& es, double x, double y);

struct ComponentNorms {
  double rkhs = 0.0;
  double l2 = 0.0;
  double sup_estimate = 0.0;  // grid maximum of |f|, a lower estimate of the sup norm
};

double rkhs_norm(const EigenSystem& es, const Eigen::Ref<const Eigen::VectorXd>& theta);
double sup_norm_estimate(const Eigen::Ref<const Eigen::VectorXd>& theta, int grid_points = 10001);
ComponentNorms component_norms(const EigenSystem& es,
                               const Eigen::Ref<const Eigen::VectorXd>& theta,
                               int grid_points = 10001);

}  // namespace addrate
