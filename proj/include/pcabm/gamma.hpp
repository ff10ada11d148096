#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "pcabm/network.hpp"

namespace pcabm {

// A block with edges but no exposure; cannot happen for finite gamma and nonempty blocks.
class ModelDegeneracyError : public Error {
 public:
  using Error::Error;
};

// The bracketed information matrix is singular, i.e. the covariates are (nearly) collinear
// with each other or with a constant.
class CollinearityError : public Error {
 public:
  using Error::Error;
};

// Per-block empirical moments of exp(z'gamma) over ordered pairs s_e(k, l).
struct BlockMoments {
  int K = 0;
  Eigen::MatrixXd theta;                   // mean of exp(z'gamma)
  std::vector<Eigen::VectorXd> mu;         // mean of z exp(z'gamma), index k * K + l
  std::vector<Eigen::MatrixXd> sigma;      // mean of z z' exp(z'gamma)
  Eigen::MatrixXd pair_counts;

  const Eigen::VectorXd& mu_at(int k, int l) const { return mu[static_cast<std::size_t>(k * K + l)]; }
  const Eigen::MatrixXd& sigma_at(int k, int l) const {
    return sigma[static_cast<std::size_t>(k * K + l)];
  }
};

BlockMoments block_moments(const Network& network, const Labeling& labeling,
                           const Eigen::VectorXd& gamma);

struct GammaFitOptions {
  std::optional<Eigen::VectorXd> init;  // defaults to 0, the SBM submodel
  double tolerance = 1e-8;              // on the sup-norm of the gradient
  int max_iterations = 100;
};

struct GammaFit {
  Eigen::VectorXd gamma_hat;
  double loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  double final_grad_norm = 0.0;

  // Filled by gamma_inference().
  bool has_inference = false;
  Eigen::MatrixXd cov;
  Eigen::VectorXd se;
  Eigen::VectorXd t_stats;
};

// l_e(gamma) = sum_{i<j} A_ij z_ij'gamma - 1/2 sum_kl O_kl log E_kl, with 0 log 0 = 0.
double gamma_loglik(const Network& network, const Labeling& labeling, const Eigen::VectorXd& gamma);
Eigen::VectorXd gamma_grad(const Network& network, const Labeling& labeling,
                           const Eigen::VectorXd& gamma);
Eigen::MatrixXd gamma_hessian(const Network& network, const Labeling& labeling,
                              const Eigen::VectorXd& gamma);

// Newton ascent with Armijo backtracking on l_e; falls back to a gradient step when the
// Hessian is not negative definite. Non-convergence is reported, never hidden.
GammaFit fit_gamma(const Network& network, const Labeling& labeling,
                   const GammaFitOptions& options = {});

// Plug-in covariance: cov = [ (sum_{i<j} A_ij / theta) (Sigma - mu mu' / theta) ]^{-1}, using
// global moments over all unordered pairs at gamma_hat.
GammaFit gamma_inference(const Network& network, const Labeling& labeling, GammaFit fit);

}  // namespace pcabm
