#pragma once

#include <cstdint>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "pcabm/gamma.hpp"
#include "pcabm/network.hpp"
#include "pcabm/tabu.hpp"

namespace pcabm {

using SparseMatrix = Eigen::SparseMatrix<double>;

// A'_ij = A_ij exp(-z_ij' gamma) on the edge support; symmetric, zero diagonal.
SparseMatrix adjust(const Network& network, const Eigen::VectorXd& gamma);

struct SpectralEmbedding {
  Eigen::MatrixXd U;            // n x K, orthonormal columns
  Eigen::VectorXd eigenvalues;  // sorted by |lambda| descending, ties towards the larger value
  std::string solver;           // "dense" or "lanczos"
  double max_residual = 0.0;    // max_k ||A u_k - lambda_k u_k||
};

class EigenSolverError : public Error {
 public:
  using Error::Error;
};

struct EigenOptions {
  std::size_t dense_limit = 2000;  // dense decomposition up to this size
  double residual_tolerance = 1e-8;  // relative to ||A||_F
  std::uint64_t seed = 7;           // Lanczos start vector
};

SpectralEmbedding top_k_eigen(const SparseMatrix& matrix, int K, const EigenOptions& options = {});

struct KMeansOptions {
  double epsilon = 0.05;  // reported only
  int restarts = 10;
  int max_iterations = 300;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct KMeansResult {
  Labeling membership;
  Eigen::MatrixXd centers;  // K x d
  double cost = 0.0;        // sum of squared distances to assigned centers
  int best_restart = 0;
};

// k-means++ seeding followed by Lloyd iterations, best of `restarts`. Rows of `points` are the
// observations. Labels are renumbered by first appearance.
KMeansResult kmeans_approx(const Eigen::MatrixXd& points, int K, const KMeansOptions& options = {});

struct ScwaOptions {
  GammaFitOptions gamma;
  EigenOptions eigen;
  KMeansOptions kmeans;
};

struct ScwaResult {
  GammaFit gamma;
  DetectionResult detection;  // loglik is the profile likelihood at the fitted gamma
  SpectralEmbedding embedding;
  KMeansResult kmeans;
};

// Spectral clustering of the adjusted matrix for a given gamma. gamma = 0 gives plain
// spectral clustering on A.
ScwaResult scwa_with_gamma(const Network& network, const Eigen::VectorXd& gamma, int K,
                           const ScwaOptions& options = {});

// fit_gamma on `init`, then spectral clustering of A'.
ScwaResult scwa_detect(const Network& network, int K, const Labeling& init,
                       const ScwaOptions& options = {});

}  // namespace pcabm
