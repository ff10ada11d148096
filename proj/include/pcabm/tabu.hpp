#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "pcabm/gamma.hpp"
#include "pcabm/network.hpp"

namespace pcabm {

// l_gamma(e) = 1/2 sum_kl O_kl log(O_kl / E_kl) + sum_k n_k log(n_k / n), with 0 log 0 = 0.
// Throws if any community is empty.
double profile_loglik(const Network& network, const Labeling& labeling, const Eigen::VectorXd& gamma);

// exp(z_ij' gamma) for every unordered pair; fixed for the duration of a search.
class PairWeights {
 public:
  PairWeights(const Network& network, const Eigen::VectorXd& gamma);
  double operator()(NodeIndex i, NodeIndex j) const {
    if (i > j) std::swap(i, j);
    return w_[pair_index(n_, i, j)];
  }
  std::size_t n() const { return n_; }
  const Eigen::VectorXd& gamma() const { return gamma_; }

 private:
  std::size_t n_;
  Eigen::VectorXd gamma_;
  std::vector<double> w_;
};

// Incremental profile-likelihood state for single-node relabels and label swaps.
// Keeps O, E, sizes plus per-node edge weight and exposure towards each community.
class SearchState {
 public:
  SearchState(const Network& network, std::shared_ptr<const PairWeights> weights, Labeling labeling);

  double objective() const { return objective_; }
  const Labeling& labeling() const { return labeling_; }
  const Eigen::MatrixXd& O() const { return O_; }
  const Eigen::MatrixXd& E() const { return E_; }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  // Exact change of the objective; 0 when new_label equals the current label. Moves that
  // would empty a community return -infinity.
  double move_delta(NodeIndex node, int new_label) const;
  // Exchanges the labels of i and j; 0 if they share a label.
  double swap_delta(NodeIndex i, NodeIndex j) const;

  void apply_move(NodeIndex node, int new_label);
  void apply_swap(NodeIndex i, NodeIndex j);

  // Max relative deviation of the cached O, E, sizes from a from-scratch recomputation.
  double audit() const;

 private:
  double edge_to(NodeIndex i, int k) const { return edge_to_[i * K_ + static_cast<std::size_t>(k)]; }
  double expo_to(NodeIndex i, int k) const { return expo_to_[i * K_ + static_cast<std::size_t>(k)]; }
  void relabel(NodeIndex node, int to);

  const Network& net_;
  std::shared_ptr<const PairWeights> weights_;
  Labeling labeling_;
  std::size_t K_;
  Eigen::MatrixXd O_;
  Eigen::MatrixXd E_;
  std::vector<std::size_t> sizes_;
  std::vector<double> edge_to_;
  std::vector<double> expo_to_;
  double objective_ = 0.0;
};

enum class MoveSet {
  swap_and_relabel,  // pair swaps plus single-node relabels
  swap_only,         // pair swaps only; community sizes stay fixed
};

struct TabuOptions {
  // Zero selects the default: tenure ceil(n/10), patience 50 n, max_iters 2000 n,
  // restarts 5.
  std::int64_t max_iters = 0;
  std::int64_t tabu_tenure = 0;
  int restarts = 0;
  std::int64_t patience = 0;
  std::uint64_t seed = 1;
  MoveSet moves = MoveSet::swap_and_relabel;
  double relabel_probability = 0.5;  // share of relabel proposals under swap_and_relabel
  // When patience runs out, scan the whole neighbourhood and take the best improving move
  // instead of stopping. The search then ends only at a local optimum (or at max_iters).
  bool exhaustive_check = true;
  int threads = 1;
};

struct DetectionResult {
  Labeling labeling;
  double loglik = 0.0;
  std::vector<double> trace;  // objective after each accepted move of the winning restart
  int restarts_best = 0;
};

// Greedy improvement with a tabu list. Restart 0 starts from `init`; later restarts start
// from random balanced labelings. Deterministic given the seed.
DetectionResult tabu_search(const Network& network, const Eigen::VectorXd& gamma,
                            const Labeling& init, const TabuOptions& options);

struct MleResult {
  GammaFit gamma;
  DetectionResult detection;
};

// Fit gamma on `init`, then tabu search from `init` with gamma fixed.
MleResult fit_mle0(const Network& network, int K, const Labeling& init,
                   const GammaFitOptions& gamma_options = {}, const TabuOptions& tabu_options = {});

}  // namespace pcabm
