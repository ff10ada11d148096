#pragma once

#include <cstdint>
#include <vector>

#include "pcabm/network.hpp"

namespace pcabm {

// Contingency counts between two labelings of the same nodes.
struct ConfusionTable {
  std::vector<std::vector<std::int64_t>> counts;  // Ka x Kb
  std::vector<std::int64_t> row_sums;
  std::vector<std::int64_t> col_sums;
  std::int64_t n = 0;

  static ConfusionTable of(const Labeling& a, const Labeling& b);
};

double ari(const Labeling& a, const Labeling& b);
// Mutual information over the arithmetic mean of the two entropies.
double nmi(const Labeling& a, const Labeling& b);

struct PermutationLoss {
  double l1 = 0.0;
  double l2 = 0.0;
  std::int64_t error_count = 0;
  std::vector<int> best_permutation;  // predicted label -> true label, minimizing L1
};

// Exact minimization over all K! label permutations, K = max(K_hat, K_true) <= 10.
// L1 = min_S n^-1 ||M_hat S - M||_0, L2 = min_S max_k n_k^-1 ||(M_hat S - M)_{G_k}||_0.
PermutationLoss l1_l2(const Labeling& predicted, const Labeling& truth);

struct LossReport {
  double ari = 0.0;
  double nmi = 0.0;
  bool has_losses = false;  // false when K > 10
  std::int64_t error_count = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  std::vector<int> best_permutation;
};

LossReport evaluate(const Labeling& predicted, const Labeling& truth);

}  // namespace pcabm
