#include "pcabm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace pcabm {

namespace {

constexpr int kMaxPermutationK = 10;

void check_pair(const Labeling& a, const Labeling& b) {
  if (a.size() != b.size()) {
    throw Error("labelings differ in length (" + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) throw Error("labelings need at least 2 nodes");
}

double choose2(std::int64_t x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); }

}  // namespace

ConfusionTable ConfusionTable::of(const Labeling& a, const Labeling& b) {
  if (a.size() != b.size()) throw Error("labelings differ in length");
  ConfusionTable t;
  t.counts.assign(static_cast<std::size_t>(a.K()), std::vector<std::int64_t>(static_cast<std::size_t>(b.K()), 0));
  t.row_sums.assign(static_cast<std::size_t>(a.K()), 0);
  t.col_sums.assign(static_cast<std::size_t>(b.K()), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++t.counts[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])];
    ++t.row_sums[static_cast<std::size_t>(a[i])];
    ++t.col_sums[static_cast<std::size_t>(b[i])];
  }
  t.n = static_cast<std::int64_t>(a.size());
  return t;
}

double ari(const Labeling& a, const Labeling& b) {
  check_pair(a, b);
  const auto t = ConfusionTable::of(a, b);
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& row : t.counts) {
    for (auto c : row) index += choose2(c);
  }
  for (auto c : t.row_sums) sa += choose2(c);
  for (auto c : t.col_sums) sb += choose2(c);
  const double expected = sa * sb / choose2(t.n);
  const double maximum = 0.5 * (sa + sb);
  // Zero denominator only when both partitions are trivial and identical.
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

double nmi(const Labeling& a, const Labeling& b) {
  check_pair(a, b);
  const auto t = ConfusionTable::of(a, b);
  const double n = static_cast<double>(t.n);
  auto entropy = [n](const std::vector<std::int64_t>& sums) {
    double h = 0.0;
    for (auto c : sums) {
      if (c > 0) h -= (c / n) * std::log(c / n);
    }
    return h;
  };
  const double ha = entropy(t.row_sums);
  const double hb = entropy(t.col_sums);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  double mi = 0.0;
  for (std::size_t k = 0; k < t.counts.size(); ++k) {
    for (std::size_t l = 0; l < t.counts[k].size(); ++l) {
      const auto c = t.counts[k][l];
      if (c == 0) continue;
      mi += (c / n) * std::log(c * n / (static_cast<double>(t.row_sums[k]) * static_cast<double>(t.col_sums[l])));
    }
  }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

PermutationLoss l1_l2(const Labeling& predicted, const Labeling& truth) {
  check_pair(predicted, truth);
  const int K = std::max(predicted.K(), truth.K());
  if (K > kMaxPermutationK) {
    throw Error("L1/L2 losses enumerate K! permutations and are limited to K <= 10 (got " +
                std::to_string(K) + "); use ARI or NMI instead");
  }
  // Square table padded to K x K.
  std::vector<std::int64_t> C(static_cast<std::size_t>(K * K), 0);
  std::vector<std::int64_t> nk(static_cast<std::size_t>(K), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++C[static_cast<std::size_t>(predicted[i] * K + truth[i])];
    ++nk[static_cast<std::size_t>(truth[i])];
  }
  const auto n = static_cast<std::int64_t>(truth.size());

  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  std::int64_t best_errors = std::numeric_limits<std::int64_t>::max();
  double best_l2 = std::numeric_limits<double>::infinity();
  PermutationLoss out;
  do {
    std::int64_t hits = 0;
    double worst = 0.0;
    for (int a = 0; a < K; ++a) {
      const int k = perm[static_cast<std::size_t>(a)];
      const auto c = C[static_cast<std::size_t>(a * K + k)];
      hits += c;
      if (nk[static_cast<std::size_t>(k)] > 0) {
        worst = std::max(worst, 2.0 * static_cast<double>(nk[static_cast<std::size_t>(k)] - c) /
                                    static_cast<double>(nk[static_cast<std::size_t>(k)]));
      }
    }
    const std::int64_t errors = n - hits;
    if (errors < best_errors) {
      best_errors = errors;
      out.best_permutation = perm;
    }
    best_l2 = std::min(best_l2, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));

  out.error_count = best_errors;
  out.l1 = 2.0 * static_cast<double>(best_errors) / static_cast<double>(n);
  out.l2 = best_l2;
  if (!(0.0 <= out.l1 && out.l1 <= out.l2 + 1e-12 && out.l2 <= 2.0)) {
    throw Error("loss bound chain 0 <= L1 <= L2 <= 2 violated");
  }
  return out;
}

LossReport evaluate(const Labeling& predicted, const Labeling& truth) {
  LossReport r;
  r.ari = ari(predicted, truth);
  r.nmi = nmi(predicted, truth);
  if (std::max(predicted.K(), truth.K()) <= kMaxPermutationK) {
    auto loss = l1_l2(predicted, truth);
    r.has_losses = true;
    r.error_count = loss.error_count;
    r.l1 = loss.l1;
    r.l2 = loss.l2;
    r.best_permutation = std::move(loss.best_permutation);
  }
  return r;
}

}  // namespace pcabm
