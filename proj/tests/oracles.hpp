#pragma once

// Slow reference implementations used as test oracles. Written directly from the definitions,
// sharing no code with the library beyond the data types.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "pcabm/network.hpp"
#include "pcabm/random.hpp"
#include "pcabm/simgen.hpp"

namespace oracle {

using pcabm::Labeling;
using pcabm::Network;

inline double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

inline double z_dot(const Network& net, std::size_t i, std::size_t j, const Eigen::VectorXd& g) {
  auto z = net.covariates().at(i, j);
  double s = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) s += z[c] * g[static_cast<Eigen::Index>(c)];
  return s;
}

// Double loop over ordered pairs.
struct NaiveBlocks {
  Eigen::MatrixXd O, E, pairs;
  std::vector<double> sizes;
};

inline NaiveBlocks naive_blocks(const Network& net, const Labeling& e, const Eigen::VectorXd& g) {
  const int K = e.K();
  NaiveBlocks b{Eigen::MatrixXd::Zero(K, K), Eigen::MatrixXd::Zero(K, K), Eigen::MatrixXd::Zero(K, K),
                std::vector<double>(static_cast<std::size_t>(K), 0.0)};
  for (std::size_t i = 0; i < net.n(); ++i) {
    b.sizes[static_cast<std::size_t>(e[i])] += 1;
    for (std::size_t j = 0; j < net.n(); ++j) {
      if (i == j) continue;
      b.O(e[i], e[j]) += static_cast<double>(net.weight(i, j));
      b.E(e[i], e[j]) += std::exp(z_dot(net, i, j, g));
      b.pairs(e[i], e[j]) += 1;
    }
  }
  return b;
}

inline double gamma_loglik(const Network& net, const Labeling& e, const Eigen::VectorXd& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < net.n(); ++i)
    for (std::size_t j = i + 1; j < net.n(); ++j) s += static_cast<double>(net.weight(i, j)) * z_dot(net, i, j, g);
  auto b = naive_blocks(net, e, g);
  for (int k = 0; k < e.K(); ++k)
    for (int l = 0; l < e.K(); ++l) s -= 0.5 * xlogy(b.O(k, l), b.E(k, l));
  return s;
}

inline double profile_loglik(const Network& net, const Labeling& e, const Eigen::VectorXd& g) {
  auto b = naive_blocks(net, e, g);
  double s = 0.0;
  for (int k = 0; k < e.K(); ++k)
    for (int l = 0; l < e.K(); ++l)
      if (b.O(k, l) > 0) s += 0.5 * b.O(k, l) * std::log(b.O(k, l) / b.E(k, l));
  const double n = static_cast<double>(net.n());
  for (double nk : b.sizes) s += xlogy(nk, nk / n);
  return s;
}

// Every labeling of n nodes into K nonempty groups (with label symmetry not removed).
inline void for_each_labeling(std::size_t n, int K, const std::function<void(const Labeling&)>& fn) {
  std::vector<int> lab(n, 0);
  for (;;) {
    std::vector<int> seen(static_cast<std::size_t>(K), 0);
    for (int v : lab) seen[static_cast<std::size_t>(v)] = 1;
    if (std::all_of(seen.begin(), seen.end(), [](int s) { return s; })) fn(Labeling(lab, K));
    std::size_t pos = 0;
    while (pos < n && ++lab[pos] == K) lab[pos++] = 0;
    if (pos == n) return;
  }
}

// Rand-index family by counting all unordered node pairs.
inline double ari_pairs(std::span<const int> a, std::span<const int> b) {
  const std::size_t n = a.size();
  double both = 0, in_a = 0, in_b = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
    }
  const double total = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  const double expected = in_a * in_b / total;
  const double maxv = 0.5 * (in_a + in_b);
  if (maxv == expected) return 1.0;
  return (both - expected) / (maxv - expected);
}

inline double nmi_direct(std::span<const int> a, std::span<const int> b) {
  const double n = static_cast<double>(a.size());
  std::map<int, double> ca, cb;
  std::map<std::pair<int, int>, double> cab;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1;
    cb[b[i]] += 1;
    cab[{a[i], b[i]}] += 1;
  }
  double ha = 0, hb = 0, mi = 0;
  for (auto& [k, c] : ca) ha -= c / n * std::log(c / n);
  for (auto& [k, c] : cb) hb -= c / n * std::log(c / n);
  for (auto& [kl, c] : cab) mi += c / n * std::log(c * n / (ca[kl.first] * cb[kl.second]));
  if (ca.size() == 1 && cb.size() == 1) return 1.0;
  return mi / (0.5 * (ha + hb));
}

// Membership-matrix losses straight from the definitions, trying every permutation.
struct Losses {
  double l1, l2;
};

inline Losses losses_enumerated(std::span<const int> pred, std::span<const int> truth, int K) {
  const std::size_t n = pred.size();
  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  double best1 = 1e300, best2 = 1e300;
  do {
    double entries = 0;
    std::vector<double> per(static_cast<std::size_t>(K), 0), nk(static_cast<std::size_t>(K), 0);
    for (std::size_t i = 0; i < n; ++i) {
      nk[static_cast<std::size_t>(truth[i])] += 1;
      for (int c = 0; c < K; ++c) {
        const int mhat = perm[static_cast<std::size_t>(pred[i])] == c;
        const int m = truth[i] == c;
        if (mhat != m) {
          entries += 1;
          per[static_cast<std::size_t>(truth[i])] += 1;
        }
      }
    }
    best1 = std::min(best1, entries / static_cast<double>(n));
    double worst = 0;
    for (int k = 0; k < K; ++k)
      if (nk[static_cast<std::size_t>(k)] > 0)
        worst = std::max(worst, per[static_cast<std::size_t>(k)] / nk[static_cast<std::size_t>(k)]);
    best2 = std::min(best2, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best1, best2};
}

// Small random network with p covariates; normal covariates scaled by `zscale`.
inline Network random_network(std::size_t n, std::size_t p, double density, std::uint64_t seed,
                              double zscale = 0.5, int max_weight = 3) {
  pcabm::Rng rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> g(0, zscale);
  std::uniform_int_distribution<int> w(1, max_weight);
  pcabm::PairCovariates z(n, p);
  std::vector<pcabm::Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      for (auto& v : z.at(i, j)) v = g(rng);
      if (u(rng) < density) edges.push_back({i, j, w(rng)});
    }
  return Network::build(n, std::move(edges), std::move(z));
}

inline Labeling random_labels(std::size_t n, int K, std::uint64_t seed) {
  pcabm::Rng rng(seed);
  return pcabm::random_balanced_labeling(n, K, rng);
}

}  // namespace oracle
