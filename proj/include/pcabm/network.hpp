#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pcabm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using NodeIndex = std::size_t;

// Number of unordered pairs {i, j}, i != j.
inline std::size_t num_pairs(std::size_t n) { return n * (n - 1) / 2; }

// Row-major position of the unordered pair {i, j} (i < j) in the strict upper triangle.
inline std::size_t pair_index(std::size_t n, NodeIndex i, NodeIndex j) {
  return i * (2 * n - i - 1) / 2 + (j - i - 1);
}

// Dense storage of a symmetric pairwise covariate field: one p-vector per unordered pair,
// laid out contiguously as a num_pairs(n) x p row-major block. z_ii is implicitly zero.
class PairCovariates {
 public:
  PairCovariates() = default;
  PairCovariates(std::size_t n, std::size_t p);

  std::size_t n() const { return n_; }
  std::size_t p() const { return p_; }
  std::size_t size() const { return num_pairs(n_); }

  std::span<const double> pair(std::size_t idx) const { return {data_.data() + idx * p_, p_}; }
  std::span<double> pair(std::size_t idx) { return {data_.data() + idx * p_, p_}; }

  // Either argument order; i != j.
  std::span<const double> at(NodeIndex i, NodeIndex j) const;
  std::span<double> at(NodeIndex i, NodeIndex j);

  // z_ij' gamma for every pair, in pair order.
  std::vector<double> linear_predictor(const Eigen::VectorXd& gamma) const;

  // Appends the columns of `other` (same n).
  PairCovariates concat(const PairCovariates& other) const;
  PairCovariates column(std::size_t c) const;

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t n_ = 0;
  std::size_t p_ = 0;
  std::vector<double> data_;
};

struct Edge {
  NodeIndex i;  // i < j
  NodeIndex j;
  std::int64_t weight;  // > 0
};

struct Neighbor {
  NodeIndex node;
  std::int64_t weight;
};

// Undirected multigraph with integer weights, no self-loops, plus pairwise covariates.
// Immutable once built; obtain one through validate() or Network::build().
class Network {
 public:
  Network() = default;

  // Trusted construction for generators: edges must satisfy i < j, weight > 0, no duplicates.
  // Covariates must have the same n. Ids default to "1".."n".
  static Network build(std::size_t n, std::vector<Edge> edges, PairCovariates covariates,
                       std::vector<std::string> ids = {});

  std::size_t n() const { return n_; }
  std::size_t p() const { return covariates_.p(); }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const Neighbor> neighbors(NodeIndex i) const {
    return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::int64_t weight(NodeIndex i, NodeIndex j) const;
  std::int64_t total_weight() const { return total_weight_; }
  const PairCovariates& covariates() const { return covariates_; }
  const std::vector<std::string>& ids() const { return ids_; }

  Network with_covariates(PairCovariates covariates) const;

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Neighbor> adjacency_;
  PairCovariates covariates_;
  std::vector<std::string> ids_;
  std::int64_t total_weight_ = 0;
};

// Raw, possibly inconsistent input as read from files or supplied by callers. Entries are
// ordered pairs; duplicate entries for the same ordered pair are summed.
struct RawEntry {
  NodeIndex i;
  NodeIndex j;
  double value;
};

struct RawCovariate {
  NodeIndex i;
  NodeIndex j;
  std::vector<double> values;
};

struct RawNetwork {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<RawEntry> adjacency;
  std::vector<RawCovariate> covariates;
  std::vector<std::string> ids;  // optional; defaults to "1".."n"
};

struct ValidationIssue {
  enum class Kind {
    out_of_range,
    nonzero_diagonal,
    invalid_weight,
    asymmetric_adjacency,
    asymmetric_covariate,
    dimension_mismatch,
    too_few_nodes,
  };
  Kind kind;
  NodeIndex i;
  NodeIndex j;
  std::string message;
};

class ValidationError : public Error {
 public:
  ValidationError(std::vector<ValidationIssue> issues, std::size_t total);
  const std::vector<ValidationIssue>& issues() const { return issues_; }  // first 20
  std::size_t total() const { return total_; }

 private:
  std::vector<ValidationIssue> issues_;
  std::size_t total_;
};

// Checks every invariant and returns the canonical network, or throws ValidationError
// enumerating the offending pairs.
Network validate(const RawNetwork& raw);

class Labeling {
 public:
  Labeling() = default;
  // labels are 0-based, each in [0, K).
  Labeling(std::vector<int> labels, int K);
  static Labeling from_one_based(std::span<const int> labels, int K);

  int K() const { return K_; }
  std::size_t size() const { return labels_.size(); }
  int operator[](std::size_t i) const { return labels_[i]; }
  std::span<const int> labels() const { return labels_; }
  std::vector<std::size_t> sizes() const;

  // kappa1 <= n_k / n <= kappa2 for every community.
  bool non_degenerate(double kappa1, double kappa2) const;
  Eigen::MatrixXd membership() const;

  void set(std::size_t i, int label) { labels_[i] = label; }

  friend bool operator==(const Labeling&, const Labeling&) = default;

 private:
  std::vector<int> labels_;
  int K_ = 0;
};

// Sufficient statistics over ordered pairs for a labeling and coefficient vector.
struct BlockStats {
  std::vector<std::size_t> sizes;
  Eigen::MatrixXd O;            // edge weights
  Eigen::MatrixXd E;            // sum of exp(z_ij' gamma)
  Eigen::MatrixXd pair_counts;  // |s_e(k, l)|
};

BlockStats block_stats(const Network& network, const Labeling& labeling,
                       const Eigen::VectorXd& gamma);

std::vector<std::int64_t> degrees(const Network& network);

// Subgraph induced by `keep` (sorted, unique), re-indexed in that order.
Network induced_subgraph(const Network& network, std::span<const NodeIndex> keep);

}  // namespace pcabm
