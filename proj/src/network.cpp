#include "pcabm/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>
#include <utility>

namespace pcabm {

PairCovariates::PairCovariates(std::size_t n, std::size_t p)
    : n_(n), p_(p), data_(num_pairs(n) * p, 0.0) {}

std::span<const double> PairCovariates::at(NodeIndex i, NodeIndex j) const {
  if (i > j) std::swap(i, j);
  return pair(pair_index(n_, i, j));
}

std::span<double> PairCovariates::at(NodeIndex i, NodeIndex j) {
  if (i > j) std::swap(i, j);
  return pair(pair_index(n_, i, j));
}

std::vector<double> PairCovariates::linear_predictor(const Eigen::VectorXd& gamma) const {
  if (static_cast<std::size_t>(gamma.size()) != p_) {
    throw Error("coefficient vector has length " + std::to_string(gamma.size()) +
                ", covariates have p = " + std::to_string(p_));
  }
  std::vector<double> eta(size(), 0.0);
  if (p_ == 0) return eta;
  for (std::size_t idx = 0; idx < eta.size(); ++idx) {
    const double* z = data_.data() + idx * p_;
    double s = 0.0;
    for (std::size_t c = 0; c < p_; ++c) s += z[c] * gamma[static_cast<Eigen::Index>(c)];
    eta[idx] = s;
  }
  return eta;
}

PairCovariates PairCovariates::concat(const PairCovariates& other) const {
  if (other.n_ != n_) throw Error("covariate blocks have different node counts");
  PairCovariates out(n_, p_ + other.p_);
  for (std::size_t idx = 0; idx < size(); ++idx) {
    auto dst = out.pair(idx);
    auto a = pair(idx);
    auto b = other.pair(idx);
    std::copy(a.begin(), a.end(), dst.begin());
    std::copy(b.begin(), b.end(), dst.begin() + static_cast<std::ptrdiff_t>(p_));
  }
  return out;
}

PairCovariates PairCovariates::column(std::size_t c) const {
  if (c >= p_) throw Error("covariate column out of range");
  PairCovariates out(n_, 1);
  for (std::size_t idx = 0; idx < size(); ++idx) out.pair(idx)[0] = pair(idx)[c];
  return out;
}

namespace {

std::vector<std::string> default_ids(std::size_t n) {
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i + 1);
  return ids;
}

}  // namespace

Network Network::build(std::size_t n, std::vector<Edge> edges, PairCovariates covariates,
                       std::vector<std::string> ids) {
  if (n < 2) throw Error("a network needs at least 2 nodes");
  if (covariates.n() == 0 && covariates.p() == 0) covariates = PairCovariates(n, 0);
  if (covariates.n() != n) throw Error("covariates were built for a different node count");
  if (ids.empty()) ids = default_ids(n);
  if (ids.size() != n) throw Error("id map size does not match node count");

  Network net;
  net.n_ = n;
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
  std::vector<std::size_t> deg(n, 0);
  for (const auto& e : edges) {
    if (e.i >= e.j || e.j >= n || e.weight <= 0) throw Error("malformed edge in Network::build");
    ++deg[e.i];
    ++deg[e.j];
    net.total_weight_ += e.weight;
  }
  net.offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) net.offsets_[i + 1] = net.offsets_[i] + deg[i];
  net.adjacency_.resize(net.offsets_[n]);
  std::vector<std::size_t> fill(net.offsets_.begin(), net.offsets_.end() - 1);
  for (const auto& e : edges) {
    net.adjacency_[fill[e.i]++] = {e.j, e.weight};
    net.adjacency_[fill[e.j]++] = {e.i, e.weight};
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto first = net.adjacency_.begin() + static_cast<std::ptrdiff_t>(net.offsets_[i]);
    auto last = net.adjacency_.begin() + static_cast<std::ptrdiff_t>(net.offsets_[i + 1]);
    std::sort(first, last, [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
    for (auto it = first; it + 1 < last; ++it) {
      if (it->node == (it + 1)->node) throw Error("duplicate edge in Network::build");
    }
  }
  net.edges_ = std::move(edges);
  net.covariates_ = std::move(covariates);
  net.ids_ = std::move(ids);
  return net;
}

std::int64_t Network::weight(NodeIndex i, NodeIndex j) const {
  auto nb = neighbors(i);
  auto it = std::lower_bound(nb.begin(), nb.end(), j,
                             [](const Neighbor& a, NodeIndex v) { return a.node < v; });
  return (it != nb.end() && it->node == j) ? it->weight : 0;
}

Network Network::with_covariates(PairCovariates covariates) const {
  if (covariates.n() != n_) throw Error("covariates were built for a different node count");
  Network out = *this;
  out.covariates_ = std::move(covariates);
  return out;
}

ValidationError::ValidationError(std::vector<ValidationIssue> issues, std::size_t total)
    : Error([&] {
        std::ostringstream os;
        os << "network validation failed with " << total << " issue(s)";
        for (const auto& is : issues) os << "\n  " << is.message;
        if (total > issues.size()) os << "\n  ... and " << total - issues.size() << " more";
        return os.str();
      }()),
      issues_(std::move(issues)),
      total_(total) {}

namespace {

constexpr std::size_t kMaxReportedIssues = 20;

class IssueLog {
 public:
  explicit IssueLog(const std::vector<std::string>& ids) : ids_(ids) {}

  void add(ValidationIssue::Kind kind, NodeIndex i, NodeIndex j, const std::string& what) {
    ++total_;
    if (issues_.size() < kMaxReportedIssues) {
      issues_.push_back({kind, i, j, "pair (" + name(i) + "," + name(j) + "): " + what});
    }
  }
  void add_global(ValidationIssue::Kind kind, const std::string& what) {
    ++total_;
    if (issues_.size() < kMaxReportedIssues) issues_.push_back({kind, 0, 0, what});
  }
  void raise_if_any() {
    if (total_ > 0) throw ValidationError(std::move(issues_), total_);
  }

 private:
  std::string name(NodeIndex i) const {
    return i < ids_.size() ? ids_[i] : "#" + std::to_string(i + 1);
  }
  const std::vector<std::string>& ids_;
  std::vector<ValidationIssue> issues_;
  std::size_t total_ = 0;
};

}  // namespace

Network validate(const RawNetwork& raw) {
  using Kind = ValidationIssue::Kind;
  const std::size_t n = raw.n;
  std::vector<std::string> ids = raw.ids.empty() ? default_ids(n) : raw.ids;
  IssueLog log(ids);
  if (n < 2) log.add_global(Kind::too_few_nodes, "network needs n >= 2, got " + std::to_string(n));
  if (ids.size() != n) log.add_global(Kind::dimension_mismatch, "id map size differs from n");
  log.raise_if_any();

  std::map<std::pair<NodeIndex, NodeIndex>, double> adj;
  for (const auto& e : raw.adjacency) {
    if (e.i >= n || e.j >= n) {
      log.add(Kind::out_of_range, e.i, e.j, "node index out of range");
      continue;
    }
    adj[{e.i, e.j}] += e.value;
  }
  std::vector<Edge> edges;
  for (const auto& [key, value] : adj) {
    auto [i, j] = key;
    if (i == j) {
      if (value != 0.0) log.add(Kind::nonzero_diagonal, i, j, "nonzero diagonal entry (self-loop)");
      continue;
    }
    if (value < 0.0 || value != std::floor(value) || !std::isfinite(value)) {
      log.add(Kind::invalid_weight, i, j, "weight must be a nonnegative integer");
      continue;
    }
    auto rev = adj.find({j, i});
    const double back = rev == adj.end() ? 0.0 : rev->second;
    if (back != value) {
      if (i < j || rev == adj.end()) {
        log.add(Kind::asymmetric_adjacency, std::min(i, j), std::max(i, j),
                "asymmetric adjacency");
      }
      continue;
    }
    if (i < j && value > 0.0) edges.push_back({i, j, static_cast<std::int64_t>(value)});
  }

  PairCovariates cov(n, raw.p);
  std::map<std::pair<NodeIndex, NodeIndex>, const std::vector<double>*> seen;
  for (const auto& c : raw.covariates) {
    if (c.i >= n || c.j >= n) {
      log.add(Kind::out_of_range, c.i, c.j, "covariate node index out of range");
      continue;
    }
    if (c.values.size() != raw.p) {
      log.add(Kind::dimension_mismatch, std::min(c.i, c.j), std::max(c.i, c.j),
              "covariate has length " + std::to_string(c.values.size()) + ", expected p = " +
                  std::to_string(raw.p));
      continue;
    }
    if (c.i == c.j) {
      if (std::any_of(c.values.begin(), c.values.end(), [](double v) { return v != 0.0; })) {
        log.add(Kind::nonzero_diagonal, c.i, c.j, "nonzero diagonal covariate");
      }
      continue;
    }
    if (std::any_of(c.values.begin(), c.values.end(), [](double v) { return !std::isfinite(v); })) {
      log.add(Kind::dimension_mismatch, std::min(c.i, c.j), std::max(c.i, c.j),
              "non-finite covariate value");
      continue;
    }
    auto key = std::make_pair(std::min(c.i, c.j), std::max(c.i, c.j));
    auto [it, inserted] = seen.emplace(key, &c.values);
    if (!inserted) {
      if (*it->second != c.values) {
        log.add(Kind::asymmetric_covariate, key.first, key.second, "asymmetric covariate");
      }
      continue;
    }
    auto dst = cov.at(c.i, c.j);
    std::copy(c.values.begin(), c.values.end(), dst.begin());
  }
  log.raise_if_any();
  return Network::build(n, std::move(edges), std::move(cov), std::move(ids));
}

Labeling::Labeling(std::vector<int> labels, int K) : labels_(std::move(labels)), K_(K) {
  if (K < 1) throw Error("number of communities must be >= 1");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= K) {
      throw Error("label of node " + std::to_string(i + 1) + " is outside 1.." + std::to_string(K));
    }
  }
}

Labeling Labeling::from_one_based(std::span<const int> labels, int K) {
  std::vector<int> v(labels.begin(), labels.end());
  for (auto& x : v) --x;
  return Labeling(std::move(v), K);
}

std::vector<std::size_t> Labeling::sizes() const {
  std::vector<std::size_t> s(static_cast<std::size_t>(K_), 0);
  for (int l : labels_) ++s[static_cast<std::size_t>(l)];
  return s;
}

bool Labeling::non_degenerate(double kappa1, double kappa2) const {
  const double n = static_cast<double>(labels_.size());
  for (auto s : sizes()) {
    const double frac = static_cast<double>(s) / n;
    if (frac < kappa1 || frac > kappa2) return false;
  }
  return true;
}

Eigen::MatrixXd Labeling::membership() const {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(labels_.size()), K_);
  for (std::size_t i = 0; i < labels_.size(); ++i) M(static_cast<Eigen::Index>(i), labels_[i]) = 1.0;
  return M;
}

BlockStats block_stats(const Network& network, const Labeling& labeling,
                       const Eigen::VectorXd& gamma) {
  const std::size_t n = network.n();
  if (labeling.size() != n) throw Error("labeling length does not match node count");
  const int K = labeling.K();
  BlockStats bs;
  bs.sizes = labeling.sizes();
  bs.O = Eigen::MatrixXd::Zero(K, K);
  bs.E = Eigen::MatrixXd::Zero(K, K);
  bs.pair_counts = Eigen::MatrixXd::Zero(K, K);

  for (const auto& e : network.edges()) {
    const int a = labeling[e.i];
    const int b = labeling[e.j];
    bs.O(a, b) += static_cast<double>(e.weight);
    bs.O(b, a) += static_cast<double>(e.weight);
  }

  // Exposures accumulate over unordered pairs, then mirror to ordered-pair convention.
  const auto eta = network.covariates().linear_predictor(gamma);
  const bool flat = network.p() == 0;
  std::size_t idx = 0;
  for (NodeIndex i = 0; i < n; ++i) {
    const int a = labeling[i];
    for (NodeIndex j = i + 1; j < n; ++j, ++idx) {
      const int b = labeling[j];
      const double w = flat ? 1.0 : std::exp(eta[idx]);
      bs.E(a, b) += w;
      if (a != b) bs.E(b, a) += w;
      else bs.E(a, a) += w;
    }
  }
  for (int k = 0; k < K; ++k) {
    const double nk = static_cast<double>(bs.sizes[static_cast<std::size_t>(k)]);
    for (int l = 0; l < K; ++l) {
      const double nl = static_cast<double>(bs.sizes[static_cast<std::size_t>(l)]);
      bs.pair_counts(k, l) = k == l ? nk * (nk - 1.0) : nk * nl;
    }
  }
  return bs;
}

std::vector<std::int64_t> degrees(const Network& network) {
  std::vector<std::int64_t> d(network.n(), 0);
  for (const auto& e : network.edges()) {
    d[e.i] += e.weight;
    d[e.j] += e.weight;
  }
  return d;
}

Network induced_subgraph(const Network& network, std::span<const NodeIndex> keep) {
  const std::size_t n = network.n();
  std::vector<std::ptrdiff_t> remap(n, -1);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (keep[k] >= n || (k > 0 && keep[k] <= keep[k - 1])) {
      throw Error("induced_subgraph expects sorted unique node indices");
    }
    remap[keep[k]] = static_cast<std::ptrdiff_t>(k);
  }
  const std::size_t m = keep.size();
  std::vector<Edge> edges;
  for (const auto& e : network.edges()) {
    if (remap[e.i] >= 0 && remap[e.j] >= 0) {
      edges.push_back({static_cast<NodeIndex>(remap[e.i]), static_cast<NodeIndex>(remap[e.j]),
                       e.weight});
    }
  }
  const std::size_t p = network.p();
  PairCovariates cov(m, p);
  if (p > 0) {
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        auto src = network.covariates().at(keep[a], keep[b]);
        std::copy(src.begin(), src.end(), cov.at(a, b).begin());
      }
    }
  }
  std::vector<std::string> ids;
  ids.reserve(m);
  for (auto k : keep) ids.push_back(network.ids()[k]);
  return Network::build(m, std::move(edges), std::move(cov), std::move(ids));
}

}  // namespace pcabm
