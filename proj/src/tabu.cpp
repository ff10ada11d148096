#include "pcabm/tabu.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pcabm/random.hpp"

namespace pcabm {

namespace {

inline double block_term(double o, double e) { return o > 0.0 ? 0.5 * o * std::log(o / e) : 0.0; }

inline double size_term(double nk, double n) { return nk > 0.0 ? nk * std::log(nk / n) : 0.0; }

double objective_from(const Eigen::MatrixXd& O, const Eigen::MatrixXd& E,
                      const std::vector<std::size_t>& sizes) {
  double total = 0.0;
  double n = 0.0;
  for (auto s : sizes) n += static_cast<double>(s);
  for (Eigen::Index k = 0; k < O.rows(); ++k) {
    for (Eigen::Index l = 0; l < O.cols(); ++l) total += block_term(O(k, l), E(k, l));
  }
  for (auto s : sizes) total += size_term(static_cast<double>(s), n);
  return total;
}

// Rows `from` and `to` of O (or E) after moving a node whose per-community weights are `d`.
// The remaining rows follow by symmetry.
void shift_rows(Eigen::VectorXd& row_from, Eigen::VectorXd& row_to, int from, int to,
                const double* d) {
  const Eigen::Index K = row_from.size();
  for (Eigen::Index l = 0; l < K; ++l) {
    row_from[l] -= d[l];
    row_to[l] += d[l];
  }
  row_from[from] -= d[from];
  row_from[to] += d[from];
  row_to[from] -= d[to];
  row_to[to] += d[to];
}

// Sum of block terms over every entry that lies in row or column a or b.
double touched_sum(const Eigen::VectorXd& Oa, const Eigen::VectorXd& Ea, const Eigen::VectorXd& Ob,
                   const Eigen::VectorXd& Eb, int a, int b) {
  double s = 0.0;
  for (Eigen::Index l = 0; l < Oa.size(); ++l) {
    if (l == a || l == b) continue;
    s += 2.0 * (block_term(Oa[l], Ea[l]) + block_term(Ob[l], Eb[l]));
  }
  s += block_term(Oa[a], Ea[a]) + block_term(Ob[b], Eb[b]) + 2.0 * block_term(Oa[b], Ea[b]);
  return s;
}

}  // namespace

double profile_loglik(const Network& network, const Labeling& labeling, const Eigen::VectorXd& gamma) {
  const auto bs = block_stats(network, labeling, gamma);
  for (std::size_t k = 0; k < bs.sizes.size(); ++k) {
    if (bs.sizes[k] == 0) {
      throw Error("community " + std::to_string(k + 1) + " is empty; profile likelihood undefined");
    }
  }
  return objective_from(bs.O, bs.E, bs.sizes);
}

PairWeights::PairWeights(const Network& network, const Eigen::VectorXd& gamma)
    : n_(network.n()), gamma_(gamma), w_(network.covariates().linear_predictor(gamma)) {
  for (auto& v : w_) v = std::exp(v);
}

SearchState::SearchState(const Network& network, std::shared_ptr<const PairWeights> weights,
                         Labeling labeling)
    : net_(network),
      weights_(std::move(weights)),
      labeling_(std::move(labeling)),
      K_(static_cast<std::size_t>(labeling_.K())) {
  const std::size_t n = network.n();
  if (labeling_.size() != n || weights_->n() != n) throw Error("search state size mismatch");
  const int K = labeling_.K();
  edge_to_.assign(n * K_, 0.0);
  expo_to_.assign(n * K_, 0.0);
  for (const auto& e : network.edges()) {
    edge_to_[e.i * K_ + static_cast<std::size_t>(labeling_[e.j])] += static_cast<double>(e.weight);
    edge_to_[e.j * K_ + static_cast<std::size_t>(labeling_[e.i])] += static_cast<double>(e.weight);
  }
  for (NodeIndex i = 0; i < n; ++i) {
    for (NodeIndex j = i + 1; j < n; ++j) {
      const double w = (*weights_)(i, j);
      expo_to_[i * K_ + static_cast<std::size_t>(labeling_[j])] += w;
      expo_to_[j * K_ + static_cast<std::size_t>(labeling_[i])] += w;
    }
  }
  O_ = Eigen::MatrixXd::Zero(K, K);
  E_ = Eigen::MatrixXd::Zero(K, K);
  for (NodeIndex i = 0; i < n; ++i) {
    for (int l = 0; l < K; ++l) {
      O_(labeling_[i], l) += edge_to(i, l);
      E_(labeling_[i], l) += expo_to(i, l);
    }
  }
  sizes_ = labeling_.sizes();
  objective_ = objective_from(O_, E_, sizes_);
}

double SearchState::move_delta(NodeIndex node, int new_label) const {
  const int a = labeling_[node];
  const int b = new_label;
  if (a == b) return 0.0;
  if (sizes_[static_cast<std::size_t>(a)] == 1) return -std::numeric_limits<double>::infinity();
  Eigen::VectorXd Oa = O_.row(a).transpose(), Ob = O_.row(b).transpose();
  Eigen::VectorXd Ea = E_.row(a).transpose(), Eb = E_.row(b).transpose();
  const double before = touched_sum(Oa, Ea, Ob, Eb, a, b);
  shift_rows(Oa, Ob, a, b, &edge_to_[node * K_]);
  shift_rows(Ea, Eb, a, b, &expo_to_[node * K_]);
  const double after = touched_sum(Oa, Ea, Ob, Eb, a, b);
  const double N = static_cast<double>(labeling_.size());
  const double na = static_cast<double>(sizes_[static_cast<std::size_t>(a)]);
  const double nb = static_cast<double>(sizes_[static_cast<std::size_t>(b)]);
  const double dsize =
      size_term(na - 1, N) + size_term(nb + 1, N) - size_term(na, N) - size_term(nb, N);
  return after - before + dsize;
}

double SearchState::swap_delta(NodeIndex i, NodeIndex j) const {
  const int a = labeling_[i];
  const int b = labeling_[j];
  if (a == b) return 0.0;
  Eigen::VectorXd Oa = O_.row(a).transpose(), Ob = O_.row(b).transpose();
  Eigen::VectorXd Ea = E_.row(a).transpose(), Eb = E_.row(b).transpose();
  const double before = touched_sum(Oa, Ea, Ob, Eb, a, b);
  shift_rows(Oa, Ob, a, b, &edge_to_[i * K_]);
  shift_rows(Ea, Eb, a, b, &expo_to_[i * K_]);
  // j's view of community a/b changes once i has moved.
  std::vector<double> dj(&edge_to_[j * K_], &edge_to_[j * K_] + K_);
  std::vector<double> xj(&expo_to_[j * K_], &expo_to_[j * K_] + K_);
  const double aij = static_cast<double>(net_.weight(i, j));
  const double wij = (*weights_)(i, j);
  dj[static_cast<std::size_t>(a)] -= aij;
  dj[static_cast<std::size_t>(b)] += aij;
  xj[static_cast<std::size_t>(a)] -= wij;
  xj[static_cast<std::size_t>(b)] += wij;
  shift_rows(Ob, Oa, b, a, dj.data());
  shift_rows(Eb, Ea, b, a, xj.data());
  return touched_sum(Oa, Ea, Ob, Eb, a, b) - before;
}

void SearchState::relabel(NodeIndex node, int to) {
  const int from = labeling_[node];
  if (from == to) return;
  Eigen::VectorXd Of = O_.row(from).transpose(), Ot = O_.row(to).transpose();
  Eigen::VectorXd Ef = E_.row(from).transpose(), Et = E_.row(to).transpose();
  shift_rows(Of, Ot, from, to, &edge_to_[node * K_]);
  shift_rows(Ef, Et, from, to, &expo_to_[node * K_]);
  O_.row(from) = Of.transpose();
  O_.col(from) = Of;
  O_.row(to) = Ot.transpose();
  O_.col(to) = Ot;
  E_.row(from) = Ef.transpose();
  E_.col(from) = Ef;
  E_.row(to) = Et.transpose();
  E_.col(to) = Et;
  --sizes_[static_cast<std::size_t>(from)];
  ++sizes_[static_cast<std::size_t>(to)];
  labeling_.set(node, to);

  const std::size_t f = static_cast<std::size_t>(from), t = static_cast<std::size_t>(to);
  for (const auto& nb : net_.neighbors(node)) {
    edge_to_[nb.node * K_ + f] -= static_cast<double>(nb.weight);
    edge_to_[nb.node * K_ + t] += static_cast<double>(nb.weight);
  }
  for (NodeIndex j = 0; j < labeling_.size(); ++j) {
    if (j == node) continue;
    const double w = (*weights_)(node, j);
    expo_to_[j * K_ + f] -= w;
    expo_to_[j * K_ + t] += w;
  }
}

void SearchState::apply_move(NodeIndex node, int new_label) {
  if (new_label < 0 || new_label >= labeling_.K()) throw Error("label out of range");
  if (labeling_[node] == new_label) return;
  if (sizes_[static_cast<std::size_t>(labeling_[node])] == 1) {
    throw Error("move would empty community " + std::to_string(labeling_[node] + 1));
  }
  relabel(node, new_label);
  objective_ = objective_from(O_, E_, sizes_);
}

void SearchState::apply_swap(NodeIndex i, NodeIndex j) {
  const int a = labeling_[i];
  const int b = labeling_[j];
  if (a == b) return;
  relabel(i, b);
  relabel(j, a);
  objective_ = objective_from(O_, E_, sizes_);
}

double SearchState::audit() const {
  const auto ref = block_stats(net_, labeling_, weights_->gamma());
  double worst = 0.0;
  for (Eigen::Index k = 0; k < O_.rows(); ++k) {
    for (Eigen::Index l = 0; l < O_.cols(); ++l) {
      worst = std::max(worst, std::abs(O_(k, l) - ref.O(k, l)) / std::max(1.0, std::abs(ref.O(k, l))));
      worst = std::max(worst, std::abs(E_(k, l) - ref.E(k, l)) / std::max(1.0, std::abs(ref.E(k, l))));
    }
  }
  for (std::size_t k = 0; k < sizes_.size(); ++k) {
    if (sizes_[k] != ref.sizes[k]) worst = std::max(worst, 1.0);
  }
  return worst;
}

namespace {

constexpr double kImprovement = 1e-9;
constexpr double kAuditTolerance = 1e-9;

struct RestartOutcome {
  Labeling labeling;
  double objective = -std::numeric_limits<double>::infinity();
  std::vector<double> trace;
};

}  // namespace

namespace {

// Applies the best strictly improving non-tabu move, if any.
bool best_neighbour(SearchState& state, MoveSet moves, std::vector<std::int64_t>& tabu_until,
                    std::int64_t iter, std::int64_t tenure) {
  const std::size_t n = state.labeling().size();
  const int K = state.labeling().K();
  double best = kImprovement;
  std::size_t bi = n, bj = n;
  int bk = -1;
  for (std::size_t i = 0; i < n; ++i) {
    if (iter < tabu_until[i]) continue;
    if (moves == MoveSet::swap_and_relabel) {
      for (int k = 0; k < K; ++k) {
        if (k == state.labeling()[i]) continue;
        const double d = state.move_delta(i, k);
        if (d > best) {
          best = d;
          bi = i;
          bk = k;
          bj = n;
        }
      }
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      if (iter < tabu_until[j] || state.labeling()[i] == state.labeling()[j]) continue;
      const double d = state.swap_delta(i, j);
      if (d > best) {
        best = d;
        bi = i;
        bj = j;
        bk = -1;
      }
    }
  }
  if (bi == n) return false;
  if (bj == n) {
    state.apply_move(bi, bk);
  } else {
    state.apply_swap(bi, bj);
    tabu_until[bj] = iter + tenure;
  }
  tabu_until[bi] = iter + tenure;
  return true;
}

}  // namespace

DetectionResult tabu_search(const Network& network, const Eigen::VectorXd& gamma,
                            const Labeling& init, const TabuOptions& options) {
  const std::size_t n = network.n();
  if (init.size() != n) throw Error("initial labeling length does not match node count");
  for (auto s : init.sizes()) {
    if (s == 0) throw Error("initial labeling leaves a community empty");
  }
  const int K = init.K();
  const auto N = static_cast<std::int64_t>(n);
  const std::int64_t tenure = options.tabu_tenure > 0 ? options.tabu_tenure : (N + 9) / 10;
  const std::int64_t patience = options.patience > 0 ? options.patience : 50 * N;
  const std::int64_t max_iters = options.max_iters > 0 ? options.max_iters : 2000 * N;
  const int restarts = options.restarts > 0 ? options.restarts : 5;
  if (tenure >= N) throw Error("tabu tenure must be smaller than the node count");
  if (options.tabu_tenure < 0 || options.patience < 0 || options.max_iters < 0 ||
      options.restarts < 0) {
    throw Error("tabu options must be positive");
  }

  auto weights = std::make_shared<const PairWeights>(network, gamma);
  std::vector<RestartOutcome> outcomes(static_cast<std::size_t>(restarts));

  parallel_for(outcomes.size(), options.threads, [&](std::size_t r) {
    Rng rng(derive_seed(options.seed, r));
    Labeling start = r == 0 ? init : random_balanced_labeling(n, K, rng);
    SearchState state(network, weights, std::move(start));
    RestartOutcome& out = outcomes[r];
    if (K >= 2) {
      std::vector<std::int64_t> tabu_until(n, 0);
      std::uniform_int_distribution<std::size_t> pick_node(0, n - 1);
      std::uniform_int_distribution<int> pick_label(0, K - 2);
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      std::int64_t since_improvement = 0;
      for (std::int64_t iter = 1; iter <= max_iters; ++iter) {
        if (since_improvement >= patience) {
          if (!options.exhaustive_check || !best_neighbour(state, options.moves, tabu_until, iter, tenure)) break;
          out.trace.push_back(state.objective());
          since_improvement = 0;
          continue;
        }
        const bool relabel =
            options.moves == MoveSet::swap_and_relabel && coin(rng) < options.relabel_probability;
        if (relabel) {
          const std::size_t i = pick_node(rng);
          int b = pick_label(rng);
          if (b >= state.labeling()[i]) ++b;
          if (iter < tabu_until[i] || state.move_delta(i, b) <= kImprovement) {
            ++since_improvement;
            continue;
          }
          state.apply_move(i, b);
          tabu_until[i] = iter + tenure;
        } else {
          const std::size_t i = pick_node(rng);
          const std::size_t j = pick_node(rng);
          if (state.labeling()[i] == state.labeling()[j] || iter < tabu_until[i] ||
              iter < tabu_until[j] || state.swap_delta(i, j) <= kImprovement) {
            ++since_improvement;
            continue;
          }
          state.apply_swap(i, j);
          tabu_until[i] = tabu_until[j] = iter + tenure;
        }
        out.trace.push_back(state.objective());
        since_improvement = 0;
      }
    }
    const double drift = state.audit();
    if (drift > kAuditTolerance) {
      throw Error("incremental block statistics drifted from recomputation (" + std::to_string(drift) + ")");
    }
    out.labeling = state.labeling();
    out.objective = profile_loglik(network, out.labeling, gamma);
  });

  std::size_t best = 0;
  for (std::size_t r = 1; r < outcomes.size(); ++r) {
    if (outcomes[r].objective > outcomes[best].objective) best = r;
  }
  DetectionResult res;
  res.labeling = std::move(outcomes[best].labeling);
  res.loglik = outcomes[best].objective;
  res.trace = std::move(outcomes[best].trace);
  res.restarts_best = static_cast<int>(best);
  return res;
}

MleResult fit_mle0(const Network& network, int K, const Labeling& init,
                   const GammaFitOptions& gamma_options, const TabuOptions& tabu_options) {
  if (init.K() != K) throw Error("initial labeling has a different number of communities");
  MleResult res;
  res.gamma = fit_gamma(network, init, gamma_options);
  res.detection = tabu_search(network, res.gamma.gamma_hat, init, tabu_options);
  return res;
}

}  // namespace pcabm
