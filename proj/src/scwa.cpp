#include "pcabm/scwa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "pcabm/random.hpp"

namespace pcabm {

SparseMatrix adjust(const Network& network, const Eigen::VectorXd& gamma) {
  if (gamma.size() != static_cast<Eigen::Index>(network.p())) {
    throw Error("gamma has length " + std::to_string(gamma.size()) + ", expected " +
                std::to_string(network.p()));
  }
  const auto n = static_cast<Eigen::Index>(network.n());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(network.edges().size() * 2);
  for (const auto& e : network.edges()) {
    double eta = 0.0;
    const auto z = network.covariates().at(e.i, e.j);
    for (std::size_t c = 0; c < z.size(); ++c) eta += z[c] * gamma[static_cast<Eigen::Index>(c)];
    const double v = static_cast<double>(e.weight) * std::exp(-eta);
    trips.emplace_back(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j), v);
    trips.emplace_back(static_cast<Eigen::Index>(e.j), static_cast<Eigen::Index>(e.i), v);
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

namespace {

// Indices of the K eigenvalues with largest |lambda|, larger signed value first on ties.
std::vector<Eigen::Index> leading(const Eigen::VectorXd& evals, int K) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(evals.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double aa = std::abs(evals[a]), ab = std::abs(evals[b]);
    if (aa != ab) return aa > ab;
    return evals[a] > evals[b];
  });
  idx.resize(static_cast<std::size_t>(K));
  return idx;
}

void fix_signs(Eigen::MatrixXd& U) {
  for (Eigen::Index c = 0; c < U.cols(); ++c) {
    Eigen::Index arg = 0;
    U.col(c).cwiseAbs().maxCoeff(&arg);
    if (U(arg, c) < 0) U.col(c) *= -1.0;
  }
}

double max_residual(const SparseMatrix& A, const SpectralEmbedding& emb) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < emb.U.cols(); ++k) {
    const Eigen::VectorXd r = A * emb.U.col(k) - emb.eigenvalues[k] * emb.U.col(k);
    worst = std::max(worst, r.norm());
  }
  return worst;
}

SpectralEmbedding dense_eigen(const SparseMatrix& A, int K) {
  const Eigen::MatrixXd dense(A);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
  if (es.info() != Eigen::Success) throw EigenSolverError("dense eigendecomposition failed");
  const auto idx = leading(es.eigenvalues(), K);
  SpectralEmbedding emb;
  emb.solver = "dense";
  emb.U.resize(dense.rows(), K);
  emb.eigenvalues.resize(K);
  for (int k = 0; k < K; ++k) {
    emb.U.col(k) = es.eigenvectors().col(idx[static_cast<std::size_t>(k)]);
    emb.eigenvalues[k] = es.eigenvalues()[idx[static_cast<std::size_t>(k)]];
  }
  return emb;
}

// Lanczos with full reorthogonalization; the Krylov dimension doubles until every requested
// Ritz pair meets the residual tolerance (at dimension n the result is exact).
SpectralEmbedding lanczos_eigen(const SparseMatrix& A, int K, double tol, std::uint64_t seed) {
  const Eigen::Index n = A.rows();
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_unit = [&](const Eigen::MatrixXd& Q, Eigen::Index cols) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = gauss(rng);
    for (int pass = 0; pass < 2; ++pass) {
      if (cols > 0) v -= Q.leftCols(cols) * (Q.leftCols(cols).transpose() * v);
    }
    return Eigen::VectorXd(v / v.norm());
  };

  Eigen::Index m = std::min<Eigen::Index>(n, std::max<Eigen::Index>(2 * K + 40, 64));
  double last_residual = std::numeric_limits<double>::infinity();
  for (;;) {
    Eigen::MatrixXd Q(n, m);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m);
    Q.col(0) = random_unit(Q, 0);
    for (Eigen::Index j = 0; j < m; ++j) {
      Eigen::VectorXd w = A * Q.col(j);
      alpha[j] = Q.col(j).dot(w);
      for (int pass = 0; pass < 2; ++pass) w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
      if (j + 1 == m) break;
      beta[j] = w.norm();
      if (beta[j] <= 1e-12 * std::max(1.0, std::abs(alpha[j]))) {
        // Invariant subspace found; continue with a fresh orthogonal direction.
        beta[j] = 0.0;
        Q.col(j + 1) = random_unit(Q, j + 1);
      } else {
        Q.col(j + 1) = w / beta[j];
      }
    }
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      T(j, j) = alpha[j];
      if (j + 1 < m) T(j, j + 1) = T(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    if (es.info() != Eigen::Success) throw EigenSolverError("tridiagonal eigendecomposition failed");
    const auto idx = leading(es.eigenvalues(), K);
    SpectralEmbedding emb;
    emb.solver = "lanczos";
    emb.U.resize(n, K);
    emb.eigenvalues.resize(K);
    for (int k = 0; k < K; ++k) {
      const auto s = idx[static_cast<std::size_t>(k)];
      emb.U.col(k) = Q * es.eigenvectors().col(s);
      emb.U.col(k).normalize();
      emb.eigenvalues[k] = es.eigenvalues()[s];
    }
    last_residual = max_residual(A, emb);
    if (last_residual <= tol) return emb;
    if (m == n) break;
    m = std::min(n, 2 * m);
  }
  std::ostringstream msg;
  msg << "Lanczos did not converge: max residual " << last_residual << " exceeds " << tol;
  throw EigenSolverError(msg.str());
}

}  // namespace

SpectralEmbedding top_k_eigen(const SparseMatrix& matrix, int K, const EigenOptions& options) {
  const Eigen::Index n = matrix.rows();
  if (matrix.cols() != n) throw Error("matrix must be square");
  if (K < 1 || K > n) throw Error("K must lie in [1, n]");
  const double fro = matrix.norm();
  const double tol = options.residual_tolerance * std::max(fro, std::numeric_limits<double>::min());
  SpectralEmbedding emb = static_cast<std::size_t>(n) <= options.dense_limit
                              ? dense_eigen(matrix, K)
                              : lanczos_eigen(matrix, K, tol, options.seed);
  fix_signs(emb.U);
  emb.max_residual = max_residual(matrix, emb);
  if (fro > 0 && emb.max_residual > tol) {
    std::ostringstream msg;
    msg << "eigensolver residual " << emb.max_residual << " exceeds " << tol;
    throw EigenSolverError(msg.str());
  }
  return emb;
}

namespace {

struct KMeansRun {
  std::vector<int> assign;
  Eigen::MatrixXd centers;
  double cost = std::numeric_limits<double>::infinity();
};

KMeansRun kmeans_once(const Eigen::MatrixXd& X, int K, int max_iterations, Rng& rng) {
  const Eigen::Index n = X.rows();
  KMeansRun run;
  run.centers.resize(K, X.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // D^2 seeding.
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  run.centers.row(0) = X.row(pick(rng));
  for (int c = 1; c < K; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], (X.row(i) - run.centers.row(c - 1)).squaredNorm());
      total += d2[static_cast<std::size_t>(i)];
    }
    Eigen::Index chosen = n - 1;
    if (total > 0.0) {
      double u = unif(rng) * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        u -= d2[static_cast<std::size_t>(i)];
        if (u < 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    run.centers.row(c) = X.row(chosen);
  }

  run.assign.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    std::vector<int> count(static_cast<std::size_t>(K), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < K; ++c) {
        const double d = (X.row(i) - run.centers.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (run.assign[static_cast<std::size_t>(i)] != best) changed = true;
      run.assign[static_cast<std::size_t>(i)] = best;
      dist[static_cast<std::size_t>(i)] = bd;
      ++count[static_cast<std::size_t>(best)];
    }
    // Empty cluster: steal the point farthest from its center.
    for (int c = 0; c < K; ++c) {
      if (count[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (count[static_cast<std::size_t>(run.assign[static_cast<std::size_t>(i)])] <= 1) continue;
        if (far < 0 || dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(far)]) far = i;
      }
      if (far < 0) break;
      --count[static_cast<std::size_t>(run.assign[static_cast<std::size_t>(far)])];
      run.assign[static_cast<std::size_t>(far)] = c;
      dist[static_cast<std::size_t>(far)] = 0.0;
      count[static_cast<std::size_t>(c)] = 1;
      changed = true;
    }
    run.centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) run.centers.row(run.assign[static_cast<std::size_t>(i)]) += X.row(i);
    for (int c = 0; c < K; ++c) {
      if (count[static_cast<std::size_t>(c)] > 0) run.centers.row(c) /= count[static_cast<std::size_t>(c)];
    }
    if (!changed) break;
  }
  run.cost = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    run.cost += (X.row(i) - run.centers.row(run.assign[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return run;
}

}  // namespace

KMeansResult kmeans_approx(const Eigen::MatrixXd& points, int K, const KMeansOptions& options) {
  const Eigen::Index n = points.rows();
  if (K < 1) throw Error("K must be at least 1");
  if (n < K) throw Error("fewer points than clusters");
  if (options.restarts < 1) throw Error("k-means restarts must be positive");
  std::vector<KMeansRun> runs(static_cast<std::size_t>(options.restarts));
  parallel_for(runs.size(), options.threads, [&](std::size_t r) {
    Rng rng(derive_seed(options.seed, r, 0x6b6d));
    runs[r] = kmeans_once(points, K, options.max_iterations, rng);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].cost < runs[best].cost) best = r;
  }
  // Renumber clusters by first appearance.
  std::vector<int> remap(static_cast<std::size_t>(K), -1);
  int next = 0;
  for (int a : runs[best].assign) {
    if (remap[static_cast<std::size_t>(a)] < 0) remap[static_cast<std::size_t>(a)] = next++;
  }
  for (auto& r : remap) {
    if (r < 0) r = next++;
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    labels[static_cast<std::size_t>(i)] = remap[static_cast<std::size_t>(runs[best].assign[static_cast<std::size_t>(i)])];
  }
  KMeansResult res;
  res.membership = Labeling(std::move(labels), K);
  res.centers.resize(K, points.cols());
  for (int c = 0; c < K; ++c) res.centers.row(remap[static_cast<std::size_t>(c)]) = runs[best].centers.row(c);
  res.cost = runs[best].cost;
  res.best_restart = static_cast<int>(best);
  return res;
}

ScwaResult scwa_with_gamma(const Network& network, const Eigen::VectorXd& gamma, int K,
                           const ScwaOptions& options) {
  ScwaResult res;
  res.gamma.gamma_hat = gamma;
  res.embedding = top_k_eigen(adjust(network, gamma), K, options.eigen);
  res.kmeans = kmeans_approx(res.embedding.U, K, options.kmeans);
  res.detection.labeling = res.kmeans.membership;
  bool empty = false;
  for (auto s : res.detection.labeling.sizes()) empty = empty || s == 0;
  res.detection.loglik = empty ? -std::numeric_limits<double>::infinity()
                               : profile_loglik(network, res.detection.labeling, gamma);
  return res;
}

ScwaResult scwa_detect(const Network& network, int K, const Labeling& init, const ScwaOptions& options) {
  GammaFit fit = fit_gamma(network, init, options.gamma);
  ScwaResult res = scwa_with_gamma(network, fit.gamma_hat, K, options);
  res.gamma = std::move(fit);
  return res;
}

}  // namespace pcabm
