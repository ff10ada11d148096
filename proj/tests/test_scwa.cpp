#include "doctest.h"

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "pcabm/experiment.hpp"
#include "pcabm/metrics.hpp"
#include "pcabm/scwa.hpp"
#include "pcabm/simgen.hpp"

using namespace pcabm;

namespace {

SparseMatrix sparse_of(const Eigen::MatrixXd& m) { return m.sparseView(); }

double kmeans_cost(const Eigen::MatrixXd& X, const std::vector<int>& lab, int K) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(K, X.cols());
  Eigen::VectorXd cnt = Eigen::VectorXd::Zero(K);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    c.row(lab[static_cast<std::size_t>(i)]) += X.row(i);
    cnt[lab[static_cast<std::size_t>(i)]] += 1;
  }
  double cost = 0;
  for (int k = 0; k < K; ++k)
    if (cnt[k] > 0) c.row(k) /= cnt[k];
  for (Eigen::Index i = 0; i < X.rows(); ++i) cost += (X.row(i) - c.row(lab[static_cast<std::size_t>(i)])).squaredNorm();
  return cost;
}

}  // namespace

TEST_CASE("adjust divides edge weights by exp(z'gamma)") {
  PairCovariates z(3, 1);
  z.at(0, 1)[0] = std::log(2.0);
  z.at(1, 2)[0] = 1.0;
  auto net = Network::build(3, {{0, 1, 4}, {1, 2, 1}}, z);
  auto a = adjust(net, Eigen::VectorXd::Constant(1, 1.0));
  CHECK(a.coeff(0, 1) == doctest::Approx(2.0));
  CHECK(a.coeff(1, 0) == doctest::Approx(2.0));
  CHECK(a.coeff(1, 2) == doctest::Approx(std::exp(-1.0)));
  CHECK(a.coeff(0, 2) == 0.0);
  CHECK(a.coeff(0, 0) == 0.0);
  auto plain = adjust(net, Eigen::VectorXd::Zero(1));
  CHECK(plain.coeff(0, 1) == 4.0);
  CHECK(plain.coeff(2, 1) == 1.0);
  CHECK(plain.nonZeros() == 4);
}

TEST_CASE("adjusted entries are unbiased for the block rate") {
  // Three fixed pairs with different covariates; 10^4 draws each.
  Labeling truth({0, 0, 1, 1}, 2);
  Eigen::MatrixXd B(2, 2);
  B << 2, 1, 1, 2;
  PairCovariates z(4, 1);
  z.at(0, 1)[0] = 0.8;
  z.at(0, 2)[0] = -0.5;
  z.at(2, 3)[0] = 1.7;
  const Eigen::VectorXd g = Eigen::VectorXd::Constant(1, 1.0);
  const double rho = 0.3;
  const int reps = 10000;
  double s01 = 0, s02 = 0, s23 = 0, q01 = 0, q02 = 0, q23 = 0;
  Rng rng(17);
  for (int r = 0; r < reps; ++r) {
    auto net = sample_edges(truth, B, rho, z, g, {}, rng, 100.0);
    auto a = adjust(net, g);
    const double v01 = a.coeff(0, 1) / rho, v02 = a.coeff(0, 2) / rho, v23 = a.coeff(2, 3) / rho;
    s01 += v01;
    s02 += v02;
    s23 += v23;
    q01 += v01 * v01;
    q02 += v02 * v02;
    q23 += v23 * v23;
  }
  auto check = [&](double s, double q, double target) {
    const double mean = s / reps;
    const double sd = std::sqrt((q / reps - mean * mean) / reps);
    CHECK(std::abs(mean - target) < 3 * sd);
  };
  check(s01, q01, 2.0);
  check(s02, q02, 1.0);
  check(s23, q23, 2.0);
}

TEST_CASE("diagonal matrix eigenpairs come back in |lambda| order") {
  Eigen::MatrixXd d = Eigen::Vector3d(3, -5, 1).asDiagonal();
  auto emb = top_k_eigen(sparse_of(d), 2);
  CHECK(emb.eigenvalues[0] == doctest::Approx(-5));
  CHECK(emb.eigenvalues[1] == doctest::Approx(3));
  CHECK(std::abs(emb.U(1, 0)) == doctest::Approx(1));
  CHECK(std::abs(emb.U(0, 1)) == doctest::Approx(1));
  CHECK(emb.solver == "dense");
}

TEST_CASE("ties in |lambda| keep the larger signed eigenvalue") {
  Eigen::MatrixXd d = Eigen::Vector3d(-2, 2, 1).asDiagonal();
  auto emb = top_k_eigen(sparse_of(d), 1);
  CHECK(emb.eigenvalues[0] == doctest::Approx(2));
}

TEST_CASE("ideal two-block matrix has rank two and two distinct embedding rows") {
  const int n = 40;
  Eigen::MatrixXd P(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) P(i, j) = (i < n / 2) == (j < n / 2) ? 2.0 : 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P);
  int nonzero = 0;
  for (int k = 0; k < n; ++k) nonzero += std::abs(es.eigenvalues()[k]) > 1e-9;
  CHECK(nonzero == 2);
  auto emb = top_k_eigen(sparse_of(P), 2);
  std::set<std::pair<long, long>> rows;
  for (int i = 0; i < n; ++i) rows.insert({std::lround(emb.U(i, 0) * 1e8), std::lround(emb.U(i, 1) * 1e8)});
  CHECK(rows.size() == 2);
  auto km = kmeans_approx(emb.U, 2);
  CHECK(km.cost < 1e-20);
  std::vector<int> truth(n);
  for (int i = 0; i < n; ++i) truth[i] = i < n / 2 ? 0 : 1;
  CHECK(ari(km.membership, Labeling(truth, 2)) == 1.0);
}

TEST_CASE("dense eigenpairs agree with a full decomposition") {
  Rng rng(5);
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd M(100, 100);
  for (int i = 0; i < 100; ++i)
    for (int j = i; j < 100; ++j) M(i, j) = M(j, i) = (i == j) ? 0.0 : g(rng);
  auto emb = top_k_eigen(sparse_of(M), 4);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  std::vector<double> vals(es.eigenvalues().data(), es.eigenvalues().data() + 100);
  std::sort(vals.begin(), vals.end(), [](double a, double b) { return std::abs(a) > std::abs(b); });
  for (int k = 0; k < 4; ++k) CHECK(emb.eigenvalues[k] == doctest::Approx(vals[k]).epsilon(1e-10));
  CHECK((emb.U.transpose() * emb.U - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(emb.max_residual <= 1e-8 * M.norm());
}

TEST_CASE("Lanczos path agrees with the dense path") {
  auto inst = make_instance("fig3a", {{"n", 300}}, 3);
  auto A = adjust(inst.planted.network, inst.gamma0);
  auto dense = top_k_eigen(A, 3);
  EigenOptions opt;
  opt.dense_limit = 10;
  auto lz = top_k_eigen(A, 3, opt);
  CHECK(lz.solver == "lanczos");
  Eigen::MatrixXd Ad = Eigen::MatrixXd(A);
  for (int k = 0; k < 3; ++k) {
    CHECK(lz.eigenvalues[k] == doctest::Approx(dense.eigenvalues[k]).epsilon(1e-9));
    const double r = (Ad * lz.U.col(k) - lz.eigenvalues[k] * lz.U.col(k)).norm();
    CHECK(r <= 1e-8 * Ad.norm());
  }
  // Same subspace: projector difference.
  Eigen::MatrixXd P1 = dense.U * dense.U.transpose(), P2 = lz.U * lz.U.transpose();
  CHECK((P1 - P2).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((lz.U.transpose() * lz.U - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("k-means with one cluster returns the column mean") {
  Rng rng(2);
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd X(30, 3);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = g(rng);
  auto km = kmeans_approx(X, 1);
  CHECK(km.membership.sizes() == std::vector<std::size_t>{30});
  CHECK((km.centers.row(0) - X.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("k-means cost is near the exhaustive best over center-pair partitions (n=60)") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng(100 + s);
    std::normal_distribution<double> g(0, 1);
    Eigen::MatrixXd X(60, 2);
    for (int i = 0; i < 60; ++i) {
      X(i, 0) = g(rng) + (i < 25 ? 1.5 : -1.0);
      X(i, 1) = g(rng);
    }
    double best = 1e300;
    for (int a = 0; a < 60; ++a)
      for (int b = a + 1; b < 60; ++b) {
        if (X.row(a) == X.row(b)) continue;
        std::vector<int> lab(60);
        for (int i = 0; i < 60; ++i)
          lab[i] = (X.row(i) - X.row(a)).squaredNorm() <= (X.row(i) - X.row(b)).squaredNorm() ? 0 : 1;
        best = std::min(best, kmeans_cost(X, lab, 2));
      }
    KMeansOptions opt;
    opt.seed = s;
    auto km = kmeans_approx(X, 2, opt);
    CHECK(km.cost <= 1.05 * best);
    std::vector<int> lab(km.membership.labels().begin(), km.membership.labels().end());
    CHECK(km.cost == doctest::Approx(kmeans_cost(X, lab, 2)).epsilon(1e-10));
  }
}

TEST_CASE("k-means labels are renumbered by first appearance and repair empty clusters") {
  Eigen::MatrixXd X(6, 1);
  X << 5, 5, 5, 0, 0, 0;
  auto km = kmeans_approx(X, 2);
  CHECK(km.membership[0] == 0);
  CHECK(km.membership[3] == 1);
  Eigen::MatrixXd same = Eigen::MatrixXd::Zero(5, 2);
  auto deg = kmeans_approx(same, 2);
  for (auto s : deg.membership.sizes()) CHECK(s >= 1);
}

TEST_CASE("clustering is invariant under a rotation of the embedding") {
  auto inst = make_instance("fig3a", {{"n", 200}}, 8);
  auto A = adjust(inst.planted.network, inst.gamma0);
  auto emb = top_k_eigen(A, 2);
  const double t = 0.7;
  Eigen::Matrix2d Q;
  Q << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  auto a = kmeans_approx(emb.U, 2);
  auto b = kmeans_approx(emb.U * Q, 2);
  CHECK(ari(a.membership, b.membership) == 1.0);
}

TEST_CASE("SCWA with gamma zero is plain spectral clustering of A") {
  auto inst = make_instance("fig3c", {{"c_gamma", 0.0}}, 4);
  const auto& net = inst.planted.network;
  auto sc = scwa_with_gamma(net, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.p())), 2);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(net.n()), static_cast<Eigen::Index>(net.n()));
  for (const auto& e : net.edges()) A(e.i, e.j) = A(e.j, e.i) = static_cast<double>(e.weight);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const auto n = A.rows();
  Eigen::MatrixXd U(n, 2);
  // Largest |lambda| for a nonnegative matrix is the Perron root; take the two extremes by |.|.
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return std::abs(es.eigenvalues()[x]) > std::abs(es.eigenvalues()[y]); });
  U.col(0) = es.eigenvectors().col(idx[0]);
  U.col(1) = es.eigenvectors().col(idx[1]);
  auto km = kmeans_approx(U, 2);
  CHECK(ari(sc.detection.labeling, km.membership) == 1.0);
}

TEST_CASE("dense balanced two-block instance is recovered exactly") {
  GenSpec s;
  s.n = 200;
  s.K = 2;
  s.B_bar = Eigen::MatrixXd(2, 2);
  s.B_bar << 2, 1, 1, 2;
  s.rho_n = 0.5;
  s.gamma0 = Eigen::Vector2d(0.5, 1.0);
  s.covariates = {CovariateSampler::parse("uniform(0,1)"), CovariateSampler::parse("bernoulli(0.3)")};
  s.seed = 12;
  auto inst = sample_pcabm(s);
  auto res = scwa_detect(inst.network, 2, oracle::random_labels(200, 2, 1));
  auto loss = l1_l2(res.detection.labeling, inst.truth);
  CHECK(loss.l2 == 0.0);
  CHECK(res.detection.loglik == doctest::Approx(profile_loglik(inst.network, res.detection.labeling, res.gamma.gamma_hat)));
}

TEST_CASE("SCWA error shrinks as the network gets denser") {
  double l1_sparse = 0, l1_dense = 0;
  const int reps = 10;
  for (int r = 0; r < reps; ++r) {
    const auto seed = derive_seed(31, static_cast<std::uint64_t>(r));
    for (double c : {0.3, 0.7}) {
      auto inst = make_instance("fig3b", {{"c_rho", c}}, seed);
      const auto& net = inst.planted.network;
      auto res = scwa_detect(net, 2, oracle::random_labels(net.n(), 2, seed));
      (c < 0.5 ? l1_sparse : l1_dense) += l1_l2(res.detection.labeling, inst.planted.truth).l1 / reps;
    }
  }
  MESSAGE("mean L1 at c_rho 0.3: " << l1_sparse << ", at 0.7: " << l1_dense);
  CHECK(l1_dense <= l1_sparse);
}
