#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "pcabm/network.hpp"

using namespace pcabm;

namespace {

RawNetwork three_node() {
  RawNetwork raw;
  raw.n = 3;
  raw.adjacency = {{0, 1, 1}, {1, 0, 1}};
  return raw;
}

Network hand_example() {
  PairCovariates z(3, 1);
  return Network::build(3, {{0, 1, 2}, {0, 2, 1}}, z);
}

template <class Fn>
ValidationError catch_validation(Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e;
  }
  FAIL("expected a validation error");
  return ValidationError({}, 0);
}

}  // namespace

TEST_CASE("validate accepts a minimal legal network") {
  auto net = validate(three_node());
  CHECK(net.n() == 3);
  CHECK(net.p() == 0);
  CHECK(net.weight(0, 1) == 1);
  CHECK(net.weight(1, 0) == 1);
  CHECK(net.weight(1, 2) == 0);
  CHECK(net.total_weight() == 1);
  CHECK(net.ids() == std::vector<std::string>{"1", "2", "3"});
}

TEST_CASE("validate reports an asymmetric pair") {
  auto raw = three_node();
  raw.adjacency.pop_back();
  auto err = catch_validation([&] { validate(raw); });
  REQUIRE(err.total() == 1);
  CHECK(err.issues()[0].kind == ValidationIssue::Kind::asymmetric_adjacency);
  CHECK(err.issues()[0].i == 0);
  CHECK(err.issues()[0].j == 1);
  CHECK(std::string(err.what()).find("(1,2)") != std::string::npos);
}

TEST_CASE("validate reports a covariate dimension mismatch") {
  auto raw = three_node();
  raw.p = 3;
  raw.covariates = {{0, 1, {0.5, 1.0}}, {1, 0, {0.5, 1.0}}};
  auto err = catch_validation([&] { validate(raw); });
  bool named = false;
  for (auto& is : err.issues())
    if (is.kind == ValidationIssue::Kind::dimension_mismatch && is.i == 0 && is.j == 1) named = true;
  CHECK(named);
}

TEST_CASE("validate rejects diagonal entries, negative and fractional weights") {
  auto raw = three_node();
  raw.adjacency.push_back({2, 2, 1});
  raw.adjacency.push_back({1, 2, -1});
  raw.adjacency.push_back({2, 1, -1});
  raw.adjacency.push_back({0, 2, 0.5});
  raw.adjacency.push_back({2, 0, 0.5});
  auto err = catch_validation([&] { validate(raw); });
  int diag = 0, bad = 0;
  for (auto& is : err.issues()) {
    diag += is.kind == ValidationIssue::Kind::nonzero_diagonal;
    bad += is.kind == ValidationIssue::Kind::invalid_weight;
  }
  CHECK(diag == 1);
  CHECK(bad >= 2);
}

TEST_CASE("validate rejects asymmetric covariates and too few nodes") {
  auto raw = three_node();
  raw.p = 1;
  raw.covariates = {{0, 1, {0.5}}, {1, 0, {0.25}}};
  auto err = catch_validation([&] { validate(raw); });
  CHECK(err.issues()[0].kind == ValidationIssue::Kind::asymmetric_covariate);

  RawNetwork one;
  one.n = 1;
  auto err1 = catch_validation([&] { validate(one); });
  CHECK(err1.issues()[0].kind == ValidationIssue::Kind::too_few_nodes);
}

TEST_CASE("validate lists the first 20 issues plus a total") {
  RawNetwork raw;
  raw.n = 40;
  for (std::size_t i = 0; i + 1 < 40; ++i) raw.adjacency.push_back({i, i + 1, 1});
  auto err = catch_validation([&] { validate(raw); });
  CHECK(err.issues().size() == 20);
  CHECK(err.total() == 39);
}

TEST_CASE("a covariate listed in one direction is mirrored") {
  auto raw = three_node();
  raw.p = 2;
  raw.covariates = {{2, 0, {1.5, -2.0}}};
  auto net = validate(raw);
  CHECK(net.covariates().at(0, 2)[0] == 1.5);
  CHECK(net.covariates().at(2, 0)[1] == -2.0);
  CHECK(net.covariates().at(0, 1)[0] == 0.0);
}

TEST_CASE("block_stats on the hand-countable example") {
  auto net = hand_example();
  Labeling e({0, 0, 1}, 2);
  auto b = block_stats(net, e, Eigen::VectorXd::Constant(1, 0.7));
  CHECK(b.sizes == std::vector<std::size_t>{2, 1});
  CHECK(b.O(0, 0) == 4);
  CHECK(b.O(0, 1) == 1);
  CHECK(b.O(1, 0) == 1);
  CHECK(b.O(1, 1) == 0);
  CHECK(b.E(0, 0) == 2);
  CHECK(b.E(0, 1) == 2);
  CHECK(b.E(1, 0) == 2);
  CHECK(b.E(1, 1) == 0);
}

TEST_CASE("block_stats with gamma zero gives pair counts") {
  auto net = oracle::random_network(25, 2, 0.2, 3);
  auto e = oracle::random_labels(25, 3, 4);
  auto b = block_stats(net, e, Eigen::VectorXd::Zero(2));
  CHECK((b.E - b.pair_counts).cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k < 3; ++k) {
    const double nk = static_cast<double>(b.sizes[k]);
    CHECK(b.pair_counts(k, k) == nk * (nk - 1));
    for (int l = 0; l < 3; ++l)
      if (l != k) CHECK(b.pair_counts(k, l) == nk * static_cast<double>(b.sizes[l]));
  }
  CHECK(b.pair_counts.sum() == 25.0 * 24.0);
}

TEST_CASE("block_stats matches a double loop over ordered pairs") {
  auto net = oracle::random_network(50, 1, 0.15, 11);
  auto e = oracle::random_labels(50, 3, 12);
  Eigen::VectorXd g = Eigen::VectorXd::Constant(1, 0.5);
  auto b = block_stats(net, e, g);
  auto ref = oracle::naive_blocks(net, e, g);
  CHECK((b.O - ref.O).cwiseAbs().maxCoeff() == 0.0);
  CHECK((b.E - ref.E).cwiseAbs().maxCoeff() < 1e-10 * ref.E.maxCoeff());
  CHECK(b.O.sum() == 2.0 * static_cast<double>(net.total_weight()));
  CHECK((b.O - b.O.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((b.E - b.E.transpose()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("block_stats with one community") {
  auto net = oracle::random_network(20, 2, 0.3, 5);
  Labeling e(std::vector<int>(20, 0), 1);
  Eigen::VectorXd g(2);
  g << 0.3, -0.2;
  auto b = block_stats(net, e, g);
  double expo = 0.0;
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j)
      if (i != j) expo += std::exp(oracle::z_dot(net, i, j, g));
  CHECK(b.O(0, 0) == 2.0 * static_cast<double>(net.total_weight()));
  CHECK(b.E(0, 0) == doctest::Approx(expo).epsilon(1e-12));
}

TEST_CASE("block_stats is equivariant under community relabeling") {
  auto net = oracle::random_network(30, 1, 0.2, 8);
  auto e = oracle::random_labels(30, 3, 9);
  const std::vector<int> sigma{2, 0, 1};
  std::vector<int> moved(30);
  for (std::size_t i = 0; i < 30; ++i) moved[i] = sigma[static_cast<std::size_t>(e[i])];
  Eigen::VectorXd g = Eigen::VectorXd::Constant(1, -0.4);
  auto a = block_stats(net, e, g);
  auto b = block_stats(net, Labeling(moved, 3), g);
  for (int k = 0; k < 3; ++k) {
    CHECK(a.sizes[k] == b.sizes[sigma[k]]);
    for (int l = 0; l < 3; ++l) {
      CHECK(a.O(k, l) == b.O(sigma[k], sigma[l]));
      CHECK(a.E(k, l) == doctest::Approx(b.E(sigma[k], sigma[l])).epsilon(1e-12));
    }
  }
}

TEST_CASE("degrees are row sums") {
  auto d = degrees(hand_example());
  CHECK(d == std::vector<std::int64_t>{3, 2, 1});
  auto empty = Network::build(4, {}, PairCovariates(4, 0));
  CHECK(degrees(empty) == std::vector<std::int64_t>(4, 0));
}

TEST_CASE("labeling helpers") {
  Labeling e({0, 1, 1, 2}, 3);
  CHECK(e.sizes() == std::vector<std::size_t>{1, 2, 1});
  CHECK(e.non_degenerate(0.25, 0.5));
  CHECK_FALSE(e.non_degenerate(0.3, 0.5));
  auto m = e.membership();
  CHECK(m.rows() == 4);
  CHECK(m.cols() == 3);
  CHECK(m(1, 1) == 1.0);
  CHECK(m.rowwise().sum().minCoeff() == 1.0);
  std::vector<int> one{1, 2, 2, 3};
  CHECK(Labeling::from_one_based(one, 3) == e);
  CHECK_THROWS_AS(Labeling({0, 3}, 3), Error);
  std::vector<int> zero{0, 1};
  CHECK_THROWS_AS(Labeling::from_one_based(zero, 2), Error);
}

TEST_CASE("pair indexing covers the upper triangle in row order") {
  const std::size_t n = 7;
  std::size_t expect = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) CHECK(pair_index(n, i, j) == expect++);
  CHECK(expect == num_pairs(n));
}

TEST_CASE("induced subgraph keeps weights, covariates and ids") {
  auto net = oracle::random_network(12, 2, 0.4, 21);
  std::vector<NodeIndex> keep{1, 4, 5, 9};
  auto sub = induced_subgraph(net, keep);
  REQUIRE(sub.n() == 4);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b) {
      CHECK(sub.weight(a, b) == net.weight(keep[a], keep[b]));
      CHECK(sub.covariates().at(a, b)[1] == net.covariates().at(keep[a], keep[b])[1]);
    }
  CHECK(sub.ids()[2] == net.ids()[5]);
}
