#include "pcabm/gamma.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace pcabm {

namespace {

// Evaluates l_e and its derivatives in one sweep over all unordered pairs. Exposure sums are
// accumulated per unordered block {a <= b}; the ordered-pair convention doubles the diagonal
// blocks of both O and E, which cancels in every ratio below.
class GammaObjective {
 public:
  GammaObjective(const Network& network, const Labeling& labeling)
      : net_(network), K_(labeling.K()), p_(static_cast<Eigen::Index>(network.p())) {
    if (labeling.size() != network.n()) throw Error("labeling length does not match node count");
    if (K_ > 255) throw Error("at most 255 communities are supported");
    const std::size_t n = network.n();
    block_.resize(num_pairs(n));
    std::size_t idx = 0;
    for (NodeIndex i = 0; i < n; ++i) {
      for (NodeIndex j = i + 1; j < n; ++j, ++idx) {
        int a = labeling[i], b = labeling[j];
        if (a > b) std::swap(a, b);
        block_[idx] = static_cast<std::uint16_t>(a * K_ + b);
      }
    }
    O_ = Eigen::MatrixXd::Zero(K_, K_);
    edge_z_ = Eigen::VectorXd::Zero(p_);
    for (const auto& e : network.edges()) {
      int a = labeling[e.i], b = labeling[e.j];
      if (a > b) std::swap(a, b);
      O_(a, b) += static_cast<double>(e.weight);
      auto z = network.covariates().at(e.i, e.j);
      for (Eigen::Index c = 0; c < p_; ++c) {
        edge_z_[c] += static_cast<double>(e.weight) * z[static_cast<std::size_t>(c)];
      }
    }
  }

  struct Result {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
  };

  // order: 0 = value, 1 = + gradient, 2 = + Hessian.
  Result evaluate(const Eigen::VectorXd& gamma, int order) const {
    if (gamma.size() != p_) {
      throw Error("gamma has length " + std::to_string(gamma.size()) + ", expected p = " +
                  std::to_string(p_));
    }
    const std::size_t nb = static_cast<std::size_t>(K_ * K_);
    std::vector<double> U(nb, 0.0);
    std::vector<Eigen::VectorXd> Mu(order >= 1 ? nb : 0, Eigen::VectorXd::Zero(p_));
    std::vector<Eigen::MatrixXd> Sg(order >= 2 ? nb : 0, Eigen::MatrixXd::Zero(p_, p_));

    const auto& cov = net_.covariates();
    const std::size_t P = static_cast<std::size_t>(p_);
    for (std::size_t idx = 0; idx < block_.size(); ++idx) {
      const double* z = cov.data().data() + idx * P;
      double eta = 0.0;
      for (std::size_t c = 0; c < P; ++c) eta += z[c] * gamma[static_cast<Eigen::Index>(c)];
      const double w = std::exp(eta);
      const std::size_t b = block_[idx];
      U[b] += w;
      if (order >= 1) {
        double* mu = Mu[b].data();
        for (std::size_t c = 0; c < P; ++c) mu[c] += w * z[c];
      }
      if (order >= 2) {
        double* s = Sg[b].data();  // column-major, lower triangle
        for (std::size_t c = 0; c < P; ++c) {
          const double wz = w * z[c];
          for (std::size_t r = c; r < P; ++r) s[c * P + r] += wz * z[r];
        }
      }
    }

    Result res;
    res.value = edge_z_.dot(gamma);
    if (order >= 1) res.grad = edge_z_;
    if (order >= 2) res.hess = Eigen::MatrixXd::Zero(p_, p_);
    for (int a = 0; a < K_; ++a) {
      for (int b = a; b < K_; ++b) {
        const double o = O_(a, b);
        if (o == 0.0) continue;
        const std::size_t blk = static_cast<std::size_t>(a * K_ + b);
        const double u = U[blk];
        if (!(u > 0.0)) {
          if (std::isinf(u) || std::isnan(u)) {
            res.value = -std::numeric_limits<double>::infinity();
            return res;
          }
          throw ModelDegeneracyError("block (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                                     ") has edges but zero exposure");
        }
        // Unordered form of 1/2 sum_kl O_kl log E_kl; diagonal blocks carry log(2U).
        res.value -= o * (a == b ? std::log(2.0 * u) : std::log(u));
        if (order >= 1) res.grad.noalias() -= (o / u) * Mu[blk];
        if (order >= 2) {
          Eigen::MatrixXd s = Sg[blk].selfadjointView<Eigen::Lower>();
          res.hess.noalias() -= (o / u) * s;
          res.hess.noalias() += (o / (u * u)) * Mu[blk] * Mu[blk].transpose();
        }
      }
    }
    return res;
  }

 private:
  const Network& net_;
  int K_;
  Eigen::Index p_;
  std::vector<std::uint16_t> block_;
  Eigen::MatrixXd O_;  // unordered block edge weights, upper triangle
  Eigen::VectorXd edge_z_;
};

}  // namespace

BlockMoments block_moments(const Network& network, const Labeling& labeling,
                           const Eigen::VectorXd& gamma) {
  const int K = labeling.K();
  const Eigen::Index p = static_cast<Eigen::Index>(network.p());
  BlockMoments bm;
  bm.K = K;
  bm.theta = Eigen::MatrixXd::Zero(K, K);
  bm.pair_counts = Eigen::MatrixXd::Zero(K, K);
  bm.mu.assign(static_cast<std::size_t>(K * K), Eigen::VectorXd::Zero(p));
  bm.sigma.assign(static_cast<std::size_t>(K * K), Eigen::MatrixXd::Zero(p, p));
  const auto eta = network.covariates().linear_predictor(gamma);
  std::size_t idx = 0;
  for (NodeIndex i = 0; i < network.n(); ++i) {
    for (NodeIndex j = i + 1; j < network.n(); ++j, ++idx) {
      const double w = std::exp(eta[idx]);
      auto zs = network.covariates().pair(idx);
      Eigen::Map<const Eigen::VectorXd> z(zs.data(), p);
      const int a = labeling[i], b = labeling[j];
      for (auto [k, l] : {std::pair{a, b}, std::pair{b, a}}) {
        const std::size_t blk = static_cast<std::size_t>(k * K + l);
        bm.theta(k, l) += w;
        bm.pair_counts(k, l) += 1.0;
        bm.mu[blk] += w * z;
        bm.sigma[blk] += w * z * z.transpose();
      }
    }
  }
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < K; ++l) {
      const double c = bm.pair_counts(k, l);
      if (c == 0.0) continue;
      const std::size_t blk = static_cast<std::size_t>(k * K + l);
      bm.theta(k, l) /= c;
      bm.mu[blk] /= c;
      bm.sigma[blk] /= c;
    }
  }
  return bm;
}

double gamma_loglik(const Network& network, const Labeling& labeling, const Eigen::VectorXd& gamma) {
  return GammaObjective(network, labeling).evaluate(gamma, 0).value;
}

Eigen::VectorXd gamma_grad(const Network& network, const Labeling& labeling,
                           const Eigen::VectorXd& gamma) {
  return GammaObjective(network, labeling).evaluate(gamma, 1).grad;
}

Eigen::MatrixXd gamma_hessian(const Network& network, const Labeling& labeling,
                              const Eigen::VectorXd& gamma) {
  return GammaObjective(network, labeling).evaluate(gamma, 2).hess;
}

GammaFit fit_gamma(const Network& network, const Labeling& labeling, const GammaFitOptions& options) {
  const Eigen::Index p = static_cast<Eigen::Index>(network.p());
  GammaObjective objective(network, labeling);
  Eigen::VectorXd gamma = options.init.value_or(Eigen::VectorXd::Zero(p));
  if (gamma.size() != p) throw Error("initial gamma has the wrong length");

  GammaFit fit;
  auto cur = objective.evaluate(gamma, 2);
  if (!std::isfinite(cur.value)) throw Error("log-likelihood is not finite at the initial gamma");

  constexpr double kArmijo = 1e-4;
  int it = 0;
  for (;; ++it) {
    const double gnorm = p == 0 ? 0.0 : cur.grad.lpNorm<Eigen::Infinity>();
    if (gnorm <= options.tolerance) {
      fit.converged = true;
      break;
    }
    if (it >= options.max_iterations) break;

    Eigen::VectorXd dir;
    bool newton = true;
    Eigen::LLT<Eigen::MatrixXd> llt(-cur.hess);
    if (llt.info() == Eigen::Success) {
      dir = llt.solve(cur.grad);
    } else {
      // Newton on the strictly concave eigendirections, plain gradient ascent on the rest.
      newton = false;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-cur.hess);
      const auto& lam = es.eigenvalues();
      const double cutoff = 1e-12 * std::max(1.0, lam.cwiseAbs().maxCoeff());
      const Eigen::VectorXd proj = es.eigenvectors().transpose() * cur.grad;
      Eigen::VectorXd coef(p);
      for (Eigen::Index c = 0; c < p; ++c) {
        coef[c] = lam[c] > cutoff ? proj[c] / lam[c] : proj[c] / std::max(1.0, cur.grad.norm());
      }
      dir = es.eigenvectors() * coef;
    }
    const double slope = cur.grad.dot(dir);
    if (!(slope > 0.0)) break;

    // Inside the quadratic region the predicted gain drops below the rounding noise of l_e;
    // the full Newton step is then taken without a line search.
    const bool tiny = newton && 0.5 * slope <= 1e-12 * (1.0 + std::abs(cur.value));
    double step = 1.0;
    GammaObjective::Result next;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt, step *= 0.5) {
      next = objective.evaluate(gamma + step * dir, 0);
      if (tiny || next.value >= cur.value + kArmijo * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    gamma += step * dir;
    cur = objective.evaluate(gamma, 2);
  }
  fit.gamma_hat = gamma;
  fit.loglik = cur.value;
  fit.iterations = it;
  fit.final_grad_norm = p == 0 ? 0.0 : cur.grad.lpNorm<Eigen::Infinity>();
  return fit;
}

GammaFit gamma_inference(const Network& network, const Labeling& labeling, GammaFit fit) {
  (void)labeling;  // the limiting covariance is labeling-free
  if (!fit.converged) throw Error("gamma_inference requires a converged fit");
  const Eigen::Index p = static_cast<Eigen::Index>(network.p());
  if (fit.gamma_hat.size() != p) throw Error("fit does not match the network's covariate dimension");
  if (p == 0) {
    fit.cov.resize(0, 0);
    fit.se.resize(0);
    fit.t_stats.resize(0);
    fit.has_inference = true;
    return fit;
  }
  const auto& cov = network.covariates();
  const auto eta = cov.linear_predictor(fit.gamma_hat);
  double theta = 0.0;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t idx = 0; idx < eta.size(); ++idx) {
    const double w = std::exp(eta[idx]);
    Eigen::Map<const Eigen::VectorXd> z(cov.pair(idx).data(), p);
    theta += w;
    mu.noalias() += w * z;
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(z, w);
  }
  const double N = static_cast<double>(eta.size());
  theta /= N;
  mu /= N;
  sigma = Eigen::MatrixXd(sigma.selfadjointView<Eigen::Lower>()) / N;

  const double scale = static_cast<double>(network.total_weight()) / theta;
  Eigen::MatrixXd info = scale * (sigma - mu * mu.transpose() / theta);
  info = 0.5 * (info + info.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(lo > 1e-10 * std::max(1.0, hi))) {
    throw CollinearityError(
        "covariate information matrix is singular (smallest eigenvalue " + std::to_string(lo) +
        "): covariates are collinear, Sigma - mu mu'/theta must be positive definite");
  }
  fit.cov = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
            es.eigenvectors().transpose();
  fit.se = fit.cov.diagonal().cwiseSqrt();
  fit.t_stats = fit.gamma_hat.cwiseQuotient(fit.se);
  fit.has_inference = true;
  return fit;
}

}  // namespace pcabm
