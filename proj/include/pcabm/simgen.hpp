#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pcabm/network.hpp"
#include "pcabm/random.hpp"

namespace pcabm {

class SpecParseError : public Error {
 public:
  SpecParseError(const std::string& spec, std::size_t position, const std::string& what);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// One covariate distribution. Grammar (whitespace ignored):
//   bernoulli(q) | poisson(mean) | uniform(a, b) | exponential(mean) | normal(mean, variance)
class CovariateSampler {
 public:
  enum class Kind { bernoulli, poisson, uniform, exponential, normal };

  static CovariateSampler parse(const std::string& spec);

  double operator()(Rng& rng) const;
  double mean() const;
  double variance() const;
  Kind kind() const { return kind_; }
  std::string to_string() const;

 private:
  CovariateSampler(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}
  Kind kind_;
  double a_;
  double b_;
};

struct GenSpec {
  std::size_t n = 0;
  int K = 2;
  std::vector<double> pi;             // defaults to uniform
  Eigen::MatrixXd B_bar;              // K x K, symmetric, positive
  double rho_n = 0.0;
  Eigen::VectorXd gamma0;             // length p
  std::vector<CovariateSampler> covariates;
  std::uint64_t seed = 1;
  // Largest admissible edge rate; 0 means n. Heavy-tailed covariate designs need more room.
  double rate_limit = 0.0;

  // c * (log n)^1.5 / n
  static double rho_from_c(double c, std::size_t n);
  // Throws on inconsistent fields; fills a uniform pi when empty.
  void check();
};

struct PlantedInstance {
  Network network;
  Labeling truth;
};

// Labels iid from pi, redrawn (at most 100 times) while some community is empty.
Labeling sample_labels(std::size_t n, const std::vector<double>& pi, Rng& rng);

// z_ij iid per coordinate for i < j.
PairCovariates sample_covariates(std::size_t n, const std::vector<CovariateSampler>& samplers, Rng& rng);

// A_ij ~ Poisson(rho B_bar[c_i, c_j] exp(z_ij' gamma0) * scale_i * scale_j) for i < j. `scale`
// may be empty (all ones). Throws when some rate exceeds rate_limit (0 means n).
Network sample_edges(const Labeling& truth, const Eigen::MatrixXd& B_bar, double rho,
                     const PairCovariates& covariates, const Eigen::VectorXd& gamma0,
                     const std::vector<double>& scale, Rng& rng, double rate_limit = 0.0);

// Separate streams for labels, covariates and edges, derived from spec.seed.
PlantedInstance sample_pcabm(GenSpec spec);

struct DcbmInstance {
  PlantedInstance instance;  // network carries the single degree covariate
  std::vector<double> theta;
};

// theta_i uniform over `theta_values`; z_ij = log max(d_i, 1) + log max(d_j, 1) from realized
// degrees.
DcbmInstance sample_dcbm(std::size_t n, int K, const std::vector<double>& theta_values,
                         const Eigen::MatrixXd& B_bar, double rho, std::uint64_t seed,
                         std::vector<double> pi = {});

PairCovariates log_degree_covariate(const Network& network);

struct CorrelatedCovariate {
  PairCovariates z;
  double target = 0.0;     // requested correlation r
  double reference = 0.0;  // correlation obtained with the unscaled mean formula
  double achieved = 0.0;   // correlation of the returned draws
  double scale = 1.0;      // multiplier applied to the mean component
  bool calibrated = false;
};

// z'_ij ~ N(s * 0.6 (B_bar[c_i,c_j] - 1.5) / (r sqrt(1 - r^2)), variance) with s = 1, unless
// the resulting Pearson correlation with P_ij = B_bar[c_i,c_j] misses r by more than
// `tolerance`, in which case s is solved for numerically on the same noise draws.
CorrelatedCovariate sample_correlated_covariate(const Labeling& truth, const Eigen::MatrixXd& B_bar,
                                                double r, std::uint64_t seed, double variance = 0.09,
                                                double tolerance = 0.05);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pcabm
