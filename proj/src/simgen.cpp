#include "pcabm/simgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace pcabm {

SpecParseError::SpecParseError(const std::string& spec, std::size_t position, const std::string& what)
    : Error("covariate spec '" + spec + "': " + what + " at position " + std::to_string(position)),
      position_(position) {}

namespace {

class Scanner {
 public:
  explicit Scanner(const std::string& s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  std::string word() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) fail("expected a distribution name");
    std::string w = s_.substr(start, pos_ - start);
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return w;
  }
  void expect(char c) {
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  double number() {
    skip_ws();
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || !std::isfinite(v)) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }
  void finish() {
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
  }
  [[noreturn]] void fail(const std::string& what) const { throw SpecParseError(s_, pos_, what); }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

CovariateSampler CovariateSampler::parse(const std::string& spec) {
  Scanner sc(spec);
  const std::size_t name_pos = (sc.skip_ws(), sc.pos());
  const std::string name = sc.word();
  sc.expect('(');
  std::vector<double> args;
  std::vector<std::size_t> arg_pos;
  do {
    if (!args.empty()) sc.expect(',');
    arg_pos.push_back((sc.skip_ws(), sc.pos()));
    args.push_back(sc.number());
  } while (sc.peek(','));
  sc.expect(')');
  sc.finish();

  auto arity = [&](std::size_t k) {
    if (args.size() != k) {
      throw SpecParseError(spec, name_pos, name + " takes " + std::to_string(k) + " argument(s)");
    }
  };
  auto bad = [&](std::size_t i, const std::string& what) { throw SpecParseError(spec, arg_pos[i], what); };

  if (name == "bernoulli") {
    arity(1);
    if (args[0] < 0 || args[0] > 1) bad(0, "probability must lie in [0, 1]");
    return {Kind::bernoulli, args[0], 0};
  }
  if (name == "poisson") {
    arity(1);
    if (args[0] < 0) bad(0, "mean must be non-negative");
    return {Kind::poisson, args[0], 0};
  }
  if (name == "uniform") {
    arity(2);
    if (args[1] < args[0]) bad(1, "upper bound below lower bound");
    return {Kind::uniform, args[0], args[1]};
  }
  if (name == "exponential") {
    arity(1);
    if (args[0] <= 0) bad(0, "mean must be positive");
    return {Kind::exponential, args[0], 0};
  }
  if (name == "normal") {
    arity(2);
    if (args[1] < 0) bad(1, "variance must be non-negative");
    return {Kind::normal, args[0], args[1]};
  }
  throw SpecParseError(spec, name_pos, "unknown distribution '" + name + "'");
}

double CovariateSampler::operator()(Rng& rng) const {
  switch (kind_) {
    case Kind::bernoulli:
      return std::bernoulli_distribution(a_)(rng) ? 1.0 : 0.0;
    case Kind::poisson:
      if (a_ == 0) return 0.0;
      return static_cast<double>(std::poisson_distribution<long long>(a_)(rng));
    case Kind::uniform:
      if (a_ == b_) return a_;
      return std::uniform_real_distribution<double>(a_, b_)(rng);
    case Kind::exponential:
      return std::exponential_distribution<double>(1.0 / a_)(rng);
    case Kind::normal:
      if (b_ == 0) return a_;
      return std::normal_distribution<double>(a_, std::sqrt(b_))(rng);
  }
  return 0.0;
}

double CovariateSampler::mean() const {
  switch (kind_) {
    case Kind::bernoulli:
    case Kind::poisson:
    case Kind::exponential:
    case Kind::normal:
      return a_;
    case Kind::uniform:
      return 0.5 * (a_ + b_);
  }
  return 0.0;
}

double CovariateSampler::variance() const {
  switch (kind_) {
    case Kind::bernoulli: return a_ * (1 - a_);
    case Kind::poisson: return a_;
    case Kind::uniform: return (b_ - a_) * (b_ - a_) / 12.0;
    case Kind::exponential: return a_ * a_;
    case Kind::normal: return b_;
  }
  return 0.0;
}

std::string CovariateSampler::to_string() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::bernoulli: os << "bernoulli(" << a_ << ")"; break;
    case Kind::poisson: os << "poisson(" << a_ << ")"; break;
    case Kind::uniform: os << "uniform(" << a_ << "," << b_ << ")"; break;
    case Kind::exponential: os << "exponential(" << a_ << ")"; break;
    case Kind::normal: os << "normal(" << a_ << "," << b_ << ")"; break;
  }
  return os.str();
}

double GenSpec::rho_from_c(double c, std::size_t n) {
  const double ln = std::log(static_cast<double>(n));
  return c * std::pow(ln, 1.5) / static_cast<double>(n);
}

void GenSpec::check() {
  if (n < 2) throw Error("n must be at least 2");
  if (K < 1 || static_cast<std::size_t>(K) > n) throw Error("K must lie in [1, n]");
  if (pi.empty()) pi.assign(static_cast<std::size_t>(K), 1.0 / K);
  if (pi.size() != static_cast<std::size_t>(K)) throw Error("pi must have K entries");
  double total = 0.0;
  for (double v : pi) {
    if (!(v > 0)) throw Error("pi entries must be positive");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("pi must sum to 1");
  if (B_bar.rows() != K || B_bar.cols() != K) throw Error("B_bar must be K x K");
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < K; ++l) {
      if (!(B_bar(k, l) > 0)) throw Error("B_bar entries must be positive");
      if (B_bar(k, l) != B_bar(l, k)) throw Error("B_bar must be symmetric");
    }
  }
  if (!(rho_n > 0) || !std::isfinite(rho_n)) throw Error("rho_n must be positive");
  if (gamma0.size() != static_cast<Eigen::Index>(covariates.size())) {
    throw Error("gamma0 length " + std::to_string(gamma0.size()) + " does not match " +
                std::to_string(covariates.size()) + " covariate specs");
  }
}

Labeling sample_labels(std::size_t n, const std::vector<double>& pi, Rng& rng) {
  const int K = static_cast<int>(pi.size());
  std::discrete_distribution<int> draw(pi.begin(), pi.end());
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<int> labels(n);
    std::vector<std::size_t> count(pi.size(), 0);
    for (auto& c : labels) {
      c = draw(rng);
      ++count[static_cast<std::size_t>(c)];
    }
    if (std::find(count.begin(), count.end(), 0) == count.end()) return Labeling(std::move(labels), K);
  }
  throw Error("could not draw labels with every community nonempty after 100 attempts");
}

PairCovariates sample_covariates(std::size_t n, const std::vector<CovariateSampler>& samplers, Rng& rng) {
  PairCovariates z(n, samplers.size());
  for (std::size_t idx = 0; idx < z.size(); ++idx) {
    auto row = z.pair(idx);
    for (std::size_t c = 0; c < samplers.size(); ++c) row[c] = samplers[c](rng);
  }
  return z;
}

Network sample_edges(const Labeling& truth, const Eigen::MatrixXd& B_bar, double rho,
                     const PairCovariates& covariates, const Eigen::VectorXd& gamma0,
                     const std::vector<double>& scale, Rng& rng, double rate_limit) {
  const std::size_t n = truth.size();
  const double limit = rate_limit > 0 ? rate_limit : static_cast<double>(n);
  if (covariates.n() != n) throw Error("covariates do not match the labeling size");
  const auto eta = covariates.linear_predictor(gamma0);
  std::vector<Edge> edges;
  std::size_t idx = 0;
  for (NodeIndex i = 0; i < n; ++i) {
    for (NodeIndex j = i + 1; j < n; ++j, ++idx) {
      double lambda = rho * B_bar(truth[i], truth[j]) * std::exp(eta[idx]);
      if (!scale.empty()) lambda *= scale[i] * scale[j];
      if (!(lambda <= limit)) {
        std::ostringstream msg;
        msg << "edge rate " << lambda << " for pair (" << i + 1 << "," << j + 1 << ") exceeds "
            << limit << "; review rho, gamma0 and the covariate distributions";
        throw Error(msg.str());
      }
      if (lambda <= 0) continue;
      const auto a = std::poisson_distribution<std::int64_t>(lambda)(rng);
      if (a > 0) edges.push_back({i, j, a});
    }
  }
  return Network::build(n, std::move(edges), covariates);
}

PlantedInstance sample_pcabm(GenSpec spec) {
  spec.check();
  Rng label_rng(derive_seed(spec.seed, 1));
  Rng cov_rng(derive_seed(spec.seed, 2));
  Rng edge_rng(derive_seed(spec.seed, 3));
  PlantedInstance inst;
  inst.truth = sample_labels(spec.n, spec.pi, label_rng);
  auto z = sample_covariates(spec.n, spec.covariates, cov_rng);
  inst.network = sample_edges(inst.truth, spec.B_bar, spec.rho_n, z, spec.gamma0, {}, edge_rng, spec.rate_limit);
  return inst;
}

PairCovariates log_degree_covariate(const Network& network) {
  const auto d = degrees(network);
  const std::size_t n = network.n();
  std::vector<double> ld(n);
  for (std::size_t i = 0; i < n; ++i) ld[i] = std::log(static_cast<double>(std::max<std::int64_t>(d[i], 1)));
  PairCovariates z(n, 1);
  std::size_t idx = 0;
  for (NodeIndex i = 0; i < n; ++i) {
    for (NodeIndex j = i + 1; j < n; ++j, ++idx) z.pair(idx)[0] = ld[i] + ld[j];
  }
  return z;
}

DcbmInstance sample_dcbm(std::size_t n, int K, const std::vector<double>& theta_values,
                         const Eigen::MatrixXd& B_bar, double rho, std::uint64_t seed,
                         std::vector<double> pi) {
  if (theta_values.empty()) throw Error("need at least one degree parameter value");
  for (double t : theta_values) {
    if (!(t > 0)) throw Error("degree parameters must be positive");
  }
  GenSpec spec;
  spec.n = n;
  spec.K = K;
  spec.pi = std::move(pi);
  spec.B_bar = B_bar;
  spec.rho_n = rho;
  spec.gamma0 = Eigen::VectorXd(0);
  spec.check();

  Rng label_rng(derive_seed(seed, 1));
  Rng theta_rng(derive_seed(seed, 4));
  Rng edge_rng(derive_seed(seed, 3));
  DcbmInstance out;
  out.instance.truth = sample_labels(n, spec.pi, label_rng);
  std::uniform_int_distribution<std::size_t> pick(0, theta_values.size() - 1);
  out.theta.resize(n);
  for (auto& t : out.theta) t = theta_values[pick(theta_rng)];
  const Network raw = sample_edges(out.instance.truth, B_bar, rho, PairCovariates(n, 0), spec.gamma0,
                                   out.theta, edge_rng);
  out.instance.network = raw.with_covariates(log_degree_covariate(raw));
  return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("pearson needs two equal-length samples");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

CorrelatedCovariate sample_correlated_covariate(const Labeling& truth, const Eigen::MatrixXd& B_bar,
                                                double r, std::uint64_t seed, double variance,
                                                double tolerance) {
  if (!(r > 0 && r < 1)) throw Error("correlation target r must lie strictly between 0 and 1");
  const std::size_t n = truth.size();
  const std::size_t pairs = num_pairs(n);
  std::vector<double> mean(pairs), noise(pairs), P(pairs);
  Rng rng(derive_seed(seed, 5));
  std::normal_distribution<double> gauss(0.0, std::sqrt(variance));
  const double amp = 0.6 / (r * std::sqrt(1 - r * r));
  std::size_t idx = 0;
  for (NodeIndex i = 0; i < n; ++i) {
    for (NodeIndex j = i + 1; j < n; ++j, ++idx) {
      P[idx] = B_bar(truth[i], truth[j]);
      mean[idx] = amp * (P[idx] - 1.5);
      noise[idx] = gauss(rng);
    }
  }
  std::vector<double> z(pairs);
  auto corr_at = [&](double s) {
    for (std::size_t k = 0; k < pairs; ++k) z[k] = s * mean[k] + noise[k];
    return pearson(z, P);
  };

  CorrelatedCovariate out;
  out.target = r;
  out.reference = corr_at(1.0);
  double s = 1.0;
  if (std::abs(out.reference - r) > tolerance) {
    out.calibrated = true;
    double lo = 0.0, hi = 1.0;
    while (corr_at(hi) < r && hi < 1e6) hi *= 2;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (corr_at(mid) < r ? lo : hi) = mid;
    }
    s = 0.5 * (lo + hi);
  }
  out.scale = s;
  out.achieved = corr_at(s);
  out.z = PairCovariates(n, 1);
  for (std::size_t k = 0; k < pairs; ++k) out.z.pair(k)[0] = z[k];
  return out;
}

}  // namespace pcabm
