#include "pcabm/detect.hpp"

namespace pcabm {

Method parse_method(const std::string& name) {
  if (name == "pcabm_mle" || name == "mle") return Method::pcabm_mle;
  if (name == "pcabm_mle0" || name == "mle0") return Method::pcabm_mle0;
  if (name == "pcabm_scwa" || name == "scwa") return Method::pcabm_scwa;
  if (name == "sbm_mle") return Method::sbm_mle;
  if (name == "sbm_sc") return Method::sbm_sc;
  throw Error("unknown method '" + name + "'");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::pcabm_mle: return "pcabm_mle";
    case Method::pcabm_mle0: return "pcabm_mle0";
    case Method::pcabm_scwa: return "pcabm_scwa";
    case Method::sbm_mle: return "sbm_mle";
    case Method::sbm_sc: return "sbm_sc";
  }
  return "unknown";
}

namespace {

// Restart 0 is the supplied start; a spectral start can sit in a poor basin when a few
// heavily down-weighted edges dominate the adjusted matrix, so random restarts follow it.
constexpr int kRestarts = 5;

TabuOptions with_restarts(TabuOptions t, int restarts) {
  if (t.restarts == 0) t.restarts = restarts;
  return t;
}

}  // namespace

MleResult fit_mle(const Network& network, int K, const Labeling& init, const DetectOptions& options) {
  ScwaOptions so = options.scwa;
  so.gamma = options.gamma;
  ScwaResult sc = scwa_detect(network, K, init, so);
  MleResult res;
  res.gamma = std::move(sc.gamma);
  res.detection = tabu_search(network, res.gamma.gamma_hat, sc.detection.labeling,
                              with_restarts(options.tabu, kRestarts));
  return res;
}

DetectOutcome detect_with_gamma(const Network& network, int K, const Eigen::VectorXd& gamma, bool refine,
                                const DetectOptions& options) {
  ScwaResult sc = scwa_with_gamma(network, gamma, K, options.scwa);
  DetectOutcome out;
  out.gamma = std::move(sc.gamma);
  out.embedding = std::move(sc.embedding);
  if (refine) {
    out.detection = tabu_search(network, gamma, sc.detection.labeling, with_restarts(options.tabu, kRestarts));
  } else {
    out.detection = std::move(sc.detection);
  }
  return out;
}

DetectOutcome run_method(Method method, const Network& network, int K, const Labeling& init,
                         const DetectOptions& options) {
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(network.p()));
  switch (method) {
    case Method::pcabm_mle: {
      auto r = fit_mle(network, K, init, options);
      return {std::move(r.gamma), std::move(r.detection), std::nullopt};
    }
    case Method::pcabm_mle0: {
      auto r = fit_mle0(network, K, init, options.gamma, with_restarts(options.tabu, kRestarts));
      return {std::move(r.gamma), std::move(r.detection), std::nullopt};
    }
    case Method::pcabm_scwa: {
      ScwaOptions so = options.scwa;
      so.gamma = options.gamma;
      auto r = scwa_detect(network, K, init, so);
      return {std::move(r.gamma), std::move(r.detection), std::move(r.embedding)};
    }
    case Method::sbm_mle:
      return detect_with_gamma(network, K, zero, true, options);
    case Method::sbm_sc:
      return detect_with_gamma(network, K, zero, false, options);
  }
  throw Error("unknown method");
}

}  // namespace pcabm
