#pragma once

#include <optional>
#include <string>

#include "pcabm/gamma.hpp"
#include "pcabm/scwa.hpp"
#include "pcabm/tabu.hpp"

namespace pcabm {

enum class Method {
  pcabm_mle,   // SCWA initialization, then tabu search
  pcabm_mle0,  // tabu search from the supplied initialization
  pcabm_scwa,  // SCWA only
  sbm_mle,     // gamma pinned to 0, spectral initialization, tabu search
  sbm_sc,      // spectral clustering on A
};

Method parse_method(const std::string& name);
std::string method_name(Method m);

struct DetectOptions {
  GammaFitOptions gamma;
  ScwaOptions scwa;  // scwa.gamma is ignored; `gamma` above is used
  TabuOptions tabu;  // restarts == 0 picks 5
};

struct DetectOutcome {
  GammaFit gamma;  // for the SBM methods gamma_hat is the zero vector
  DetectionResult detection;
  std::optional<SpectralEmbedding> embedding;
};

// SCWA (gamma fitted on `init`), then tabu search from the SCWA labels (restart 0) plus random restarts.
MleResult fit_mle(const Network& network, int K, const Labeling& init, const DetectOptions& options = {});

// Spectral clustering and tabu search with a fixed gamma, bypassing fit_gamma.
DetectOutcome detect_with_gamma(const Network& network, int K, const Eigen::VectorXd& gamma,
                                bool refine, const DetectOptions& options = {});

// Dispatch for the CLI and experiment harness. `init` seeds the gamma fit (and the tabu
// start for pcabm_mle0).
DetectOutcome run_method(Method method, const Network& network, int K, const Labeling& init,
                         const DetectOptions& options = {});

}  // namespace pcabm
