#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pcabm/detect.hpp"
#include "pcabm/simgen.hpp"

namespace pcabm {

// Simulation designs. Parameters not set in a grid cell take the design default.
//   table1  n in {100..500}; c_rho 2; gamma0 (0.4, 0.8, 1.2, 1.6, 2); five covariates
//   fig3a   n in {100..500}; c_rho 0.5; c_gamma 1.4
//   fig3b   c_rho in {0.3..0.7}; n 200; c_gamma 1.4
//   fig3c   c_gamma in {0.2..1.6}; n 200; c_rho 1
//   fig3d   gamma_forced in {0, 0.5, .., 3.5}; n 500; c_rho 1; one poisson(0.1) covariate, gamma0 2
//   fig4a   DCBM, n in {100..500}; c_rho 2; degree parameters {0.5, 1.5}
//   fig4b   DCBM, c_rho in {1.2..3.2}; n 200
//   fig5    r in {0.1..0.9} x scenario {1 true, 2 false, 3 both}; n 500; c_rho 0.8; gamma0 2
//   custom  generator given explicitly
// Every design uses K = 2, pi = (1/2, 1/2) and B_bar = [[2, 1], [1, 2]] unless custom.
using CellParams = std::map<std::string, double>;

struct CustomDesign {
  std::size_t n = 200;
  int K = 2;
  std::vector<double> pi;
  Eigen::MatrixXd B_bar;
  std::optional<double> rho;  // otherwise rho_from_c(c_rho, n)
  double c_rho = 1.0;
  Eigen::VectorXd gamma0;     // multiplied by c_gamma
  std::vector<std::string> covariates;
};

// Covariate distributions of the five-coordinate design.
const std::vector<std::string>& default_covariate_specs();
Eigen::VectorXd default_gamma0();

struct DesignInstance {
  PlantedInstance planted;
  Eigen::VectorXd gamma0;                    // coefficients used to generate (empty for DCBM)
  std::optional<Eigen::VectorXd> forced_gamma;  // fig3d
  double rho = 0.0;
  std::map<std::string, double> notes;       // e.g. achieved correlation for fig5
};

DesignInstance make_instance(const std::string& design, const CellParams& params, std::uint64_t seed,
                             const CustomDesign& custom = {});

std::vector<CellParams> default_grid(const std::string& design);
std::vector<std::string> default_methods(const std::string& design);

struct ExperimentPlan {
  std::string design = "custom";
  std::vector<CellParams> grid;   // empty: design default
  int replicates = 1;
  std::uint64_t seed = 1;
  std::vector<std::string> methods;  // empty: design default
  // method name -> path pattern with {cell} and {replicate} placeholders, label CSV files
  std::map<std::string, std::string> external;
  std::string output_dir;
  int threads = 1;
  bool timing = false;  // adds wall_time, which makes output bytes run-dependent
  CustomDesign custom;
  int tabu_restarts = 0;  // 0: method default

  static ExperimentPlan parse_json(const std::string& text);
  void check() const;
};

struct RunRecord {
  std::string design;
  std::size_t cell = 0;
  std::string params;
  int replicate = 0;
  std::uint64_t seed = 0;
  std::string method;
  bool ok = true;
  std::string error;
  double ari = 0.0;
  double nmi = 0.0;
  double error_count = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  double loglik = 0.0;
  std::vector<double> gamma_hat;
  std::vector<double> gamma_se;
  double wall_time = 0.0;
};

struct Aggregate {
  std::string design;
  std::size_t cell = 0;
  std::string params;
  std::string method;
  std::size_t count = 0;
  std::size_t failures = 0;
  double ari_mean = 0, ari_sd = 0, nmi_mean = 0, nmi_sd = 0;
  double errors_mean = 0, errors_sd = 0, l1_mean = 0, l1_sd = 0, l2_mean = 0, l2_sd = 0;
  std::vector<double> gamma_mean, gamma_sd;
};

struct PlanResult {
  std::vector<RunRecord> records;
  std::vector<Aggregate> aggregates;
};

std::string format_params(const CellParams& params);
std::string format_double(double v);

// grid x replicates x methods. Methods on one (cell, replicate) share the generated instance.
// Failures are recorded per run; the plan continues. Writes records.csv and aggregate.csv
// under output_dir when it is set.
PlanResult run_plan(const ExperimentPlan& plan);

std::vector<Aggregate> aggregate(const std::vector<RunRecord>& records);
std::string records_csv(const std::vector<RunRecord>& records, bool timing);
std::string aggregate_csv(const std::vector<Aggregate>& aggregates);

struct GammaHistogram {
  std::size_t n = 0;
  double rho = 0.0;
  double scale = 0.0;  // sqrt(N_n rho), N_n = n (n - 1) / 2
  Eigen::VectorXd gamma0;
  Eigen::MatrixXd gamma_hat;     // replicates x p
  Eigen::MatrixXd standardized;  // sqrt(N_n rho) (gamma_hat - gamma0)
  Eigen::MatrixXd t_stats;       // (gamma_hat - gamma0) / se, per replicate plug-in
  Eigen::MatrixXd plugin_var;    // N_n rho cov_jj, per replicate
  std::vector<bool> converged;
};

// Five-covariate design at size n (c_rho 2 unless given), gamma fitted on random balanced
// labelings. Rejects designs where every covariate is identically zero.
GammaHistogram gamma_histogram(std::size_t n, int replicates, std::uint64_t seed, int threads = 1,
                               const std::vector<std::string>& covariates = default_covariate_specs(),
                               const Eigen::VectorXd& gamma0 = default_gamma0(), double c_rho = 2.0);
std::string gamma_histogram_csv(const GammaHistogram& h);

// fig3d with the given forced values; one row per (value, replicate).
PlanResult misspecified_gamma_sweep(const std::vector<double>& gamma_values, int replicates,
                                    std::uint64_t seed, int threads = 1, std::size_t n = 500);

// Kolmogorov-Smirnov distance between a sample and the standard normal.
double ks_standard_normal(std::vector<double> sample);

}  // namespace pcabm
