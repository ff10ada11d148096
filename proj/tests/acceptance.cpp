// End-to-end acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "pcabm/covbuild.hpp"
#include "pcabm/detect.hpp"
#include "pcabm/experiment.hpp"
#include "pcabm/gamma.hpp"
#include "pcabm/io.hpp"
#include "pcabm/metrics.hpp"
#include "pcabm/scwa.hpp"
#include "pcabm/simgen.hpp"
#include "pcabm/tabu.hpp"

using namespace pcabm;

namespace {

int failures = 0;
const int kThreads = std::max(2, default_threads());

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Mean ARI per (cell, method) from a plan result.
std::map<std::pair<std::size_t, std::string>, double> mean_ari(const PlanResult& res) {
  std::map<std::pair<std::size_t, std::string>, double> out;
  for (const auto& a : res.aggregates) out[{a.cell, a.method}] = a.ari_mean;
  return out;
}

std::size_t failed_runs(const PlanResult& res) {
  std::size_t f = 0;
  for (const auto& r : res.records) f += r.ok ? 0 : 1;
  return f;
}

void table1() {
  // Standard deviations from the published table, rows n = 100 and n = 300.
  const std::map<std::size_t, std::vector<double>> sd_ref = {
      {100, {0.0414, 0.0354, 0.0455, 0.0467, 0.0484}},
      {300, {0.0205, 0.0151, 0.0227, 0.0217, 0.0234}}};
  const Eigen::VectorXd g0 = default_gamma0();
  const int reps = 100;
  bool pass = true;
  std::string detail;
  for (const auto& [n, ref] : sd_ref) {
    Eigen::MatrixXd est(reps, 5);
    std::vector<int> ok(reps, 0);
    parallel_for(reps, kThreads, [&](std::size_t r) {
      const auto seed = derive_seed(2024, n, r);
      auto inst = make_instance("table1", {{"n", static_cast<double>(n)}}, seed);
      Rng rng(derive_seed(seed, 100));
      auto lab = random_balanced_labeling(n, 2, rng);
      auto fit = fit_gamma(inst.planted.network, lab);
      est.row(static_cast<Eigen::Index>(r)) = fit.gamma_hat.transpose();
      ok[r] = fit.converged;
    });
    if (std::count(ok.begin(), ok.end(), 1) != reps) pass = false;
    detail += "n=" + std::to_string(n) + ":";
    for (int c = 0; c < 5; ++c) {
      const double m = est.col(c).mean();
      const double sd = std::sqrt((est.col(c).array() - m).square().sum() / (reps - 1));
      const double ratio = sd / ref[static_cast<std::size_t>(c)];
      const bool ok_c = std::abs(m - g0[c]) <= 0.03 && ratio <= 1.5 && ratio >= 1 / 1.5;
      pass = pass && ok_c;
      detail += " " + fmt("%.3f", m) + "(" + fmt("%.4f", sd) + ")";
    }
    detail += "; ";
  }
  report(1, pass, detail);
}

void normality() {
  auto h = gamma_histogram(500, 100, 77, kThreads);
  bool pass = true;
  std::string detail = "KS per coordinate:";
  for (Eigen::Index c = 0; c < h.standardized.cols(); ++c) {
    // Standardize by the plug-in variance averaged over replicates.
    const double v = h.plugin_var.col(c).mean();
    std::vector<double> s;
    for (Eigen::Index r = 0; r < h.standardized.rows(); ++r) s.push_back(h.standardized(r, c) / std::sqrt(v));
    const double ks = ks_standard_normal(s);
    pass = pass && ks < 0.15;
    detail += " " + fmt("%.3f", ks);
  }
  report(2, pass, detail);
}

void derivatives() {
  double worst_g = 0, worst_h = 0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    Rng rng(derive_seed(31, t));
    std::uniform_int_distribution<int> nn(6, 30), pp(1, 3), kk(1, 3);
    const auto n = static_cast<std::size_t>(nn(rng));
    const auto p = static_cast<std::size_t>(pp(rng));
    auto net = oracle::random_network(n, p, 0.3, derive_seed(32, t));
    auto lab = oracle::random_labels(n, std::min<int>(kk(rng), static_cast<int>(n)), derive_seed(33, t));
    Eigen::VectorXd g(static_cast<Eigen::Index>(p));
    std::normal_distribution<double> d(0, 0.5);
    for (auto& x : g) x = d(rng);
    const auto grad = gamma_grad(net, lab, g);
    const auto hess = gamma_hessian(net, lab, g);
    const double h = 1e-5;
    Eigen::VectorXd fd_g(g.size());
    Eigen::MatrixXd fd_h(g.size(), g.size());
    for (Eigen::Index c = 0; c < g.size(); ++c) {
      Eigen::VectorXd up = g, dn = g;
      up[c] += h;
      dn[c] -= h;
      fd_g[c] = (gamma_loglik(net, lab, up) - gamma_loglik(net, lab, dn)) / (2 * h);
      fd_h.col(c) = (gamma_grad(net, lab, up) - gamma_grad(net, lab, dn)) / (2 * h);
    }
    worst_g = std::max(worst_g, (grad - fd_g).norm() / std::max(1.0, grad.norm()));
    worst_h = std::max(worst_h, (hess - fd_h).norm() / std::max(1.0, hess.norm()));
  }
  report(3, worst_g < 1e-5 && worst_h < 1e-5,
         "max relative error gradient " + fmt("%.2e", worst_g) + ", Hessian " + fmt("%.2e", worst_h));
}

void exhaustive() {
  Eigen::MatrixXd B(2, 2);
  B << 3, 1, 1, 3;
  int hits = 0, hits10 = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    GenSpec spec;
    spec.n = 8;
    spec.K = 2;
    spec.B_bar = B;
    // Dense: every pair has expected rate at least 1 before the covariate factor.
    spec.rho_n = 1.0;
    spec.covariates = {CovariateSampler::parse("normal(0,0.3)")};
    spec.gamma0 = Eigen::VectorXd::Constant(1, 0.5);
    spec.seed = derive_seed(404, s);
    auto inst = sample_pcabm(spec);
    const auto& net = inst.network;
    Rng rng(derive_seed(spec.seed, 100));
    const auto init = random_balanced_labeling(8, 2, rng);
    const auto fit = fit_gamma(net, init);
    double best = -1e300;
    oracle::for_each_labeling(8, 2, [&](const Labeling& e) { best = std::max(best, oracle::profile_loglik(net, e, fit.gamma_hat)); });
    const double tol = 1e-9 * std::max(1.0, std::abs(best));
    TabuOptions opt;
    opt.seed = derive_seed(spec.seed, 101);
    hits += tabu_search(net, fit.gamma_hat, init, opt).loglik >= best - tol;
    // Supplementary, not graded: the same search with twice the default restarts.
    opt.restarts = 10;
    hits10 += tabu_search(net, fit.gamma_hat, init, opt).loglik >= best - tol;
  }
  report(4, hits >= 95,
         std::to_string(hits) + " of 100 seeds reach the enumerated maximum with default options (10 restarts: " +
             std::to_string(hits10) + ")");
}

void fig3c() {
  auto plan = ExperimentPlan::parse_json(R"({"design":"fig3c","grid":[{"c_gamma":0.2},{"c_gamma":1.6}],"replicates":50,"seed":3})");
  plan.threads = kThreads;
  const auto res = run_plan(plan);
  auto m = mean_ari(res);
  const std::vector<std::string> methods = {"pcabm_mle", "pcabm_scwa", "sbm_mle", "sbm_sc"};
  bool low = true;
  std::string detail = "c_gamma=0.2:";
  for (const auto& me : methods) {
    low = low && m[{0, me}] > 0.8;
    detail += " " + me + " " + fmt("%.3f", m[{0, me}]);
  }
  detail += "; c_gamma=1.6:";
  for (const auto& me : methods) detail += " " + me + " " + fmt("%.3f", m[{1, me}]);
  const bool high = m[{1, "pcabm_mle"}] > 0.9 && m[{1, "sbm_mle"}] < 0.3 && m[{1, "sbm_sc"}] < 0.3;
  detail += std::string("; low-magnitude part ") + (low ? "ok" : "not met") + ", high-magnitude part " + (high ? "ok" : "not met");
  report(5, low && high && failed_runs(res) == 0, detail);
}

void fig3d() {
  const std::vector<double> values = {0, 0.5, 1, 1.5, 2, 2.5, 3, 3.5};
  const auto res = misspecified_gamma_sweep(values, 20, 11, kThreads);
  std::map<std::size_t, std::vector<double>> ari;
  for (const auto& r : res.records)
    if (r.ok) ari[r.cell].push_back(r.ari);
  std::vector<double> means;
  std::string detail = "mean ARI:";
  for (std::size_t c = 0; c < values.size(); ++c) {
    means.push_back(ari[c].empty() ? std::nan("") : mean_of(ari[c]));
    detail += " " + fmt("%.1f", values[c]) + "->" + fmt("%.3f", means.back());
  }
  const auto argmax = static_cast<std::size_t>(std::max_element(means.begin(), means.end()) - means.begin());
  const bool peak = std::abs(values[argmax] - 2.0) <= 0.5 + 1e-12;
  const bool zero = means[0] >= 0.25 && means[0] <= 0.55;
  detail += std::string("; peak at ") + fmt("%.1f", values[argmax]) + (peak ? " ok" : " not met") + ", forced 0 in [0.25,0.55] " +
            (zero ? "ok" : "not met");
  report(6, peak && zero && failed_runs(res) == 0, detail);
}

void spectral() {
  const std::vector<std::size_t> ns = {100, 200, 400, 800};
  std::vector<double> x, y;
  bool dense_enough = true;
  std::string detail;
  for (std::size_t n : ns) {
    const int reps = 20;
    std::vector<double> ratio(reps);
    double phi = 0;
    parallel_for(reps, kThreads, [&](std::size_t r) {
      const auto seed = derive_seed(700, n, r);
      auto inst = make_instance("table1", {{"n", static_cast<double>(n)}}, seed);
      const auto& net = inst.planted.network;
      Rng rng(derive_seed(seed, 100));
      const auto fit = fit_gamma(net, random_balanced_labeling(n, 2, rng));
      Eigen::MatrixXd D = Eigen::MatrixXd(adjust(net, fit.gamma_hat));
      Eigen::MatrixXd B(2, 2);
      B << 2, 1, 1, 2;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (i != j) D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) -= inst.rho * B(inst.planted.truth[i], inst.planted.truth[j]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D, Eigen::EigenvaluesOnly);
      const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
      ratio[r] = norm / std::sqrt(static_cast<double>(n) * inst.rho);
      if (r == 0) phi = static_cast<double>(n) * inst.rho;
    });
    dense_enough = dense_enough && phi >= 4 * std::log(static_cast<double>(n));
    x.push_back(std::log(static_cast<double>(n)));
    y.push_back(std::log(median_of(ratio)));
    detail += "n=" + std::to_string(n) + " phi=" + fmt("%.1f", phi) + " median " + fmt("%.3f", median_of(ratio)) + "; ";
  }
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  const double slope = sxy / sxx;
  detail += "slope " + fmt("%.3f", slope);
  report(7, dense_enough && slope >= -0.2 && slope <= 0.2, detail);
}

void fig5() {
  auto plan = ExperimentPlan::parse_json(
      R"({"design":"fig5","grid":[{"r":0.1,"scenario":2},{"r":0.5,"scenario":2},{"r":0.9,"scenario":2}],"replicates":30,"seed":8})");
  plan.threads = kThreads;
  const auto res = run_plan(plan);
  auto m = mean_ari(res);
  const double a = m[{0, "pcabm_mle"}], b = m[{1, "pcabm_mle"}], c = m[{2, "pcabm_mle"}];
  report(8, a > b && b > c && failed_runs(res) == 0,
         "false covariate only, mean ARI r=0.1 " + fmt("%.3f", a) + ", r=0.5 " + fmt("%.3f", b) + ", r=0.9 " + fmt("%.3f", c));
}

void polblogs() {
  const char* edges = std::getenv("PCABM_POLBLOGS_EDGES");
  const char* labels = std::getenv("PCABM_POLBLOGS_LABELS");
  if (!edges || !labels) {
    std::printf("criterion  9 SKIP  political blogs data not supplied (set PCABM_POLBLOGS_EDGES and PCABM_POLBLOGS_LABELS)\n");
    std::fflush(stdout);
    return;
  }
  try {
    io::EdgeListOptions eo;
    eo.directed = true;
    eo.cap_weights_at_one = true;
    std::vector<std::string> ids;
    {
      std::ifstream in(labels);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line))
        if (!line.empty()) ids.push_back(line.substr(0, line.find(',')));
    }
    std::ifstream lin(labels);
    // Nodes absent from the edge list are isolated and leave with the largest component.
    std::ifstream ein(edges);
    auto net0 = io::assemble(ids, io::read_edge_records(ein), {}, eo);
    auto truth0 = io::read_labels(lin, net0, 2);
    auto lcc = largest_component(net0, NodalTable().align(net0));
    const auto& net = lcc.network;
    std::vector<int> t;
    for (auto i : lcc.kept) t.push_back(truth0[i]);
    const Labeling truth(t, 2);
    auto withz = net.with_covariates(build_covariates(net, lcc.table, CovariateRecipe::parse("logdegprod")));
    DetectOptions opts;
    Rng rng(derive_seed(1, 100));
    auto out = run_method(Method::pcabm_mle, withz, 2, random_balanced_labeling(withz.n(), 2, rng), opts);
    const auto rep = evaluate(out.detection.labeling, truth);
    const double g = out.gamma.gamma_hat[0];
    report(9, g > 0.95 && g < 1.05 && rep.ari >= 0.80 && rep.error_count <= 65,
           "n=" + std::to_string(net.n()) + " gamma " + fmt("%.4f", g) + ", ARI " + fmt("%.3f", rep.ari) + ", errors " +
               std::to_string(rep.error_count) + " (" + std::to_string(net0.n()) + " before restriction)");
  } catch (const std::exception& e) {
    report(9, false, std::string("error: ") + e.what());
  }
}

void metric_oracles() {
  Rng rng(1010);
  std::uniform_int_distribution<int> nn(2, 30), kk(1, 4);
  int bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto n = static_cast<std::size_t>(nn(rng));
    const int K = kk(rng);
    std::uniform_int_distribution<int> d(0, K - 1);
    std::vector<int> a(n), b(n);
    for (auto& v : a) v = d(rng);
    for (auto& v : b) v = d(rng);
    const Labeling la(a, K), lb(b, K);
    const double ra = ari(la, lb), ro = oracle::ari_pairs(a, b);
    const double na = nmi(la, lb), no = oracle::nmi_direct(a, b);
    const auto l = l1_l2(la, lb);
    const auto o = oracle::losses_enumerated(a, b, K);
    bad += std::abs(ra - ro) > 1e-12 || std::abs(na - no) > 1e-12 || l.l1 != o.l1 || l.l2 != o.l2;
  }
  report(10, bad == 0, std::to_string(1000 - bad) + " of 1000 random pairs agree");
}

}  // namespace

int main(int argc, char** argv) {
  // Optional list of criterion numbers to run; all by default.
  std::vector<int> only;
  for (int k = 1; k < argc; ++k) only.push_back(std::atoi(argv[k]));
  auto want = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  const std::vector<std::pair<int, void (*)()>> all = {{1, table1},  {2, normality}, {3, derivatives}, {4, exhaustive},
                                                       {5, fig3c},   {6, fig3d},     {7, spectral},    {8, fig5},
                                                       {9, polblogs}, {10, metric_oracles}};
  for (const auto& [id, fn] : all) {
    if (!want(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
    std::fprintf(stderr, "  criterion %d took %.1f s\n", id,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::printf("%d criterion(s) failed\n", failures);
  return failures ? 1 : 0;
}
