#include "pcabm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

#include "pcabm/io.hpp"
#include "pcabm/metrics.hpp"
#include "pcabm/random.hpp"

namespace pcabm {

using json = nlohmann::json;

namespace {

const std::set<std::string> kDesigns = {"table1", "fig3a", "fig3b", "fig3c", "fig3d",
                                        "fig4a",  "fig4b", "fig5",  "custom"};

Eigen::MatrixXd standard_B() {
  Eigen::MatrixXd B(2, 2);
  B << 2, 1, 1, 2;
  return B;
}

double param(const CellParams& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

std::size_t param_n(const CellParams& p, std::size_t fallback) {
  const double v = param(p, "n", static_cast<double>(fallback));
  if (!(v >= 2) || v != std::floor(v)) throw Error("grid parameter n must be an integer >= 2");
  return static_cast<std::size_t>(v);
}

std::vector<CovariateSampler> parse_all(const std::vector<std::string>& specs) {
  std::vector<CovariateSampler> out;
  for (const auto& s : specs) out.push_back(CovariateSampler::parse(s));
  return out;
}

std::vector<CellParams> one_axis(const std::string& key, std::vector<double> values) {
  std::vector<CellParams> grid;
  for (double v : values) grid.push_back({{key, v}});
  return grid;
}

// Streams derived from the replicate seed.
enum Stream : std::uint64_t { kInit = 100, kTabu = 101, kKMeans = 102 };

}  // namespace

const std::vector<std::string>& default_covariate_specs() {
  static const std::vector<std::string> specs = {"bernoulli(0.1)", "poisson(0.1)", "uniform(0,1)",
                                                 "exponential(0.3)", "normal(0,0.09)"};
  return specs;
}

Eigen::VectorXd default_gamma0() {
  Eigen::VectorXd g(5);
  g << 0.4, 0.8, 1.2, 1.6, 2.0;
  return g;
}

std::vector<CellParams> default_grid(const std::string& design) {
  if (design == "table1" || design == "fig3a" || design == "fig4a") {
    return one_axis("n", {100, 200, 300, 400, 500});
  }
  if (design == "fig3b") return one_axis("c_rho", {0.3, 0.4, 0.5, 0.6, 0.7});
  if (design == "fig3c") return one_axis("c_gamma", {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6});
  if (design == "fig3d") return one_axis("gamma_forced", {0, 0.5, 1, 1.5, 2, 2.5, 3, 3.5});
  if (design == "fig4b") return one_axis("c_rho", {1.2, 1.6, 2.0, 2.4, 2.8, 3.2});
  if (design == "fig5") {
    std::vector<CellParams> grid;
    for (double r : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
      for (double s : {1.0, 2.0, 3.0}) grid.push_back({{"r", r}, {"scenario", s}});
    }
    return grid;
  }
  if (design == "custom") return {CellParams{}};
  throw Error("unknown design '" + design + "'");
}

std::vector<std::string> default_methods(const std::string& design) {
  if (design == "table1") return {"gamma_fit"};
  if (design == "fig3d" || design == "fig5") return {"pcabm_mle"};
  if (design == "fig4a" || design == "fig4b") return {"pcabm_mle", "pcabm_scwa"};
  return {"pcabm_mle", "pcabm_scwa", "sbm_mle", "sbm_sc"};
}

DesignInstance make_instance(const std::string& design, const CellParams& params, std::uint64_t seed,
                             const CustomDesign& custom) {
  DesignInstance out;
  if (design == "fig4a" || design == "fig4b") {
    const std::size_t n = param_n(params, design == "fig4a" ? 500 : 200);
    const double c_rho = param(params, "c_rho", 2.0);
    out.rho = GenSpec::rho_from_c(c_rho, n);
    auto d = sample_dcbm(n, 2, {0.5, 1.5}, standard_B(), out.rho, seed);
    out.planted = std::move(d.instance);
    return out;
  }

  GenSpec spec;
  spec.seed = seed;
  spec.K = 2;
  spec.B_bar = standard_B();
  double c_rho = 1.0;
  if (design == "table1" || design == "fig3a" || design == "fig3b" || design == "fig3c") {
    const std::size_t def_n = design == "table1" || design == "fig3a" ? 500 : 200;
    spec.n = param_n(params, def_n);
    c_rho = param(params, "c_rho", design == "table1" ? 2.0 : design == "fig3c" ? 1.0 : 0.5);
    const double c_gamma = param(params, "c_gamma", design == "table1" ? 1.0 : 1.4);
    spec.covariates = parse_all(default_covariate_specs());
    spec.gamma0 = c_gamma * default_gamma0();
  } else if (design == "fig3d") {
    spec.n = param_n(params, 500);
    c_rho = param(params, "c_rho", 1.0);
    spec.covariates = parse_all({"poisson(0.1)"});
    spec.gamma0 = Eigen::VectorXd::Constant(1, param(params, "gamma0", 2.0));
    out.forced_gamma = Eigen::VectorXd::Constant(1, param(params, "gamma_forced", 2.0));
  } else if (design == "fig5") {
    spec.n = param_n(params, 500);
    c_rho = param(params, "c_rho", 0.8);
    spec.covariates = parse_all({"normal(0,0.09)"});
    spec.gamma0 = Eigen::VectorXd::Constant(1, 2.0);
  } else if (design == "custom") {
    spec.n = param_n(params, custom.n);
    spec.K = custom.K;
    spec.pi = custom.pi;
    spec.B_bar = custom.B_bar.size() ? custom.B_bar : standard_B();
    c_rho = param(params, "c_rho", custom.c_rho);
    spec.covariates = parse_all(custom.covariates);
    spec.gamma0 = param(params, "c_gamma", 1.0) *
                  (custom.gamma0.size() ? custom.gamma0 : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(custom.covariates.size())));
  } else {
    throw Error("unknown design '" + design + "'");
  }
  spec.rho_n = (design == "custom" && custom.rho && !params.count("c_rho")) ? *custom.rho
                                                                            : GenSpec::rho_from_c(c_rho, spec.n);
  out.rho = spec.rho_n;
  out.gamma0 = spec.gamma0;
  // exp(z'gamma) is heavy tailed under the exponential covariate, so single pairs can exceed n.
  if (design != "custom") spec.rate_limit = static_cast<double>(spec.n) * static_cast<double>(spec.n);
  out.planted = sample_pcabm(spec);

  if (design == "fig5") {
    const double r = param(params, "r", 0.5);
    const int scenario = static_cast<int>(param(params, "scenario", 2));
    auto fake = sample_correlated_covariate(out.planted.truth, spec.B_bar, r, seed);
    out.notes["corr_reference"] = fake.reference;
    out.notes["corr_achieved"] = fake.achieved;
    out.notes["corr_scale"] = fake.scale;
    out.notes["corr_calibrated"] = fake.calibrated ? 1.0 : 0.0;
    const Network& net = out.planted.network;
    switch (scenario) {
      case 1: break;
      case 2: out.planted.network = net.with_covariates(fake.z); break;
      case 3: out.planted.network = net.with_covariates(net.covariates().concat(fake.z)); break;
      default: throw Error("fig5 scenario must be 1 (true), 2 (false) or 3 (both)");
    }
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_params(const CellParams& params) {
  std::string s;
  for (const auto& [k, v] : params) {
    if (!s.empty()) s += ';';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    s += k + "=" + buf;
  }
  return s;
}

namespace {

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? " " : "") + format_double(v[k]);
  return s;
}

std::string quote(const std::string& s) {
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c == '\n' ? ' ' : c;
  }
  return q + "\"";
}

std::vector<CellParams> parse_grid(const json& g) {
  std::vector<CellParams> grid;
  if (g.is_array()) {
    for (const auto& cell : g) {
      CellParams p;
      for (auto it = cell.begin(); it != cell.end(); ++it) p[it.key()] = it.value().get<double>();
      grid.push_back(std::move(p));
    }
    return grid;
  }
  if (!g.is_object()) throw Error("plan grid must be an object of value lists or a list of cells");
  grid.push_back({});
  for (auto it = g.begin(); it != g.end(); ++it) {
    std::vector<double> values;
    if (it.value().is_array()) {
      for (const auto& v : it.value()) values.push_back(v.get<double>());
    } else {
      values.push_back(it.value().get<double>());
    }
    if (values.empty()) throw Error("grid axis '" + it.key() + "' is empty");
    std::vector<CellParams> next;
    for (const auto& cell : grid) {
      for (double v : values) {
        auto c = cell;
        c[it.key()] = v;
        next.push_back(std::move(c));
      }
    }
    grid = std::move(next);
  }
  return grid;
}

bool is_builtin_method(const std::string& m) {
  if (m == "gamma_fit") return true;
  try {
    parse_method(m);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::string fill_pattern(std::string pattern, std::size_t cell, int replicate) {
  auto replace = [&](const std::string& key, const std::string& value) {
    for (auto pos = pattern.find(key); pos != std::string::npos; pos = pattern.find(key, pos + value.size())) {
      pattern.replace(pos, key.size(), value);
    }
  };
  replace("{cell}", std::to_string(cell));
  replace("{replicate}", std::to_string(replicate));
  return pattern;
}

void fill_metrics(RunRecord& rec, const Labeling& predicted, const Labeling& truth) {
  const auto rep = evaluate(predicted, truth);
  rec.ari = rep.ari;
  rec.nmi = rep.nmi;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rec.error_count = rep.has_losses ? static_cast<double>(rep.error_count) : nan;
  rec.l1 = rep.has_losses ? rep.l1 : nan;
  rec.l2 = rep.has_losses ? rep.l2 : nan;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

ExperimentPlan ExperimentPlan::parse_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("plan is not valid JSON: ") + e.what());
  }
  ExperimentPlan plan;
  plan.threads = default_threads();
  try {
    plan.design = j.value("design", std::string("custom"));
    if (j.contains("grid")) plan.grid = parse_grid(j["grid"]);
    plan.replicates = j.value("replicates", 1);
    plan.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("methods")) plan.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("external")) plan.external = j["external"].get<std::map<std::string, std::string>>();
    plan.output_dir = j.value("output_dir", std::string());
    plan.threads = j.value("threads", plan.threads);
    plan.timing = j.value("timing", false);
    plan.tabu_restarts = j.value("tabu_restarts", 0);
    if (j.contains("custom")) {
      const auto& c = j["custom"];
      plan.custom.n = c.value("n", std::size_t{200});
      plan.custom.K = c.value("K", 2);
      if (c.contains("pi")) plan.custom.pi = c["pi"].get<std::vector<double>>();
      if (c.contains("B_bar")) {
        const auto rows = c["B_bar"].get<std::vector<std::vector<double>>>();
        plan.custom.B_bar.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t a = 0; a < rows.size(); ++a) {
          if (rows[a].size() != rows.size()) throw Error("custom B_bar must be square");
          for (std::size_t b = 0; b < rows.size(); ++b) {
            plan.custom.B_bar(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = rows[a][b];
          }
        }
      }
      if (c.contains("rho")) plan.custom.rho = c["rho"].get<double>();
      plan.custom.c_rho = c.value("c_rho", 1.0);
      if (c.contains("covariates")) plan.custom.covariates = c["covariates"].get<std::vector<std::string>>();
      if (c.contains("gamma0")) {
        const auto g = c["gamma0"].get<std::vector<double>>();
        plan.custom.gamma0 = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed plan: ") + e.what());
  }
  plan.check();
  return plan;
}

void ExperimentPlan::check() const {
  if (!kDesigns.count(design)) throw Error("unknown design '" + design + "'");
  if (replicates < 1) throw Error("replicates must be at least 1");
  for (const auto& m : methods) {
    if (!is_builtin_method(m) && !external.count(m)) {
      throw Error("unknown method '" + m + "' (not built in and no external label pattern given)");
    }
  }
}

PlanResult run_plan(const ExperimentPlan& plan) {
  plan.check();
  const auto grid = plan.grid.empty() ? default_grid(plan.design) : plan.grid;
  auto methods = plan.methods.empty() ? default_methods(plan.design) : plan.methods;
  for (const auto& [name, pattern] : plan.external) {
    if (std::find(methods.begin(), methods.end(), name) == methods.end()) methods.push_back(name);
  }
  const int K = plan.design == "custom" ? plan.custom.K : 2;
  const std::size_t tasks = grid.size() * static_cast<std::size_t>(plan.replicates);
  std::vector<std::vector<RunRecord>> slots(tasks);

  parallel_for(tasks, plan.threads, [&](std::size_t t) {
    const std::size_t cell = t / static_cast<std::size_t>(plan.replicates);
    const int rep = static_cast<int>(t % static_cast<std::size_t>(plan.replicates));
    // Shared by every cell: paired comparisons across methods and sweep values.
    const std::uint64_t seed = derive_seed(plan.seed, static_cast<std::uint64_t>(rep));
    RunRecord base;
    base.design = plan.design;
    base.cell = cell;
    base.params = format_params(grid[cell]);
    base.replicate = rep;
    base.seed = seed;

    std::optional<DesignInstance> inst;
    std::string gen_error;
    try {
      inst = make_instance(plan.design, grid[cell], seed, plan.custom);
    } catch (const std::exception& e) {
      gen_error = std::string("generation failed: ") + e.what();
    }
    for (const auto& name : methods) {
      RunRecord rec = base;
      rec.method = name;
      const auto start = std::chrono::steady_clock::now();
      try {
        if (!inst) throw Error(gen_error);
        const Network& net = inst->planted.network;
        const Labeling& truth = inst->planted.truth;
        Rng init_rng(derive_seed(seed, kInit));
        const Labeling init = random_balanced_labeling(net.n(), K, init_rng);
        DetectOptions opts;
        opts.tabu.seed = derive_seed(seed, kTabu);
        opts.tabu.restarts = plan.tabu_restarts;
        opts.scwa.kmeans.seed = derive_seed(seed, kKMeans);

        if (auto ext = plan.external.find(name); ext != plan.external.end()) {
          std::ifstream in(fill_pattern(ext->second, cell, rep));
          if (!in) throw Error("cannot open external labels " + fill_pattern(ext->second, cell, rep));
          fill_metrics(rec, io::read_labels(in, net, K), truth);
        } else if (name == "gamma_fit") {
          GammaFit fit = fit_gamma(net, init, opts.gamma);
          if (fit.converged) {
            try {
              fit = gamma_inference(net, init, std::move(fit));
              rec.gamma_se = to_vec(fit.se);
            } catch (const CollinearityError&) {
            }
          }
          rec.gamma_hat = to_vec(fit.gamma_hat);
          rec.loglik = fit.loglik;
          const double nan = std::numeric_limits<double>::quiet_NaN();
          rec.ari = rec.nmi = rec.error_count = rec.l1 = rec.l2 = nan;
          if (!fit.converged) throw Error("gamma fit did not converge");
        } else {
          const Method m = parse_method(name);
          DetectOutcome out;
          if (inst->forced_gamma && (m == Method::pcabm_mle || m == Method::pcabm_scwa)) {
            out = detect_with_gamma(net, K, *inst->forced_gamma, m == Method::pcabm_mle, opts);
          } else {
            out = run_method(m, net, K, init, opts);
          }
          rec.gamma_hat = to_vec(out.gamma.gamma_hat);
          rec.loglik = out.detection.loglik;
          fill_metrics(rec, out.detection.labeling, truth);
        }
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
      }
      rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      slots[t].push_back(std::move(rec));
    }
  });

  PlanResult res;
  for (auto& s : slots) {
    for (auto& r : s) res.records.push_back(std::move(r));
  }
  res.aggregates = aggregate(res.records);
  if (!plan.output_dir.empty()) {
    std::filesystem::create_directories(plan.output_dir);
    io::write_file(plan.output_dir + "/records.csv", records_csv(res.records, plan.timing));
    io::write_file(plan.output_dir + "/aggregate.csv", aggregate_csv(res.aggregates));
  }
  return res;
}

namespace {

struct MeanSd {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double sd = std::numeric_limits<double>::quiet_NaN();
};

MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd out;
  if (xs.empty()) return out;
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  out.mean = m;
  if (xs.size() >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    out.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

}  // namespace

std::vector<Aggregate> aggregate(const std::vector<RunRecord>& records) {
  std::vector<Aggregate> out;
  std::map<std::pair<std::size_t, std::string>, std::vector<const RunRecord*>> groups;
  std::vector<std::pair<std::size_t, std::string>> order;
  for (const auto& r : records) {
    auto key = std::make_pair(r.cell, r.method);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& key : order) {
    const auto& rs = groups[key];
    Aggregate a;
    a.design = rs.front()->design;
    a.cell = key.first;
    a.params = rs.front()->params;
    a.method = key.second;
    std::vector<double> ari, nmi, err, l1, l2;
    std::vector<std::vector<double>> gamma;
    for (const auto* r : rs) {
      if (!r->ok) {
        ++a.failures;
        continue;
      }
      ++a.count;
      if (!std::isnan(r->ari)) ari.push_back(r->ari);
      if (!std::isnan(r->nmi)) nmi.push_back(r->nmi);
      if (!std::isnan(r->error_count)) err.push_back(r->error_count);
      if (!std::isnan(r->l1)) l1.push_back(r->l1);
      if (!std::isnan(r->l2)) l2.push_back(r->l2);
      if (!r->gamma_hat.empty()) {
        if (gamma.empty()) gamma.resize(r->gamma_hat.size());
        if (r->gamma_hat.size() == gamma.size()) {
          for (std::size_t c = 0; c < gamma.size(); ++c) gamma[c].push_back(r->gamma_hat[c]);
        }
      }
    }
    auto set = [](const std::vector<double>& xs, double& m, double& s) {
      const auto ms = mean_sd(xs);
      m = ms.mean;
      s = ms.sd;
    };
    set(ari, a.ari_mean, a.ari_sd);
    set(nmi, a.nmi_mean, a.nmi_sd);
    set(err, a.errors_mean, a.errors_sd);
    set(l1, a.l1_mean, a.l1_sd);
    set(l2, a.l2_mean, a.l2_sd);
    for (const auto& g : gamma) {
      const auto ms = mean_sd(g);
      a.gamma_mean.push_back(ms.mean);
      a.gamma_sd.push_back(ms.sd);
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string records_csv(const std::vector<RunRecord>& records, bool timing) {
  std::ostringstream os;
  os << "design,cell,params,replicate,seed,method,status,ari,nmi,error_count,l1,l2,loglik,gamma_hat,gamma_se";
  if (timing) os << ",wall_time";
  os << ",error\n";
  for (const auto& r : records) {
    os << r.design << ',' << r.cell << ',' << r.params << ',' << r.replicate << ',' << r.seed << ','
       << r.method << ',' << (r.ok ? "ok" : "failed") << ',';
    if (r.ok) {
      os << format_double(r.ari) << ',' << format_double(r.nmi) << ',' << format_double(r.error_count)
         << ',' << format_double(r.l1) << ',' << format_double(r.l2) << ',' << format_double(r.loglik);
    } else {
      os << "NA,NA,NA,NA,NA,NA";
    }
    os << ',' << join(r.gamma_hat) << ',' << join(r.gamma_se);
    if (timing) os << ',' << format_double(r.wall_time);
    os << ',' << (r.error.empty() ? "" : quote(r.error)) << '\n';
  }
  return os.str();
}

std::string aggregate_csv(const std::vector<Aggregate>& aggregates) {
  std::ostringstream os;
  os << "design,cell,params,method,count,failures,ari_mean,ari_sd,nmi_mean,nmi_sd,error_count_mean,"
        "error_count_sd,l1_mean,l1_sd,l2_mean,l2_sd,gamma_mean,gamma_sd\n";
  for (const auto& a : aggregates) {
    os << a.design << ',' << a.cell << ',' << a.params << ',' << a.method << ',' << a.count << ','
       << a.failures << ',' << format_double(a.ari_mean) << ',' << format_double(a.ari_sd) << ','
       << format_double(a.nmi_mean) << ',' << format_double(a.nmi_sd) << ',' << format_double(a.errors_mean)
       << ',' << format_double(a.errors_sd) << ',' << format_double(a.l1_mean) << ','
       << format_double(a.l1_sd) << ',' << format_double(a.l2_mean) << ',' << format_double(a.l2_sd) << ','
       << join(a.gamma_mean) << ',' << join(a.gamma_sd) << '\n';
  }
  return os.str();
}

GammaHistogram gamma_histogram(std::size_t n, int replicates, std::uint64_t seed, int threads,
                               const std::vector<std::string>& covariates, const Eigen::VectorXd& gamma0,
                               double c_rho) {
  if (replicates < 1) throw Error("replicates must be at least 1");
  const auto samplers = parse_all(covariates);
  const bool informative = std::any_of(samplers.begin(), samplers.end(),
                                       [](const CovariateSampler& s) { return s.variance() > 0; });
  if (!informative) {
    throw Error("every covariate is constant, so gamma is not identifiable and all draws would "
                "coincide; use covariates with positive variance");
  }
  const auto p = static_cast<Eigen::Index>(samplers.size());
  GammaHistogram h;
  h.n = n;
  h.rho = GenSpec::rho_from_c(c_rho, n);
  h.scale = std::sqrt(static_cast<double>(num_pairs(n)) * h.rho);
  h.gamma0 = gamma0;
  h.gamma_hat.resize(replicates, p);
  h.standardized.resize(replicates, p);
  h.t_stats.resize(replicates, p);
  h.plugin_var.resize(replicates, p);
  h.converged.assign(static_cast<std::size_t>(replicates), false);
  std::vector<char> ok(static_cast<std::size_t>(replicates), 0);
  parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t r) {
    const auto rr = static_cast<Eigen::Index>(r);
    GenSpec spec;
    spec.n = n;
    spec.K = 2;
    Eigen::MatrixXd B(2, 2);
    B << 2, 1, 1, 2;
    spec.B_bar = B;
    spec.rho_n = h.rho;
    spec.gamma0 = gamma0;
    spec.covariates = samplers;
    spec.seed = derive_seed(seed, r);
    spec.rate_limit = static_cast<double>(n) * static_cast<double>(n);
    const auto inst = sample_pcabm(spec);
    Rng init_rng(derive_seed(spec.seed, kInit));
    const auto init = random_balanced_labeling(n, 2, init_rng);
    GammaFit fit = fit_gamma(inst.network, init);
    ok[r] = fit.converged ? 1 : 0;
    h.gamma_hat.row(rr) = fit.gamma_hat.transpose();
    h.standardized.row(rr) = h.scale * (fit.gamma_hat - gamma0).transpose();
    h.t_stats.row(rr).setConstant(std::numeric_limits<double>::quiet_NaN());
    h.plugin_var.row(rr).setConstant(std::numeric_limits<double>::quiet_NaN());
    if (fit.converged) {
      fit = gamma_inference(inst.network, init, std::move(fit));
      h.t_stats.row(rr) = ((fit.gamma_hat - gamma0).array() / fit.se.array()).matrix().transpose();
      h.plugin_var.row(rr) = (h.scale * h.scale * fit.cov.diagonal()).transpose();
    }
  });
  for (std::size_t r = 0; r < ok.size(); ++r) h.converged[r] = ok[r] != 0;
  return h;
}

std::string gamma_histogram_csv(const GammaHistogram& h) {
  std::ostringstream os;
  os << "replicate,coordinate,gamma0,gamma_hat,standardized,t_stat,plugin_var,converged\n";
  for (Eigen::Index r = 0; r < h.gamma_hat.rows(); ++r) {
    for (Eigen::Index c = 0; c < h.gamma_hat.cols(); ++c) {
      os << r << ',' << c + 1 << ',' << format_double(h.gamma0[c]) << ',' << format_double(h.gamma_hat(r, c))
         << ',' << format_double(h.standardized(r, c)) << ',' << format_double(h.t_stats(r, c)) << ','
         << format_double(h.plugin_var(r, c)) << ',' << (h.converged[static_cast<std::size_t>(r)] ? 1 : 0)
         << '\n';
    }
  }
  return os.str();
}

PlanResult misspecified_gamma_sweep(const std::vector<double>& gamma_values, int replicates,
                                    std::uint64_t seed, int threads, std::size_t n) {
  ExperimentPlan plan;
  plan.design = "fig3d";
  for (double g : gamma_values) plan.grid.push_back({{"gamma_forced", g}, {"n", static_cast<double>(n)}});
  plan.replicates = replicates;
  plan.seed = seed;
  plan.methods = {"pcabm_mle"};
  plan.threads = threads;
  return run_plan(plan);
}

double ks_standard_normal(std::vector<double> sample) {
  if (sample.empty()) throw Error("empty sample");
  std::sort(sample.begin(), sample.end());
  const double m = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = 0.5 * std::erfc(-sample[i] / std::sqrt(2.0));
    d = std::max({d, static_cast<double>(i + 1) / m - F, F - static_cast<double>(i) / m});
  }
  return d;
}

}  // namespace pcabm
