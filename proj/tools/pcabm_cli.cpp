// Command-line front end: simulate, fit-gamma, detect, evaluate, experiment,
// build-covariates, gamma-histogram.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pcabm/covbuild.hpp"
#include "pcabm/detect.hpp"
#include "pcabm/experiment.hpp"
#include "pcabm/io.hpp"
#include "pcabm/metrics.hpp"
#include "pcabm/random.hpp"
#include "pcabm/simgen.hpp"

using json = nlohmann::ordered_json;
using namespace pcabm;

namespace {

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vec_json(m.row(i).transpose()));
  return a;
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
  } else {
    io::write_file(path, j.dump(2) + "\n");
  }
}

void ensure_parent(const std::string& prefix) {
  const auto parent = std::filesystem::path(prefix).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

void write_network_files(const std::string& prefix, const Network& net) {
  ensure_parent(prefix);
  std::ostringstream e, c, n;
  io::write_edges(e, net);
  io::write_covariates(c, net);
  io::write_nodes(n, net);
  io::write_file(prefix + ".edges.txt", e.str());
  io::write_file(prefix + ".covariates.txt", c.str());
  io::write_file(prefix + ".nodes.txt", n.str());
}

// Options shared by subcommands that read a network.
struct NetworkArgs {
  std::string edges;
  std::string covariates;
  std::string nodes;
  bool directed = false;
  bool binarize = false;

  void add(CLI::App* app, bool covariates_required) {
    app->add_option("--edges", edges, "edge list: src dst [weight] per line")->required();
    auto* c = app->add_option("--covariates", covariates, "pair covariates: src dst z1 .. zp per line");
    if (covariates_required) c->required();
    app->add_option("--nodes", nodes, "node ids, one per line (keeps isolated nodes)");
    app->add_flag("--directed", directed, "edge records are directed; symmetrize by max");
    app->add_flag("--binarize", binarize, "cap edge weights at 1");
  }
  Network load() const {
    io::EdgeListOptions opts;
    opts.directed = directed;
    opts.cap_weights_at_one = binarize;
    return io::load_network(edges, covariates.empty() ? std::nullopt : std::optional(covariates),
                            nodes.empty() ? std::nullopt : std::optional(nodes), opts);
  }
};

Labeling initial_labeling(const Network& net, int K, const std::string& path, std::uint64_t seed) {
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    auto lab = io::read_labels(in, net, K);
    if (K > 0 && lab.K() != K) throw Error("initial labels use a different K");
    return lab;
  }
  if (K < 1) throw Error("--k is required when no initial labeling is given");
  Rng rng(derive_seed(seed, 100));
  return random_balanced_labeling(net.n(), K, rng);
}

json fit_json(const GammaFit& fit) {
  json j;
  j["gamma_hat"] = vec_json(fit.gamma_hat);
  j["loglik"] = fit.loglik;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["final_grad_norm"] = fit.final_grad_norm;
  if (fit.has_inference) {
    j["se"] = vec_json(fit.se);
    j["t"] = vec_json(fit.t_stats);
    j["cov"] = mat_json(fit.cov);
  }
  return j;
}

GenSpec spec_from_json(const nlohmann::json& j, std::uint64_t seed) {
  GenSpec spec;
  spec.n = j.at("n").get<std::size_t>();
  spec.K = j.value("K", 2);
  if (j.contains("pi")) spec.pi = j["pi"].get<std::vector<double>>();
  if (j.contains("B_bar")) {
    const auto rows = j["B_bar"].get<std::vector<std::vector<double>>>();
    spec.B_bar.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t a = 0; a < rows.size(); ++a) {
      if (rows[a].size() != rows.size()) throw Error("B_bar must be square");
      for (std::size_t b = 0; b < rows.size(); ++b) {
        spec.B_bar(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = rows[a][b];
      }
    }
  } else {
    spec.B_bar = Eigen::MatrixXd::Ones(spec.K, spec.K) + Eigen::MatrixXd::Identity(spec.K, spec.K);
  }
  if (j.contains("rho")) {
    spec.rho_n = j["rho"].get<double>();
  } else {
    spec.rho_n = GenSpec::rho_from_c(j.value("c_rho", 1.0), spec.n);
  }
  const auto covs = j.value("covariates", std::vector<std::string>{});
  for (const auto& c : covs) spec.covariates.push_back(CovariateSampler::parse(c));
  const auto g = j.value("gamma0", std::vector<double>(covs.size(), 0.0));
  spec.gamma0 = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
  spec.seed = seed;
  return spec;
}

int run_simulate(const std::string& spec_path, const std::string& prefix, std::optional<std::uint64_t> seed_opt) {
  const auto text = io::read_file(spec_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("spec is not valid JSON: ") + e.what());
  }
  const std::uint64_t seed = seed_opt ? *seed_opt : j.value("seed", std::uint64_t{1});
  PlantedInstance inst;
  json prov;
  prov["spec"] = json::parse(text);
  prov["seed"] = seed;
  try {
    if (j.contains("design")) {
      CellParams params;
      if (j.contains("params")) {
        for (auto it = j["params"].begin(); it != j["params"].end(); ++it) params[it.key()] = it.value().get<double>();
      }
      auto d = make_instance(j["design"].get<std::string>(), params, seed);
      prov["rho"] = d.rho;
      for (const auto& [k, v] : d.notes) prov["notes"][k] = v;
      inst = std::move(d.planted);
    } else {
      auto spec = spec_from_json(j, seed);
      inst = sample_pcabm(spec);
      prov["rho"] = spec.rho_n;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed spec: ") + e.what());
  }
  write_network_files(prefix, inst.network);
  std::ostringstream t;
  io::write_labels(t, inst.network, inst.truth);
  io::write_file(prefix + ".truth.csv", t.str());
  prov["n"] = inst.network.n();
  prov["p"] = inst.network.p();
  prov["total_weight"] = inst.network.total_weight();
  io::write_file(prefix + ".provenance.json", prov.dump(2) + "\n");
  std::cerr << "wrote " << prefix << ".{edges.txt,covariates.txt,nodes.txt,truth.csv,provenance.json}\n";
  return 0;
}

MoveSet parse_moves(const std::string& s) {
  if (s == "swap_relabel" || s == "both") return MoveSet::swap_and_relabel;
  if (s == "swap") return MoveSet::swap_only;
  throw Error("--moves must be swap or swap_relabel");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pairwise covariates-adjusted block model: estimation, detection, simulation"};
  app.require_subcommand(1);
  int threads = default_threads();

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a planted network");
  std::string sim_spec, sim_prefix;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--spec", sim_spec, "generator JSON (explicit fields, or design + params)")->required();
  sim->add_option("--out-prefix", sim_prefix, "output path prefix")->required();
  sim->add_option("--seed", sim_seed, "overrides the spec seed");

  // fit-gamma
  auto* fg = app.add_subcommand("fit-gamma", "estimate gamma with plug-in standard errors");
  NetworkArgs fg_net;
  fg_net.add(fg, true);
  std::string fg_labels, fg_out;
  int fg_k = 0;
  std::uint64_t fg_seed = 1;
  double fg_tol = 1e-8;
  int fg_iter = 100;
  fg->add_option("--labels", fg_labels, "community labels (node_id,community); random if absent");
  fg->add_option("--k,--random-labels", fg_k, "number of communities for a random balanced labeling");
  fg->add_option("--seed", fg_seed, "seed for the random labeling");
  fg->add_option("--tolerance", fg_tol, "gradient sup-norm tolerance");
  fg->add_option("--max-iter", fg_iter, "Newton iteration cap");
  fg->add_option("--out", fg_out, "report JSON (stdout if absent)");

  // detect
  auto* det = app.add_subcommand("detect", "community detection");
  NetworkArgs det_net;
  det_net.add(det, false);
  std::string det_method = "mle", det_out, det_init, det_emb, det_report, det_moves = "swap_relabel";
  int det_k = 0;
  std::uint64_t det_seed = 1;
  TabuOptions tabu;
  std::vector<double> det_gamma;
  det->add_option("--method", det_method, "mle | mle0 | scwa | sbm_mle | sbm_sc");
  det->add_option("--k", det_k, "number of communities")->required();
  det->add_option("--seed", det_seed, "seed");
  det->add_option("--out", det_out, "labels CSV")->required();
  det->add_option("--init", det_init, "initial labels (default: random balanced)");
  det->add_option("--gamma", det_gamma, "fixed gamma; skips estimation")->expected(1, -1);
  det->add_option("--dump-embedding", det_emb, "write the spectral embedding CSV");
  det->add_option("--report", det_report, "report JSON");
  det->add_option("--moves", det_moves, "swap | swap_relabel");
  det->add_option("--restarts", tabu.restarts, "tabu restarts");
  det->add_option("--tenure", tabu.tabu_tenure, "tabu tenure");
  det->add_option("--patience", tabu.patience, "proposals without improvement before stopping");
  det->add_option("--max-iters", tabu.max_iters, "proposal budget");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "compare predicted and true labels");
  std::string ev_pred, ev_truth, ev_out;
  std::uint64_t ev_seed = 1;
  ev->add_option("--pred", ev_pred, "predicted labels CSV")->required();
  ev->add_option("--truth", ev_truth, "true labels CSV")->required();
  ev->add_option("--out", ev_out, "report JSON (stdout if absent)");
  ev->add_option("--seed", ev_seed, "unused; accepted for uniformity");

  // experiment
  auto* ex = app.add_subcommand("experiment", "run a simulation plan");
  std::string ex_plan, ex_outdir;
  std::optional<std::uint64_t> ex_seed;
  ex->add_option("--plan", ex_plan, "plan JSON")->required();
  ex->add_option("--out-dir", ex_outdir, "overrides the plan output_dir");
  ex->add_option("--seed", ex_seed, "overrides the plan seed");

  // build-covariates
  auto* bc = app.add_subcommand("build-covariates", "pairwise covariates from nodal attributes");
  NetworkArgs bc_net;
  bc_net.add(bc, false);
  std::string bc_table, bc_recipe, bc_prefix;
  std::vector<std::string> bc_impute;
  bool bc_lcc = false, bc_drop = false;
  std::uint64_t bc_seed = 1;
  bc->add_option("--attributes", bc_table, "nodal attribute CSV (header; first column node id)");
  bc->add_option("--recipe", bc_recipe, "recipe file, one rule per line")->required();
  bc->add_option("--out-prefix", bc_prefix, "output path prefix")->required();
  bc->add_option("--impute", bc_impute, "attr=constant(v) | attr=mode | attr=conditional_random(group)");
  bc->add_flag("--largest-component", bc_lcc, "restrict to the largest connected component");
  bc->add_flag("--drop-missing", bc_drop, "drop nodes whose attributes are all missing first");
  bc->add_option("--seed", bc_seed, "seed for random imputation");

  // gamma-histogram
  auto* gh = app.add_subcommand("gamma-histogram", "gamma draws for the asymptotic-normality check");
  std::size_t gh_n = 500;
  int gh_reps = 100;
  std::uint64_t gh_seed = 1;
  double gh_crho = 2.0;
  std::string gh_out;
  gh->add_option("--n", gh_n, "nodes");
  gh->add_option("--replicates", gh_reps, "replicates");
  gh->add_option("--c-rho", gh_crho, "sparsity multiplier");
  gh->add_option("--seed", gh_seed, "seed");
  gh->add_option("--out", gh_out, "draws CSV (stdout if absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; usage errors share status 2 with input errors.
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) return run_simulate(sim_spec, sim_prefix, sim_seed);

    if (*fg) {
      const Network net = fg_net.load();
      const Labeling lab = initial_labeling(net, fg_k, fg_labels, fg_seed);
      GammaFitOptions opts;
      opts.tolerance = fg_tol;
      opts.max_iterations = fg_iter;
      GammaFit fit = fit_gamma(net, lab, opts);
      json j;
      if (fit.converged) {
        try {
          fit = gamma_inference(net, lab, std::move(fit));
        } catch (const CollinearityError& e) {
          j["inference_error"] = e.what();
        }
      } else {
        std::cerr << "warning: gamma fit did not converge after " << fit.iterations << " iterations\n";
      }
      json f = fit_json(fit);
      if (!j.is_null()) f.update(j);
      write_json(fg_out, f);
      return fit.converged ? 0 : 3;
    }

    if (*det) {
      const Network net = det_net.load();
      const Labeling init = initial_labeling(net, det_k, det_init, det_seed);
      DetectOptions opts;
      tabu.seed = derive_seed(det_seed, 101);
      tabu.moves = parse_moves(det_moves);
      tabu.threads = threads;
      opts.tabu = tabu;
      opts.scwa.kmeans.seed = derive_seed(det_seed, 102);
      opts.scwa.kmeans.threads = threads;
      const Method m = parse_method(det_method);
      DetectOutcome out;
      if (!det_gamma.empty()) {
        if (m != Method::pcabm_mle && m != Method::pcabm_scwa) {
          throw Error("--gamma applies to --method mle or scwa");
        }
        const Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(det_gamma.data(), static_cast<Eigen::Index>(det_gamma.size()));
        out = detect_with_gamma(net, det_k, g, m == Method::pcabm_mle, opts);
      } else {
        out = run_method(m, net, det_k, init, opts);
      }
      ensure_parent(det_out);
      std::ostringstream ls;
      io::write_labels(ls, net, out.detection.labeling);
      io::write_file(det_out, ls.str());
      if (!det_emb.empty()) {
        if (!out.embedding) throw Error("--dump-embedding needs a spectral method (scwa, sbm_sc, or --gamma)");
        std::ostringstream es;
        es << "node_id";
        for (Eigen::Index k = 0; k < out.embedding->U.cols(); ++k) es << ",u" << k + 1;
        es << '\n';
        for (Eigen::Index i = 0; i < out.embedding->U.rows(); ++i) {
          es << net.ids()[static_cast<std::size_t>(i)];
          for (Eigen::Index k = 0; k < out.embedding->U.cols(); ++k) es << ',' << format_double(out.embedding->U(i, k));
          es << '\n';
        }
        io::write_file(det_emb, es.str());
      }
      if (!det_report.empty()) {
        json r;
        r["method"] = method_name(m);
        r["gamma"] = fit_json(out.gamma);
        r["loglik"] = out.detection.loglik;
        r["accepted_moves"] = out.detection.trace.size();
        r["best_restart"] = out.detection.restarts_best;
        if (out.embedding) {
          r["eigenvalues"] = vec_json(out.embedding->eigenvalues);
          r["eigen_solver"] = out.embedding->solver;
          r["kmeans_epsilon"] = opts.scwa.kmeans.epsilon;
        }
        write_json(det_report, r);
      }
      return 0;
    }

    if (*ev) {
      std::ifstream a(ev_pred), b(ev_truth);
      if (!a) throw Error("cannot open " + ev_pred);
      if (!b) throw Error("cannot open " + ev_truth);
      auto [pa, pb] = io::read_label_pair(a, b);
      const int Ka = *std::max_element(pa.begin(), pa.end()) + 1;
      const int Kb = *std::max_element(pb.begin(), pb.end()) + 1;
      const Labeling pred(pa, Ka), truth(pb, Kb);
      const auto rep = evaluate(pred, truth);
      json j;
      j["n"] = pa.size();
      j["ari"] = rep.ari;
      j["nmi"] = rep.nmi;
      j["nmi_normalization"] = "arithmetic mean of entropies";
      if (rep.has_losses) {
        j["error_count"] = rep.error_count;
        j["l1"] = rep.l1;
        j["l2"] = rep.l2;
        json perm = json::array();
        for (int v : rep.best_permutation) perm.push_back(v + 1);
        j["best_permutation"] = perm;
      } else {
        j["losses"] = "skipped: more than 10 communities";
      }
      write_json(ev_out, j);
      return 0;
    }

    if (*ex) {
      auto plan = ExperimentPlan::parse_json(io::read_file(ex_plan));
      if (!ex_outdir.empty()) plan.output_dir = ex_outdir;
      if (ex_seed) plan.seed = *ex_seed;
      if (plan.output_dir.empty()) throw Error("no output directory: set output_dir in the plan or pass --out-dir");
      const auto res = run_plan(plan);
      std::size_t failed = 0;
      for (const auto& r : res.records) failed += r.ok ? 0 : 1;
      std::cerr << res.records.size() << " runs, " << failed << " failed; wrote " << plan.output_dir
                << "/records.csv and aggregate.csv\n";
      return 0;
    }

    if (*bc) {
      Network net = bc_net.load();
      const auto recipe = CovariateRecipe::parse(io::read_file(bc_recipe));
      NodalTable table;
      if (!bc_table.empty()) {
        std::ifstream in(bc_table);
        if (!in) throw Error("cannot open " + bc_table);
        table = NodalTable::read_csv(in);
      }
      table = table.align(net);
      if (bc_lcc || bc_drop) {
        auto r = largest_component(net, table, bc_drop);
        std::cerr << "kept " << r.network.n() << " of " << net.n() << " nodes\n";
        net = std::move(r.network);
        table = std::move(r.table);
      }
      std::map<std::string, ImputePolicy> policies;
      for (const auto& item : bc_impute) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw Error("--impute expects attr=policy, got '" + item + "'");
        policies[item.substr(0, eq)] = ImputePolicy::parse(item.substr(eq + 1), bc_seed);
      }
      table = impute(table, policies, recipe.attributes());
      net = net.with_covariates(build_covariates(net, table, recipe));
      write_network_files(bc_prefix, net);
      std::ostringstream ts;
      table.write_csv(ts);
      io::write_file(bc_prefix + ".attributes.csv", ts.str());
      std::cerr << "built " << net.p() << " covariate(s) for " << net.n() << " nodes\n";
      return 0;
    }

    if (*gh) {
      const auto h = gamma_histogram(gh_n, gh_reps, gh_seed, threads, default_covariate_specs(), default_gamma0(), gh_crho);
      const auto csv = gamma_histogram_csv(h);
      if (gh_out.empty()) {
        std::cout << csv;
      } else {
        io::write_file(gh_out, csv);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
