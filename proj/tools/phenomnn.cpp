// phenomnn command-line interface.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "phenomnn/phenomnn.hpp"

#ifndef PHENOMNN_PRESET_DIR
#define PHENOMNN_PRESET_DIR "presets"
#endif

namespace fs = std::filesystem;
using namespace phenomnn;

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string preset_dir() {
  if (const char* env = std::getenv("PHENOMNN_PRESETS")) return env;
  return PHENOMNN_PRESET_DIR;
}

std::size_t thread_cap() {
  std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PHENOMNN_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) cap = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw Error("PHENOMNN_THREADS must be a positive integer");
    }
  }
  return cap;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// Flags shared by every subcommand that builds a RunConfig.
struct ConfigFlags {
  std::string config;
  std::string preset;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string out;
  std::string dataset;

  void attach(CLI::App* cmd, bool with_out = true) {
    cmd->add_option("--config", config, "JSON run config (flat keys)");
    cmd->add_option("--preset", preset, "Preset name from the presets directory (e.g. cora_coauthorship_simple)");
    cmd->add_option("--set", sets, "Override one config key, key=value (repeatable)")->allow_extra_args(false);
    seed_opt = cmd->add_option("--seed", seed, "Seed for every random choice");
    if (with_out) cmd->add_option("--out", out, "Output directory");
    cmd->add_option("--dataset", dataset, "Dataset directory (hypergraph.txt, features.csv, labels.txt, splits.txt)");
  }

  /// defaults < preset < --config < --set < dedicated flags.
  RunConfig resolve() const {
    RunConfig c;
    if (!preset.empty()) {
      const fs::path p = fs::path(preset_dir()) / (preset + ".json");
      if (!fs::exists(p)) throw ConfigError("unknown preset '" + preset + "' (looked in " + preset_dir() + ")");
      c = load_run_config(p.string(), c);
    }
    if (!config.empty()) c = load_run_config(config, c);
    for (const auto& s : sets) c = apply_override(c, s);
    if (seed_opt && seed_opt->count() > 0) c.train.seed = seed;
    if (!out.empty()) c.out = out;
    if (!dataset.empty()) c.dataset = dataset;
    c.validate();
    return c;
  }
};

Dataset require_dataset(const std::string& dir) {
  if (dir.empty()) throw Error("no dataset given (pass --dataset or set 'dataset' in the config)");
  return load_dataset(dir);
}

/// Fresh split over the labeled nodes only, so every train node is labeled.
void resplit(Dataset& ds, const SplitFractions& f, std::uint64_t seed) {
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < ds.n(); ++i)
    if (ds.labels[i] >= 0) labeled.push_back(i);
  const auto s = make_splits(labeled.size(), f, seed);
  ds.splits.assign(ds.n(), Split::none);
  for (std::size_t k = 0; k < labeled.size(); ++k) ds.splits[labeled[k]] = s[k];
}

Hypergraph hypergraph_from(const std::string& hypergraph_file, const std::string& dataset) {
  if (!hypergraph_file.empty()) return load_hypergraph_file(hypergraph_file);
  if (!dataset.empty()) return load_dataset(dataset).hypergraph;
  throw Error("pass --hypergraph <file> or --dataset <dir>");
}

void warn_duplicates(const Hypergraph& h) {
  if (h.duplicates_collapsed > 0)
    std::cerr << "warning: collapsed " << h.duplicates_collapsed << " repeated node ids inside hyperedges\n";
}

// ---------------------------------------------------------------------------

int cmd_train(const ConfigFlags& flags, std::size_t repeats, bool parallel) {
  const RunConfig cfg = flags.resolve();
  const Dataset base = require_dataset(cfg.dataset);
  warn_duplicates(base.hypergraph);
  if (repeats < 1) throw Error("--repeats must be >= 1");

  struct Outcome {
    Metrics metrics;
    std::string error;
  };
  std::vector<Outcome> outcomes(repeats);
  auto run_one = [&](std::size_t r) {
    try {
      RunConfig rc = cfg;
      rc.train.seed = cfg.train.seed + r;
      Dataset ds = base;
      if (cfg.resplit) resplit(ds, cfg.fractions, rc.train.seed);
      const fs::path dir = repeats == 1 ? fs::path(cfg.out) : fs::path(cfg.out) / ("run_" + std::to_string(r));
      fs::create_directories(dir);
      auto result = train(ds, rc.model, rc.train);
      write_metrics(result.metrics, dir.string());
      save_checkpoint(result.best, (dir / "checkpoint.json").string());
      write_json(dir / "config.json", to_json(rc));
      outcomes[r].metrics = std::move(result.metrics);
    } catch (const std::exception& e) {
      outcomes[r].error = e.what();
    }
  };

  const std::size_t workers = parallel ? std::min(repeats, thread_cap()) : 1;
  if (workers <= 1) {
    for (std::size_t r = 0; r < repeats; ++r) run_one(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < repeats; r = next++) run_one(r);
      });
    for (auto& t : pool) t.join();
  }
  for (std::size_t r = 0; r < repeats; ++r)
    if (!outcomes[r].error.empty()) throw Error("run " + std::to_string(r) + ": " + outcomes[r].error);

  if (repeats == 1) {
    const auto& m = outcomes[0].metrics;
    std::cout << "test accuracy " << fmt(m.test_acc) << " (best epoch " << m.best_epoch << ", val " << fmt(m.best_val_acc)
              << ", last-epoch test " << fmt(m.last_test_acc) << ")\n";
    std::cout << "wrote " << (fs::path(cfg.out) / "metrics.json").string() << '\n';
    return 0;
  }
  std::vector<double> accs;
  for (const auto& o : outcomes) accs.push_back(o.metrics.test_acc);
  double mean = 0.0;
  for (double a : accs) mean += a / static_cast<double>(accs.size());
  double var = 0.0;
  for (double a : accs) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / static_cast<double>(accs.size() - 1));
  fs::create_directories(cfg.out);
  write_json(fs::path(cfg.out) / "summary.json",
             {{"repeats", repeats}, {"test_acc", accs}, {"mean_test_acc", mean}, {"std_test_acc", sd}});
  std::cout << "mean test accuracy " << fmt(mean) << " +- " << fmt(sd) << " over " << repeats << " runs\n";
  std::cout << "wrote " << (fs::path(cfg.out) / "summary.json").string() << '\n';
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset, const std::string& split,
             const std::string& out) {
  const Model model = load_checkpoint(checkpoint);
  const Dataset ds = require_dataset(dataset);
  if (ds.features.cols != model.input_dim)
    throw ShapeError("dataset has " + std::to_string(ds.features.cols) + " feature columns, checkpoint expects " +
                     std::to_string(model.input_dim));
  const double acc = evaluate(model, ds, split);
  std::cout << "accuracy " << fmt(acc) << " (" << split << ")\n";
  if (!out.empty()) {
    fs::create_directories(out);
    write_json(fs::path(out) / "eval.json", {{"split", split}, {"accuracy", acc}});
  }
  return 0;
}

Model model_for(const RunConfig& cfg, const Dataset& ds, const std::string& checkpoint) {
  if (!checkpoint.empty()) {
    Model m = load_checkpoint(checkpoint);
    if (m.input_dim != ds.features.cols) throw ShapeError("checkpoint input width does not match the dataset features");
    return m;
  }
  Rng rng(cfg.train.seed);
  return Model::init(cfg.model, ds.features.cols, std::max<std::size_t>(ds.class_count, 1), rng);
}

int cmd_energy_trace(const ConfigFlags& flags, const std::string& checkpoint, std::optional<std::size_t> steps) {
  const RunConfig cfg = flags.resolve();
  const Dataset ds = require_dataset(cfg.dataset);
  Model model = model_for(cfg, ds, checkpoint);
  if (steps) {
    if (*steps < 1) throw Error("--steps must be >= 1");
    model.config.layers = *steps;
  }
  const auto ops = build_operators(ds.hypergraph, model.config.lambda0, model.config.lambda1);
  const DenseMat fx = model.params.base.apply(ds.features);
  const EnergyParams ep = model.energy_params();
  const bool general = model.config.variant == Variant::general;

  std::ostringstream csv;
  csv << "iteration,energy,feasible,grad_norm\n";
  const auto states = propagate(fx, ops, model.config, ep);
  for (std::size_t t = 0; t < states.size(); ++t) {
    const auto e = general ? energy_general(states[t], fx, ops, ep) : energy_simple(states[t], fx, ops);
    const auto g = general ? grad_general(states[t], fx, ops, ep) : grad_simple(states[t], fx, ops);
    csv << t << ',' << fmt(e.value) << ',' << (e.feasible ? 1 : 0) << ',' << fmt(frobenius_norm(g)) << '\n';
  }
  if (flags.out.empty()) {
    std::cout << csv.str();
  } else {
    fs::create_directories(flags.out);
    std::ofstream(fs::path(flags.out) / "energy_trace.csv") << csv.str();
    std::cout << "wrote " << (fs::path(flags.out) / "energy_trace.csv").string() << " (" << states.size()
              << " rows)\n";
  }
  return 0;
}

int cmd_check_gradients(const ConfigFlags& flags, const std::string& checkpoint, std::size_t samples, double step) {
  RunConfig cfg = flags.resolve();
  Dataset ds;
  if (cfg.dataset.empty()) {
    SyntheticSpec toy;
    toy.nodes_per_community = 6;
    toy.edges = 8;
    toy.feature_dim = 4;
    toy.noise_std = 1.0;
    toy.p_in = 0.7;
    toy.seed = cfg.train.seed;
    ds = generate_synthetic(toy);
  } else {
    ds = load_dataset(cfg.dataset);
  }
  const Model model = model_for(cfg, ds, checkpoint);
  const auto report = check_gradients(model, ds, samples, step, cfg.train.seed + 1);
  const auto j = to_json(report);
  std::cout << j.dump(2) << '\n';
  if (!flags.out.empty()) {
    fs::create_directories(flags.out);
    write_json(fs::path(flags.out) / "gradcheck.json", j);
  }
  if (!report.passed()) {
    std::cerr << "error: gradient check failed, max relative error " << fmt(report.max_rel_error()) << " > "
              << fmt(report.threshold) << '\n';
    return 1;
  }
  return 0;
}

int cmd_step_bound(const ConfigFlags& flags, const std::string& hypergraph_file, const std::string& checkpoint) {
  const RunConfig cfg = flags.resolve();
  const Hypergraph h = hypergraph_from(hypergraph_file, cfg.dataset);
  warn_duplicates(h);
  ModelConfig mc = cfg.model;
  EnergyParams ep = EnergyParams::identity(mc.hidden, mc.lambda0, mc.lambda1, mc.alpha, mc.clique_pairs);
  if (!checkpoint.empty()) {
    const Model m = load_checkpoint(checkpoint);
    mc = m.config;
    ep = m.energy_params();
  }
  const auto ops = build_operators(h, mc.lambda0, mc.lambda1);
  const StepBound sb = mc.variant == Variant::general ? step_bound_general(ops, ep) : step_bound_simple(ops);
  std::cout << "bound " << fmt(sb.bound) << '\n'
            << "variant " << to_string(mc.variant) << '\n'
            << (mc.variant == Variant::general ? "sigma_max " : "sigma_min ") << fmt(sb.sigma) << '\n'
            << "converged " << (sb.eigen.converged ? "true" : "false") << '\n'
            << "residual " << fmt(sb.eigen.residual) << '\n';
  if (!sb.eigen.converged)
    std::cerr << "warning: eigensolver did not converge; bound is an estimate (residual " << fmt(sb.eigen.residual)
              << ")\n";
  if (!flags.out.empty()) {
    fs::create_directories(flags.out);
    write_json(fs::path(flags.out) / "step_bound.json",
               {{"bound", detail::json_number(sb.bound)}, {"sigma", sb.sigma}, {"converged", sb.eigen.converged},
                {"residual", sb.eigen.residual}, {"iterations", sb.eigen.iterations}});
  }
  return 0;
}

int cmd_expand(const std::string& hypergraph_file, const std::string& dataset, const std::string& out) {
  const Hypergraph h = hypergraph_from(hypergraph_file, dataset);
  warn_duplicates(h);
  const auto clique = build_clique(h);
  const auto star = build_star_normalized(h);
  fs::create_directories(out);
  auto emit = [&](const std::string& name, const SparseMat& s) {
    std::ofstream f(fs::path(out) / name);
    if (!f) throw Error("cannot write " + (fs::path(out) / name).string());
    write_matrix_market(f, s);
  };
  emit("incidence.mtx", h.incidence);
  emit("clique_adj.mtx", clique.adjacency);
  emit("clique_deg.mtx", to_sparse(clique.degree));
  emit("star_adj.mtx", star.adjacency);
  emit("star_deg.mtx", to_sparse(star.degree));
  std::cout << "n " << h.n << ", m " << h.m << ", clique nnz " << clique.adjacency.nnz() << ", star nnz "
            << star.adjacency.nnz() << '\n'
            << "wrote incidence.mtx clique_adj.mtx clique_deg.mtx star_adj.mtx star_deg.mtx to " << out << '\n';
  return 0;
}

int cmd_gen_synthetic(SyntheticSpec spec, const std::string& out) {
  const Dataset ds = generate_synthetic(spec);
  save_dataset(ds, out);
  std::cout << "n " << ds.n() << ", m " << ds.hypergraph.m << ", classes " << ds.class_count
            << ", single-community edge fraction " << fmt(single_community_fraction(ds)) << '\n'
            << "wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"phenomnn: hypergraph node classification with layers unrolled from energy minimization"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // train
  ConfigFlags train_flags;
  std::size_t repeats = 1;
  bool parallel = false;
  auto* train_cmd = app.add_subcommand("train", "Train a model; writes metrics.json, epochs.csv, checkpoint.json");
  train_flags.attach(train_cmd);
  train_cmd->add_option("--repeats", repeats, "Independent seeded runs (seed, seed+1, ...)")->check(CLI::PositiveNumber);
  train_cmd->add_flag("--parallel", parallel, "Run repeats on parallel threads (capped by PHENOMNN_THREADS)");

  // eval
  std::string eval_ckpt, eval_dataset, eval_split = "test", eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Accuracy of a checkpoint on one split");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint.json written by train")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "Dataset directory")->required();
  eval_cmd->add_option("--split", eval_split, "train|val|test")->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "Also write eval.json here");

  // energy-trace
  ConfigFlags trace_flags;
  std::string trace_ckpt;
  std::optional<std::size_t> trace_steps;
  auto* trace_cmd =
      app.add_subcommand("energy-trace", "Energy of Y_0..Y_T as CSV (iteration,energy,feasible,grad_norm)");
  trace_flags.attach(trace_cmd);
  trace_cmd->add_option("--checkpoint", trace_ckpt, "Use trained parameters instead of a seeded initialization");
  trace_cmd->add_option("--steps", trace_steps, "Number of propagation steps (default: prop_step)");

  // check-gradients
  ConfigFlags grad_flags;
  std::string grad_ckpt;
  std::size_t grad_samples = 256;
  double grad_step = 1e-5;
  auto* grad_cmd = app.add_subcommand(
      "check-gradients", "Compare backprop with central differences; JSON report, exit 1 above 1e-4");
  grad_flags.attach(grad_cmd);
  grad_cmd->add_option("--checkpoint", grad_ckpt, "Check a trained model instead of a seeded initialization");
  grad_cmd->add_option("--samples", grad_samples, "Coordinates sampled per parameter")->capture_default_str();
  grad_cmd->add_option("--step", grad_step, "Central-difference step")->capture_default_str();

  // step-bound
  ConfigFlags bound_flags;
  std::string bound_hg, bound_ckpt;
  auto* bound_cmd = app.add_subcommand("step-bound", "Largest step size alpha with guaranteed monotone descent");
  bound_flags.attach(bound_cmd);
  bound_cmd->add_option("--hypergraph", bound_hg, "Hypergraph file (instead of --dataset)");
  bound_cmd->add_option("--checkpoint", bound_ckpt, "Take variant, lambdas and H0/H1 from a checkpoint");

  // expand
  std::string expand_hg, expand_dataset, expand_out;
  auto* expand_cmd = app.add_subcommand("expand", "Write clique and star expansion matrices in Matrix Market format");
  expand_cmd->add_option("--hypergraph", expand_hg, "Hypergraph file");
  expand_cmd->add_option("--dataset", expand_dataset, "Dataset directory (uses its hypergraph.txt)");
  expand_cmd->add_option("--out", expand_out, "Output directory")->required();

  // gen-synthetic
  SyntheticSpec syn;
  std::string syn_out;
  auto* syn_cmd = app.add_subcommand("gen-synthetic", "Generate a community-structured dataset directory");
  syn_cmd->add_option("--out", syn_out, "Output directory")->required();
  syn_cmd->add_option("--communities", syn.communities, "Number of communities (classes)")->capture_default_str();
  syn_cmd->add_option("--nodes-per-community", syn.nodes_per_community, "Nodes per community")->capture_default_str();
  syn_cmd->add_option("--edges", syn.edges, "Number of hyperedges")->capture_default_str();
  syn_cmd->add_option("--min-edge-size", syn.min_edge_size, "Smallest hyperedge size")->capture_default_str();
  syn_cmd->add_option("--max-edge-size", syn.max_edge_size, "Largest hyperedge size")->capture_default_str();
  syn_cmd->add_option("--p-in", syn.p_in, "Probability a hyperedge stays inside one community")->capture_default_str();
  syn_cmd->add_option("--feature-dim", syn.feature_dim, "Feature columns")->capture_default_str();
  syn_cmd->add_option("--noise", syn.noise_std, "Feature noise standard deviation")->capture_default_str();
  syn_cmd->add_option("--seed", syn.seed, "Seed")->capture_default_str();
  syn_cmd->add_option("--train-fraction", syn.fractions.train, "Train split fraction")->capture_default_str();
  syn_cmd->add_option("--val-fraction", syn.fractions.val, "Validation split fraction")->capture_default_str();
  syn_cmd->add_option("--test-fraction", syn.fractions.test, "Test split fraction")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*train_cmd) return cmd_train(train_flags, repeats, parallel);
    if (*eval_cmd) return cmd_eval(eval_ckpt, eval_dataset, eval_split, eval_out);
    if (*trace_cmd) return cmd_energy_trace(trace_flags, trace_ckpt, trace_steps);
    if (*grad_cmd) return cmd_check_gradients(grad_flags, grad_ckpt, grad_samples, grad_step);
    if (*bound_cmd) return cmd_step_bound(bound_flags, bound_hg, bound_ckpt);
    if (*expand_cmd) return cmd_expand(expand_hg, expand_dataset, expand_out);
    if (*syn_cmd) return cmd_gen_synthetic(syn, syn_out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    std::cerr << "error: " << msg << '\n';
    return 1;
  }
  return 1;
}
