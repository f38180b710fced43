// Command-line surface: dataset analysis, synthetic generation, training,
// grid search, categorization, timing benchmarks and sorted-sequence export.
// Non-timing outputs are byte-identical across runs with the same seed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nlgnn/bench.hpp"
#include "nlgnn/error.hpp"
#include "nlgnn/graph.hpp"
#include "nlgnn/model.hpp"
#include "nlgnn/report.hpp"
#include "nlgnn/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nlgnn;

namespace {

struct CommonArgs {
  std::string manifest;
  std::string out = ".";
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool manifest_required) {
  auto* m = cmd->add_option("--manifest", args.manifest,
                            "dataset manifest file");
  if (manifest_required) m->required();
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--seed", args.seed, "random seed");
}

Graph load_from_manifest(const std::string& path) {
  return load_graph(read_manifest(path));
}

fs::path ensure_out_dir(const CommonArgs& args) {
  fs::path dir(args.out);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path.string());
  out << text;
}

json env_json() {
  const EnvironmentInfo env = environment_info();
  return {{"threads", env.threads},
          {"hardware_threads", env.hardware_threads},
          {"build", env.build},
          {"compiler", env.compiler}};
}

void write_sidecar(const fs::path& dir, const std::string& command,
                   std::uint64_t seed, json config, json results,
                   bool with_env = false) {
  json j{{"command", command},
         {"config", std::move(config)},
         {"seed", seed},
         {"results", std::move(results)}};
  j["environment"] = with_env ? env_json() : json(nullptr);
  write_file(dir / (command + ".json"), j.dump(2) + "\n");
}

std::string fmt_acc(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_ms(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

void add_model_hparams(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--hidden", cfg.hidden, "hidden width");
  cmd->add_option("--dropout", cfg.dropout, "dropout rate in [0,1)");
  cmd->add_option("--weight-decay", cfg.weight_decay, "L2 weight decay");
  cmd->add_option("--lr", cfg.lr, "learning rate");
  cmd->add_option("--kernel", cfg.kernel_size, "conv kernel size (odd)");
  cmd->add_option("--heads", cfg.gat_heads, "GAT attention heads");
}

json config_json(const TrainConfig& cfg) {
  return {{"variant", to_string(cfg.variant)},
          {"hidden", cfg.hidden},
          {"dropout", cfg.dropout},
          {"weight_decay", cfg.weight_decay},
          {"lr", cfg.lr},
          {"kernel_size", cfg.kernel_size},
          {"max_epochs", cfg.max_epochs},
          {"gat_heads", cfg.gat_heads}};
}

int run_analyze(const CommonArgs& args) {
  Graph g = load_from_manifest(args.manifest);
  const double h = homophily(g);
  const fs::path dir = ensure_out_dir(args);
  std::ostringstream csv;
  csv << "dataset,nodes,edges,features,classes,homophily\n"
      << (g.name.empty() ? "dataset" : g.name) << "," << g.n << ","
      << g.num_edges() << "," << g.feature_dim() << "," << g.num_classes
      << "," << fmt_acc(h) << "\n";
  write_file(dir / "analyze.csv", csv.str());
  write_sidecar(dir, "analyze", args.seed, {{"manifest", args.manifest}},
                {{"homophily", h},
                 {"nodes", g.n},
                 {"edges", g.num_edges()},
                 {"features", g.feature_dim()},
                 {"classes", g.num_classes}});
  std::cout << "dataset " << g.name << ": n=" << g.n
            << " |E|=" << g.num_edges() << " d=" << g.feature_dim()
            << " C=" << g.num_classes << " H=" << fmt_acc(h) << "\n";
  return 0;
}

int run_generate(const CommonArgs& args, const SyntheticConfig& cfg) {
  Graph g = generate_synthetic(cfg);
  const fs::path dir = ensure_out_dir(args);
  write_graph_files(g, dir);
  const double h = homophily(g);
  write_sidecar(dir, "generate", cfg.seed,
                {{"n", cfg.n},
                 {"classes", cfg.num_classes},
                 {"target_homophily", cfg.target_homophily},
                 {"feature_dim", g.feature_dim()},
                 {"mean_degree", cfg.mean_degree},
                 {"feature_noise", cfg.feature_noise}},
                {{"homophily", h}, {"edges", g.num_edges()}});
  std::cout << "generated n=" << g.n << " |E|=" << g.num_edges()
            << " H=" << fmt_acc(h) << " -> " << (dir / "manifest.txt").string()
            << "\n";
  return 0;
}

int run_train(const CommonArgs& args, TrainConfig cfg,
              const std::string& save_params) {
  Graph g = load_from_manifest(args.manifest);
  cfg.seed = args.seed;
  Split split = split_nodes(g, kDefaultSplitRatios, args.seed);
  TrainOutput out = train(g, split, cfg);
  const fs::path dir = ensure_out_dir(args);

  std::ostringstream csv;
  csv << "variant,hidden,dropout,weight_decay,lr,kernel,epochs,seed,"
         "best_epoch,best_val_accuracy,test_accuracy\n"
      << to_string(cfg.variant) << "," << cfg.hidden << "," << cfg.dropout
      << "," << cfg.weight_decay << "," << cfg.lr << "," << cfg.kernel_size
      << "," << cfg.max_epochs << "," << cfg.seed << ","
      << out.result.best_epoch << "," << fmt_acc(out.result.best_val_accuracy)
      << "," << fmt_acc(out.result.test_accuracy) << "\n";
  write_file(dir / "train.csv", csv.str());

  std::ostringstream curve;
  curve << "epoch,loss\n";
  for (std::size_t e = 0; e < out.result.loss_curve.size(); ++e) {
    curve << (e + 1) << "," << format_double(out.result.loss_curve[e]) << "\n";
  }
  write_file(dir / "train_curve.csv", curve.str());

  write_sidecar(dir, "train", args.seed, config_json(cfg),
                {{"test_accuracy", out.result.test_accuracy},
                 {"best_val_accuracy", out.result.best_val_accuracy},
                 {"best_epoch", out.result.best_epoch},
                 {"wall_ms_per_epoch", out.result.wall_ms_per_epoch}},
                /*with_env=*/true);
  if (!save_params.empty()) save_model(out.model, save_params);
  std::cout << to_string(cfg.variant)
            << ": test accuracy " << fmt_acc(out.result.test_accuracy)
            << " (val " << fmt_acc(out.result.best_val_accuracy) << " at epoch "
            << out.result.best_epoch << ")\n";
  return 0;
}

int run_categorize(const CommonArgs& args, TrainConfig base,
                   std::size_t repeats) {
  Graph g = load_from_manifest(args.manifest);
  const auto seeds = make_seeds(args.seed, repeats);
  CategorizeResult res = categorize_dataset(g, base, seeds);
  const fs::path dir = ensure_out_dir(args);
  std::ostringstream csv;
  csv << "model,mean_accuracy,std_accuracy\n";
  json rows = json::array();
  for (const auto& row : res.table) {
    csv << to_string(row.variant) << "," << fmt_acc(row.mean) << ","
        << fmt_acc(row.stddev) << "\n";
    rows.push_back({{"model", to_string(row.variant)},
                    {"mean", row.mean},
                    {"std", row.stddev}});
  }
  write_file(dir / "categorize.csv", csv.str());
  write_sidecar(dir, "categorize", args.seed,
                {{"manifest", args.manifest},
                 {"repeats", repeats},
                 {"base", config_json(base)}},
                {{"category", res.category}, {"table", rows}});
  std::cout << "category " << res.category
            << (res.category == 1 ? " (local aggregation harmful)"
                                  : " (local aggregation helps)")
            << "\n";
  for (const auto& row : res.table) {
    std::cout << "  " << to_string(row.variant) << " "
              << fmt_acc(row.mean) << " +- " << fmt_acc(row.stddev) << "\n";
  }
  return 0;
}

int run_grid(const CommonArgs& args, const std::string& variant,
             std::size_t repeats, std::size_t epochs) {
  Graph g = load_from_manifest(args.manifest);
  const auto seeds = make_seeds(args.seed, repeats);
  GridResult res = grid_search(g, variant_from_string(variant), seeds, epochs);
  const fs::path dir = ensure_out_dir(args);
  std::ostringstream csv;
  csv << "rank,variant,hidden,dropout,weight_decay,lr,kernel,"
         "mean_val_accuracy,mean_test_accuracy\n";
  for (std::size_t i = 0; i < res.leaderboard.size(); ++i) {
    const auto& e = res.leaderboard[i];
    csv << (i + 1) << "," << to_string(e.cfg.variant) << "," << e.cfg.hidden
        << "," << e.cfg.dropout << "," << e.cfg.weight_decay << ","
        << e.cfg.lr << "," << e.cfg.kernel_size << ","
        << fmt_acc(e.mean_val_accuracy) << "," << fmt_acc(e.mean_test_accuracy)
        << "\n";
  }
  write_file(dir / "grid.csv", csv.str());
  write_sidecar(dir, "grid", args.seed,
                {{"variant", variant}, {"repeats", repeats},
                 {"epochs", epochs}},
                {{"cells", res.leaderboard.size()},
                 {"best", config_json(res.best.cfg)},
                 {"best_mean_val_accuracy", res.best.mean_val_accuracy}});
  std::cout << "best: " << to_string(res.best.cfg.variant)
            << " hidden=" << res.best.cfg.hidden
            << " dropout=" << res.best.cfg.dropout
            << " wd=" << res.best.cfg.weight_decay << " lr=" << res.best.cfg.lr
            << " kernel=" << res.best.cfg.kernel_size << " val "
            << fmt_acc(res.best.mean_val_accuracy) << "\n";
  return 0;
}

int run_bench(const CommonArgs& args, const std::string& models,
              std::size_t epochs, std::size_t warmup, TrainConfig base) {
  Graph g = load_from_manifest(args.manifest);
  std::vector<TrainConfig> cfgs;
  std::stringstream ss(models);
  std::string name;
  while (std::getline(ss, name, ',')) {
    TrainConfig cfg = base;
    cfg.variant = variant_from_string(name);
    cfg.seed = args.seed;
    cfgs.push_back(cfg);
  }
  BenchReport report = bench_runtime(g, cfgs, epochs, warmup);
  const fs::path dir = ensure_out_dir(args);
  std::ostringstream csv;
  csv << "model,ms_per_epoch,multiplier\n";
  json rows = json::array();
  for (const auto& row : report.rows) {
    char mult[32];
    std::snprintf(mult, sizeof mult, "%.1f", row.multiplier);
    csv << to_string(row.variant) << "," << fmt_ms(row.ms_per_epoch) << ","
        << mult << "\n";
    rows.push_back({{"model", to_string(row.variant)},
                    {"ms_per_epoch", row.ms_per_epoch},
                    {"multiplier", row.multiplier}});
    std::cout << to_string(row.variant) << ": " << fmt_ms(row.ms_per_epoch)
              << " ms/epoch (" << mult << "x)\n";
  }
  write_file(dir / "bench.csv", csv.str());
  write_sidecar(dir, "bench", args.seed,
                {{"models", models},
                 {"epochs", epochs},
                 {"warmup", warmup},
                 {"base", config_json(base)}},
                {{"baseline", report.baseline}, {"rows", rows}},
                /*with_env=*/true);
  return 0;
}

int run_scaling(const CommonArgs& args, std::vector<std::size_t> sizes,
                std::size_t f, std::size_t reps) {
  ScalingReport report = scaling_experiment(sizes, f, reps, args.seed);
  const fs::path dir = ensure_out_dir(args);
  std::ostringstream csv;
  csv << "n,sorted_ms,attention_ms\n";
  json rows = json::array();
  for (const auto& row : report.rows) {
    csv << row.n << "," << fmt_ms(row.sorted_ms) << ","
        << (row.attention_skipped ? "skipped" : fmt_ms(row.attention_ms))
        << "\n";
    rows.push_back({{"n", row.n},
                    {"sorted_ms", row.sorted_ms},
                    {"attention_ms", row.attention_ms},
                    {"attention_skipped", row.attention_skipped}});
    std::cout << "n=" << row.n << ": sorted " << fmt_ms(row.sorted_ms)
              << " ms, attention "
              << (row.attention_skipped ? "skipped"
                                        : fmt_ms(row.attention_ms) + " ms")
              << "\n";
  }
  write_file(dir / "scaling.csv", csv.str());
  write_sidecar(dir, "scaling", args.seed,
                {{"sizes", sizes}, {"feature_dim", f}, {"reps", reps}},
                {{"sorted_slope", report.sorted_slope},
                 {"attention_slope", report.attention_slope},
                 {"rows", rows},
                 {"note", report.note}},
                /*with_env=*/true);
  std::cout << "log-log slopes: sorted " << fmt_ms(report.sorted_slope)
            << ", attention " << fmt_ms(report.attention_slope) << "\n";
  return 0;
}

int run_export(const CommonArgs& args, const std::string& params_path,
               std::size_t window) {
  if (params_path.empty()) {
    throw ConfigError("export-sorted needs --params with a trained model "
                      "(train with --save-params first)");
  }
  Graph g = load_from_manifest(args.manifest);
  Model model = load_model(params_path);
  SortedExport exp = export_sorted(g, model, window);
  const fs::path dir = ensure_out_dir(args);
  std::ostringstream csv;
  csv << "sorted_position,node_id,attention_score,label\n";
  for (const auto& row : exp.rows) {
    csv << row.position << "," << row.node << "," << format_double(row.score)
        << "," << row.label << "\n";
  }
  write_file(dir / "export.csv", csv.str());
  write_sidecar(dir, "export-sorted", args.seed,
                {{"manifest", args.manifest},
                 {"params", params_path},
                 {"window", exp.window}},
                {{"h_original", exp.h_original},
                 {"h_reconnected", exp.h_reconnected}});
  std::cout << "H(G)=" << fmt_acc(exp.h_original)
            << " H(reconnected)=" << fmt_acc(exp.h_reconnected)
            << " window=" << exp.window << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"non-local graph neural network engine"};
  app.require_subcommand(1);

  CommonArgs common;

  auto* analyze = app.add_subcommand(
      "analyze", "dataset statistics and homophily");
  add_common(analyze, common, true);

  auto* generate =
      app.add_subcommand("generate", "write a synthetic block-model dataset");
  SyntheticConfig syn;
  add_common(generate, common, false);
  generate->add_option("--n", syn.n, "node count");
  generate->add_option("--classes", syn.num_classes, "class count");
  generate->add_option("--homophily", syn.target_homophily,
                       "target homophily in [0,1]");
  generate->add_option("--dim", syn.feature_dim,
                       "feature dimension (0: class count)");
  generate->add_option("--mean-degree", syn.mean_degree, "expected degree");
  generate->add_option("--feature-noise", syn.feature_noise,
                       "stddev of feature noise");

  auto* train_cmd = app.add_subcommand("train", "train one model");
  TrainConfig tc;
  std::string variant_name = "nlmlp";
  std::string save_params;
  add_common(train_cmd, common, true);
  train_cmd->add_option("--variant", variant_name,
                        "model: mlp|gcn|gat|nlmlp|nlgcn|nlgat");
  train_cmd->add_option("--epochs", tc.max_epochs, "training epochs");
  add_model_hparams(train_cmd, tc);
  train_cmd->add_option("--save-params", save_params,
                        "write trained parameters to this file");

  auto* categorize =
      app.add_subcommand("categorize", "MLP vs GCN/GAT dataset category");
  TrainConfig cat_base;
  cat_base.hidden = 48;
  cat_base.dropout = 0.5;
  cat_base.weight_decay = 5e-4;
  std::size_t cat_repeats = 10;
  add_common(categorize, common, true);
  categorize->add_option("--epochs", cat_base.max_epochs, "epochs per run");
  add_model_hparams(categorize, cat_base);
  categorize->add_option("--repeats", cat_repeats, "splits per model");

  auto* grid = app.add_subcommand("grid", "hyperparameter grid search");
  std::string grid_variant = "nlmlp";
  std::size_t grid_repeats = 3;
  std::size_t grid_epochs = 500;
  add_common(grid, common, true);
  grid->add_option("--variant", grid_variant, "model variant to tune");
  grid->add_option("--repeats", grid_repeats, "splits per cell");
  grid->add_option("--epochs", grid_epochs, "epochs per run");

  auto* bench = app.add_subcommand("bench", "per-epoch training time");
  std::string bench_models = "gcn,nlgcn";
  std::size_t bench_epochs = 500, bench_warmup = 10;
  TrainConfig bench_base;
  add_common(bench, common, true);
  bench->add_option("--models", bench_models, "comma-separated variants");
  bench->add_option("--epochs", bench_epochs, "epochs per model");
  bench->add_option("--warmup", bench_warmup, "excluded warm-up epochs");
  add_model_hparams(bench, bench_base);

  auto* scaling = app.add_subcommand(
      "scaling", "sorted path vs dense attention scaling");
  std::vector<std::size_t> sizes = {1024, 2048, 4096, 8192};
  std::size_t scale_f = 32, scale_reps = 3;
  add_common(scaling, common, false);
  scaling->add_option("--sizes", sizes, "node counts (increasing)");
  scaling->add_option("--f", scale_f, "embedding dimension");
  scaling->add_option("--reps", scale_reps, "repetitions per size");

  auto* exp = app.add_subcommand("export-sorted",
                                 "sorted node sequence of a trained model");
  std::string params_path;
  std::size_t window = 0;
  add_common(exp, common, true);
  exp->add_option("--params", params_path, "trained parameter file");
  exp->add_option("--window", window,
                  "receptive half-width (0: kernel-1 default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*analyze) return run_analyze(common);
    if (*generate) {
      syn.seed = common.seed;
      return run_generate(common, syn);
    }
    if (*train_cmd) {
      tc.variant = variant_from_string(variant_name);
      return run_train(common, tc, save_params);
    }
    if (*categorize) return run_categorize(common, cat_base, cat_repeats);
    if (*grid) return run_grid(common, grid_variant, grid_repeats, grid_epochs);
    if (*bench) {
      bench_base.seed = common.seed;
      return run_bench(common, bench_models, bench_epochs, bench_warmup,
                       bench_base);
    }
    if (*scaling) return run_scaling(common, sizes, scale_f, scale_reps);
    if (*exp) return run_export(common, params_path, window);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
