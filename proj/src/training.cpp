#include "nlgnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "nlgnn/error.hpp"

namespace nlgnn {

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.variant = variant;
  m.hidden = hidden;
  m.dropout = dropout;
  m.kernel_size = kernel_size;
  m.gat_heads = gat_heads;
  return m;
}

double accuracy(const Tensor& logits, std::span<const int> labels,
                std::span<const std::size_t> nodes) {
  if (nodes.empty()) throw ValueError("accuracy over an empty node set");
  const std::size_t c = logits.cols();
  auto lv = logits.values();
  std::size_t hits = 0;
  for (std::size_t v : nodes) {
    const double* row = &lv[v * c];
    std::size_t arg = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (row[j] > row[arg]) arg = j;
    }
    if (static_cast<int>(arg) == labels[v]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

namespace {

void validate_split(const Graph& g, const Split& split) {
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw ContractError("split must have nonempty train/val/test sets");
  }
  std::vector<char> seen(g.n, 0);
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    for (std::size_t v : *part) {
      if (v >= g.n) {
        throw ContractError("split references node " + std::to_string(v) +
                            " outside the graph");
      }
      if (seen[v]) {
        throw ContractError("split sets are not disjoint at node " +
                            std::to_string(v));
      }
      seen[v] = 1;
    }
  }
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t n = logits.rows(), c = logits.cols();
  auto lv = logits.values();
  std::vector<int> out(n);
  for (std::size_t v = 0; v < n; ++v) {
    const double* row = &lv[v * c];
    std::size_t arg = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (row[j] > row[arg]) arg = j;
    }
    out[v] = static_cast<int>(arg);
  }
  return out;
}

}  // namespace

TrainOutput train(const Graph& g, const Split& split, const TrainConfig& cfg) {
  if (cfg.max_epochs == 0) {
    throw ConfigError("max_epochs must be at least 1: a run with no epochs "
                      "has no validation point");
  }
  if (cfg.lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (cfg.weight_decay < 0.0) {
    throw ConfigError("weight decay must be nonnegative");
  }
  validate_split(g, split);

  Rng rng(cfg.seed);
  Model model(cfg.model_config(), g.feature_dim(), g.num_classes, rng);
  AdamConfig adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;

  RunResult res;
  res.loss_curve.reserve(cfg.max_epochs);
  res.epoch_ms.reserve(cfg.max_epochs);
  std::vector<int> best_pred;
  double best_val = -1.0;
  std::size_t best_epoch = 0;

  using clock = std::chrono::steady_clock;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = clock::now();
    Tape tape;
    Tensor logits, loss;
    try {
      logits = model.forward(tape, g, rng, /*training=*/true);
      loss = softmax_cross_entropy(tape, logits, g.labels, split.train);
    } catch (const ContractError& e) {
      // Overflow inside the forward pass (e.g. NaN attention scores)
      // surfaces as a contract violation; report it as divergence.
      throw TrainError("training diverged at epoch " + std::to_string(epoch) +
                       ": " + e.what());
    }
    const double loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      throw TrainError("training diverged: non-finite loss at epoch " +
                       std::to_string(epoch));
    }
    tape.backward(loss);
    model.params().adam_step(adam);
    model.params().zero_grads();
    const auto t1 = clock::now();
    res.epoch_ms.push_back(
        std::chrono::duration<double, std::milli>(t1 - t0).count());
    res.loss_curve.push_back(loss_value);

    Tape eval_tape(/*recording=*/false);
    Tensor eval_logits;
    try {
      eval_logits = model.forward(eval_tape, g, rng, /*training=*/false);
    } catch (const ContractError& e) {
      throw TrainError("training diverged at epoch " + std::to_string(epoch) +
                       ": " + e.what());
    }
    const double val_acc = accuracy(eval_logits, g.labels, split.val);
    res.val_curve.push_back(val_acc);
    if (val_acc > best_val) {
      best_val = val_acc;
      best_epoch = epoch;
      best_pred = argmax_rows(eval_logits);
    }
  }

  // The single read of the test labels.
  std::size_t hits = 0;
  for (std::size_t v : split.test) {
    if (best_pred[v] == g.labels[v]) ++hits;
  }
  res.test_accuracy =
      static_cast<double>(hits) / static_cast<double>(split.test.size());
  res.best_val_accuracy = best_val;
  res.best_epoch = best_epoch;
  double total_ms = 0.0;
  for (double t : res.epoch_ms) total_ms += t;
  res.wall_ms_per_epoch = total_ms / static_cast<double>(res.epoch_ms.size());
  return {std::move(res), std::move(model)};
}

EvalStats evaluate_mean(const Graph& g, TrainConfig cfg,
                        std::span<const std::uint64_t> seeds,
                        std::array<double, 3> ratios) {
  if (seeds.empty()) throw ConfigError("evaluate_mean needs at least one seed");
  {
    std::set<std::uint64_t> uniq(seeds.begin(), seeds.end());
    if (uniq.size() != seeds.size()) {
      throw ConfigError("evaluate_mean seeds must be distinct");
    }
  }
  EvalStats stats;
  stats.seeds.assign(seeds.begin(), seeds.end());
  for (std::uint64_t seed : seeds) {
    Split split = split_nodes(g, ratios, seed);
    cfg.seed = seed;
    stats.runs.push_back(train(g, split, cfg).result);
  }
  double mean = 0.0;
  for (const auto& r : stats.runs) mean += r.test_accuracy;
  mean /= static_cast<double>(stats.runs.size());
  double var = 0.0;
  for (const auto& r : stats.runs) {
    var += (r.test_accuracy - mean) * (r.test_accuracy - mean);
  }
  stats.mean = mean;
  stats.stddev = stats.runs.size() > 1
                     ? std::sqrt(var / static_cast<double>(stats.runs.size() - 1))
                     : 0.0;
  return stats;
}

CategorizeResult categorize_dataset(const Graph& g, const TrainConfig& base,
                                    std::span<const std::uint64_t> seeds) {
  CategorizeResult out;
  double mlp_mean = 0.0, best_gnn = 0.0;
  for (Variant v : {Variant::Mlp, Variant::Gcn, Variant::Gat}) {
    TrainConfig cfg = base;
    cfg.variant = v;
    EvalStats stats = evaluate_mean(g, cfg, seeds);
    out.table.push_back({v, stats.mean, stats.stddev});
    if (v == Variant::Mlp) {
      mlp_mean = stats.mean;
    } else {
      best_gnn = std::max(best_gnn, stats.mean);
    }
  }
  out.category = mlp_mean > best_gnn ? 1 : 2;
  return out;
}

GridResult grid_search(const Graph& g, Variant variant,
                       std::span<const std::uint64_t> seeds,
                       std::size_t max_epochs) {
  GridResult out;
  for (std::size_t hidden : kGridHidden) {
    for (double dropout : kGridDropout) {
      for (double wd : kGridWeightDecay) {
        for (double lr : kGridLearningRate) {
          const auto kernels =
              is_nonlocal(variant)
                  ? std::span<const std::size_t>(kGridKernel)
                  : std::span<const std::size_t>(kGridKernel.data(), 1);
          for (std::size_t kernel : kernels) {
            TrainConfig cfg;
            cfg.variant = variant;
            cfg.hidden = hidden;
            cfg.dropout = dropout;
            cfg.weight_decay = wd;
            cfg.lr = lr;
            cfg.kernel_size = kernel;
            cfg.max_epochs = max_epochs;
            GridEntry entry;
            entry.cfg = cfg;
            double val_sum = 0.0, test_sum = 0.0;
            for (std::uint64_t seed : seeds) {
              Split split = split_nodes(g, kDefaultSplitRatios, seed);
              cfg.seed = seed;
              RunResult r = train(g, split, cfg).result;
              val_sum += r.best_val_accuracy;
              test_sum += r.test_accuracy;
            }
            entry.mean_val_accuracy =
                val_sum / static_cast<double>(seeds.size());
            entry.mean_test_accuracy =
                test_sum / static_cast<double>(seeds.size());
            out.leaderboard.push_back(std::move(entry));
          }
        }
      }
    }
  }
  std::stable_sort(out.leaderboard.begin(), out.leaderboard.end(),
                   [](const GridEntry& a, const GridEntry& b) {
                     return a.mean_val_accuracy > b.mean_val_accuracy;
                   });
  out.best = out.leaderboard.front();
  return out;
}

std::vector<std::uint64_t> make_seeds(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = base + i;
  return seeds;
}

}  // namespace nlgnn
