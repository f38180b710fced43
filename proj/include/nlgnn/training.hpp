#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "nlgnn/model.hpp"

namespace nlgnn {

// Tuning grid used by grid_search.
inline constexpr std::array<std::size_t, 3> kGridHidden = {16, 48, 96};
inline constexpr std::array<double, 3> kGridDropout = {0.0, 0.5, 0.8};
inline constexpr std::array<double, 4> kGridWeightDecay = {0.0, 5e-4, 5e-5,
                                                           5e-6};
inline constexpr std::array<double, 2> kGridLearningRate = {0.01, 0.05};
inline constexpr std::array<std::size_t, 2> kGridKernel = {3, 5};

inline constexpr std::array<double, 3> kDefaultSplitRatios = {0.6, 0.2, 0.2};

struct TrainConfig {
  Variant variant = Variant::NlMlp;
  std::size_t hidden = 16;
  double dropout = 0.0;
  double weight_decay = 0.0;
  double lr = 0.01;
  std::size_t kernel_size = 3;
  std::size_t max_epochs = 500;
  std::uint64_t seed = 0;
  int gat_heads = 8;

  ModelConfig model_config() const;
};

struct RunResult {
  double test_accuracy = 0.0;
  double best_val_accuracy = 0.0;
  std::size_t best_epoch = 0;            // 1-based
  std::vector<double> loss_curve;        // training loss per epoch
  std::vector<double> val_curve;         // validation accuracy per epoch
  std::vector<double> epoch_ms;          // training-step wall time per epoch
  double wall_ms_per_epoch = 0.0;        // mean over all epochs
};

struct TrainOutput {
  RunResult result;
  Model model;
};

// Full-batch training with post-hoc model selection: the test accuracy is
// the one at the epoch of maximum validation accuracy (earliest on ties).
// Test labels are consulted exactly once, after the loop, against the
// predictions saved at the selected epoch. Bitwise deterministic per
// (graph, cfg, seed).
TrainOutput train(const Graph& g, const Split& split, const TrainConfig& cfg);

struct EvalStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<RunResult> runs;
};

// One stratified split + training run per seed; reports mean/std of test
// accuracy.
EvalStats evaluate_mean(
    const Graph& g, TrainConfig cfg, std::span<const std::uint64_t> seeds,
    std::array<double, 3> ratios = {0.6, 0.2, 0.2});

struct CategorizeRow {
  Variant variant;
  double mean = 0.0;
  double stddev = 0.0;
};

struct CategorizeResult {
  int category = 2;  // 1: local aggregation harmful, 2: local helps
  std::vector<CategorizeRow> table;
};

// MLP vs GCN/GAT comparison: Category 1 iff the MLP mean beats both GNNs.
CategorizeResult categorize_dataset(const Graph& g, const TrainConfig& base,
                                    std::span<const std::uint64_t> seeds);

struct GridEntry {
  TrainConfig cfg;
  double mean_val_accuracy = 0.0;
  double mean_test_accuracy = 0.0;
};

struct GridResult {
  GridEntry best;
  std::vector<GridEntry> leaderboard;  // nonincreasing mean_val_accuracy
};

// Exhaustive sweep of the tuning grid (plus kernel size for non-local
// variants), ranked by mean validation accuracy across the split seeds.
GridResult grid_search(const Graph& g, Variant variant,
                       std::span<const std::uint64_t> seeds,
                       std::size_t max_epochs = 500);

double accuracy(const Tensor& logits, std::span<const int> labels,
                std::span<const std::size_t> nodes);

std::vector<std::uint64_t> make_seeds(std::uint64_t base, std::size_t count);

}  // namespace nlgnn
