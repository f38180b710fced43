#pragma once

#include <string>
#include <vector>

#include "nlgnn/training.hpp"

namespace nlgnn {

struct EnvironmentInfo {
  int threads = 1;            // threads this process uses for math kernels
  int hardware_threads = 0;   // what the machine offers
  std::string build;          // release/debug
  std::string compiler;
};
EnvironmentInfo environment_info();

struct BenchRow {
  Variant variant = Variant::Gcn;
  double ms_per_epoch = 0.0;
  double multiplier = 1.0;  // vs the GCN row (or the first row if no GCN)
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::size_t epochs = 0;
  std::size_t warmup = 0;
  std::string baseline;  // variant the multipliers are relative to
  EnvironmentInfo env;
};

// Trains every config for `epochs` epochs and reports the mean wall time per
// epoch with the first `warmup` epochs excluded. Runs are serialized.
BenchReport bench_runtime(const Graph& g, std::span<const TrainConfig> cfgs,
                          std::size_t epochs = 500, std::size_t warmup = 10);

struct ScalingRow {
  std::size_t n = 0;
  double sorted_ms = 0.0;
  double attention_ms = 0.0;
  bool attention_skipped = false;
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  double sorted_slope = 0.0;     // log-log least-squares fit
  double attention_slope = 0.0;
  std::size_t feature_dim = 0;
  std::size_t kernel = 5;
  std::size_t reps = 0;
  std::string note;
  EnvironmentInfo env;
};

// Forward+backward wall time of the sorted non-local path (scores, sort,
// scaled conv stack) against the dense attention baseline on random
// embeddings, with log-log slopes over the size ladder. Times are medians
// over `reps` repetitions.
ScalingReport scaling_experiment(std::span<const std::size_t> sizes,
                                 std::size_t feature_dim = 32,
                                 std::size_t reps = 3, std::uint64_t seed = 0);

}  // namespace nlgnn
