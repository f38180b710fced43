#include "nlgnn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <new>
#include <thread>

#include "nlgnn/error.hpp"

namespace nlgnn {

EnvironmentInfo environment_info() {
  EnvironmentInfo env;
  env.threads = 1;  // math kernels are single-threaded
  env.hardware_threads =
      static_cast<int>(std::thread::hardware_concurrency());
#ifdef NDEBUG
  env.build = "release";
#else
  env.build = "debug";
#endif
#if defined(__VERSION__)
  env.compiler = __VERSION__;
#else
  env.compiler = "unknown";
#endif
  return env;
}

BenchReport bench_runtime(const Graph& g, std::span<const TrainConfig> cfgs,
                          std::size_t epochs, std::size_t warmup) {
  if (cfgs.empty()) throw ConfigError("bench_runtime needs at least one model");
  if (epochs <= warmup) {
    throw ConfigError("bench_runtime needs more epochs than warmup rounds");
  }
  BenchReport report;
  report.epochs = epochs;
  report.warmup = warmup;
  report.env = environment_info();
  for (TrainConfig cfg : cfgs) {
    cfg.max_epochs = epochs;
    Split split = split_nodes(g, kDefaultSplitRatios, cfg.seed);
    RunResult run = train(g, split, cfg).result;
    double total = 0.0;
    for (std::size_t e = warmup; e < run.epoch_ms.size(); ++e) {
      total += run.epoch_ms[e];
    }
    BenchRow row;
    row.variant = cfg.variant;
    row.ms_per_epoch = total / static_cast<double>(epochs - warmup);
    report.rows.push_back(row);
  }
  std::size_t base = 0;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    if (report.rows[i].variant == Variant::Gcn) {
      base = i;
      break;
    }
  }
  report.baseline = to_string(report.rows[base].variant);
  const double base_ms = report.rows[base].ms_per_epoch;
  for (auto& row : report.rows) row.multiplier = row.ms_per_epoch / base_ms;
  return report;
}

namespace {

struct ScalingModel {
  Tensor calibration;
  std::vector<Conv1dParams> convs;
};

ScalingModel make_scaling_model(std::size_t f, std::size_t kernel, Rng& rng) {
  ScalingModel m;
  m.calibration = Tensor::zeros({f}, true);
  for (double& v : m.calibration.values()) {
    v = rng.normal() / std::sqrt(static_cast<double>(f));
  }
  const double limit = std::sqrt(6.0 / static_cast<double>(2 * kernel * f));
  for (int layer = 0; layer < 2; ++layer) {
    Conv1dParams conv;
    conv.kernel = Tensor::zeros({kernel, f, f}, true);
    for (double& v : conv.kernel.values()) v = rng.uniform(-limit, limit);
    conv.bias = Tensor::zeros({f}, true);
    m.convs.push_back(std::move(conv));
  }
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Least-squares slope of log(ms) against log(n).
double loglog_slope(const std::vector<std::pair<std::size_t, double>>& pts) {
  const double m = static_cast<double>(pts.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [n, ms] : pts) {
    const double x = std::log(static_cast<double>(n));
    const double y = std::log(ms);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

ScalingReport scaling_experiment(std::span<const std::size_t> sizes,
                                 std::size_t feature_dim, std::size_t reps,
                                 std::uint64_t seed) {
  if (sizes.empty()) throw ConfigError("scaling_experiment needs sizes");
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) {
      throw ConfigError("scaling sizes must be strictly increasing");
    }
  }
  if (reps == 0) throw ConfigError("scaling_experiment needs reps >= 1");

  ScalingReport report;
  report.feature_dim = feature_dim;
  report.reps = reps;
  report.env = environment_info();
  Rng rng(seed);
  NonLocalParams nl;  // only the pieces nonlocal_aggregate uses
  {
    ScalingModel m = make_scaling_model(feature_dim, report.kernel, rng);
    nl.calibration = m.calibration;
    nl.convs = std::move(m.convs);
    nl.kernel_size = report.kernel;
  }

  using clock = std::chrono::steady_clock;
  std::vector<std::pair<std::size_t, double>> sorted_pts, attn_pts;
  for (std::size_t n : sizes) {
    Tensor z = Tensor::zeros({n, feature_dim}, true);
    for (double& v : z.values()) v = rng.normal();

    ScalingRow row;
    row.n = n;
    std::vector<double> sorted_times, attn_times;
    for (std::size_t r = 0; r < reps; ++r) {
      {
        const auto t0 = clock::now();
        Tape tape;
        Tensor scores = attention_scores(tape, z, nl.calibration);
        Permutation perm = sort_permutation(scores);
        Tensor zhat = nonlocal_aggregate(tape, z, scores, perm, nl);
        Tensor loss = sum(tape, zhat);
        tape.backward(loss);
        const auto t1 = clock::now();
        sorted_times.push_back(
            std::chrono::duration<double, std::milli>(t1 - t0).count());
        z.zero_grad();
        nl.calibration.zero_grad();
      }
      if (!row.attention_skipped) {
        try {
          const auto t0 = clock::now();
          Tape tape;
          Tensor o = full_attention_baseline(tape, z);
          Tensor loss = sum(tape, o);
          tape.backward(loss);
          const auto t1 = clock::now();
          attn_times.push_back(
              std::chrono::duration<double, std::milli>(t1 - t0).count());
          z.zero_grad();
        } catch (const std::bad_alloc&) {
          row.attention_skipped = true;
          report.note = "attention baseline ran out of memory at n=" +
                        std::to_string(n) + "; partial report";
        }
      }
    }
    row.sorted_ms = median(sorted_times);
    sorted_pts.emplace_back(n, row.sorted_ms);
    if (!row.attention_skipped) {
      row.attention_ms = median(attn_times);
      attn_pts.emplace_back(n, row.attention_ms);
    }
    report.rows.push_back(row);
  }
  if (sorted_pts.size() >= 2) report.sorted_slope = loglog_slope(sorted_pts);
  if (attn_pts.size() >= 2) report.attention_slope = loglog_slope(attn_pts);
  return report;
}

}  // namespace nlgnn
