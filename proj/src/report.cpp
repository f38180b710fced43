#include "nlgnn/report.hpp"

#include <cstdio>

#include "nlgnn/error.hpp"

namespace nlgnn {

SortedExport export_sorted(const Graph& g, const Model& model,
                           std::size_t window) {
  if (!is_nonlocal(model.config().variant)) {
    throw ConfigError("export requires a non-local variant with a "
                      "calibration vector, got " +
                      to_string(model.config().variant));
  }
  Rng rng(0);  // evaluation mode draws nothing
  Tape tape(/*recording=*/false);
  ForwardTrace trace;
  model.forward(tape, g, rng, /*training=*/false, &trace);

  SortedExport out;
  out.window = window == 0 ? model.config().kernel_size - 1 : window;
  auto sv = trace.scores.values();
  out.rows.reserve(g.n);
  for (std::size_t i = 0; i < g.n; ++i) {
    const std::size_t v = trace.perm.order[i];
    out.rows.push_back({i, v, sv[v], g.labels[v]});
  }
  out.h_original = homophily(g);
  out.h_reconnected = reconnected_homophily(g, trace.perm, out.window);
  return out;
}

double mean_label_run_length(const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  std::size_t runs = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i == 0 || labels[i] != labels[i - 1]) ++runs;
  }
  return static_cast<double>(labels.size()) / static_cast<double>(runs);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace nlgnn
