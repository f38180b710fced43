#pragma once

#include <string>
#include <vector>

#include "nlgnn/model.hpp"

namespace nlgnn {

// One row of the sorted-sequence export.
struct SortedRow {
  std::size_t position = 0;
  std::size_t node = 0;
  double score = 0.0;
  int label = 0;
};

struct SortedExport {
  std::vector<SortedRow> rows;  // nondecreasing score
  double h_original = 0.0;      // H of the input graph
  double h_reconnected = 0.0;   // H of the re-connected graph
  std::size_t window = 0;       // receptive half-width used
};

// Evaluation-mode forward pass of a trained non-local model; emits the sorted
// node sequence with scores and labels plus the homophily pair. window == 0
// selects the conv stack's effective half-width, kernel_size - 1.
SortedExport export_sorted(const Graph& g, const Model& model,
                           std::size_t window = 0);

// Largest same-label run length statistics of a label sequence.
double mean_label_run_length(const std::vector<int>& labels);

std::string format_double(double v);  // shortest round-trip formatting

}  // namespace nlgnn
