#pragma once

#include <vector>

#include "nlgnn/graph.hpp"
#include "nlgnn/ops.hpp"

namespace nlgnn {

struct Conv1dParams {
  Tensor kernel;  // k×f_in×f_out
  Tensor bias;    // f_out
};

// Parameters of the non-local head: calibration vector, conv stack over the
// sorted sequence (two layers by default, ReLU between them), and the linear
// classifier applied to [ẑ | z].
struct NonLocalParams {
  Tensor calibration;              // f, learned end to end
  std::vector<Conv1dParams> convs;
  Tensor classifier_w;             // 2f×C
  Tensor classifier_b;             // C
  std::size_t kernel_size = 3;
};

// score_v = calibration · z_v; differentiable wrt both inputs.
Tensor attention_scores(Tape& tape, const Tensor& z, const Tensor& calibration);

// Stable sort of the node indices by nondecreasing score; ties break by
// ascending node index. Scores must be finite.
Permutation sort_permutation(const Tensor& scores);

// Builds the sequence a_i·z_i in sorted order, applies the conv stack and
// scatters the result back to original node order, so row v of the output
// corresponds to node v. Gradients flow into z both directly and through the
// score factors.
Tensor nonlocal_aggregate(Tape& tape, const Tensor& z, const Tensor& scores,
                          const Permutation& perm, const NonLocalParams& p);

// logits = [ẑ | z]·W + b
Tensor predict(Tape& tape, const Tensor& z, const Tensor& zhat,
               const NonLocalParams& p);

// Dense non-local aggregation: o_v = Σ_u softmax_u(z_v·z_u) z_u, computed in
// row blocks so no n×n matrix is ever materialized. Exact O(n²) semantics;
// serves as the complexity foil for the sorted path.
Tensor full_attention_baseline(Tape& tape, const Tensor& z);

}  // namespace nlgnn
