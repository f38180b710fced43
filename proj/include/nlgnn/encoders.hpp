#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "nlgnn/graph.hpp"
#include "nlgnn/ops.hpp"

namespace nlgnn {

enum class EncoderKind { Mlp, Gcn, Gat };

// Two-layer local-embedding stage. w1: d×h, w2: h×f. The GAT variant splits
// layer 1 into `heads` column blocks and runs one attention head per block;
// layer 2 uses a single head. Dropout applies to the input features and the
// hidden activations; ReLU sits between the layers and nothing after layer 2.
struct EncoderParams {
  EncoderKind kind = EncoderKind::Mlp;
  Tensor w1;
  Tensor w2;
  Tensor gat_a1_src, gat_a1_dst;  // [h], head-blocked
  Tensor gat_a2_src, gat_a2_dst;  // [f]
  int heads = 8;
  double dropout = 0.0;
  double leaky_slope = 0.2;
};

// Weights of D^{-1/2} (A+I) D^{-1/2} where D is the degree matrix of A+I.
// Owns a copy of the CSR arrays so tape closures can outlive the Graph
// binding. edge_weight is aligned with offsets/targets; self_weight holds
// the added self-loop coefficients.
struct AdjacencyNorm {
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> targets;
  std::vector<double> edge_weight;
  std::vector<double> self_weight;
  std::size_t n() const { return self_weight.size(); }
};
using AdjacencyNormPtr = std::shared_ptr<const AdjacencyNorm>;
AdjacencyNorm normalize_adjacency(const Graph& g);

// CSR over closed neighborhoods N(v) ∪ {v}: segment v lists the source node
// of every in-edge of v, self-loop included.
struct ClosedCsr {
  std::vector<std::size_t> offsets;  // n+1
  std::vector<std::uint32_t> src;
  std::size_t n() const { return offsets.size() - 1; }
};
using ClosedCsrPtr = std::shared_ptr<const ClosedCsr>;
ClosedCsr closed_neighborhoods(const Graph& g);

// out = D^{-1/2}(A+I)D^{-1/2} · x. Neighbor contributions are folded in
// value order (see detail::ordered_sum).
Tensor spmm_norm(Tape& tape, const AdjacencyNormPtr& norm, const Tensor& x);

// Per-head attention logits: scores[e,j] = p[src(e),j] + q[dst(e),j].
Tensor edge_score_pairs(Tape& tape, const ClosedCsrPtr& csr, const Tensor& p,
                        const Tensor& q);

// Softmax over each destination segment, per head. Rows of the result sum to
// one within every segment.
Tensor segment_softmax(Tape& tape, const ClosedCsrPtr& csr,
                       const Tensor& scores);

// out[v, block_j] = Σ_{e ∈ seg(v)} alpha[e,j] · h[src(e), block_j] where
// block_j is the j-th of `heads` equal column blocks of h.
Tensor segment_weighted_rows(Tape& tape, const ClosedCsrPtr& csr,
                             const Tensor& alpha, const Tensor& h, int heads);

// One GAT layer over already-transformed features h (n×width). Returns the
// aggregated output and the per-edge attention coefficients (M×heads).
struct GatLayerResult {
  Tensor out;
  Tensor alpha;
};
GatLayerResult gat_layer(Tape& tape, const ClosedCsrPtr& csr, const Tensor& h,
                         const Tensor& a_src, const Tensor& a_dst, int heads,
                         double leaky_slope);

Tensor mlp_embed(Tape& tape, const Tensor& features, const EncoderParams& p,
                 Rng& rng, bool training);
Tensor gcn_embed(Tape& tape, const Graph& g, const Tensor& features,
                 const EncoderParams& p, Rng& rng, bool training);
Tensor gat_embed(Tape& tape, const Graph& g, const Tensor& features,
                 const EncoderParams& p, Rng& rng, bool training);

// Dispatch on p.kind.
Tensor encode(Tape& tape, const Graph& g, const Tensor& features,
              const EncoderParams& p, Rng& rng, bool training);

}  // namespace nlgnn
