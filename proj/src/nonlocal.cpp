#include "nlgnn/nonlocal.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "nlgnn/error.hpp"

namespace nlgnn {

Tensor attention_scores(Tape& tape, const Tensor& z,
                        const Tensor& calibration) {
  return matvec(tape, z, calibration);
}

Permutation sort_permutation(const Tensor& scores) {
  if (scores.rank() != 1) {
    throw ShapeError("sort_permutation expects a rank-1 score tensor, got " +
                     shape_str(scores.shape()));
  }
  auto sv = scores.values();
  for (std::size_t v = 0; v < sv.size(); ++v) {
    if (std::isnan(sv[v])) {
      throw ContractError("attention score of node " + std::to_string(v) +
                          " is NaN");
    }
  }
  std::vector<std::size_t> order(sv.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (sv[a] != sv[b]) return sv[a] < sv[b];
    return a < b;
  });
  return Permutation::from_order(std::move(order));
}

Tensor nonlocal_aggregate(Tape& tape, const Tensor& z, const Tensor& scores,
                          const Permutation& perm, const NonLocalParams& p) {
  if (z.rank() != 2) {
    throw ShapeError("nonlocal_aggregate expects n×f embeddings, got " +
                     shape_str(z.shape()));
  }
  if (scores.rank() != 1 || scores.dim(0) != z.rows()) {
    throw ShapeError("nonlocal_aggregate: score shape " +
                     shape_str(scores.shape()) + " does not match " +
                     std::to_string(z.rows()) + " nodes");
  }
  if (perm.size() != z.rows()) {
    throw ContractError("permutation length " + std::to_string(perm.size()) +
                        " does not match node count " +
                        std::to_string(z.rows()));
  }
  if (p.convs.empty()) {
    throw ConfigError("nonlocal_aggregate needs at least one conv layer");
  }
#ifndef NDEBUG
  {
    auto sv = scores.values();
    for (std::size_t i = 1; i < perm.order.size(); ++i) {
      assert(sv[perm.order[i - 1]] <= sv[perm.order[i]] &&
             "permutation is not sorted by the scores");
    }
  }
#endif
  Tensor weighted = scale_rows(tape, z, scores);
  Tensor seq = gather_rows(tape, weighted, perm.order);
  for (std::size_t i = 0; i < p.convs.size(); ++i) {
    seq = conv1d(tape, seq, p.convs[i].kernel, p.convs[i].bias);
    if (i + 1 < p.convs.size()) seq = relu(tape, seq);
  }
  return gather_rows(tape, seq, perm.inverse);
}

Tensor predict(Tape& tape, const Tensor& z, const Tensor& zhat,
               const NonLocalParams& p) {
  if (z.rank() != 2 || zhat.rank() != 2 || z.rows() != zhat.rows()) {
    throw ShapeError("predict: row counts disagree, " + shape_str(z.shape()) +
                     " vs " + shape_str(zhat.shape()));
  }
  Tensor joint = concat_cols(tape, zhat, z);
  return add_bias(tape, matmul(tape, joint, p.classifier_w), p.classifier_b);
}

namespace {

// Row-block softmax attention; fills attn (block_rows×n) for rows [b0,b1).
void attention_block(std::span<const double> zv, std::size_t n, std::size_t f,
                     std::size_t b0, std::size_t b1, std::vector<double>& attn) {
  const std::size_t rows = b1 - b0;
  attn.assign(rows * n, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* zi = &zv[(b0 + i) * f];
    double* row = &attn[i * n];
    for (std::size_t u = 0; u < n; ++u) {
      const double* zu = &zv[u * f];
      double dot = 0.0;
      for (std::size_t c = 0; c < f; ++c) dot += zi[c] * zu[c];
      row[u] = dot;
    }
    double mx = row[0];
    for (std::size_t u = 1; u < n; ++u) mx = std::max(mx, row[u]);
    double denom = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      row[u] = std::exp(row[u] - mx);
      denom += row[u];
    }
    for (std::size_t u = 0; u < n; ++u) row[u] /= denom;
  }
}

}  // namespace

Tensor full_attention_baseline(Tape& tape, const Tensor& z) {
  if (z.rank() != 2) {
    throw ShapeError("full_attention_baseline expects n×f embeddings, got " +
                     shape_str(z.shape()));
  }
  const std::size_t n = z.rows(), f = z.cols();
  const std::size_t block = std::min<std::size_t>(n, 256);
  Tensor out = Tensor::zeros({n, f}, z.requires_grad());
  {
    auto zv = z.values();
    auto ov = out.values();
    std::vector<double> attn;
    for (std::size_t b0 = 0; b0 < n; b0 += block) {
      const std::size_t b1 = std::min(n, b0 + block);
      attention_block(zv, n, f, b0, b1, attn);
      for (std::size_t i = 0; i < b1 - b0; ++i) {
        const double* row = &attn[i * n];
        double* orow = &ov[(b0 + i) * f];
        for (std::size_t u = 0; u < n; ++u) {
          const double a = row[u];
          const double* zu = &zv[u * f];
          for (std::size_t c = 0; c < f; ++c) orow[c] += a * zu[c];
        }
      }
    }
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor zc = z, oc = out;
    tape.record([zc, oc, n, f, block]() mutable {
      auto zv = zc.values();
      auto zg = zc.grad();
      auto og = oc.grad();
      std::vector<double> attn, drow(n), dscore(n);
      for (std::size_t b0 = 0; b0 < n; b0 += block) {
        const std::size_t b1 = std::min(n, b0 + block);
        attention_block(zv, n, f, b0, b1, attn);
        for (std::size_t i = 0; i < b1 - b0; ++i) {
          const std::size_t v = b0 + i;
          const double* arow = &attn[i * n];
          const double* do_row = &og[v * f];
          const double* ziv = &zv[v * f];
          // Value path: dZ[u] += a_{v,u} · dO[v].
          // Score path: dS = a ⊙ (dA − Σ_u dA_u a_u), dA_u = dO[v]·z_u,
          // then dZ[v] += Σ_u dS_u z_u and dZ[u] += dS_u z_v.
          double mix = 0.0;
          for (std::size_t u = 0; u < n; ++u) {
            const double* zu = &zv[u * f];
            double da = 0.0;
            for (std::size_t c = 0; c < f; ++c) da += do_row[c] * zu[c];
            drow[u] = da;
            mix += da * arow[u];
          }
          for (std::size_t u = 0; u < n; ++u) {
            dscore[u] = arow[u] * (drow[u] - mix);
          }
          double* zgv = &zg[v * f];
          for (std::size_t u = 0; u < n; ++u) {
            const double a = arow[u];
            const double ds = dscore[u];
            const double* zu = &zv[u * f];
            double* zgu = &zg[u * f];
            for (std::size_t c = 0; c < f; ++c) {
              zgu[c] += a * do_row[c] + ds * ziv[c];
              zgv[c] += ds * zu[c];
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace nlgnn
