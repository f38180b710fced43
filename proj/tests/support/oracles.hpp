#pragma once

// Brute-force reference implementations used to cross-check the engine.
// These stay deliberately independent of the library's computation paths:
// plain loops, no sorting tricks, no shared helpers.

#include <cmath>
#include <cstddef>
#include <vector>

#include "nlgnn/graph.hpp"
#include "nlgnn/rng.hpp"
#include "nlgnn/tensor.hpp"

namespace oracle {

// Direct sliding-window convolution with zero padding.
inline std::vector<double> conv1d(const std::vector<double>& seq,
                                  std::size_t n, std::size_t f,
                                  const std::vector<double>& kernel,
                                  std::size_t k, std::size_t g,
                                  const std::vector<double>& bias) {
  std::vector<double> out(n * g, 0.0);
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(k / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t go = 0; go < g; ++go) {
      double acc = bias[go];
      for (std::size_t t = 0; t < k; ++t) {
        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i + t) - r;
        if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
        for (std::size_t fi = 0; fi < f; ++fi) {
          acc += seq[static_cast<std::size_t>(j) * f + fi] *
                 kernel[(t * f + fi) * g + go];
        }
      }
      out[i * g + go] = acc;
    }
  }
  return out;
}

// Per-node fraction of same-label neighbors, averaged over non-isolated
// nodes.
inline double homophily(const nlgnn::Graph& g) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t v = 0; v < g.n; ++v) {
    std::size_t deg = 0, same = 0;
    for (std::size_t u = 0; u < g.n; ++u) {
      bool adjacent = false;
      for (auto t : g.neighbors(v)) {
        if (t == u) adjacent = true;
      }
      if (!adjacent) continue;
      ++deg;
      if (g.labels[u] == g.labels[v]) ++same;
    }
    if (deg == 0) continue;
    total += static_cast<double>(same) / static_cast<double>(deg);
    ++counted;
  }
  return total / static_cast<double>(counted);
}

// Dense softmax attention, one scalar at a time.
inline std::vector<double> full_attention(const std::vector<double>& z,
                                          std::size_t n, std::size_t f) {
  std::vector<double> out(n * f, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<double> score(n);
    double mx = -1e300;
    for (std::size_t u = 0; u < n; ++u) {
      double dot = 0.0;
      for (std::size_t c = 0; c < f; ++c) dot += z[v * f + c] * z[u * f + c];
      score[u] = dot;
      mx = std::max(mx, dot);
    }
    double denom = 0.0;
    for (std::size_t u = 0; u < n; ++u) {
      score[u] = std::exp(score[u] - mx);
      denom += score[u];
    }
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t c = 0; c < f; ++c) {
        out[v * f + c] += score[u] / denom * z[u * f + c];
      }
    }
  }
  return out;
}

// GAT attention rows by direct per-edge softmax enumeration over the closed
// neighborhood. h is the transformed feature matrix (n×width), head-blocked.
// Returns attn[v][u] for one head given its column block [lo, hi).
inline std::vector<std::vector<double>> gat_attention_rows(
    const nlgnn::Graph& g, const std::vector<double>& h, std::size_t width,
    const std::vector<double>& a_src, const std::vector<double>& a_dst,
    std::size_t lo, std::size_t hi, double slope) {
  std::vector<std::vector<double>> rows(g.n, std::vector<double>(g.n, 0.0));
  for (std::size_t v = 0; v < g.n; ++v) {
    std::vector<std::size_t> nbrs;
    for (auto u : g.neighbors(v)) nbrs.push_back(u);
    nbrs.push_back(v);
    std::vector<double> e(nbrs.size());
    double mx = -1e300;
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      double s = 0.0;
      for (std::size_t c = lo; c < hi; ++c) {
        s += a_src[c] * h[nbrs[i] * width + c] + a_dst[c] * h[v * width + c];
      }
      e[i] = s > 0.0 ? s : slope * s;
      mx = std::max(mx, e[i]);
    }
    double denom = 0.0;
    for (double& x : e) {
      x = std::exp(x - mx);
      denom += x;
    }
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      rows[v][nbrs[i]] = e[i] / denom;
    }
  }
  return rows;
}

// Mean negative log likelihood straight from the definition.
inline double cross_entropy(const std::vector<double>& logits, std::size_t n,
                            std::size_t c, const std::vector<int>& labels,
                            const std::vector<std::size_t>& mask) {
  double total = 0.0;
  for (std::size_t v : mask) {
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(logits[v * c + j]);
    const double p =
        std::exp(logits[v * c + static_cast<std::size_t>(labels[v])]) / denom;
    total += -std::log(p);
  }
  return total / static_cast<double>(mask.size());
}

}  // namespace oracle
