#include "nlgnn/encoders.hpp"

#include <cmath>

#include "nlgnn/error.hpp"

namespace nlgnn {

AdjacencyNorm normalize_adjacency(const Graph& g) {
  AdjacencyNorm norm;
  norm.offsets = g.offsets;
  norm.targets = g.targets;
  norm.self_weight.resize(g.n);
  for (std::size_t v = 0; v < g.n; ++v) {
    norm.self_weight[v] = 1.0 / static_cast<double>(g.degree(v) + 1);
  }
  norm.edge_weight.resize(g.targets.size());
  for (std::size_t v = 0; v < g.n; ++v) {
    const std::size_t dv = g.degree(v) + 1;
    for (std::size_t e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
      const std::size_t du = g.degree(g.targets[e]) + 1;
      norm.edge_weight[e] = 1.0 / std::sqrt(static_cast<double>(dv * du));
    }
  }
  return norm;
}

ClosedCsr closed_neighborhoods(const Graph& g) {
  ClosedCsr csr;
  csr.offsets.assign(g.n + 1, 0);
  for (std::size_t v = 0; v < g.n; ++v) {
    csr.offsets[v + 1] = csr.offsets[v] + g.degree(v) + 1;
  }
  csr.src.resize(csr.offsets.back());
  for (std::size_t v = 0; v < g.n; ++v) {
    std::size_t w = csr.offsets[v];
    bool placed = false;
    // Keep each segment sorted by source id; the self edge slots in order.
    for (std::uint32_t u : g.neighbors(v)) {
      if (!placed && u > v) {
        csr.src[w++] = static_cast<std::uint32_t>(v);
        placed = true;
      }
      csr.src[w++] = u;
    }
    if (!placed) csr.src[w++] = static_cast<std::uint32_t>(v);
  }
  return csr;
}

Tensor spmm_norm(Tape& tape, const AdjacencyNormPtr& norm, const Tensor& x) {
  const std::size_t n = norm->n();
  if (x.rank() != 2 || x.rows() != n) {
    throw ShapeError("spmm_norm: input " + shape_str(x.shape()) +
                     " does not match node count " + std::to_string(n));
  }
  const std::size_t f = x.cols();
  Tensor out = Tensor::zeros({n, f}, x.requires_grad());
  {
    auto xv = x.values();
    auto ov = out.values();
    std::vector<double> scratch;
    for (std::size_t v = 0; v < n; ++v) {
      const std::size_t lo = norm->offsets[v], hi = norm->offsets[v + 1];
      for (std::size_t j = 0; j < f; ++j) {
        scratch.clear();
        scratch.push_back(norm->self_weight[v] * xv[v * f + j]);
        for (std::size_t e = lo; e < hi; ++e) {
          scratch.push_back(norm->edge_weight[e] *
                            xv[norm->targets[e] * f + j]);
        }
        ov[v * f + j] = hi == lo ? scratch[0] : detail::ordered_sum(scratch);
      }
    }
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor xc = x, oc = out;
    AdjacencyNormPtr np = norm;
    tape.record([xc, oc, np, n, f]() mutable {
      auto xg = xc.grad();
      auto og = oc.grad();
      // The normalized operator is symmetric, so dX = Â · dOut.
      for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t j = 0; j < f; ++j) {
          double acc = np->self_weight[v] * og[v * f + j];
          for (std::size_t e = np->offsets[v]; e < np->offsets[v + 1]; ++e) {
            acc += np->edge_weight[e] * og[np->targets[e] * f + j];
          }
          xg[v * f + j] += acc;
        }
      }
    });
  }
  return out;
}

Tensor edge_score_pairs(Tape& tape, const ClosedCsrPtr& csr, const Tensor& p,
                        const Tensor& q) {
  if (p.shape() != q.shape() || p.rank() != 2 || p.rows() != csr->n()) {
    throw ShapeError("edge_score_pairs: per-node score shapes disagree");
  }
  const std::size_t heads = p.cols();
  const std::size_t m = csr->src.size();
  Tensor out =
      Tensor::zeros({m, heads}, p.requires_grad() || q.requires_grad());
  {
    auto pv = p.values();
    auto qv = q.values();
    auto ov = out.values();
    for (std::size_t v = 0; v < csr->n(); ++v) {
      for (std::size_t e = csr->offsets[v]; e < csr->offsets[v + 1]; ++e) {
        const std::size_t u = csr->src[e];
        for (std::size_t j = 0; j < heads; ++j) {
          ov[e * heads + j] = pv[u * heads + j] + qv[v * heads + j];
        }
      }
    }
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor pc = p, qc = q, oc = out;
    ClosedCsrPtr cp = csr;
    tape.record([pc, qc, oc, cp, heads]() mutable {
      auto og = oc.grad();
      const bool gp = pc.requires_grad();
      const bool gq = qc.requires_grad();
      auto pg = gp ? pc.grad() : std::span<double>{};
      auto qg = gq ? qc.grad() : std::span<double>{};
      for (std::size_t v = 0; v < cp->n(); ++v) {
        for (std::size_t e = cp->offsets[v]; e < cp->offsets[v + 1]; ++e) {
          const std::size_t u = cp->src[e];
          for (std::size_t j = 0; j < heads; ++j) {
            const double d = og[e * heads + j];
            if (gp) pg[u * heads + j] += d;
            if (gq) qg[v * heads + j] += d;
          }
        }
      }
    });
  }
  return out;
}

Tensor segment_softmax(Tape& tape, const ClosedCsrPtr& csr,
                       const Tensor& scores) {
  if (scores.rank() != 2 || scores.rows() != csr->src.size()) {
    throw ShapeError("segment_softmax: scores " + shape_str(scores.shape()) +
                     " do not match edge count " +
                     std::to_string(csr->src.size()));
  }
  const std::size_t heads = scores.cols();
  Tensor out = Tensor::zeros(scores.shape(), scores.requires_grad());
  {
    auto sv = scores.values();
    auto ov = out.values();
    std::vector<double> scratch;
    for (std::size_t v = 0; v < csr->n(); ++v) {
      const std::size_t lo = csr->offsets[v], hi = csr->offsets[v + 1];
      for (std::size_t j = 0; j < heads; ++j) {
        double mx = sv[lo * heads + j];
        for (std::size_t e = lo + 1; e < hi; ++e) {
          mx = std::max(mx, sv[e * heads + j]);
        }
        scratch.clear();
        for (std::size_t e = lo; e < hi; ++e) {
          const double x = std::exp(sv[e * heads + j] - mx);
          ov[e * heads + j] = x;
          scratch.push_back(x);
        }
        const double denom = detail::ordered_sum(scratch);
        for (std::size_t e = lo; e < hi; ++e) ov[e * heads + j] /= denom;
      }
    }
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor sc = scores, oc = out;
    ClosedCsrPtr cp = csr;
    tape.record([sc, oc, cp, heads]() mutable {
      auto sg = sc.grad();
      auto og = oc.grad();
      auto ov = oc.values();
      for (std::size_t v = 0; v < cp->n(); ++v) {
        const std::size_t lo = cp->offsets[v], hi = cp->offsets[v + 1];
        for (std::size_t j = 0; j < heads; ++j) {
          double dot = 0.0;
          for (std::size_t e = lo; e < hi; ++e) {
            dot += og[e * heads + j] * ov[e * heads + j];
          }
          for (std::size_t e = lo; e < hi; ++e) {
            sg[e * heads + j] +=
                ov[e * heads + j] * (og[e * heads + j] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor segment_weighted_rows(Tape& tape, const ClosedCsrPtr& csr,
                             const Tensor& alpha, const Tensor& h, int heads) {
  if (h.rank() != 2 || h.rows() != csr->n()) {
    throw ShapeError("segment_weighted_rows: features do not match graph");
  }
  const std::size_t width = h.cols();
  if (heads <= 0 || width % static_cast<std::size_t>(heads) != 0) {
    throw ConfigError("segment_weighted_rows: width " + std::to_string(width) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  if (alpha.rank() != 2 || alpha.rows() != csr->src.size() ||
      alpha.cols() != static_cast<std::size_t>(heads)) {
    throw ShapeError("segment_weighted_rows: alpha " +
                     shape_str(alpha.shape()) + " does not match edges/heads");
  }
  const std::size_t nheads = static_cast<std::size_t>(heads);
  const std::size_t hw = width / nheads;
  Tensor out = Tensor::zeros({csr->n(), width},
                             alpha.requires_grad() || h.requires_grad());
  {
    auto av = alpha.values();
    auto hv = h.values();
    auto ov = out.values();
    std::vector<double> scratch;
    for (std::size_t v = 0; v < csr->n(); ++v) {
      const std::size_t lo = csr->offsets[v], hi = csr->offsets[v + 1];
      for (std::size_t j = 0; j < nheads; ++j) {
        for (std::size_t c = 0; c < hw; ++c) {
          const std::size_t col = j * hw + c;
          scratch.clear();
          for (std::size_t e = lo; e < hi; ++e) {
            scratch.push_back(av[e * nheads + j] *
                              hv[csr->src[e] * width + col]);
          }
          ov[v * width + col] = detail::ordered_sum(scratch);
        }
      }
    }
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor ac = alpha, hc = h, oc = out;
    ClosedCsrPtr cp = csr;
    tape.record([ac, hc, oc, cp, nheads, hw, width]() mutable {
      auto og = oc.grad();
      const bool ga = ac.requires_grad();
      const bool gh = hc.requires_grad();
      auto ag = ga ? ac.grad() : std::span<double>{};
      auto hg = gh ? hc.grad() : std::span<double>{};
      auto av = ac.values();
      auto hv = hc.values();
      for (std::size_t v = 0; v < cp->n(); ++v) {
        const std::size_t lo = cp->offsets[v], hi = cp->offsets[v + 1];
        for (std::size_t e = lo; e < hi; ++e) {
          const std::size_t u = cp->src[e];
          for (std::size_t j = 0; j < nheads; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < hw; ++c) {
              const std::size_t col = j * hw + c;
              const double d = og[v * width + col];
              acc += d * hv[u * width + col];
              if (gh) hg[u * width + col] += av[e * nheads + j] * d;
            }
            if (ga) ag[e * nheads + j] += acc;
          }
        }
      }
    });
  }
  return out;
}

GatLayerResult gat_layer(Tape& tape, const ClosedCsrPtr& csr, const Tensor& h,
                         const Tensor& a_src, const Tensor& a_dst, int heads,
                         double leaky_slope) {
  const std::size_t width = h.cols();
  if (a_src.rank() != 1 || a_src.dim(0) != width || a_dst.rank() != 1 ||
      a_dst.dim(0) != width) {
    throw ShapeError("gat_layer: attention vectors must have width " +
                     std::to_string(width));
  }
  if (heads <= 0 || width % static_cast<std::size_t>(heads) != 0) {
    throw ConfigError("gat_layer: width " + std::to_string(width) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t nheads = static_cast<std::size_t>(heads);
  const std::size_t hw = width / nheads;

  // Per-node, per-head halves of the additive attention logit.
  auto head_scores = [&](const Tensor& vecs) {
    const bool rg = h.requires_grad() || vecs.requires_grad();
    Tensor out = Tensor::zeros({h.rows(), nheads}, rg);
    auto hv = h.values();
    auto av = vecs.values();
    auto ov = out.values();
    for (std::size_t v = 0; v < h.rows(); ++v) {
      for (std::size_t j = 0; j < nheads; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < hw; ++c) {
          acc += hv[v * width + j * hw + c] * av[j * hw + c];
        }
        ov[v * nheads + j] = acc;
      }
    }
    if (rg && tape.recording()) {
      Tensor hc = h, vc = vecs, oc = out;
      tape.record([hc, vc, oc, nheads, hw, width]() mutable {
        auto og = oc.grad();
        const bool gh = hc.requires_grad();
        const bool gv = vc.requires_grad();
        auto hg = gh ? hc.grad() : std::span<double>{};
        auto vg = gv ? vc.grad() : std::span<double>{};
        auto hv = hc.values();
        auto av = vc.values();
        for (std::size_t v = 0; v < hc.rows(); ++v) {
          for (std::size_t j = 0; j < nheads; ++j) {
            const double d = og[v * nheads + j];
            if (d == 0.0) continue;
            for (std::size_t c = 0; c < hw; ++c) {
              if (gh) hg[v * width + j * hw + c] += d * av[j * hw + c];
              if (gv) vg[j * hw + c] += d * hv[v * width + j * hw + c];
            }
          }
        }
      });
    }
    return out;
  };

  Tensor p = head_scores(a_src);
  Tensor q = head_scores(a_dst);
  Tensor raw = edge_score_pairs(tape, csr, p, q);
  Tensor bent = leaky_relu(tape, raw, leaky_slope);
  Tensor alpha = segment_softmax(tape, csr, bent);
  Tensor out = segment_weighted_rows(tape, csr, alpha, h, heads);
  return {out, alpha};
}

Tensor mlp_embed(Tape& tape, const Tensor& features, const EncoderParams& p,
                 Rng& rng, bool training) {
  Tensor x = dropout(tape, features, p.dropout, rng, training);
  Tensor h = relu(tape, matmul(tape, x, p.w1));
  h = dropout(tape, h, p.dropout, rng, training);
  return matmul(tape, h, p.w2);
}

Tensor gcn_embed(Tape& tape, const Graph& g, const Tensor& features,
                 const EncoderParams& p, Rng& rng, bool training) {
  auto norm = std::make_shared<const AdjacencyNorm>(normalize_adjacency(g));
  Tensor x = dropout(tape, features, p.dropout, rng, training);
  Tensor h = relu(tape, spmm_norm(tape, norm, matmul(tape, x, p.w1)));
  h = dropout(tape, h, p.dropout, rng, training);
  return spmm_norm(tape, norm, matmul(tape, h, p.w2));
}

Tensor gat_embed(Tape& tape, const Graph& g, const Tensor& features,
                 const EncoderParams& p, Rng& rng, bool training) {
  auto csr = std::make_shared<const ClosedCsr>(closed_neighborhoods(g));
  Tensor x = dropout(tape, features, p.dropout, rng, training);
  Tensor h1 = matmul(tape, x, p.w1);
  Tensor z1 = relu(tape, gat_layer(tape, csr, h1, p.gat_a1_src, p.gat_a1_dst,
                                   p.heads, p.leaky_slope)
                             .out);
  z1 = dropout(tape, z1, p.dropout, rng, training);
  Tensor h2 = matmul(tape, z1, p.w2);
  return gat_layer(tape, csr, h2, p.gat_a2_src, p.gat_a2_dst, 1, p.leaky_slope)
      .out;
}

Tensor encode(Tape& tape, const Graph& g, const Tensor& features,
              const EncoderParams& p, Rng& rng, bool training) {
  switch (p.kind) {
    case EncoderKind::Mlp:
      return mlp_embed(tape, features, p, rng, training);
    case EncoderKind::Gcn:
      return gcn_embed(tape, g, features, p, rng, training);
    case EncoderKind::Gat:
      return gat_embed(tape, g, features, p, rng, training);
  }
  throw ContractError("unknown encoder kind");
}

}  // namespace nlgnn
