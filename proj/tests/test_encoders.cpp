#include <doctest.h>

#include <cmath>

#include "nlgnn/encoders.hpp"
#include "nlgnn/error.hpp"
#include "nlgnn/model.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace nlgnn;

namespace {

EncoderParams make_params(EncoderKind kind, std::size_t d, std::size_t h,
                          std::size_t f, int heads, Rng& rng) {
  EncoderParams p;
  p.kind = kind;
  p.heads = heads;
  p.w1 = Tensor::zeros({d, h}, true);
  p.w2 = Tensor::zeros({h, f}, true);
  for (double& v : p.w1.values()) v = rng.normal() * 0.5;
  for (double& v : p.w2.values()) v = rng.normal() * 0.5;
  if (kind == EncoderKind::Gat) {
    p.gat_a1_src = Tensor::zeros({h}, true);
    p.gat_a1_dst = Tensor::zeros({h}, true);
    p.gat_a2_src = Tensor::zeros({f}, true);
    p.gat_a2_dst = Tensor::zeros({f}, true);
    for (auto* t : {&p.gat_a1_src, &p.gat_a1_dst, &p.gat_a2_src,
                    &p.gat_a2_dst}) {
      for (double& v : t->values()) v = rng.normal() * 0.5;
    }
  }
  return p;
}

// Applies a node relabeling to a graph: new id of node v is perm[v].
Graph permute_graph(const Graph& g, const std::vector<std::size_t>& perm) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t v = 0; v < g.n; ++v) {
    for (std::uint32_t u : g.neighbors(v)) {
      if (u > v) {
        edges.emplace_back(static_cast<std::uint32_t>(perm[v]),
                           static_cast<std::uint32_t>(perm[u]));
      }
    }
  }
  Tensor features = Tensor::zeros({g.n, g.feature_dim()});
  std::vector<int> labels(g.n);
  for (std::size_t v = 0; v < g.n; ++v) {
    labels[perm[v]] = g.labels[v];
    for (std::size_t j = 0; j < g.feature_dim(); ++j) {
      features.at(perm[v], j) = g.features.at(v, j);
    }
  }
  return build_graph(g.n, edges, std::move(features), std::move(labels),
                     g.num_classes);
}

}  // namespace

TEST_CASE("normalize_adjacency hand values") {
  SUBCASE("isolated node has self-weight 1") {
    Graph g = testutil::random_graph(1, 2, 1, 0.0, 1);
    AdjacencyNorm norm = normalize_adjacency(g);
    CHECK(norm.self_weight[0] == 1.0);
  }
  SUBCASE("single edge gives all four weights 1/2") {
    Graph g = build_graph(2, std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}},
                          Tensor::zeros({2, 1}), {0, 0}, 1);
    AdjacencyNorm norm = normalize_adjacency(g);
    CHECK(norm.self_weight[0] == 0.5);
    CHECK(norm.self_weight[1] == 0.5);
    CHECK(norm.edge_weight[0] == 0.5);
    CHECK(norm.edge_weight[1] == 0.5);
  }
  SUBCASE("star hub self-weight is 1/4") {
    Graph g = build_graph(
        4,
        std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}, {0, 2}, {0, 3}},
        Tensor::zeros({4, 1}), {0, 0, 0, 0}, 1);
    AdjacencyNorm norm = normalize_adjacency(g);
    CHECK(norm.self_weight[0] == 0.25);
  }
}

TEST_CASE("mlp_embed is a pure row map") {
  Rng prng(3);
  EncoderParams p = make_params(EncoderKind::Mlp, 4, 6, 3, 1, prng);
  Graph g = testutil::random_graph(8, 4, 2, 0.3, 17);
  // Force two identical feature rows.
  for (std::size_t j = 0; j < 4; ++j) g.features.at(5, j) = g.features.at(2, j);
  Rng rng(0);
  Tape tape(false);
  Tensor z = mlp_embed(tape, g.features, p, rng, false);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(z.at(5, j) == z.at(2, j));
  }

  // Perturbing another node's features leaves row v untouched.
  Tensor bumped = Tensor::from_values(
      g.features.shape(),
      {g.features.values().begin(), g.features.values().end()});
  bumped.at(0, 1) += 10.0;
  Tensor z2 = mlp_embed(tape, bumped, p, rng, false);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(z2.at(2, j) == z.at(2, j));
    CHECK(z2.at(0, j) != z.at(0, j));
  }

  // Zero weights collapse everything to zero.
  EncoderParams zero = p;
  zero.w2 = Tensor::zeros({6, 3}, true);
  Tensor z3 = mlp_embed(tape, g.features, zero, rng, false);
  for (double v : z3.values()) CHECK(v == 0.0);
}

TEST_CASE("gcn_embed matches a dense two-step evaluation") {
  Rng prng(5);
  const std::size_t d = 3, h = 4, f = 2;
  EncoderParams p = make_params(EncoderKind::Gcn, d, h, f, 1, prng);
  Graph g = build_graph(
      3, std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}, {1, 2}},
      Tensor::from_values({3, d}, {1, 0, 2, 0, 1, 1, 2, 2, 0}), {0, 1, 0}, 2);

  Rng rng(0);
  Tape tape(false);
  Tensor z = gcn_embed(tape, g, g.features, p, rng, false);

  // Dense reference: Â = D^-1/2 (A+I) D^-1/2 built elementwise.
  const AdjacencyNorm norm = normalize_adjacency(g);
  std::vector<double> ahat(9, 0.0);
  for (std::size_t v = 0; v < 3; ++v) {
    ahat[v * 3 + v] = norm.self_weight[v];
    for (std::size_t e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
      ahat[v * 3 + g.targets[e]] = norm.edge_weight[e];
    }
  }
  auto dense_mm = [](const std::vector<double>& a, std::size_t ar,
                     std::size_t ac, const std::vector<double>& b,
                     std::size_t bc) {
    std::vector<double> out(ar * bc, 0.0);
    for (std::size_t i = 0; i < ar; ++i) {
      for (std::size_t k = 0; k < ac; ++k) {
        for (std::size_t j = 0; j < bc; ++j) {
          out[i * bc + j] += a[i * ac + k] * b[k * bc + j];
        }
      }
    }
    return out;
  };
  std::vector<double> xw =
      dense_mm({g.features.values().begin(), g.features.values().end()}, 3, d,
               {p.w1.values().begin(), p.w1.values().end()}, h);
  std::vector<double> h1 = dense_mm(ahat, 3, 3, xw, h);
  for (double& v : h1) v = std::max(v, 0.0);
  std::vector<double> hw =
      dense_mm(h1, 3, h, {p.w2.values().begin(), p.w2.values().end()}, f);
  std::vector<double> ref = dense_mm(ahat, 3, 3, hw, f);
  for (std::size_t i = 0; i < ref.size(); ++i) {
    CHECK(z.values()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("gcn on an edgeless graph reduces to the row map") {
  Rng prng(7);
  EncoderParams p = make_params(EncoderKind::Gcn, 3, 4, 2, 1, prng);
  Graph g = testutil::random_graph(6, 3, 2, 0.0, 23);
  Rng rng(0);
  Tape tape(false);
  Tensor z = gcn_embed(tape, g, g.features, p, rng, false);
  EncoderParams mp = p;
  mp.kind = EncoderKind::Mlp;
  Tensor zm = mlp_embed(tape, g.features, mp, rng, false);
  // Self-loop weight is exactly 1 at degree 0, so the two paths agree.
  for (std::size_t i = 0; i < z.size(); ++i) {
    CHECK(z.values()[i] == doctest::Approx(zm.values()[i]).epsilon(1e-12));
  }
}

TEST_CASE("gat attention is a proper per-neighborhood softmax") {
  Rng prng(11);
  const std::size_t d = 3, width = 4;
  Graph g = testutil::random_graph(9, d, 2, 0.35, 31);
  auto csr = std::make_shared<const ClosedCsr>(closed_neighborhoods(g));

  Tensor w = Tensor::zeros({d, width}, true);
  for (double& v : w.values()) v = prng.normal();
  Tensor a_src = Tensor::zeros({width}, true);
  Tensor a_dst = Tensor::zeros({width}, true);
  for (double& v : a_src.values()) v = prng.normal();
  for (double& v : a_dst.values()) v = prng.normal();

  Tape tape(false);
  Tensor h = matmul(tape, g.features, w);
  GatLayerResult res = gat_layer(tape, csr, h, a_src, a_dst, 2, 0.2);

  SUBCASE("rows sum to one per head within 1e-12") {
    for (std::size_t v = 0; v < g.n; ++v) {
      for (std::size_t head = 0; head < 2; ++head) {
        double s = 0.0;
        for (std::size_t e = csr->offsets[v]; e < csr->offsets[v + 1]; ++e) {
          s += res.alpha.at(e, head);
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
    }
  }
  SUBCASE("coefficients match the per-edge softmax oracle") {
    for (std::size_t head = 0; head < 2; ++head) {
      const auto rows = oracle::gat_attention_rows(
          g, {h.values().begin(), h.values().end()}, width,
          {a_src.values().begin(), a_src.values().end()},
          {a_dst.values().begin(), a_dst.values().end()}, head * 2,
          head * 2 + 2, 0.2);
      for (std::size_t v = 0; v < g.n; ++v) {
        for (std::size_t e = csr->offsets[v]; e < csr->offsets[v + 1]; ++e) {
          CHECK(std::abs(res.alpha.at(e, head) - rows[v][csr->src[e]]) <
                1e-12);
        }
      }
    }
  }
}

TEST_CASE("gat degenerate neighborhoods") {
  Rng prng(13);
  SUBCASE("identical neighbor embeddings attend uniformly") {
    Graph g = build_graph(
        4,
        std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}, {0, 2}, {0, 3}},
        Tensor::from_values({4, 2}, {1, 2, 1, 2, 1, 2, 1, 2}), {0, 0, 0, 0},
        1);
    auto csr = std::make_shared<const ClosedCsr>(closed_neighborhoods(g));
    Tensor h = g.features;
    Tensor a_src = Tensor::zeros({2});
    Tensor a_dst = Tensor::zeros({2});
    for (double& v : a_src.values()) v = prng.normal();
    for (double& v : a_dst.values()) v = prng.normal();
    Tape tape(false);
    GatLayerResult res = gat_layer(tape, csr, h, a_src, a_dst, 1, 0.2);
    for (std::size_t e = csr->offsets[0]; e < csr->offsets[1]; ++e) {
      CHECK(res.alpha.at(e, 0) == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
  SUBCASE("no edges means every node attends to itself with weight 1") {
    Graph g = testutil::random_graph(5, 2, 1, 0.0, 3);
    auto csr = std::make_shared<const ClosedCsr>(closed_neighborhoods(g));
    Tensor a_src = Tensor::zeros({2});
    Tensor a_dst = Tensor::zeros({2});
    for (double& v : a_src.values()) v = prng.normal();
    Tape tape(false);
    GatLayerResult res = gat_layer(tape, csr, g.features, a_src, a_dst, 1, 0.2);
    CHECK(res.alpha.size() == g.n);
    for (std::size_t e = 0; e < g.n; ++e) {
      CHECK(res.alpha.values()[e] == 1.0);
    }
    for (std::size_t i = 0; i < g.features.size(); ++i) {
      CHECK(res.out.values()[i] == g.features.values()[i]);
    }
  }
}

TEST_CASE("all encoders are exactly permutation equivariant") {
  for (EncoderKind kind :
       {EncoderKind::Mlp, EncoderKind::Gcn, EncoderKind::Gat}) {
    CAPTURE(static_cast<int>(kind));
    Rng prng(19 + static_cast<int>(kind));
    EncoderParams p = make_params(kind, 5, 6, 4, 2, prng);
    for (int trial = 0; trial < 10; ++trial) {
      Graph g = testutil::random_graph(14, 5, 3, 0.25, 400 + trial);
      std::vector<std::size_t> perm(g.n);
      for (std::size_t i = 0; i < g.n; ++i) perm[i] = i;
      Rng shuffler(1000 + trial);
      shuffler.shuffle(perm);
      Graph gp = permute_graph(g, perm);

      Rng rng(0);
      Tape tape(false);
      Tensor z = encode(tape, g, g.features, p, rng, false);
      Tensor zp = encode(tape, gp, gp.features, p, rng, false);
      for (std::size_t v = 0; v < g.n; ++v) {
        for (std::size_t j = 0; j < 4; ++j) {
          // Bitwise equality: neighbor sums fold in value order.
          CHECK(zp.at(perm[v], j) == z.at(v, j));
        }
      }
    }
  }
}

TEST_CASE("encoder parameter gradients pass finite differences") {
  for (Variant v : {Variant::Mlp, Variant::Gcn, Variant::Gat}) {
    CAPTURE(to_string(v));
    const auto check = testutil::checked_variant_gradients(v, 77);
    CAPTURE(check.worst_param);
    CHECK(check.max_rel_err <= 1e-4);
  }
}
