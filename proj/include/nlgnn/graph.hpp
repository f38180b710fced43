#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nlgnn/tensor.hpp"

namespace nlgnn {

// Immutable node-attributed graph. The adjacency is undirected, stored
// symmetrically in CSR form, deduplicated and free of self-loops.
struct Graph {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;      // n+1, nondecreasing, last = 2|E|
  std::vector<std::uint32_t> targets;    // neighbor lists, sorted per node
  Tensor features;                       // n×d
  std::vector<int> labels;               // class ids in [0, num_classes)
  int num_classes = 0;
  std::string name;

  std::size_t num_edges() const { return targets.size() / 2; }
  std::size_t feature_dim() const { return features.cols(); }
  std::size_t degree(std::size_t v) const {
    return offsets[v + 1] - offsets[v];
  }
  std::span<const std::uint32_t> neighbors(std::size_t v) const {
    return {targets.data() + offsets[v], degree(v)};
  }
};

// Symmetrizes, deduplicates, strips self-loops and validates labels.
Graph build_graph(std::size_t n,
                  std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                  Tensor features, std::vector<int> labels, int num_classes);

// Text ingestion. Formats:
//   edges:    one "u v" pair per line, 0-based dense ids, '#' comments
//   features: one row of whitespace-separated reals per node
//   labels:   one integer class per line
// num_classes == 0 infers C = max(label)+1.
Graph load_graph(const std::filesystem::path& edges_path,
                 const std::filesystem::path& features_path,
                 const std::filesystem::path& labels_path,
                 int num_classes = 0);

// Dataset manifest: "key = value" lines with keys name, edges, features,
// labels, classes. Relative paths resolve against the manifest directory.
struct Manifest {
  std::string name;
  std::filesystem::path edges;
  std::filesystem::path features;
  std::filesystem::path labels;
  int classes = 0;
};
Manifest read_manifest(const std::filesystem::path& path);
Graph load_graph(const Manifest& manifest);

// Bijection between sorted positions and node indices.
struct Permutation {
  std::vector<std::size_t> order;    // position -> node
  std::vector<std::size_t> inverse;  // node -> position

  static Permutation identity(std::size_t n);
  static Permutation from_order(std::vector<std::size_t> order);
  std::size_t size() const { return order.size(); }
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Mean over non-isolated nodes of the fraction of neighbors sharing the
// node's label. Throws when every node is isolated.
double homophily(const Graph& g);

// Homophily of the re-connected graph in which the node at sorted position i
// is adjacent to positions i-s .. i+s (clipped at the ends, excluding i).
double reconnected_homophily(const Graph& g, const Permutation& perm,
                             std::size_t s);

// Per-class stratified split. val/test sizes round down; remainders go to
// train. Deterministic per seed.
Split split_nodes(const Graph& g, std::array<double, 3> ratios,
                  std::uint64_t seed);

struct SyntheticConfig {
  std::size_t n = 2000;
  int num_classes = 5;
  double target_homophily = 0.1;
  std::size_t feature_dim = 0;  // 0 -> num_classes
  double mean_degree = 10.0;
  double feature_noise = 1.0;  // stddev of Gaussian noise on the prototypes
  std::uint64_t seed = 0;
};

// Two-parameter block model with near-balanced classes. Within/between edge
// probabilities are tuned so the expected homophily matches target_homophily
// and the expected degree matches mean_degree. Features are one-hot class
// prototypes plus Gaussian noise.
Graph generate_synthetic(const SyntheticConfig& cfg);

// Writes the three dataset files plus a manifest into out_dir.
void write_graph_files(const Graph& g, const std::filesystem::path& out_dir,
                       const std::filesystem::path& manifest_path = {});

}  // namespace nlgnn
