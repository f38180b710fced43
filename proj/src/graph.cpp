#include "nlgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "nlgnn/error.hpp"
#include "nlgnn/rng.hpp"

namespace nlgnn {

Graph build_graph(std::size_t n,
                  std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                  Tensor features, std::vector<int> labels, int num_classes) {
  if (labels.size() != n) {
    throw IngestError("label count " + std::to_string(labels.size()) +
                      " does not match node count " + std::to_string(n));
  }
  if (features.rank() != 2 || features.rows() != n) {
    throw IngestError("feature matrix must have one row per node");
  }
  if (num_classes <= 0) {
    for (int y : labels) num_classes = std::max(num_classes, y + 1);
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (labels[v] < 0 || labels[v] >= num_classes) {
      throw IngestError("label " + std::to_string(labels[v]) + " of node " +
                        std::to_string(v) + " outside [0," +
                        std::to_string(num_classes) + ")");
    }
  }

  // Symmetrize, drop self-loops, deduplicate.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dir;
  dir.reserve(edges.size() * 2);
  for (auto [u, v] : edges) {
    if (u >= n || v >= n) {
      throw IngestError("edge (" + std::to_string(u) + "," +
                        std::to_string(v) + ") references a missing node");
    }
    if (u == v) continue;
    dir.emplace_back(u, v);
    dir.emplace_back(v, u);
  }
  std::sort(dir.begin(), dir.end());
  dir.erase(std::unique(dir.begin(), dir.end()), dir.end());

  Graph g;
  g.n = n;
  g.num_classes = num_classes;
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.offsets.assign(n + 1, 0);
  for (auto [u, v] : dir) ++g.offsets[u + 1];
  for (std::size_t v = 0; v < n; ++v) g.offsets[v + 1] += g.offsets[v];
  g.targets.resize(dir.size());
  {
    std::vector<std::size_t> cursor(g.offsets.begin(), g.offsets.end() - 1);
    for (auto [u, v] : dir) g.targets[cursor[u]++] = v;
  }
  return g;
}

namespace {

bool is_comment_or_blank(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::ifstream open_or_throw(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw IngestError("cannot open " + p.string());
  return in;
}

}  // namespace

Graph load_graph(const std::filesystem::path& edges_path,
                 const std::filesystem::path& features_path,
                 const std::filesystem::path& labels_path, int num_classes) {
  // Features first: their row count defines n.
  std::vector<double> feat_values;
  std::size_t n = 0, d = 0;
  {
    auto in = open_or_throw(features_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (is_comment_or_blank(line)) continue;
      std::istringstream row(line);
      std::size_t count = 0;
      double x;
      while (row >> x) {
        feat_values.push_back(x);
        ++count;
      }
      if (!row.eof()) {
        throw IngestError(features_path.string() + ":" +
                          std::to_string(line_no) + ": malformed feature row");
      }
      if (d == 0) {
        d = count;
      } else if (count != d) {
        throw IngestError(features_path.string() + ":" +
                          std::to_string(line_no) + ": expected " +
                          std::to_string(d) + " features, got " +
                          std::to_string(count));
      }
      ++n;
    }
    if (n == 0) throw IngestError(features_path.string() + ": no feature rows");
  }

  std::vector<int> labels;
  {
    auto in = open_or_throw(labels_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (is_comment_or_blank(line)) continue;
      std::istringstream row(line);
      int y;
      if (!(row >> y)) {
        throw IngestError(labels_path.string() + ":" +
                          std::to_string(line_no) + ": malformed label");
      }
      labels.push_back(y);
    }
    if (labels.size() != n) {
      throw IngestError("row-count mismatch: " + std::to_string(n) +
                        " feature rows vs " + std::to_string(labels.size()) +
                        " labels");
    }
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  {
    auto in = open_or_throw(edges_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (is_comment_or_blank(line)) continue;
      std::istringstream row(line);
      long long u, v;
      if (!(row >> u >> v)) {
        throw IngestError(edges_path.string() + ":" + std::to_string(line_no) +
                          ": malformed edge line");
      }
      if (u < 0 || v < 0 || u >= static_cast<long long>(n) ||
          v >= static_cast<long long>(n)) {
        throw IngestError(edges_path.string() + ":" + std::to_string(line_no) +
                          ": dangling node id (graph has " + std::to_string(n) +
                          " nodes)");
      }
      edges.emplace_back(static_cast<std::uint32_t>(u),
                         static_cast<std::uint32_t>(v));
    }
  }

  Tensor features = Tensor::from_values({n, d}, std::move(feat_values));
  return build_graph(n, edges, std::move(features), std::move(labels),
                     num_classes);
}

Manifest read_manifest(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  Manifest m;
  const auto base = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_comment_or_blank(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IngestError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto resolve = [&](const std::string& v) {
      std::filesystem::path p(v);
      return p.is_absolute() ? p : base / p;
    };
    if (key == "name") {
      m.name = value;
    } else if (key == "edges") {
      m.edges = resolve(value);
    } else if (key == "features") {
      m.features = resolve(value);
    } else if (key == "labels") {
      m.labels = resolve(value);
    } else if (key == "classes") {
      m.classes = std::stoi(value);
    } else {
      throw IngestError(path.string() + ":" + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    }
  }
  if (m.edges.empty() || m.features.empty() || m.labels.empty()) {
    throw IngestError(path.string() + ": manifest must name edges, features "
                      "and labels files");
  }
  return m;
}

Graph load_graph(const Manifest& manifest) {
  Graph g = load_graph(manifest.edges, manifest.features, manifest.labels,
                       manifest.classes);
  g.name = manifest.name;
  return g;
}

Permutation Permutation::identity(std::size_t n) {
  Permutation p;
  p.order.resize(n);
  p.inverse.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.order[i] = p.inverse[i] = i;
  return p;
}

Permutation Permutation::from_order(std::vector<std::size_t> order) {
  Permutation p;
  p.inverse.assign(order.size(), order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] >= order.size() || p.inverse[order[i]] != order.size()) {
      throw ContractError("order is not a bijection on [0," +
                          std::to_string(order.size()) + ")");
    }
    p.inverse[order[i]] = i;
  }
  p.order = std::move(order);
  return p;
}

double homophily(const Graph& g) {
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t v = 0; v < g.n; ++v) {
    const auto nbrs = g.neighbors(v);
    if (nbrs.empty()) continue;
    std::size_t same = 0;
    for (std::uint32_t u : nbrs) {
      if (g.labels[u] == g.labels[v]) ++same;
    }
    total += static_cast<double>(same) / static_cast<double>(nbrs.size());
    ++counted;
  }
  if (counted == 0) {
    throw ValueError("homophily undefined: every node is isolated");
  }
  return total / static_cast<double>(counted);
}

double reconnected_homophily(const Graph& g, const Permutation& perm,
                             std::size_t s) {
  if (s == 0) throw ConfigError("receptive half-width must be positive");
  if (perm.order.size() != g.n) {
    throw ContractError("permutation length " +
                        std::to_string(perm.order.size()) +
                        " does not match node count " + std::to_string(g.n));
  }
  if (g.n < 2) {
    throw ValueError("reconnected homophily undefined for a single node");
  }
  double total = 0.0;
  const std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(g.n);
  const std::ptrdiff_t ss = static_cast<std::ptrdiff_t>(s);
  for (std::ptrdiff_t i = 0; i < nn; ++i) {
    const int label = g.labels[perm.order[static_cast<std::size_t>(i)]];
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - ss);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(nn - 1, i + ss);
    std::size_t same = 0, count = 0;
    for (std::ptrdiff_t j = lo; j <= hi; ++j) {
      if (j == i) continue;
      ++count;
      if (g.labels[perm.order[static_cast<std::size_t>(j)]] == label) ++same;
    }
    total += static_cast<double>(same) / static_cast<double>(count);
  }
  return total / static_cast<double>(g.n);
}

Split split_nodes(const Graph& g, std::array<double, 3> ratios,
                  std::uint64_t seed) {
  for (double r : ratios) {
    if (r < 0.0 || r > 1.0) {
      throw ConfigError("split ratios must lie in [0,1]");
    }
  }
  if (ratios[0] + ratios[1] + ratios[2] > 1.0 + 1e-12) {
    throw ConfigError("split ratios must sum to at most 1");
  }
  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(g.num_classes));
  for (std::size_t v = 0; v < g.n; ++v) {
    by_class[static_cast<std::size_t>(g.labels[v])].push_back(v);
  }
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() < 3) {
      throw ValueError("class " + std::to_string(c) + " has only " +
                       std::to_string(by_class[c].size()) +
                       " nodes; need at least 3 to split");
    }
  }
  Rng rng(seed);
  Split split;
  for (auto& nodes : by_class) {
    rng.shuffle(nodes);
    const std::size_t cnt = nodes.size();
    const std::size_t n_val =
        static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(cnt)));
    const std::size_t n_test =
        static_cast<std::size_t>(std::floor(ratios[2] * static_cast<double>(cnt)));
    const std::size_t n_train = cnt - n_val - n_test;  // remainder to train
    for (std::size_t i = 0; i < cnt; ++i) {
      if (i < n_train) {
        split.train.push_back(nodes[i]);
      } else if (i < n_train + n_val) {
        split.val.push_back(nodes[i]);
      } else {
        split.test.push_back(nodes[i]);
      }
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Graph generate_synthetic(const SyntheticConfig& cfg) {
  const std::size_t n = cfg.n;
  const int C = cfg.num_classes;
  if (C < 2) throw ConfigError("synthetic graphs need at least 2 classes");
  if (n < 10 * static_cast<std::size_t>(C)) {
    throw ConfigError("synthetic graphs need n >= 10*C, got n=" +
                      std::to_string(n));
  }
  if (cfg.target_homophily < 0.0 || cfg.target_homophily > 1.0) {
    throw ConfigError("target homophily must lie in [0,1]");
  }
  const std::size_t d =
      cfg.feature_dim == 0 ? static_cast<std::size_t>(C) : cfg.feature_dim;
  if (d < static_cast<std::size_t>(C)) {
    throw ConfigError("feature dimension must be at least the class count");
  }
  if (cfg.feature_noise < 0.0) throw ConfigError("feature noise must be >= 0");
  if (cfg.mean_degree <= 0.0) throw ConfigError("mean degree must be positive");

  Rng rng(cfg.seed);

  // Near-balanced labels in random placement.
  std::vector<int> labels(n);
  for (std::size_t v = 0; v < n; ++v) labels[v] = static_cast<int>(v % C);
  rng.shuffle(labels);
  std::vector<std::vector<std::uint32_t>> members(static_cast<std::size_t>(C));
  for (std::size_t v = 0; v < n; ++v) {
    members[static_cast<std::size_t>(labels[v])].push_back(
        static_cast<std::uint32_t>(v));
  }

  // Expected same-class degree target_h*mean_degree and cross-class degree
  // (1-target_h)*mean_degree fix the two block probabilities.
  const double nd = static_cast<double>(n);
  const double within_pairs_per_node = nd / C - 1.0;
  const double cross_pairs_per_node = nd * (C - 1.0) / C;
  const double p_in =
      cfg.target_homophily * cfg.mean_degree / within_pairs_per_node;
  const double p_out =
      (1.0 - cfg.target_homophily) * cfg.mean_degree / cross_pairs_per_node;
  if (p_in > 1.0 || p_out > 1.0) {
    throw ValueError("infeasible homophily/degree combination: edge "
                     "probabilities exceed 1");
  }

  // Geometric skipping over each block of pairs; expected work O(|E|).
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  auto sample_block = [&](double p, auto pair_count, auto emit) {
    if (p <= 0.0) return;
    const double log1mp = std::log1p(-p);
    double idx = -1.0;
    const double total = static_cast<double>(pair_count);
    while (true) {
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      idx += 1.0 + std::floor(std::log(u) / log1mp);
      if (idx >= total) break;
      emit(static_cast<std::size_t>(idx));
    }
  };

  for (int c = 0; c < C; ++c) {
    const auto& m = members[static_cast<std::size_t>(c)];
    const std::size_t k = m.size();
    if (k < 2) continue;
    const std::size_t pairs = k * (k - 1) / 2;
    sample_block(p_in, pairs, [&](std::size_t t) {
      // Decode the t-th pair (i,j), i > j, of the lower triangle.
      std::size_t i = static_cast<std::size_t>(
          (1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(t))) / 2.0);
      while (i * (i - 1) / 2 > t) --i;
      while ((i + 1) * i / 2 <= t) ++i;
      const std::size_t j = t - i * (i - 1) / 2;
      edges.emplace_back(m[i], m[j]);
    });
  }
  for (int c1 = 0; c1 < C; ++c1) {
    for (int c2 = c1 + 1; c2 < C; ++c2) {
      const auto& a = members[static_cast<std::size_t>(c1)];
      const auto& b = members[static_cast<std::size_t>(c2)];
      sample_block(p_out, a.size() * b.size(), [&](std::size_t t) {
        edges.emplace_back(a[t / b.size()], b[t % b.size()]);
      });
    }
  }

  // One-hot class prototypes with additive Gaussian noise.
  Tensor features = Tensor::zeros({n, d});
  auto fv = features.values();
  for (std::size_t v = 0; v < n; ++v) {
    fv[v * d + static_cast<std::size_t>(labels[v])] = 1.0;
    if (cfg.feature_noise > 0.0) {
      for (std::size_t j = 0; j < d; ++j) {
        fv[v * d + j] += cfg.feature_noise * rng.normal();
      }
    }
  }

  Graph g = build_graph(n, edges, std::move(features), std::move(labels), C);
  g.name = "synthetic";
  return g;
}

void write_graph_files(const Graph& g, const std::filesystem::path& out_dir,
                       const std::filesystem::path& manifest_path) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "edges.txt");
    out << "# u v\n";
    for (std::size_t v = 0; v < g.n; ++v) {
      for (std::uint32_t u : g.neighbors(v)) {
        if (u > v) out << v << " " << u << "\n";
      }
    }
  }
  {
    std::ofstream out(out_dir / "features.txt");
    char buf[64];
    const std::size_t d = g.feature_dim();
    auto fv = g.features.values();
    for (std::size_t v = 0; v < g.n; ++v) {
      for (std::size_t j = 0; j < d; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", fv[v * d + j]);
        out << (j ? " " : "") << buf;
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(out_dir / "labels.txt");
    for (int y : g.labels) out << y << "\n";
  }
  {
    const auto mpath =
        manifest_path.empty() ? out_dir / "manifest.txt" : manifest_path;
    std::ofstream out(mpath);
    out << "name = " << (g.name.empty() ? "dataset" : g.name) << "\n"
        << "edges = edges.txt\n"
        << "features = features.txt\n"
        << "labels = labels.txt\n"
        << "classes = " << g.num_classes << "\n";
  }
}

}  // namespace nlgnn
