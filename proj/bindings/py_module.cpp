// Python bindings for the main engine operations: graph construction and
// ingestion, homophily metrics, synthetic generation, splits, training,
// categorization and the scaling benchmark.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nlgnn/bench.hpp"
#include "nlgnn/error.hpp"
#include "nlgnn/graph.hpp"
#include "nlgnn/report.hpp"
#include "nlgnn/training.hpp"

namespace py = pybind11;
using namespace nlgnn;

namespace {

TrainConfig config_from_kwargs(const std::string& variant, std::size_t hidden,
                               double dropout, double weight_decay, double lr,
                               std::size_t kernel_size, std::size_t max_epochs,
                               std::uint64_t seed, int gat_heads) {
  TrainConfig cfg;
  cfg.variant = variant_from_string(variant);
  cfg.hidden = hidden;
  cfg.dropout = dropout;
  cfg.weight_decay = weight_decay;
  cfg.lr = lr;
  cfg.kernel_size = kernel_size;
  cfg.max_epochs = max_epochs;
  cfg.seed = seed;
  cfg.gat_heads = gat_heads;
  return cfg;
}

py::dict run_result_dict(const RunResult& r) {
  py::dict d;
  d["test_accuracy"] = r.test_accuracy;
  d["best_val_accuracy"] = r.best_val_accuracy;
  d["best_epoch"] = r.best_epoch;
  d["loss_curve"] = r.loss_curve;
  d["val_curve"] = r.val_curve;
  d["wall_ms_per_epoch"] = r.wall_ms_per_epoch;
  return d;
}

Graph graph_from_arrays(py::array_t<std::int64_t, py::array::c_style> edges,
                        py::array_t<double, py::array::c_style> features,
                        std::vector<int> labels, int num_classes) {
  if (edges.ndim() != 2 || edges.shape(1) != 2) {
    throw ShapeError("edges must be an m×2 integer array");
  }
  if (features.ndim() != 2) throw ShapeError("features must be an n×d array");
  const std::size_t n = static_cast<std::size_t>(features.shape(0));
  const std::size_t d = static_cast<std::size_t>(features.shape(1));
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_list;
  auto ev = edges.unchecked<2>();
  for (py::ssize_t i = 0; i < ev.shape(0); ++i) {
    const std::int64_t u = ev(i, 0), v = ev(i, 1);
    if (u < 0 || v < 0 || u >= static_cast<std::int64_t>(n) ||
        v >= static_cast<std::int64_t>(n)) {
      throw IngestError("edge " + std::to_string(i) +
                        " references a missing node");
    }
    edge_list.emplace_back(static_cast<std::uint32_t>(u),
                           static_cast<std::uint32_t>(v));
  }
  std::vector<double> values(features.data(), features.data() + n * d);
  return build_graph(n, edge_list, Tensor::from_values({n, d}, std::move(values)),
                     std::move(labels), num_classes);
}

py::array_t<double> features_array(const Graph& g) {
  const std::size_t n = g.n, d = g.feature_dim();
  py::array_t<double> out({n, d});
  std::copy_n(g.features.values().data(), n * d, out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "non-local graph neural network engine";

  py::register_exception<Error>(m, "EngineError");

  py::class_<Graph>(m, "Graph")
      .def_readonly("n", &Graph::n)
      .def_readonly("num_classes", &Graph::num_classes)
      .def_readonly("labels", &Graph::labels)
      .def_readonly("name", &Graph::name)
      .def_property_readonly("num_edges", &Graph::num_edges)
      .def_property_readonly("feature_dim", &Graph::feature_dim)
      .def_property_readonly("features", &features_array)
      .def("degree", &Graph::degree, py::arg("v"))
      .def("neighbors",
           [](const Graph& g, std::size_t v) {
             auto nb = g.neighbors(v);
             return std::vector<std::uint32_t>(nb.begin(), nb.end());
           },
           py::arg("v"));

  py::class_<Split>(m, "Split")
      .def_readonly("train", &Split::train)
      .def_readonly("val", &Split::val)
      .def_readonly("test", &Split::test);

  m.def("graph_from_arrays", &graph_from_arrays, py::arg("edges"),
        py::arg("features"), py::arg("labels"), py::arg("num_classes") = 0,
        "Build a graph from an m×2 edge array, n×d features and labels.");

  m.def(
      "load_graph",
      [](const std::filesystem::path& manifest) {
        return load_graph(read_manifest(manifest));
      },
      py::arg("manifest"), "Load a dataset from a manifest file.");

  m.def(
      "generate_synthetic",
      [](std::size_t n, int classes, double homophily, std::size_t dim,
         double mean_degree, double feature_noise, std::uint64_t seed) {
        SyntheticConfig cfg;
        cfg.n = n;
        cfg.num_classes = classes;
        cfg.target_homophily = homophily;
        cfg.feature_dim = dim;
        cfg.mean_degree = mean_degree;
        cfg.feature_noise = feature_noise;
        cfg.seed = seed;
        return generate_synthetic(cfg);
      },
      py::arg("n") = 2000, py::arg("classes") = 5, py::arg("homophily") = 0.1,
      py::arg("dim") = 0, py::arg("mean_degree") = 10.0,
      py::arg("feature_noise") = 1.0, py::arg("seed") = 0,
      "Block-model synthetic graph with a target homophily.");

  m.def("homophily", &homophily, py::arg("graph"));

  m.def(
      "reconnected_homophily",
      [](const Graph& g, const std::vector<std::size_t>& order, std::size_t s) {
        return reconnected_homophily(g, Permutation::from_order(order), s);
      },
      py::arg("graph"), py::arg("order"), py::arg("s"),
      "Homophily of the window-reconnected graph for a sorted order.");

  m.def(
      "split_nodes",
      [](const Graph& g, std::array<double, 3> ratios, std::uint64_t seed) {
        return split_nodes(g, ratios, seed);
      },
      py::arg("graph"), py::arg("ratios") = std::array<double, 3>{0.6, 0.2, 0.2},
      py::arg("seed") = 0);

  m.def(
      "train",
      [](const Graph& g, const Split& split, const std::string& variant,
         std::size_t hidden, double dropout, double weight_decay, double lr,
         std::size_t kernel_size, std::size_t max_epochs, std::uint64_t seed,
         int gat_heads) {
        TrainConfig cfg =
            config_from_kwargs(variant, hidden, dropout, weight_decay, lr,
                               kernel_size, max_epochs, seed, gat_heads);
        TrainOutput out = train(g, split, cfg);
        return run_result_dict(out.result);
      },
      py::arg("graph"), py::arg("split"), py::arg("variant") = "nlmlp",
      py::arg("hidden") = 16, py::arg("dropout") = 0.0,
      py::arg("weight_decay") = 0.0, py::arg("lr") = 0.01,
      py::arg("kernel_size") = 3, py::arg("max_epochs") = 500,
      py::arg("seed") = 0, py::arg("gat_heads") = 8,
      "Full-batch training; returns the run summary.");

  m.def(
      "evaluate_mean",
      [](const Graph& g, const std::string& variant, std::size_t hidden,
         double dropout, double weight_decay, double lr,
         std::size_t kernel_size, std::size_t max_epochs, int gat_heads,
         std::vector<std::uint64_t> seeds) {
        TrainConfig cfg = config_from_kwargs(variant, hidden, dropout,
                                             weight_decay, lr, kernel_size,
                                             max_epochs, 0, gat_heads);
        EvalStats stats = evaluate_mean(g, cfg, seeds);
        py::dict d;
        d["mean"] = stats.mean;
        d["std"] = stats.stddev;
        py::list runs;
        for (const auto& r : stats.runs) runs.append(run_result_dict(r));
        d["runs"] = runs;
        return d;
      },
      py::arg("graph"), py::arg("variant") = "nlmlp", py::arg("hidden") = 16,
      py::arg("dropout") = 0.0, py::arg("weight_decay") = 0.0,
      py::arg("lr") = 0.01, py::arg("kernel_size") = 3,
      py::arg("max_epochs") = 500, py::arg("gat_heads") = 8,
      py::arg("seeds") = std::vector<std::uint64_t>{0, 1, 2},
      "Mean/std of test accuracy over per-seed random splits.");

  m.def(
      "categorize",
      [](const Graph& g, std::size_t hidden, double dropout,
         double weight_decay, double lr, std::size_t max_epochs,
         std::vector<std::uint64_t> seeds) {
        TrainConfig base;
        base.hidden = hidden;
        base.dropout = dropout;
        base.weight_decay = weight_decay;
        base.lr = lr;
        base.max_epochs = max_epochs;
        CategorizeResult res = categorize_dataset(g, base, seeds);
        py::dict d;
        d["category"] = res.category;
        py::list table;
        for (const auto& row : res.table) {
          py::dict r;
          r["model"] = to_string(row.variant);
          r["mean"] = row.mean;
          r["std"] = row.stddev;
          table.append(r);
        }
        d["table"] = table;
        return d;
      },
      py::arg("graph"), py::arg("hidden") = 48, py::arg("dropout") = 0.5,
      py::arg("weight_decay") = 5e-4, py::arg("lr") = 0.01,
      py::arg("max_epochs") = 500,
      py::arg("seeds") = std::vector<std::uint64_t>{0, 1, 2},
      "MLP vs GCN/GAT comparison; category 1 means local aggregation hurts.");

  m.def(
      "scaling_experiment",
      [](std::vector<std::size_t> sizes, std::size_t f, std::size_t reps,
         std::uint64_t seed) {
        ScalingReport rep = scaling_experiment(sizes, f, reps, seed);
        py::dict d;
        d["sorted_slope"] = rep.sorted_slope;
        d["attention_slope"] = rep.attention_slope;
        py::list rows;
        for (const auto& row : rep.rows) {
          py::dict r;
          r["n"] = row.n;
          r["sorted_ms"] = row.sorted_ms;
          r["attention_ms"] = row.attention_ms;
          r["attention_skipped"] = row.attention_skipped;
          rows.append(r);
        }
        d["rows"] = rows;
        return d;
      },
      py::arg("sizes") = std::vector<std::size_t>{256, 512, 1024},
      py::arg("f") = 32, py::arg("reps") = 3, py::arg("seed") = 0,
      "Sorted path vs dense attention forward+backward timing.");

  m.attr("__version__") = "0.1.0";
}
