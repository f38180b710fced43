#include "nlgnn/model.hpp"

#include <fstream>

#include <json.hpp>

#include "nlgnn/error.hpp"

namespace nlgnn {

Variant variant_from_string(const std::string& s) {
  if (s == "mlp") return Variant::Mlp;
  if (s == "gcn") return Variant::Gcn;
  if (s == "gat") return Variant::Gat;
  if (s == "nlmlp") return Variant::NlMlp;
  if (s == "nlgcn") return Variant::NlGcn;
  if (s == "nlgat") return Variant::NlGat;
  throw ConfigError("unknown model variant '" + s +
                    "' (expected mlp|gcn|gat|nlmlp|nlgcn|nlgat)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Mlp: return "mlp";
    case Variant::Gcn: return "gcn";
    case Variant::Gat: return "gat";
    case Variant::NlMlp: return "nlmlp";
    case Variant::NlGcn: return "nlgcn";
    case Variant::NlGat: return "nlgat";
  }
  return "?";
}

bool is_nonlocal(Variant v) {
  return v == Variant::NlMlp || v == Variant::NlGcn || v == Variant::NlGat;
}

EncoderKind base_encoder(Variant v) {
  switch (v) {
    case Variant::Mlp:
    case Variant::NlMlp: return EncoderKind::Mlp;
    case Variant::Gcn:
    case Variant::NlGcn: return EncoderKind::Gcn;
    case Variant::Gat:
    case Variant::NlGat: return EncoderKind::Gat;
  }
  throw ContractError("unknown variant");
}

Model::Model(const ModelConfig& cfg, std::size_t in_dim, int num_classes,
             Rng& rng)
    : cfg_(cfg), in_dim_(in_dim), num_classes_(num_classes) {
  if (in_dim == 0 || num_classes < 2) {
    throw ConfigError("model needs in_dim >= 1 and at least 2 classes");
  }
  if (cfg.hidden == 0) throw ConfigError("hidden width must be positive");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
    throw ConfigError("dropout must lie in [0,1)");
  }
  if (cfg.kernel_size % 2 == 0) {
    throw ConfigError("conv kernel size must be odd, got " +
                      std::to_string(cfg.kernel_size));
  }
  const std::size_t h = cfg.hidden;
  const std::size_t c = static_cast<std::size_t>(num_classes);
  // Plain variants classify straight out of layer 2; non-local variants emit
  // f = hidden embeddings for the sorted pipeline.
  embed_dim_ = is_nonlocal(cfg.variant) ? h : c;
  const std::size_t f = embed_dim_;
  const EncoderKind kind = base_encoder(cfg.variant);

  if (kind == EncoderKind::Gat) {
    if (cfg.gat_heads <= 0 ||
        h % static_cast<std::size_t>(cfg.gat_heads) != 0) {
      throw ConfigError("hidden width " + std::to_string(h) +
                        " is not divisible by " +
                        std::to_string(cfg.gat_heads) + " attention heads");
    }
  }

  encoder_.kind = kind;
  encoder_.heads = cfg.gat_heads;
  encoder_.dropout = cfg.dropout;
  encoder_.leaky_slope = cfg.leaky_slope;
  encoder_.w1 = params_.create_glorot("encoder.w1", {in_dim, h}, in_dim, h, rng);
  encoder_.w2 = params_.create_glorot("encoder.w2", {h, f}, h, f, rng);
  if (kind == EncoderKind::Gat) {
    const std::size_t hw = h / static_cast<std::size_t>(cfg.gat_heads);
    encoder_.gat_a1_src =
        params_.create_glorot("encoder.gat.a1_src", {h}, hw, 1, rng);
    encoder_.gat_a1_dst =
        params_.create_glorot("encoder.gat.a1_dst", {h}, hw, 1, rng);
    encoder_.gat_a2_src =
        params_.create_glorot("encoder.gat.a2_src", {f}, f, 1, rng);
    encoder_.gat_a2_dst =
        params_.create_glorot("encoder.gat.a2_dst", {f}, f, 1, rng);
  }

  if (is_nonlocal(cfg.variant)) {
    NonLocalParams nl;
    nl.kernel_size = cfg.kernel_size;
    const std::size_t k = cfg.kernel_size;
    nl.calibration = params_.create_gaussian(
        "nonlocal.calibration", {f}, 1.0 / std::sqrt(static_cast<double>(f)),
        rng);
    for (int layer = 1; layer <= 2; ++layer) {
      const std::string prefix = "nonlocal.conv" + std::to_string(layer);
      Conv1dParams conv;
      conv.kernel = params_.create_glorot(prefix + ".kernel", {k, f, f}, k * f,
                                          k * f, rng);
      conv.bias = params_.create_zeros(prefix + ".bias", {f});
      nl.convs.push_back(std::move(conv));
    }
    nl.classifier_w = params_.create_glorot("nonlocal.classifier.weight",
                                            {2 * f, c}, 2 * f, c, rng);
    nl.classifier_b = params_.create_zeros("nonlocal.classifier.bias", {c});
    nonlocal_ = std::move(nl);
  }
}

const NonLocalParams& Model::nonlocal() const {
  if (!nonlocal_) {
    throw ContractError("model variant " + to_string(cfg_.variant) +
                        " has no non-local head");
  }
  return *nonlocal_;
}

Tensor Model::forward(Tape& tape, const Graph& g, Rng& rng, bool training,
                      ForwardTrace* trace) const {
  if (g.feature_dim() != in_dim_) {
    throw ShapeError("graph features have dimension " +
                     std::to_string(g.feature_dim()) + ", model expects " +
                     std::to_string(in_dim_));
  }
  Tensor z = encode(tape, g, g.features, encoder_, rng, training);
  if (!nonlocal_) {
    if (trace) trace->embeddings = z;
    return z;
  }
  Tensor scores = attention_scores(tape, z, nonlocal_->calibration);
  Permutation perm = sort_permutation(scores);
  Tensor zhat = nonlocal_aggregate(tape, z, scores, perm, *nonlocal_);
  Tensor logits = predict(tape, z, zhat, *nonlocal_);
  if (trace) {
    trace->embeddings = z;
    trace->scores = scores;
    trace->perm = std::move(perm);
    trace->zhat = zhat;
  }
  return logits;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "nlgnn-model-v1";
  j["config"] = {
      {"variant", to_string(model.config().variant)},
      {"hidden", model.config().hidden},
      {"dropout", model.config().dropout},
      {"kernel_size", model.config().kernel_size},
      {"gat_heads", model.config().gat_heads},
      {"leaky_slope", model.config().leaky_slope},
      {"in_dim", model.in_dim()},
      {"num_classes", model.num_classes()},
  };
  nlohmann::json params = nlohmann::json::array();
  for (const auto& e : model.params().entries()) {
    nlohmann::json p;
    p["name"] = e.name;
    p["shape"] = e.tensor.shape();
    p["values"] = std::vector<double>(e.tensor.values().begin(),
                                      e.tensor.values().end());
    params.push_back(std::move(p));
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IngestError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "nlgnn-model-v1") {
    throw IngestError(path.string() + ": not a model parameter file");
  }
  const auto& c = j.at("config");
  ModelConfig cfg;
  cfg.variant = variant_from_string(c.at("variant").get<std::string>());
  cfg.hidden = c.at("hidden").get<std::size_t>();
  cfg.dropout = c.at("dropout").get<double>();
  cfg.kernel_size = c.at("kernel_size").get<std::size_t>();
  cfg.gat_heads = c.at("gat_heads").get<int>();
  cfg.leaky_slope = c.at("leaky_slope").get<double>();
  Rng rng(0);
  Model model(cfg, c.at("in_dim").get<std::size_t>(),
              c.at("num_classes").get<int>(), rng);
  for (const auto& p : j.at("params")) {
    const std::string name = p.at("name").get<std::string>();
    Tensor t = model.params().find(name);
    const auto shape = p.at("shape").get<Shape>();
    const auto values = p.at("values").get<std::vector<double>>();
    if (shape != t.shape() || values.size() != t.size()) {
      throw IngestError(path.string() + ": parameter '" + name +
                        "' has unexpected shape");
    }
    std::copy(values.begin(), values.end(), t.values().begin());
  }
  return model;
}

}  // namespace nlgnn
