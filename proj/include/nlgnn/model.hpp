#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "nlgnn/encoders.hpp"
#include "nlgnn/nonlocal.hpp"
#include "nlgnn/optim.hpp"

namespace nlgnn {

enum class Variant { Mlp, Gcn, Gat, NlMlp, NlGcn, NlGat };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);
bool is_nonlocal(Variant v);
EncoderKind base_encoder(Variant v);

struct ModelConfig {
  Variant variant = Variant::NlMlp;
  std::size_t hidden = 16;
  double dropout = 0.0;
  std::size_t kernel_size = 3;
  int gat_heads = 8;
  double leaky_slope = 0.2;
};

// Extra tensors from a forward pass, for analysis and export.
struct ForwardTrace {
  Tensor embeddings;  // z, n×f
  Tensor scores;      // n (non-local variants only)
  Permutation perm;
  Tensor zhat;
};

// A model variant with its learnable parameters. Plain variants emit logits
// straight from the two-layer encoder; non-local variants produce f-dim
// embeddings, run the score/sort/conv pipeline and classify [ẑ | z].
class Model {
 public:
  Model(const ModelConfig& cfg, std::size_t in_dim, int num_classes, Rng& rng);

  Tensor forward(Tape& tape, const Graph& g, Rng& rng, bool training,
                 ForwardTrace* trace = nullptr) const;

  const ModelConfig& config() const { return cfg_; }
  std::size_t in_dim() const { return in_dim_; }
  int num_classes() const { return num_classes_; }
  std::size_t embedding_dim() const { return embed_dim_; }

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const EncoderParams& encoder() const { return encoder_; }
  const NonLocalParams& nonlocal() const;

 private:
  ModelConfig cfg_;
  std::size_t in_dim_ = 0;
  int num_classes_ = 0;
  std::size_t embed_dim_ = 0;
  ParamStore params_;
  EncoderParams encoder_;
  std::optional<NonLocalParams> nonlocal_;
};

// JSON round trip of config + named parameter tensors.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace nlgnn
