#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nlgnn/rng.hpp"
#include "nlgnn/tensor.hpp"

namespace nlgnn {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // applied as an L2 gradient term
};

// Named learnable tensors plus their Adam moments. Creation order is the
// update order, so runs are reproducible.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    std::vector<double> m;
    std::vector<double> v;
  };

  Tensor create_zeros(const std::string& name, Shape shape);
  // Uniform Glorot with the given fan pair.
  Tensor create_glorot(const std::string& name, Shape shape,
                       std::size_t fan_in, std::size_t fan_out, Rng& rng);
  Tensor create_gaussian(const std::string& name, Shape shape, double stddev,
                         Rng& rng);

  // One bias-corrected Adam update over all entries. A missing grad buffer
  // counts as a zero gradient; a non-finite gradient raises TrainError naming
  // the parameter.
  void adam_step(const AdamConfig& cfg);

  void zero_grads();

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  Tensor find(const std::string& name) const;
  std::int64_t step_count() const { return step_; }

 private:
  Tensor add_entry(const std::string& name, Tensor t);

  std::vector<Entry> entries_;
  std::int64_t step_ = 0;
};

}  // namespace nlgnn
