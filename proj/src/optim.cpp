#include "nlgnn/optim.hpp"

#include <cmath>

#include "nlgnn/error.hpp"

namespace nlgnn {

Tensor ParamStore::add_entry(const std::string& name, Tensor t) {
  for (const auto& e : entries_) {
    if (e.name == name) {
      throw ContractError("duplicate parameter name: " + name);
    }
  }
  t.set_requires_grad(true);
  Entry e;
  e.name = name;
  e.tensor = t;
  e.m.assign(t.size(), 0.0);
  e.v.assign(t.size(), 0.0);
  entries_.push_back(std::move(e));
  return t;
}

Tensor ParamStore::create_zeros(const std::string& name, Shape shape) {
  return add_entry(name, Tensor::zeros(std::move(shape)));
}

Tensor ParamStore::create_glorot(const std::string& name, Shape shape,
                                 std::size_t fan_in, std::size_t fan_out,
                                 Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  const double limit =
      std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return add_entry(name, t);
}

Tensor ParamStore::create_gaussian(const std::string& name, Shape shape,
                                   double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = stddev * rng.normal();
  return add_entry(name, t);
}

void ParamStore::adam_step(const AdamConfig& cfg) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
  for (auto& e : entries_) {
    auto theta = e.tensor.values();
    auto grad = e.tensor.has_grad() ? e.tensor.grad()
                                    : std::span<const double>{};
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g_raw = i < grad.size() ? grad[i] : 0.0;
      if (!std::isfinite(g_raw)) {
        throw TrainError("non-finite gradient in parameter '" + e.name + "'");
      }
      const double g = g_raw + cfg.weight_decay * theta[i];
      e.m[i] = cfg.beta1 * e.m[i] + (1.0 - cfg.beta1) * g;
      e.v[i] = cfg.beta2 * e.v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = e.m[i] / bc1;
      const double vhat = e.v[i] / bc2;
      theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void ParamStore::zero_grads() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

Tensor ParamStore::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.tensor;
  }
  throw ContractError("unknown parameter: " + name);
}

}  // namespace nlgnn
