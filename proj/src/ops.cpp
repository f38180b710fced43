#include "nlgnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "nlgnn/error.hpp"

namespace nlgnn {

namespace {

void require_rank(const Tensor& t, std::size_t r, const char* what) {
  if (t.rank() != r) {
    throw ShapeError(std::string(what) + ": expected rank " +
                     std::to_string(r) + ", got shape " + shape_str(t.shape()));
  }
}

}  // namespace

bool all_finite(const Tensor& t) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree, " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), p = b.cols();
  Tensor out = Tensor::zeros({m, p}, a.requires_grad() || b.requires_grad());
  {
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double aik = av[i * k + kk];
        if (aik == 0.0) continue;
        const double* brow = &bv[kk * p];
        double* orow = &ov[i * p];
        for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
      }
    }
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor ac = a, bc = b, oc = out;
    tape.record([ac, bc, oc, m, k, p]() mutable {
      auto og = oc.grad();
      if (ac.requires_grad()) {
        auto ag = ac.grad();
        auto bv = bc.values();
        // dA = dC · B^T
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < p; ++j) {
            const double d = og[i * p + j];
            if (d == 0.0) continue;
            for (std::size_t kk = 0; kk < k; ++kk) {
              ag[i * k + kk] += d * bv[kk * p + j];
            }
          }
        }
      }
      if (bc.requires_grad()) {
        auto bg = bc.grad();
        auto av = ac.values();
        // dB = A^T · dC
        for (std::size_t kk = 0; kk < k; ++kk) {
          for (std::size_t i = 0; i < m; ++i) {
            const double aik = av[i * k + kk];
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < p; ++j) {
              bg[kk * p + j] += aik * og[i * p + j];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor matvec(Tape& tape, const Tensor& a, const Tensor& v) {
  require_rank(a, 2, "matvec lhs");
  require_rank(v, 1, "matvec rhs");
  if (a.cols() != v.dim(0)) {
    throw ShapeError("matvec: dimensions disagree, " + shape_str(a.shape()) +
                     " vs " + shape_str(v.shape()));
  }
  const std::size_t n = a.rows(), m = a.cols();
  Tensor out = Tensor::zeros({n}, a.requires_grad() || v.requires_grad());
  {
    auto av = a.values();
    auto vv = v.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += av[i * m + j] * vv[j];
      ov[i] = acc;
    }
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor ac = a, vc = v, oc = out;
    tape.record([ac, vc, oc, n, m]() mutable {
      auto og = oc.grad();
      if (ac.requires_grad()) {
        auto ag = ac.grad();
        auto vv = vc.values();
        for (std::size_t i = 0; i < n; ++i) {
          const double d = og[i];
          if (d == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) ag[i * m + j] += d * vv[j];
        }
      }
      if (vc.requires_grad()) {
        auto vg = vc.grad();
        auto av = ac.values();
        for (std::size_t i = 0; i < n; ++i) {
          const double d = og[i];
          if (d == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) vg[j] += d * av[i * m + j];
        }
      }
    });
  }
  return out;
}

Tensor conv1d(Tape& tape, const Tensor& seq, const Tensor& kernel,
              const Tensor& bias) {
  require_rank(seq, 2, "conv1d input");
  require_rank(kernel, 3, "conv1d kernel");
  require_rank(bias, 1, "conv1d bias");
  const std::size_t k = kernel.dim(0);
  const std::size_t f = kernel.dim(1);
  const std::size_t g = kernel.dim(2);
  if (k % 2 == 0) {
    throw ConfigError("conv1d: kernel size must be odd, got " +
                      std::to_string(k));
  }
  if (seq.cols() != f || bias.dim(0) != g) {
    throw ShapeError("conv1d: channel mismatch, input " +
                     shape_str(seq.shape()) + ", kernel " +
                     shape_str(kernel.shape()) + ", bias " +
                     shape_str(bias.shape()));
  }
  const std::size_t n = seq.rows();
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(k / 2);
  const bool rg =
      seq.requires_grad() || kernel.requires_grad() || bias.requires_grad();
  Tensor out = Tensor::zeros({n, g}, rg);
  {
    auto sv = seq.values();
    auto kv = kernel.values();
    auto bv = bias.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t go = 0; go < g; ++go) ov[i * g + go] = bv[go];
      for (std::size_t t = 0; t < k; ++t) {
        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i + t) - r;
        if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
        const double* in_row = &sv[static_cast<std::size_t>(j) * f];
        const double* k_slab = &kv[t * f * g];
        double* out_row = &ov[i * g];
        for (std::size_t fi = 0; fi < f; ++fi) {
          const double x = in_row[fi];
          if (x == 0.0) continue;
          const double* k_row = &k_slab[fi * g];
          for (std::size_t go = 0; go < g; ++go) out_row[go] += x * k_row[go];
        }
      }
    }
  }
  if (rg && tape.recording()) {
    Tensor sc = seq, kc = kernel, bc = bias, oc = out;
    tape.record([sc, kc, bc, oc, n, k, f, g, r]() mutable {
      auto og = oc.grad();
      auto sv = sc.values();
      auto kv = kc.values();
      const bool gs = sc.requires_grad();
      const bool gk = kc.requires_grad();
      if (bc.requires_grad()) {
        auto bg = bc.grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t go = 0; go < g; ++go) bg[go] += og[i * g + go];
        }
      }
      if (gs || gk) {
        auto sg = gs ? sc.grad() : std::span<double>{};
        auto kg = gk ? kc.grad() : std::span<double>{};
        for (std::size_t i = 0; i < n; ++i) {
          const double* og_row = &og[i * g];
          for (std::size_t t = 0; t < k; ++t) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i + t) - r;
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
            const std::size_t ju = static_cast<std::size_t>(j);
            for (std::size_t fi = 0; fi < f; ++fi) {
              const double x = sv[ju * f + fi];
              const double* k_row = &kv[(t * f + fi) * g];
              double acc = 0.0;
              for (std::size_t go = 0; go < g; ++go) {
                const double d = og_row[go];
                acc += d * k_row[go];
                if (gk) kg[(t * f + fi) * g + go] += x * d;
              }
              if (gs) sg[ju * f + fi] += acc;
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    tape.note_kink_margin(std::abs(xv[i]));
    ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc]() mutable {
      auto xg = xc.grad();
      auto og = oc.grad();
      auto xv = xc.values();
      for (std::size_t i = 0; i < xg.size(); ++i) {
        if (xv[i] > 0.0) xg[i] += og[i];
      }
    });
  }
  return out;
}

Tensor leaky_relu(Tape& tape, const Tensor& x, double negative_slope) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    tape.note_kink_margin(std::abs(xv[i]));
    ov[i] = xv[i] > 0.0 ? xv[i] : negative_slope * xv[i];
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc, negative_slope]() mutable {
      auto xg = xc.grad();
      auto og = oc.grad();
      auto xv = xc.values();
      for (std::size_t i = 0; i < xg.size(); ++i) {
        xg[i] += (xv[i] > 0.0 ? 1.0 : negative_slope) * og[i];
      }
    });
  }
  return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes disagree, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (out.requires_grad() && tape.recording()) {
    Tensor ac = a, bc = b, oc = out;
    tape.record([ac, bc, oc]() mutable {
      auto og = oc.grad();
      if (ac.requires_grad()) {
        auto ag = ac.grad();
        for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i];
      }
      if (bc.requires_grad()) {
        auto bg = bc.grad();
        for (std::size_t i = 0; i < og.size(); ++i) bg[i] += og[i];
      }
    });
  }
  return out;
}

Tensor add_bias(Tape& tape, const Tensor& m, const Tensor& bias) {
  require_rank(m, 2, "add_bias input");
  require_rank(bias, 1, "add_bias bias");
  if (m.cols() != bias.dim(0)) {
    throw ShapeError("add_bias: shapes disagree, " + shape_str(m.shape()) +
                     " vs " + shape_str(bias.shape()));
  }
  const std::size_t n = m.rows(), c = m.cols();
  Tensor out =
      Tensor::zeros(m.shape(), m.requires_grad() || bias.requires_grad());
  auto mv = m.values();
  auto bv = bias.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) ov[i * c + j] = mv[i * c + j] + bv[j];
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor mc = m, bc = bias, oc = out;
    tape.record([mc, bc, oc, n, c]() mutable {
      auto og = oc.grad();
      if (mc.requires_grad()) {
        auto mg = mc.grad();
        for (std::size_t i = 0; i < og.size(); ++i) mg[i] += og[i];
      }
      if (bc.requires_grad()) {
        auto bg = bc.grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < c; ++j) bg[j] += og[i * c + j];
        }
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shapes disagree, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (out.requires_grad() && tape.recording()) {
    Tensor ac = a, bc = b, oc = out;
    tape.record([ac, bc, oc]() mutable {
      auto og = oc.grad();
      if (ac.requires_grad()) {
        auto ag = ac.grad();
        auto bv = bc.values();
        for (std::size_t i = 0; i < og.size(); ++i) ag[i] += og[i] * bv[i];
      }
      if (bc.requires_grad()) {
        auto bg = bc.grad();
        auto av = ac.values();
        for (std::size_t i = 0; i < og.size(); ++i) bg[i] += og[i] * av[i];
      }
    });
  }
  return out;
}

Tensor elem_log(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = std::log(xv[i]);
  if (out.requires_grad() && tape.recording()) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc]() mutable {
      auto xg = xc.grad();
      auto og = oc.grad();
      auto xv = xc.values();
      for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += og[i] / xv[i];
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
  Tensor out = Tensor::zeros({1}, x.requires_grad());
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  out.values()[0] = acc;
  if (out.requires_grad() && tape.recording()) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc]() mutable {
      auto xg = xc.grad();
      const double d = oc.grad()[0];
      for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += d;
    });
  }
  return out;
}

Tensor scale_rows(Tape& tape, const Tensor& m, const Tensor& weights) {
  require_rank(m, 2, "scale_rows input");
  require_rank(weights, 1, "scale_rows weights");
  if (m.rows() != weights.dim(0)) {
    throw ShapeError("scale_rows: row count mismatch, " +
                     shape_str(m.shape()) + " vs " +
                     shape_str(weights.shape()));
  }
  const std::size_t n = m.rows(), f = m.cols();
  Tensor out =
      Tensor::zeros(m.shape(), m.requires_grad() || weights.requires_grad());
  auto mv = m.values();
  auto wv = weights.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < f; ++j) ov[i * f + j] = wv[i] * mv[i * f + j];
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor mc = m, wc = weights, oc = out;
    tape.record([mc, wc, oc, n, f]() mutable {
      auto og = oc.grad();
      if (mc.requires_grad()) {
        auto mg = mc.grad();
        auto wv = wc.values();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < f; ++j) {
            mg[i * f + j] += wv[i] * og[i * f + j];
          }
        }
      }
      if (wc.requires_grad()) {
        auto wg = wc.grad();
        auto mv = mc.values();
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < f; ++j) {
            acc += og[i * f + j] * mv[i * f + j];
          }
          wg[i] += acc;
        }
      }
    });
  }
  return out;
}

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "concat_cols lhs");
  require_rank(b, 2, "concat_cols rhs");
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row counts disagree, " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::size_t n = a.rows(), fa = a.cols(), fb = b.cols();
  Tensor out =
      Tensor::zeros({n, fa + fb}, a.requires_grad() || b.requires_grad());
  auto av = a.values();
  auto bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(&av[i * fa], fa, &ov[i * (fa + fb)]);
    std::copy_n(&bv[i * fb], fb, &ov[i * (fa + fb) + fa]);
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor ac = a, bc = b, oc = out;
    tape.record([ac, bc, oc, n, fa, fb]() mutable {
      auto og = oc.grad();
      if (ac.requires_grad()) {
        auto ag = ac.grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < fa; ++j) {
            ag[i * fa + j] += og[i * (fa + fb) + j];
          }
        }
      }
      if (bc.requires_grad()) {
        auto bg = bc.grad();
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < fb; ++j) {
            bg[i * fb + j] += og[i * (fa + fb) + fa + j];
          }
        }
      }
    });
  }
  return out;
}

Tensor gather_rows(Tape& tape, const Tensor& x,
                   std::span<const std::size_t> index) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw ShapeError("gather_rows: expected rank 1 or 2, got " +
                     shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0);
  const std::size_t f = x.rank() == 2 ? x.cols() : 1;
  for (std::size_t i : index) {
    if (i >= n) {
      throw ContractError("gather_rows: index " + std::to_string(i) +
                          " out of range for " + std::to_string(n) + " rows");
    }
  }
  Shape oshape = x.shape();
  oshape[0] = index.size();
  Tensor out = Tensor::zeros(oshape, x.requires_grad());
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < index.size(); ++i) {
    std::copy_n(&xv[index[i] * f], f, &ov[i * f]);
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor xc = x, oc = out;
    std::vector<std::size_t> idx(index.begin(), index.end());
    tape.record([xc, oc, idx = std::move(idx), f]() mutable {
      auto xg = xc.grad();
      auto og = oc.grad();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        for (std::size_t j = 0; j < f; ++j) {
          xg[idx[i] * f + j] += og[i * f + j];
        }
      }
    });
  }
  return out;
}

Tensor dropout(Tape& tape, const Tensor& x, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0) {
    throw ConfigError("dropout: rate must lie in [0,1), got " +
                      std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  const double scale = 1.0 / (1.0 - p);
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  std::vector<double> mask(x.size());
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    mask[i] = rng.uniform() >= p ? scale : 0.0;
    ov[i] = mask[i] * xv[i];
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc, mask = std::move(mask)]() mutable {
      auto xg = xc.grad();
      auto og = oc.grad();
      for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += mask[i] * og[i];
    });
  }
  return out;
}

Tensor softmax_rows(Tape& tape, const Tensor& x) {
  require_rank(x, 2, "softmax_rows input");
  const std::size_t n = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = xv[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xv[i * c + j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      ov[i * c + j] = std::exp(xv[i * c + j] - mx);
      denom += ov[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) ov[i * c + j] /= denom;
  }
  if (out.requires_grad() && tape.recording()) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc, n, c]() mutable {
      auto xg = xc.grad();
      auto og = oc.grad();
      auto ov = oc.values();
      for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          dot += og[i * c + j] * ov[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) {
          xg[i * c + j] += ov[i * c + j] * (og[i * c + j] - dot);
        }
      }
    });
  }
  return out;
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits,
                             std::span<const int> labels,
                             std::span<const std::size_t> mask) {
  require_rank(logits, 2, "softmax_cross_entropy logits");
  if (mask.empty()) {
    throw ValueError("softmax_cross_entropy: empty mask, mean undefined");
  }
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  if (labels.size() != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(n) + " logit rows");
  }
  for (std::size_t v : mask) {
    if (v >= n) {
      throw ContractError("softmax_cross_entropy: node " + std::to_string(v) +
                          " outside logits");
    }
    if (labels[v] < 0 || static_cast<std::size_t>(labels[v]) >= c) {
      throw ContractError("softmax_cross_entropy: label " +
                          std::to_string(labels[v]) + " of node " +
                          std::to_string(v) + " outside [0," +
                          std::to_string(c) + ")");
    }
  }
  Tensor out = Tensor::zeros({1}, logits.requires_grad());
  auto lv = logits.values();
  double total = 0.0;
  for (std::size_t v : mask) {
    const double* row = &lv[v * c];
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    total += mx + std::log(denom) - row[static_cast<std::size_t>(labels[v])];
  }
  out.values()[0] = total / static_cast<double>(mask.size());
  if (out.requires_grad() && tape.recording()) {
    Tensor lc = logits, oc = out;
    std::vector<std::size_t> mvec(mask.begin(), mask.end());
    std::vector<int> yvec(labels.begin(), labels.end());
    tape.record([lc, oc, mvec = std::move(mvec), yvec = std::move(yvec),
                 c]() mutable {
      auto lg = lc.grad();
      auto lv = lc.values();
      const double d = oc.grad()[0] / static_cast<double>(mvec.size());
      for (std::size_t v : mvec) {
        const double* row = &lv[v * c];
        double mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
        for (std::size_t j = 0; j < c; ++j) {
          const double p = std::exp(row[j] - mx) / denom;
          const double onehot =
              (j == static_cast<std::size_t>(yvec[v])) ? 1.0 : 0.0;
          lg[v * c + j] += d * (p - onehot);
        }
      }
    });
  }
  return out;
}

}  // namespace nlgnn
