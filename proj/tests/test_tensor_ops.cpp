#include <doctest.h>

#include <cmath>

#include "nlgnn/error.hpp"
#include "nlgnn/ops.hpp"
#include "nlgnn/optim.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace nlgnn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

// Finite-difference check of d(sum(w ⊙ f(x)))/dx for a unary-ish op.
template <typename Forward>
double op_fd_error(Tensor& x, Forward&& forward, std::uint64_t seed) {
  Rng rng(seed);
  Tape tape;
  Tensor y = forward(tape, x);
  Tensor w = random_tensor(y.shape(), rng);
  Tensor loss = sum(tape, mul(tape, y, w));
  x.zero_grad();  // earlier checks may have accumulated into shared operands
  tape.backward(loss);
  std::vector<double> analytic(x.grad().begin(), x.grad().end());
  x.zero_grad();

  const double eps = 1e-6;
  double worst = 0.0;
  auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double saved = xv[i];
    auto eval = [&](double v) {
      xv[i] = v;
      Tape t(false);
      Tensor yy = forward(t, x);
      double acc = 0.0;
      auto yv = yy.values();
      auto wv = w.values();
      for (std::size_t j = 0; j < yv.size(); ++j) acc += yv[j] * wv[j];
      return acc;
    };
    const double fd = (eval(saved + eps) - eval(saved - eps)) / (2 * eps);
    xv[i] = saved;
    worst = std::max(worst, std::abs(fd - analytic[i]) /
                                std::max({std::abs(fd), std::abs(analytic[i]),
                                          1e-4}));
  }
  return worst;
}

}  // namespace

TEST_CASE("matmul identity and hand-expanded product") {
  Tape tape;
  Tensor eye = Tensor::from_values({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Rng rng(3);
  Tensor x = random_tensor({3, 2}, rng);
  Tensor y = matmul(tape, eye, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(y.values()[i] == x.values()[i]);
  }

  Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_values({2, 1}, {1, 1});
  Tensor c = matmul(tape, a, b);
  CHECK(c.values()[0] == 3.0);
  CHECK(c.values()[1] == 7.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape tape;
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 2});
  CHECK_THROWS_WITH_AS(matmul(tape, a, b),
                       doctest::Contains("[2x3]"), ShapeError);
}

TEST_CASE("grad of sum(A·B) wrt A equals ones·B^T") {
  Rng rng(7);
  Tensor a = random_tensor({3, 4}, rng, true);
  Tensor b = random_tensor({4, 2}, rng, true);
  Tape tape;
  Tensor loss = sum(tape, matmul(tape, a, b));
  tape.backward(loss);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      double expected = 0.0;
      for (std::size_t j = 0; j < 2; ++j) expected += b.at(k, j);
      CHECK(a.grad()[i * 4 + k] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv1d identity kernel and k=1") {
  Tape tape;
  Rng rng(11);
  Tensor seq = random_tensor({5, 3}, rng);
  Tensor kernel = Tensor::zeros({1, 3, 3});
  for (std::size_t i = 0; i < 3; ++i) kernel.values()[i * 3 + i] = 1.0;
  Tensor bias = Tensor::zeros({3});
  Tensor out = conv1d(tape, seq, kernel, bias);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    CHECK(out.values()[i] == seq.values()[i]);
  }
}

TEST_CASE("conv1d sliding window with zero padding") {
  Tape tape;
  Tensor seq = Tensor::from_values({3, 1}, {1, 2, 3});
  Tensor kernel = Tensor::from_values({3, 1, 1}, {1, 1, 1});
  Tensor bias = Tensor::zeros({1});
  Tensor out = conv1d(tape, seq, kernel, bias);
  CHECK(out.values()[0] == 3.0);
  CHECK(out.values()[1] == 6.0);
  CHECK(out.values()[2] == 5.0);
}

TEST_CASE("conv1d rejects even kernel sizes") {
  Tape tape;
  Tensor seq = Tensor::zeros({4, 2});
  Tensor kernel = Tensor::zeros({2, 2, 2});
  Tensor bias = Tensor::zeros({2});
  CHECK_THROWS_AS(conv1d(tape, seq, kernel, bias), ConfigError);
}

TEST_CASE("conv1d matches the brute-force oracle on random shapes") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(16);
    const std::size_t f = 1 + rng.index(4);
    const std::size_t g = 1 + rng.index(4);
    const std::size_t k = 2 * rng.index(3) + 1;
    Tensor seq = random_tensor({n, f}, rng);
    Tensor kernel = random_tensor({k, f, g}, rng);
    Tensor bias = random_tensor({g}, rng);
    Tape tape;
    Tensor out = conv1d(tape, seq, kernel, bias);
    const auto expect = oracle::conv1d(
        {seq.values().begin(), seq.values().end()}, n, f,
        {kernel.values().begin(), kernel.values().end()}, k, g,
        {bias.values().begin(), bias.values().end()});
    for (std::size_t i = 0; i < expect.size(); ++i) {
      CHECK(std::abs(out.values()[i] - expect[i]) < 1e-12);
    }
  }
}

TEST_CASE("elementwise op semantics") {
  Tape tape;
  Tensor x = Tensor::from_values({3}, {-1, 0, 2});
  Tensor y = relu(tape, x);
  CHECK(y.values()[0] == 0.0);
  CHECK(y.values()[1] == 0.0);
  CHECK(y.values()[2] == 2.0);

  Rng rng(5);
  Tensor z = random_tensor({4, 3}, rng);
  Tensor kept = dropout(tape, z, 0.0, rng, true);
  CHECK(kept.same_storage(z));  // p = 0 is an exact identity
  Tensor eval = dropout(tape, z, 0.7, rng, false);
  CHECK(eval.same_storage(z));  // evaluation mode too
  CHECK_THROWS_AS(dropout(tape, z, 1.0, rng, true), ConfigError);

  Tensor ones = Tensor::from_values({4}, {1, 1, 1, 1});
  Tensor scaled = scale_rows(tape, z, ones);
  for (std::size_t i = 0; i < z.size(); ++i) {
    CHECK(scaled.values()[i] == z.values()[i]);
  }
}

TEST_CASE("dropout keeps survivor scaling and is seed-deterministic") {
  Tensor x = Tensor::from_values({1000}, std::vector<double>(1000, 1.0));
  Tape tape;
  Rng rng_a(42);
  Tensor a = dropout(tape, x, 0.4, rng_a, true);
  Rng rng_b(42);
  Tensor b = dropout(tape, x, 0.4, rng_b, true);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.values()[i] == b.values()[i]);
    if (a.values()[i] != 0.0) {
      CHECK(a.values()[i] == doctest::Approx(1.0 / 0.6).epsilon(1e-12));
      ++kept;
    }
  }
  CHECK(kept > 500);
  CHECK(kept < 700);
}

TEST_CASE("softmax_rows rows sum to one and gradients check out") {
  Rng rng(17);
  Tensor x = random_tensor({5, 4}, rng, true);
  Tape tape;
  Tensor y = softmax_rows(tape, x);
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += y.at(i, j);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  const double err = op_fd_error(
      x, [](Tape& t, const Tensor& in) { return softmax_rows(t, in); }, 23);
  CHECK(err < 1e-6);
}

TEST_CASE("per-op gradients match finite differences") {
  Rng rng(19);
  Tensor m = random_tensor({4, 3}, rng, true);

  SUBCASE("relu") {
    CHECK(op_fd_error(m, [](Tape& t, const Tensor& x) { return relu(t, x); },
                      1) < 1e-6);
  }
  SUBCASE("leaky_relu") {
    CHECK(op_fd_error(
              m, [](Tape& t, const Tensor& x) { return leaky_relu(t, x, 0.2); },
              2) < 1e-6);
  }
  SUBCASE("elem_log") {
    Tensor pos = Tensor::zeros({4, 3}, true);
    Rng r2(29);
    for (double& v : pos.values()) v = 0.5 + r2.uniform();
    CHECK(op_fd_error(pos,
                      [](Tape& t, const Tensor& x) { return elem_log(t, x); },
                      3) < 1e-6);
  }
  SUBCASE("scale_rows") {
    Rng r2(31);
    Tensor w = random_tensor({4}, r2, true);
    CHECK(op_fd_error(m,
                      [&](Tape& t, const Tensor& x) {
                        return scale_rows(t, x, w);
                      },
                      4) < 1e-6);
    CHECK(op_fd_error(w,
                      [&](Tape& t, const Tensor& x) {
                        return scale_rows(t, m, x);
                      },
                      5) < 1e-6);
  }
  SUBCASE("conv1d") {
    Rng r2(37);
    Tensor kernel = random_tensor({3, 3, 2}, r2, true);
    Tensor bias = random_tensor({2}, r2, true);
    CHECK(op_fd_error(m,
                      [&](Tape& t, const Tensor& x) {
                        return conv1d(t, x, kernel, bias);
                      },
                      6) < 1e-6);
    CHECK(op_fd_error(kernel,
                      [&](Tape& t, const Tensor& x) {
                        return conv1d(t, m, x, bias);
                      },
                      7) < 1e-6);
    CHECK(op_fd_error(bias,
                      [&](Tape& t, const Tensor& x) {
                        return conv1d(t, m, kernel, x);
                      },
                      8) < 1e-6);
  }
  SUBCASE("matvec, concat, gather") {
    Rng r2(41);
    Tensor v = random_tensor({3}, r2, true);
    CHECK(op_fd_error(m,
                      [&](Tape& t, const Tensor& x) { return matvec(t, x, v); },
                      9) < 1e-6);
    Tensor other = random_tensor({4, 2}, r2);
    CHECK(op_fd_error(m,
                      [&](Tape& t, const Tensor& x) {
                        return concat_cols(t, x, other);
                      },
                      10) < 1e-6);
    const std::vector<std::size_t> idx = {3, 0, 0, 2};
    CHECK(op_fd_error(m,
                      [&](Tape& t, const Tensor& x) {
                        return gather_rows(t, x, idx);
                      },
                      11) < 1e-6);
  }
}

TEST_CASE("backward on x: sum and hadamard square") {
  Rng rng(23);
  Tensor x = random_tensor({6}, rng, true);
  {
    Tape tape;
    Tensor loss = sum(tape, x);
    tape.backward(loss);
    for (double gv : x.grad()) CHECK(gv == 1.0);
    x.zero_grad();
  }
  {
    Tape tape;
    Tensor loss = sum(tape, mul(tape, x, x));
    tape.backward(loss);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(x.grad()[i] ==
            doctest::Approx(2.0 * x.values()[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward demands a scalar loss and clears the tape") {
  Rng rng(29);
  Tensor x = random_tensor({3, 2}, rng, true);
  Tape tape;
  Tensor y = relu(tape, x);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
  Tensor loss = sum(tape, y);
  tape.backward(loss);
  CHECK(tape.size() == 0);
}

TEST_CASE("softmax_cross_entropy against the direct formula") {
  SUBCASE("uniform logits give ln C") {
    Tensor logits = Tensor::zeros({4, 5});
    std::vector<int> labels = {0, 1, 2, 3};
    const auto mask = testutil::all_nodes(4);
    Tape tape;
    Tensor loss = softmax_cross_entropy(tape, logits, labels, mask);
    CHECK(loss.item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  }
  SUBCASE("huge one-hot logits drive the loss to zero") {
    Tensor logits = Tensor::zeros({2, 3});
    logits.at(0, 1) = 1e4;
    logits.at(1, 2) = 1e4;
    std::vector<int> labels = {1, 2};
    const auto mask = testutil::all_nodes(2);
    Tape tape;
    Tensor loss = softmax_cross_entropy(tape, logits, labels, mask);
    CHECK(loss.item() < 1e-12);
    CHECK(std::isfinite(loss.item()));
  }
  SUBCASE("random instance matches the oracle") {
    Rng rng(31);
    Tensor logits = random_tensor({4, 3}, rng, true);
    std::vector<int> labels = {2, 0, 1, 1};
    const auto mask = testutil::all_nodes(4);
    Tape tape;
    Tensor loss = softmax_cross_entropy(tape, logits, labels, mask);
    const double expect = oracle::cross_entropy(
        {logits.values().begin(), logits.values().end()}, 4, 3, labels,
        mask);
    CHECK(loss.item() == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("empty mask is an error") {
    Tensor logits = Tensor::zeros({2, 2});
    std::vector<int> labels = {0, 1};
    std::vector<std::size_t> empty;
    Tape tape;
    CHECK_THROWS_AS(softmax_cross_entropy(tape, logits, labels, empty),
                    ValueError);
  }
}

TEST_CASE("adam fixed point, first-step magnitude and determinism") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Rng rng(37);
    ParamStore store;
    Tensor w = store.create_glorot("w", {3, 3}, 3, 3, rng);
    const std::vector<double> before(w.values().begin(), w.values().end());
    AdamConfig cfg;
    store.adam_step(cfg);
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w.values()[i] == before[i]);
    }
  }
  SUBCASE("single scalar with g=1 moves by about lr") {
    ParamStore store;
    Tensor w = store.create_zeros("w", {1});
    w.grad()[0] = 1.0;
    AdamConfig cfg;
    cfg.lr = 0.01;
    store.adam_step(cfg);
    // Bias-corrected first step: lr · g/(|g| + eps-ish) ≈ lr.
    CHECK(w.values()[0] == doctest::Approx(-0.01).epsilon(1e-4));
  }
  SUBCASE("non-finite gradient names the parameter") {
    ParamStore store;
    Tensor w = store.create_zeros("encoder.w1", {1});
    w.grad()[0] = std::nan("");
    AdamConfig cfg;
    CHECK_THROWS_WITH_AS(store.adam_step(cfg),
                         doctest::Contains("encoder.w1"), TrainError);
  }
  SUBCASE("identical runs are bitwise identical") {
    auto run = [] {
      Rng rng(5);
      ParamStore store;
      Tensor w = store.create_glorot("w", {4, 2}, 4, 2, rng);
      AdamConfig cfg;
      cfg.weight_decay = 5e-4;
      for (int step = 0; step < 25; ++step) {
        Tape tape;
        Tensor loss = sum(tape, mul(tape, w, w));
        tape.backward(loss);
        store.adam_step(cfg);
        store.zero_grads();
      }
      return std::vector<double>(w.values().begin(), w.values().end());
    };
    const auto a = run();
    const auto b = run();
    CHECK(a == b);
  }
}

TEST_CASE("forward ops keep finite inputs finite") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({6, 4}, rng, true);
    for (double& v : x.values()) v *= 100.0;  // stress the softmax paths
    Tape tape;
    Tensor s = softmax_rows(tape, x);
    Tensor r = relu(tape, s);
    std::vector<int> labels = {0, 1, 2, 3, 0, 1};
    Tensor loss =
        softmax_cross_entropy(tape, x, labels, testutil::all_nodes(6));
    CHECK(all_finite(s));
    CHECK(all_finite(r));
    CHECK(all_finite(loss));
    tape.backward(loss);
    CHECK(std::isfinite(x.grad()[0]));
  }
}
