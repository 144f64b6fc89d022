#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cyclet/gradcheck.hpp"
#include "cyclet/ops.hpp"
#include "cyclet/rng.hpp"
#include "cyclet/tensor.hpp"

using namespace cyclet;

namespace {

Tensor rand_tensor(const Shape& shape, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (auto& v : t.values_mut()) v = lo + (hi - lo) * rng.next_unit();
  return t;
}

/// Reference convolution: straight nested loops, no shared code with conv2d.
std::vector<double> conv_reference(const std::vector<double>& in, int B, int Cin, int H, int W,
                                   const std::vector<double>& ker, int Cout, int Kh, int Kw,
                                   const std::vector<double>& bias, int stride, int pad, int Ho,
                                   int Wo) {
  std::vector<double> out(static_cast<std::size_t>(B) * Cout * Ho * Wo, 0.0);
  for (int b = 0; b < B; ++b)
    for (int co = 0; co < Cout; ++co)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          double acc = bias[static_cast<std::size_t>(co)];
          for (int ci = 0; ci < Cin; ++ci)
            for (int kh = 0; kh < Kh; ++kh)
              for (int kw = 0; kw < Kw; ++kw) {
                const int ih = oh * stride - pad + kh;
                const int iw = ow * stride - pad + kw;
                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                acc += in[static_cast<std::size_t>(((b * Cin + ci) * H + ih) * W + iw)] *
                       ker[static_cast<std::size_t>(((co * Cin + ci) * Kh + kh) * Kw + kw)];
              }
          out[static_cast<std::size_t>(((b * Cout + co) * Ho + oh) * Wo + ow)] = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("tensor basics and grad buffer invariants") {
  Tensor t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
  REQUIRE(t.size() == 6);
  REQUIRE(t.values().size() == 6);
  REQUIRE(t.grad().size() == 6);
  for (double g : t.grad()) CHECK(g == 0.0);

  t.grad_mut()[2] = 5.0;
  t.zero_grad();
  for (double g : t.grad()) CHECK(g == 0.0);

  CHECK_THROWS_AS(Tensor::from_values({2, 2}, {1.0, 2.0}), ShapeError);
  CHECK_THROWS_AS(t.item(), ShapeError);
}

TEST_CASE("conv2d identity kernel") {
  Tensor x = Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor k = Tensor::from_values({1, 1, 1, 1}, {1});
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(x, k, b, 1, 0);
  REQUIRE(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y.values()[0] == 1.0);
  CHECK(y.values()[1] == 2.0);
  CHECK(y.values()[2] == 3.0);
  CHECK(y.values()[3] == 4.0);
}

TEST_CASE("conv2d all-ones 3x3 kernel with padding sums neighborhoods") {
  Tensor x = Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor b = Tensor::zeros({1});
  Tensor y = conv2d(x, k, b, 1, 1);
  for (int i = 0; i < 4; ++i) CHECK(y.values()[i] == 10.0);

  auto ref = conv_reference({1, 2, 3, 4}, 1, 1, 2, 2, std::vector<double>(9, 1.0), 1, 3, 3, {0.0},
                            1, 1, 2, 2);
  for (int i = 0; i < 4; ++i) CHECK(y.values()[i] == ref[static_cast<std::size_t>(i)]);
}

TEST_CASE("conv2d forward matches reference on random cases") {
  SplitMix64 rng(41);
  for (int trial = 0; trial < 12; ++trial) {
    const int B = rng.next_int(1, 2), Cin = rng.next_int(1, 3), Cout = rng.next_int(1, 3);
    const int H = rng.next_int(3, 7), W = rng.next_int(3, 7);
    const int K = 2 * rng.next_int(0, 1) + 1;  // 1 or 3
    const int stride = rng.next_int(1, 2), pad = rng.next_int(0, 1);
    if (H + 2 * pad - K < 0 || W + 2 * pad - K < 0) continue;
    Tensor x = rand_tensor({B, Cin, H, W}, rng);
    Tensor k = rand_tensor({Cout, Cin, K, K}, rng);
    Tensor b = rand_tensor({Cout}, rng);
    Tensor y = conv2d(x, k, b, stride, pad);
    auto ref = conv_reference(
        {x.values().begin(), x.values().end()}, B, Cin, H, W,
        {k.values().begin(), k.values().end()}, Cout, K, K,
        {b.values().begin(), b.values().end()}, stride, pad, y.shape()[2], y.shape()[3]);
    REQUIRE(y.size() == static_cast<std::int64_t>(ref.size()));
    for (std::size_t i = 0; i < ref.size(); ++i)
      CHECK(y.values()[i] == Catch::Approx(ref[i]).margin(1e-12));
  }
}

TEST_CASE("conv2d shape errors name the offending dimension") {
  Tensor x = Tensor::zeros({1, 2, 4, 4});
  Tensor k = Tensor::zeros({1, 3, 3, 3});
  Tensor b = Tensor::zeros({1});
  CHECK_THROWS_WITH(conv2d(x, k, b, 1, 1), Catch::Matchers::ContainsSubstring("channel"));
  Tensor k2 = Tensor::zeros({1, 2, 2, 2});
  CHECK_THROWS_AS(conv2d(x, k2, b, 1, 1), ShapeError);
  Tensor b2 = Tensor::zeros({2});
  Tensor k3 = Tensor::zeros({1, 2, 3, 3});
  CHECK_THROWS_AS(conv2d(x, k3, b2, 1, 1), ShapeError);
  CHECK_THROWS_AS(conv2d(x, k3, b, 0, 1), ValueError);
  CHECK_THROWS_AS(conv2d(x, k3, b, 1, -1), ValueError);
}

TEST_CASE("conv2d gradients match finite differences") {
  SplitMix64 rng(7);
  GradCheckOptions opts;
  opts.tol = 1e-6;
  for (int trial = 0; trial < 3; ++trial) {
    Tensor x = rand_tensor({1, 2, 4, 4}, rng);
    Tensor k = rand_tensor({2, 2, 3, 3}, rng);
    Tensor b = rand_tensor({2}, rng);
    auto loss = [&] { return sum(conv2d(x, k, b, 1, 1)); };
    CHECK(check_gradient_elementwise("conv2d/x", loss, x, rng, opts).ok);
    CHECK(check_gradient_elementwise("conv2d/k", loss, k, rng, opts).ok);
    CHECK(check_gradient_elementwise("conv2d/b", loss, b, rng, opts).ok);
  }
  // strided case
  Tensor x = rand_tensor({2, 2, 5, 5}, rng);
  Tensor k = rand_tensor({3, 2, 3, 3}, rng);
  Tensor b = rand_tensor({3}, rng);
  auto loss = [&] { return mean_square_to(conv2d(x, k, b, 2, 1), 0.25); };
  CHECK(check_gradient_elementwise("conv2d_s2/x", loss, x, rng, opts).ok);
  CHECK(check_gradient_elementwise("conv2d_s2/k", loss, k, rng, opts).ok);
}

TEST_CASE("upsample_nearest forward") {
  Tensor x = Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor same = upsample_nearest(x, 1);
  for (int i = 0; i < 4; ++i) CHECK(same.values()[i] == x.values()[i]);

  Tensor one = Tensor::from_values({1, 1, 1, 1}, {1});
  Tensor up = upsample_nearest(one, 2);
  REQUIRE(up.shape() == Shape{1, 1, 2, 2});
  for (int i = 0; i < 4; ++i) CHECK(up.values()[i] == 1.0);

  CHECK_THROWS_AS(upsample_nearest(x, 0), ValueError);
}

TEST_CASE("upsample_nearest backward sums over blocks") {
  Tensor x = Tensor::from_values({1, 1, 1, 1}, {1.5});
  {
    Tape tape;
    Tensor y = sum(upsample_nearest(x, 2));
    tape.backward(y);
  }
  CHECK(x.grad()[0] == 4.0);

  SplitMix64 rng(11);
  Tensor z = rand_tensor({1, 2, 3, 3}, rng);
  auto loss = [&] { return mean_square_to(upsample_nearest(z, 2), 0.1); };
  CHECK(check_gradient_elementwise("upsample/back", loss, z, rng).ok);
}

TEST_CASE("activations forward values") {
  Tensor x = Tensor::from_values({3}, {-1, 0, 2});
  Tensor r = activation(x, Act::relu);
  CHECK(r.values()[0] == 0.0);
  CHECK(r.values()[1] == 0.0);
  CHECK(r.values()[2] == 2.0);

  Tensor s = activation(Tensor::from_values({1}, {0}), Act::sigmoid);
  CHECK(s.values()[0] == 0.5);

  CHECK_THROWS_AS(activation(x, Act::leaky_relu, 0.0), ValueError);
  CHECK_THROWS_AS(activation(x, Act::leaky_relu, 1.0), ValueError);
}

TEST_CASE("leaky_relu gradient at negative input equals slope") {
  Tensor x = Tensor::from_values({1}, {-3.0});
  {
    Tape tape;
    Tensor y = sum(activation(x, Act::leaky_relu, 0.2));
    tape.backward(y);
  }
  CHECK(x.grad()[0] == 0.2);

  SplitMix64 rng(13);
  auto loss = [&] { return sum(activation(x, Act::leaky_relu, 0.2)); };
  auto rep = check_gradient_elementwise("leaky/back", loss, x, rng);
  CHECK(rep.ok);
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("tanh and sigmoid outputs are bounded") {
  SplitMix64 rng(17);
  Tensor x = rand_tensor({64}, rng, -50.0, 50.0);
  Tensor th = activation(x, Act::tanh);
  Tensor sg = activation(x, Act::sigmoid);
  for (double v : th.values()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  for (double v : sg.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("instance_norm forward") {
  Tensor gain = Tensor::full({1}, 1.0);
  Tensor shift = Tensor::zeros({1});

  Tensor flat = Tensor::from_values({1, 1, 2, 2}, {5, 5, 5, 5});
  Tensor y = instance_norm(flat, gain, shift, 1e-5);
  for (double v : y.values()) CHECK(v == 0.0);

  Tensor two = Tensor::from_values({1, 1, 2, 2}, {0, 2, 0, 2});
  Tensor z = instance_norm(two, gain, shift, 1e-12);
  CHECK(z.values()[0] == Catch::Approx(-1.0).epsilon(1e-6));
  CHECK(z.values()[1] == Catch::Approx(1.0).epsilon(1e-6));
  CHECK(z.values()[2] == Catch::Approx(-1.0).epsilon(1e-6));
  CHECK(z.values()[3] == Catch::Approx(1.0).epsilon(1e-6));

  Tensor tiny = Tensor::zeros({1, 1, 1, 1});
  CHECK_THROWS_AS(instance_norm(tiny, gain, shift, 1e-5), ShapeError);
  CHECK_THROWS_AS(instance_norm(flat, gain, shift, 0.0), ValueError);
}

TEST_CASE("instance_norm normalizes every plane") {
  SplitMix64 rng(19);
  Tensor x = rand_tensor({2, 3, 4, 4}, rng);
  Tensor gain = Tensor::full({3}, 1.0);
  Tensor shift = Tensor::zeros({3});
  Tensor y = instance_norm(x, gain, shift, 1e-10);
  const int n = 16;
  for (int p = 0; p < 6; ++p) {
    double m = 0.0, var = 0.0;
    for (int i = 0; i < n; ++i) m += y.values()[static_cast<std::size_t>(p * n + i)];
    m /= n;
    for (int i = 0; i < n; ++i) {
      const double d = y.values()[static_cast<std::size_t>(p * n + i)] - m;
      var += d * d;
    }
    var /= n;
    CHECK(std::abs(m) < 1e-10);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("instance_norm gradients match finite differences") {
  SplitMix64 rng(23);
  Tensor x = rand_tensor({1, 2, 3, 3}, rng);
  Tensor gain = rand_tensor({2}, rng, 0.5, 1.5);
  Tensor shift = rand_tensor({2}, rng, -0.3, 0.3);
  auto loss = [&] { return mean_square_to(instance_norm(x, gain, shift, 1e-5), 0.2); };
  GradCheckOptions opts;
  opts.tol = 1e-5;
  CHECK(check_gradient_elementwise("inorm/x", loss, x, rng, opts).ok);
  CHECK(check_gradient_elementwise("inorm/gain", loss, gain, rng, opts).ok);
  CHECK(check_gradient_elementwise("inorm/shift", loss, shift, rng, opts).ok);
}

TEST_CASE("mean_abs_diff") {
  Tensor a = Tensor::from_values({2}, {1, 2});
  Tensor b = Tensor::from_values({2}, {0, 0});
  CHECK(mean_abs_diff(a, a).item() == 0.0);
  CHECK(mean_abs_diff(a, b).item() == 1.5);
  CHECK_THROWS_AS(mean_abs_diff(a, Tensor::zeros({3})), ShapeError);

  SplitMix64 rng(29);
  Tensor u = rand_tensor({8}, rng, 0.5, 1.5);
  Tensor v = rand_tensor({8}, rng, -1.5, -0.5);  // well away from ties
  auto loss = [&] { return mean_abs_diff(u, v); };
  GradCheckOptions opts;
  opts.tol = 1e-6;
  CHECK(check_gradient_elementwise("mad/a", loss, u, rng, opts).ok);
  CHECK(check_gradient_elementwise("mad/b", loss, v, rng, opts).ok);
}

TEST_CASE("mean_square_to") {
  Tensor a = Tensor::full({4}, 0.7);
  CHECK(mean_square_to(a, 0.7).item() == 0.0);
  Tensor b = Tensor::from_values({2}, {0, 1});
  CHECK(mean_square_to(b, 1.0).item() == 0.5);

  SplitMix64 rng(31);
  Tensor x = rand_tensor({6}, rng);
  auto loss = [&] { return mean_square_to(x, 0.25); };
  GradCheckOptions opts;
  opts.tol = 1e-6;
  auto rep = check_gradient_elementwise("msq", loss, x, rng, opts);
  CHECK(rep.ok);

  // analytic gradient is 2(a - t)/N
  x.zero_grad();
  {
    Tape tape;
    Tensor l = mean_square_to(x, 0.25);
    tape.backward(l);
  }
  for (int i = 0; i < 6; ++i)
    CHECK(x.grad()[i] == Catch::Approx(2.0 * (x.values()[i] - 0.25) / 6.0).margin(1e-15));
}

TEST_CASE("weighted_sum") {
  Tensor t = Tensor::scalar(0.4);
  CHECK(weighted_sum({{1.0, t}}).item() == 0.4);
  CHECK(weighted_sum({{0.0, t}, {0.0, Tensor::scalar(9.0)}}).item() == 0.0);
  CHECK(weighted_sum({{2.0, Tensor::scalar(3.0)}, {-1.0, Tensor::scalar(4.0)}}).item() == 2.0);
  CHECK_THROWS_AS(weighted_sum({{1.0, Tensor::zeros({2})}}), ShapeError);

  Tensor a = Tensor::scalar(1.5), b = Tensor::scalar(-0.5);
  {
    Tape tape;
    Tensor l = weighted_sum({{2.0, a}, {-3.0, b}});
    tape.backward(l);
  }
  CHECK(a.grad()[0] == 2.0);
  CHECK(b.grad()[0] == -3.0);
}

TEST_CASE("stop_gradient passes values and blocks gradient exactly") {
  SplitMix64 rng(37);
  Tensor x = rand_tensor({5}, rng);
  Tensor s = stop_gradient(x);
  for (int i = 0; i < 5; ++i) CHECK(s.values()[i] == x.values()[i]);

  {
    Tape tape;
    Tensor l = sum(stop_gradient(x));
    tape.backward(l);
  }
  for (double g : x.grad()) CHECK(g == 0.0);

  // d/dx sum(stop(x) * x) = detached value of x, not 2x
  x.zero_grad();
  {
    Tape tape;
    Tensor l = sum(mul(stop_gradient(x), x));
    tape.backward(l);
  }
  for (int i = 0; i < 5; ++i) CHECK(x.grad()[i] == x.values()[i]);

  // composite: gradient through any path ending in stop_gradient is exactly 0
  x.zero_grad();
  {
    Tape tape;
    Tensor l = mean_square_to(stop_gradient(activation(x, Act::tanh)), 0.1);
    tape.backward(l);
  }
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("backward on sum and mean") {
  Tensor x = Tensor::from_values({4}, {1, 2, 3, 4});
  {
    Tape tape;
    tape.backward(sum(x));
  }
  for (double g : x.grad()) CHECK(g == 1.0);

  x.zero_grad();
  {
    Tape tape;
    tape.backward(mean(x));
  }
  for (double g : x.grad()) CHECK(g == 0.25);
}

TEST_CASE("backward visits each node once: grad of x+x is exactly 2") {
  Tensor x = Tensor::from_values({3}, {0.5, -1.0, 2.0});
  {
    Tape tape;
    Tensor y = sum(add(x, x));
    tape.backward(y);
  }
  for (double g : x.grad()) CHECK(g == 2.0);
}

TEST_CASE("backward accumulates across calls until zero_grad") {
  Tensor x = Tensor::from_values({2}, {1.0, 2.0});
  {
    Tape tape;
    Tensor l = sum(x);
    tape.backward(l);
    tape.backward(l);
  }
  for (double g : x.grad()) CHECK(g == 2.0);
  {
    Tape tape;
    tape.backward(sum(x));
  }
  for (double g : x.grad()) CHECK(g == 3.0);
  x.zero_grad();
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("backward rejects non-scalar and foreign losses") {
  Tensor x = Tensor::from_values({2}, {1.0, 2.0});
  Tape tape;
  Tensor y = add(x, x);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
  CHECK_THROWS_AS(tape.backward(Tensor::scalar(1.0)), ValueError);  // not produced here
}

TEST_CASE("diamond graph accumulates both paths") {
  Tensor x = Tensor::from_values({2}, {0.3, -0.7});
  {
    Tape tape;
    Tensor a = scale(x, 2.0);
    Tensor b = scale(x, 3.0);
    Tensor l = sum(add(a, b));
    tape.backward(l);
  }
  for (double g : x.grad()) CHECK(g == 5.0);
}

TEST_CASE("finite_diff_gradient basics") {
  Tensor x = Tensor::from_values({3}, {1.0, -2.0, 0.5});
  Tensor g = finite_diff_gradient([](const Tensor& t) { return sum(t).item(); }, x, 1e-5);
  for (double v : g.values()) CHECK(v == Catch::Approx(1.0).margin(1e-9));

  Tensor x3 = Tensor::from_values({1}, {3.0});
  Tensor g2 =
      finite_diff_gradient([](const Tensor& t) { return mean_square_to(t, 0.0).item(); }, x3, 1e-5);
  CHECK(g2.values()[0] == Catch::Approx(6.0).margin(1e-6));

  CHECK_THROWS_AS(finite_diff_gradient([](const Tensor& t) { return sum(t).item(); }, x, 0.0),
                  ValueError);
}

TEST_CASE("finite differences agree with backward on conv+activation chains") {
  SplitMix64 rng(43);
  int failures = 0;
  for (int seed = 0; seed < 20; ++seed) {
    Tensor x = rand_tensor({1, 2, 4, 4}, rng);
    Tensor k = rand_tensor({2, 2, 3, 3}, rng);
    Tensor b = rand_tensor({2}, rng, -0.1, 0.1);
    auto loss = [&] {
      return mean_square_to(activation(conv2d(x, k, b, 1, 1), Act::tanh), 0.3);
    };
    for (Tensor leaf : {x, k, b}) {
      auto rep = check_gradient_elementwise("chain", loss, leaf, rng);
      if (!rep.ok) ++failures;
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("no-tape evaluation records nothing") {
  Tensor x = Tensor::from_values({2}, {1.0, -1.0});
  Tape tape;
  {
    NoTape guard;
    Tensor y = activation(x, Act::tanh);
    CHECK(y.is_leaf());
  }
  CHECK(tape.size() == 0);
}
