#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "cyclet/gradcheck.hpp"
#include "cyclet/nets.hpp"

using namespace cyclet;

namespace {

Tensor rand_image(const Shape& shape, SplitMix64& rng) {
  Tensor t = Tensor::zeros(shape);
  for (auto& v : t.values_mut()) v = 2.0 * rng.next_unit() - 1.0;
  return t;
}

void zero_conv(detail::ConvParams& c) {
  std::fill(c.kernel.values_mut().begin(), c.kernel.values_mut().end(), 0.0);
  std::fill(c.bias.values_mut().begin(), c.bias.values_mut().end(), 0.0);
}

}  // namespace

TEST_CASE("generator keeps shape and stays in [-1,1]") {
  GeneratorNet g;
  init_params(g, 99);
  SplitMix64 rng(1);
  for (int b : {1, 4}) {
    Tensor x = rand_image({b, 3, 32, 32}, rng);
    NoTape guard;
    Tensor y = g.forward(x);
    REQUIRE(y.shape() == x.shape());
    for (double v : y.values()) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK_THROWS_AS(g.forward(Tensor::zeros({1, 1, 32, 32})), ShapeError);
  CHECK_THROWS_AS(g.forward(Tensor::zeros({1, 3, 31, 31})), ShapeError);
}

TEST_CASE("generator output bounded for arbitrary parameter scale") {
  GeneratorNet g;
  SplitMix64 rng(2);
  for (auto& [name, t] : g.params().items) {
    Tensor tt = t;
    for (auto& v : tt.values_mut()) v = 20.0 * (2.0 * rng.next_unit() - 1.0);
  }
  Tensor x = rand_image({1, 3, 16, 16}, rng);
  NoTape guard;
  Tensor y = g.forward(x);
  for (double v : y.values()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("residual block with zeroed convs is the identity") {
  GeneratorNet g;
  init_params(g, 5);
  auto& rb = g.res_block(0);
  zero_conv(rb.conv1);
  zero_conv(rb.conv2);
  SplitMix64 rng(6);
  Tensor h = rand_image({1, 32, 6, 6}, rng);
  NoTape guard;
  Tensor out = GeneratorNet::res_forward(rb, h);
  REQUIRE(out.size() == h.size());
  for (std::int64_t i = 0; i < h.size(); ++i) CHECK(out.values()[i] == h.values()[i]);
}

TEST_CASE("discriminator shapes and zero-parameter scores") {
  DiscriminatorNet d;
  init_params(d, 7);
  SplitMix64 rng(8);
  Tensor x = rand_image({2, 3, 32, 32}, rng);
  NoTape guard;
  auto out = d.forward(x);
  CHECK(out.scores.shape() == Shape{2, 1, 4, 4});
  CHECK(out.features.shape() == Shape{2, 64, 4, 4});

  DiscriminatorNet zeroed;  // all parameters zero
  auto z = zeroed.forward(x);
  for (double v : z.scores.values()) CHECK(v == 0.0);

  CHECK_THROWS_AS(d.forward(Tensor::zeros({1, 3, 12, 12})), ShapeError);
}

TEST_CASE("feature tap feeds the score conv") {
  DiscriminatorNet d;
  init_params(d, 11);
  SplitMix64 rng(12);
  Tensor x = rand_image({1, 3, 32, 32}, rng);
  NoTape guard;
  auto out = d.forward(x);
  ParamSet ps = d.params();
  Tensor recomputed = conv2d(out.features, ps.find("score.kernel"), ps.find("score.bias"), 1, 1);
  REQUIRE(recomputed.size() == out.scores.size());
  for (std::int64_t i = 0; i < out.scores.size(); ++i)
    CHECK(recomputed.values()[i] == out.scores.values()[i]);
}

TEST_CASE("feature tap is leaky_relu output") {
  DiscriminatorNet d;
  init_params(d, 13);
  SplitMix64 rng(14);
  Tensor x = rand_image({1, 3, 16, 16}, rng);
  NoTape guard;
  auto out = d.forward(x);
  // Negative entries are downscaled preactivations: v = 0.2 * pre, so the
  // preactivation recovered as v / 0.2 must be strictly negative and larger
  // in magnitude.
  int negatives = 0;
  for (double v : out.features.values()) {
    if (v < 0.0) {
      ++negatives;
      CHECK(std::abs(v) <= kLeakySlope * std::abs(v / kLeakySlope) + 1e-15);
    }
  }
  CHECK(negatives > 0);
}

TEST_CASE("init_params is deterministic and sets the documented constants") {
  GeneratorNet a, b;
  init_params(a, 1234);
  init_params(b, 1234);
  auto pa = a.params(), pb = b.params();
  REQUIRE(pa.items.size() == pb.items.size());
  for (std::size_t i = 0; i < pa.items.size(); ++i) {
    const auto& ta = pa.items[i].second;
    const auto& tb = pb.items[i].second;
    REQUIRE(ta.size() == tb.size());
    for (std::int64_t j = 0; j < ta.size(); ++j) CHECK(ta.values()[j] == tb.values()[j]);
  }

  GeneratorNet c;
  init_params(c, 5678);
  bool any_diff = false;
  auto pc = c.params();
  for (std::int64_t j = 0; j < pa.items[0].second.size(); ++j)
    if (pa.items[0].second.values()[j] != pc.items[0].second.values()[j]) any_diff = true;
  CHECK(any_diff);

  for (auto& [name, t] : pa.items) {
    if (name.ends_with(".gain"))
      for (double v : t.values()) CHECK(v == 1.0);
    if (name.ends_with(".bias") || name.ends_with(".shift"))
      for (double v : t.values()) CHECK(v == 0.0);
  }
}

TEST_CASE("kernel init statistics") {
  GeneratorNet g;
  init_params(g, 31415);
  double acc = 0.0;
  std::int64_t n = 0;
  for (auto& [name, t] : g.params().items) {
    if (!name.ends_with(".kernel")) continue;
    for (double v : t.values()) acc += v;
    n += t.size();
  }
  REQUIRE(n > 1000);
  const double mean = acc / static_cast<double>(n);
  CHECK(std::abs(mean) < 3.0 * 0.02 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("collect_params ordering, prefixes, and totals") {
  GeneratorNet g;
  DiscriminatorNet d;
  auto g1 = collect_params(g, "G");
  auto g2 = collect_params(g, "G");
  REQUIRE(g1.items.size() == g2.items.size());
  for (std::size_t i = 0; i < g1.items.size(); ++i)
    CHECK(g1.items[i].first == g2.items[i].first);

  auto dx = collect_params(d, "DX");
  std::set<std::string> names;
  for (auto& [n, t] : g1.items) names.insert(n);
  for (auto& [n, t] : dx.items) names.insert(n);
  CHECK(names.size() == g1.items.size() + dx.items.size());
  for (auto& [n, t] : g1.items) CHECK(n.starts_with("G."));
  for (auto& [n, t] : dx.items) CHECK(n.starts_with("DX."));

  CHECK(g1.total_size() == kGeneratorParamCount);
  CHECK(dx.total_size() == kDiscriminatorParamCount);
}

TEST_CASE("generator gradients match finite differences for every parameter") {
  GeneratorNet g;
  init_params(g, 246);
  SplitMix64 rng(135);
  Tensor x = rand_image({1, 3, 16, 16}, rng);
  auto loss = [&] { return mean(g.forward(x)); };
  GradCheckOptions opts;
  opts.max_elements = 4;
  for (auto& [name, t] : g.params().items) {
    auto dir = check_gradient_directional("G/" + name, loss, t, rng, opts);
    CHECK(dir.ok);
    auto elem = check_gradient_elementwise("G/" + name, loss, t, rng, opts);
    CHECK(elem.ok);
  }
  auto input_rep = check_gradient_elementwise("G/input", loss, x, rng, opts);
  CHECK(input_rep.ok);
}

TEST_CASE("discriminator gradients match finite differences") {
  DiscriminatorNet d;
  init_params(d, 864);
  SplitMix64 rng(975);
  Tensor x = rand_image({1, 3, 16, 16}, rng);
  auto loss = [&] { return mean_square_to(d.forward(x).scores, 1.0); };
  GradCheckOptions opts;
  opts.max_elements = 4;
  for (auto& [name, t] : d.params().items) {
    CHECK(check_gradient_directional("D/" + name, loss, t, rng, opts).ok);
  }
}

TEST_CASE("detach_params blocks discriminator parameter gradients") {
  DiscriminatorNet d;
  init_params(d, 555);
  SplitMix64 rng(556);
  Tensor x = rand_image({1, 3, 16, 16}, rng);
  ParamSet ps = d.params();
  ps.zero_grad();
  x.zero_grad();
  {
    Tape tape;
    Tensor l = mean_abs_diff(d.forward(x, /*detach_params=*/true).features,
                             Tensor::zeros({1, 64, 2, 2}));
    tape.backward(l);
  }
  for (auto& [name, t] : ps.items)
    for (double gv : t.grad()) CHECK(gv == 0.0);
  double img_grad_norm = 0.0;
  for (double gv : x.grad()) img_grad_norm += std::abs(gv);
  CHECK(img_grad_norm > 0.0);

  // and the detached forward produces bitwise-identical values
  NoTape guard;
  auto live = d.forward(x, false);
  auto detached = d.forward(x, true);
  for (std::int64_t i = 0; i < live.features.size(); ++i)
    CHECK(live.features.values()[i] == detached.features.values()[i]);
}
