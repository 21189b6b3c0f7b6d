#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "snncraft/attacks.hpp"
#include "snncraft/dataset.hpp"
#include "snncraft/rng.hpp"

using namespace snncraft;

namespace {

ModelGraph linear_ann(std::uint64_t seed, std::size_t d_in = 4, std::size_t classes = 3) {
  std::vector<LayerSpec> layers = {LayerSpec::linear(classes),
                                   LayerSpec::output_accumulator()};
  return make_graph(std::move(layers), {d_in}, ExecMode::kAnn, 1, seed);
}

ModelGraph toy_snn(std::uint64_t seed) {
  std::vector<LayerSpec> layers = {LayerSpec::linear(3), LayerSpec::neuron(),
                                   LayerSpec::linear(2),
                                   LayerSpec::output_accumulator()};
  ModelGraph g = make_graph(std::move(layers), {2, 2, 1}, ExecMode::kSnn, 3, seed);
  g.params[1].v_t = 0.5;
  g.params[1].l_k = 0.9;
  return g;
}

Tensor random_pixels(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform();
  return t;
}

}  // namespace

TEST_CASE("zero-weight model has zero input gradient") {
  ModelGraph g = linear_ann(1);
  g.params[0].w.fill(0.0);
  Tensor grad = input_gradient(g, random_pixels({4}, 2), 0);
  for (double v : grad.data) CHECK(v == 0.0);
}

TEST_CASE("linear ANN input gradient equals the softmax-CE closed form") {
  ModelGraph g = linear_ann(3);
  Tensor x = random_pixels({4}, 4);
  const std::size_t label = 2;

  Tensor logits = forward_ann(g, x).logits;
  LossGrad lg = softmax_cross_entropy(logits, label);
  // d loss / d x_i = sum_j W[i][j] * (p_j - y_j)
  Tensor grad = input_gradient(g, x, label);
  for (std::size_t i = 0; i < 4; ++i) {
    double want = 0.0;
    for (std::size_t j = 0; j < 3; ++j)
      want += g.params[0].w.data[i * 3 + j] * lg.grad_logits.data[j];
    CHECK(grad.data[i] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("SNN input gradient matches finite differences of the smoothed loss") {
  ModelGraph g = toy_snn(7);
  Tensor x = random_pixels({2, 2, 1}, 8);
  const std::size_t label = 1;

  AttackConfig cfg;
  cfg.fire_mode = FireMode::kSmoothed;
  Tensor grad = input_gradient(g, x, label, cfg);

  NeuronConfig ncfg;
  ncfg.fire_mode = FireMode::kSmoothed;
  auto loss_of = [&](const Tensor& xx) {
    SnnOptions opt;
    opt.neuron = ncfg;
    opt.record = false;
    return softmax_cross_entropy(forward_snn(g, xx, opt).logits, label).loss;
  };
  const double h = 1e-3;
  for (std::size_t i = 0; i < 4; ++i) {
    Tensor xp = x, xm = x;
    xp.data[i] += h;
    xm.data[i] -= h;
    double fd = (loss_of(xp) - loss_of(xm)) / (2 * h);
    CHECK(std::fabs(fd - grad.data[i]) <= 1e-4);
  }
}

TEST_CASE("label range is validated") {
  ModelGraph g = linear_ann(9);
  CHECK_THROWS_AS(input_gradient(g, random_pixels({4}, 10), 7), InputError);
}

TEST_CASE("fgsm: eps 0 returns the input bit-exactly") {
  ModelGraph g = linear_ann(11);
  Tensor x = random_pixels({4}, 12);
  AttackConfig cfg;
  cfg.epsilon = 0.0;
  Tensor adv = fgsm(g, x, 0, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(adv.data[i] == x.data[i]);
}

TEST_CASE("fgsm moves pixels by exactly eps and clips") {
  ModelGraph g = linear_ann(13);
  const double eps = 8.0 / 255.0;
  AttackConfig cfg;
  cfg.epsilon = eps;

  Tensor x({4}, {0.5, 0.99, 0.004, 0.25});
  Tensor grad = input_gradient(g, x, 0, cfg);
  Tensor adv = fgsm(g, x, 0, cfg);
  for (std::size_t i = 0; i < 4; ++i) {
    double s = grad.data[i] > 0 ? 1.0 : (grad.data[i] < 0 ? -1.0 : 0.0);
    double want = std::min(1.0, std::max(0.0, x.data[i] + eps * s));
    CHECK(adv.data[i] == doctest::Approx(want).epsilon(1e-15));
    CHECK(std::fabs(adv.data[i] - x.data[i]) <= eps);
  }
  // a pixel at 0.99 pushed upward saturates at 1.0
  if (grad.data[1] > 0) CHECK(adv.data[1] == 1.0);
}

TEST_CASE("pgd K=1 alpha=eps equals fgsm pixel-exactly") {
  ModelGraph ann = linear_ann(17);
  ModelGraph snn = toy_snn(18);
  Rng rng(19);
  for (int rep = 0; rep < 8; ++rep) {
    AttackConfig cfg;
    cfg.epsilon = 8.0 / 255.0;
    cfg.alpha = cfg.epsilon;
    cfg.iters = 1;
    cfg.random_start = false;

    Tensor xa = random_pixels({4}, rng.next_u64());
    Tensor f = fgsm(ann, xa, rep % 3, cfg);
    Tensor p = pgd(ann, xa, rep % 3, cfg);
    for (std::size_t i = 0; i < xa.size(); ++i) CHECK(f.data[i] == p.data[i]);

    Tensor xs = random_pixels({2, 2, 1}, rng.next_u64());
    Tensor fs = fgsm(snn, xs, rep % 2, cfg);
    Tensor ps = pgd(snn, xs, rep % 2, cfg);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(fs.data[i] == ps.data[i]);
  }
}

TEST_CASE("pgd honors the L-inf ball and the pixel range") {
  ModelGraph g = toy_snn(23);
  AttackConfig cfg;
  cfg.family = AttackFamily::kPgd;
  cfg.epsilon = 8.0 / 255.0;
  cfg.alpha = 0.01;
  cfg.iters = 7;
  Rng rng(24);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor x = random_pixels({2, 2, 1}, rng.next_u64());
    Tensor adv = pgd(g, x, rep % 2, cfg);
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(std::fabs(adv.data[i] - x.data[i]) <= cfg.epsilon);
      CHECK(adv.data[i] >= 0.0);
      CHECK(adv.data[i] <= 1.0);
    }
  }
}

TEST_CASE("pgd eps 0 is the identity regardless of K") {
  ModelGraph g = linear_ann(27);
  AttackConfig cfg;
  cfg.family = AttackFamily::kPgd;
  cfg.epsilon = 0.0;
  cfg.alpha = 0.01;
  cfg.iters = 5;
  Tensor x = random_pixels({4}, 28);
  Tensor adv = pgd(g, x, 1, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(adv.data[i] == x.data[i]);
}

TEST_CASE("random start stays inside the ball") {
  ModelGraph g = linear_ann(29);
  AttackConfig cfg;
  cfg.family = AttackFamily::kPgd;
  cfg.epsilon = 0.1;
  cfg.alpha = 0.02;
  cfg.iters = 3;
  cfg.random_start = true;
  cfg.seed = 99;
  Tensor x = random_pixels({4}, 30);
  Tensor adv = pgd(g, x, 0, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::fabs(adv.data[i] - x.data[i]) <= cfg.epsilon);
  }
}

TEST_CASE("black-box with source == target reduces to white-box") {
  ModelGraph g = toy_snn(31);
  AttackConfig cfg;
  cfg.epsilon = 8.0 / 255.0;
  Tensor x = random_pixels({2, 2, 1}, 32);
  Tensor wb = fgsm(g, x, 1, cfg);
  Tensor bb = blackbox_generate(g, g, x, 1, cfg);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(wb.data[i] == bb.data[i]);
}

TEST_CASE("black-box rejects mismatched input shapes") {
  ModelGraph a = linear_ann(33, 4);
  ModelGraph b = linear_ann(34, 6);
  AttackConfig cfg;
  CHECK_THROWS_AS(blackbox_generate(a, b, random_pixels({4}, 35), 0, cfg),
                  ConfigError);
}

TEST_CASE("attack sweep starts at clean accuracy and ends near chance") {
  // trained-enough toy: use a separable linear problem so accuracy is high
  ModelGraph g = linear_ann(37, 4, 2);
  g.params[0].w = Tensor({4, 2}, {2, -2, 2, -2, -2, 2, -2, 2});
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;
  Rng rng(38);
  for (int i = 0; i < 40; ++i) {
    std::size_t y = i % 2;
    Tensor x({4}, {0.0, 0.0, 0.0, 0.0});
    for (std::size_t j = 0; j < 4; ++j) {
      double base = (j < 2) == (y == 0) ? 0.8 : 0.2;
      x.data[j] = std::min(1.0, std::max(0.0, base + 0.05 * rng.normal()));
    }
    images.push_back(x);
    labels.push_back(y);
  }

  std::size_t clean = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (predict_class(g, images[i]) == labels[i]) ++clean;
  }
  double clean_acc = 100.0 * double(clean) / double(images.size());

  AttackConfig cfg;
  cfg.family = AttackFamily::kPgd;
  cfg.alpha = 0.01;
  cfg.iters = 7;
  auto curve = attack_sweep(g, images, labels, SweepAxis::kEpsilon,
                            {0.0, 8.0 / 255, 64.0 / 255, 1.0}, cfg);
  CHECK(curve.front().accuracy == doctest::Approx(clean_acc));
  CHECK(curve.back().accuracy <= 55.0);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].accuracy <= curve[i - 1].accuracy + 2.0);
  }
}

TEST_CASE("attack config validation") {
  AttackConfig cfg;
  cfg.epsilon = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.epsilon = 0.1;
  cfg.family = AttackFamily::kPgd;
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
