#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "snncraft/model.hpp"
#include "snncraft/rng.hpp"

using namespace snncraft;

namespace {

ModelGraph tiny_snn(std::uint64_t seed, std::size_t T) {
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d(3, 2, 1, 1), LayerSpec::neuron(), LayerSpec::avgpool(2),
      LayerSpec::linear(3),          LayerSpec::neuron(), LayerSpec::linear(2),
      LayerSpec::output_accumulator(),
  };
  ModelGraph g = make_graph(std::move(layers), {6, 6, 1}, ExecMode::kSnn, T, seed);
  // thresholds low enough that the toy actually spikes
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    if (g.layers[l].kind == LayerKind::kNeuron) {
      g.params[l].v_t = 0.4;
      g.params[l].l_k = 0.8;
    }
  }
  return g;
}

Tensor random_image(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform();
  return t;
}

double smoothed_loss(const ModelGraph& g, const Tensor& x, std::size_t label,
                     const NeuronConfig& cfg) {
  SnnOptions opt;
  opt.neuron = cfg;
  opt.record = false;
  SnnRun run = forward_snn(g, x, opt);
  return softmax_cross_entropy(run.logits, label).loss;
}

}  // namespace

TEST_CASE("forward_ann: identity weights pass the input through") {
  std::vector<LayerSpec> layers = {LayerSpec::linear(3),
                                   LayerSpec::output_accumulator()};
  ModelGraph g = make_graph(std::move(layers), {3}, ExecMode::kAnn, 1, 1);
  g.params[0].w = Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor x({3}, {0.3, 0.5, 0.9});
  Tensor logits = forward_ann(g, x).logits;
  CHECK(max_abs_diff(logits, x) == 0.0);

  g.params[0].w.fill(0.0);
  logits = forward_ann(g, x).logits;
  for (double v : logits.data) CHECK(v == 0.0);
}

TEST_CASE("forward_ann: two-layer net equals hand matrix algebra") {
  std::vector<LayerSpec> layers = {LayerSpec::linear(2), LayerSpec::neuron(),
                                   LayerSpec::linear(2),
                                   LayerSpec::output_accumulator()};
  ModelGraph g = make_graph(std::move(layers), {2}, ExecMode::kAnn, 1, 1);
  g.params[0].w = Tensor({2, 2}, {1.0, -2.0, 0.5, 1.5});
  g.params[2].w = Tensor({2, 2}, {2.0, 0.0, -1.0, 1.0});
  Tensor x({2}, {1.0, 2.0});
  // h = relu(W1^T x) = relu([1*1+0.5*2, -2*1+1.5*2]) = [2, 1]
  // y = W2^T h = [2*2 - 1*1, 0 + 1] = [3, 1]
  Tensor logits = forward_ann(g, x).logits;
  CHECK(logits.data[0] == doctest::Approx(3.0));
  CHECK(logits.data[1] == doctest::Approx(1.0));
}

TEST_CASE("forward_ann rejects SNN graphs") {
  ModelGraph g = tiny_snn(1, 2);
  CHECK_THROWS_AS(forward_ann(g, random_image({6, 6, 1}, 2)), ContractViolation);
}

TEST_CASE("backward_ann matches finite differences") {
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d(3, 2, 1, 1), LayerSpec::neuron(), LayerSpec::avgpool(2),
      LayerSpec::linear(2),          LayerSpec::output_accumulator()};
  ModelGraph g = make_graph(std::move(layers), {4, 4, 1}, ExecMode::kAnn, 1, 3);
  Tensor x = random_image({4, 4, 1}, 4);
  const std::size_t label = 1;

  AnnOptions opt;
  opt.record = true;
  AnnRun run = forward_ann(g, x, opt);
  LossGrad lg = softmax_cross_entropy(run.logits, label);
  AnnGradients grads = backward_ann(g, run, lg.grad_logits);

  auto loss_of = [&](const ModelGraph& gg, const Tensor& xx) {
    return softmax_cross_entropy(forward_ann(gg, xx).logits, label).loss;
  };
  const double h = 1e-5;
  for (std::size_t l : {std::size_t(0), std::size_t(3)}) {
    for (std::size_t i = 0; i < g.params[l].w.size(); i += 2) {
      ModelGraph gp = g, gm = g;
      gp.params[l].w.data[i] += h;
      gm.params[l].w.data[i] -= h;
      double fd = (loss_of(gp, x) - loss_of(gm, x)) / (2 * h);
      CHECK(std::fabs(fd - grads.grad_w[l].data[i]) < 1e-6);
    }
  }
  for (std::size_t i = 0; i < x.size(); i += 3) {
    Tensor xp = x, xm = x;
    xp.data[i] += h;
    xm.data[i] -= h;
    double fd = (loss_of(g, xp) - loss_of(g, xm)) / (2 * h);
    CHECK(std::fabs(fd - grads.grad_input.data[i]) < 1e-6);
  }
}

TEST_CASE("forward_snn: zero input stays silent") {
  ModelGraph g = tiny_snn(7, 3);
  SnnOptions opt;
  SnnRun run = forward_snn(g, Tensor::zeros({6, 6, 1}), opt);
  for (double v : run.logits.data) CHECK(v == 0.0);
  for (const SpikeTrace& tr : run.traces) {
    for (const Tensor& s : tr.spikes)
      for (double v : s.data) CHECK(v == 0.0);
  }
}

TEST_CASE("forward_snn: hand-traced single neuron fires on step 2") {
  // one input pixel, weight 1, constant drive 0.6, v_t=1, l_k=1:
  // u after step 1 = 0.6 (z=-0.4, silent), after step 2 = 1.2 -> spike
  std::vector<LayerSpec> layers = {LayerSpec::linear(1), LayerSpec::neuron(),
                                   LayerSpec::linear(1),
                                   LayerSpec::output_accumulator()};
  ModelGraph g = make_graph(std::move(layers), {1}, ExecMode::kSnn, 2, 1);
  g.params[0].w = Tensor({1, 1}, {1.0});
  g.params[1].v_t = 1.0;
  g.params[1].l_k = 1.0;
  g.params[2].w = Tensor({1, 1}, {1.0});

  Tensor x({1}, {0.6});
  SnnOptions opt;
  SnnRun run = forward_snn(g, x, opt);
  REQUIRE(run.traces[1].steps() == 2);
  CHECK(run.traces[1].spikes[0].data[0] == 0.0);
  CHECK(run.traces[1].potentials[0].data[0] == doctest::Approx(0.6));
  CHECK(run.traces[1].spikes[1].data[0] == 1.0);
  CHECK(run.traces[1].potentials[1].data[0] == doctest::Approx(1.2));
  CHECK(run.final_membrane[1].data[0] == doctest::Approx(0.2));
}

TEST_CASE("direct encoder feeds the pixels unchanged each step") {
  Tensor x = random_image({3, 3, 1}, 9);
  CHECK(max_abs_diff(encode_direct(x), x) == 0.0);
}

TEST_CASE("poisson encoder rates") {
  Tensor zeros = Tensor::zeros({4, 4, 1});
  Tensor ones = Tensor::full({4, 4, 1}, 1.0);
  for (std::size_t t = 0; t < 20; ++t) {
    Tensor sz = encode_poisson(zeros, t, 5);
    Tensor so = encode_poisson(ones, t, 5);
    for (double v : sz.data) CHECK(v == 0.0);
    for (double v : so.data) CHECK(v == 1.0);
  }
  Tensor half = Tensor::full({1}, 0.5);
  double spikes = 0.0;
  for (std::size_t t = 0; t < 10000; ++t) spikes += encode_poisson(half, t, 6).data[0];
  CHECK(std::fabs(spikes / 10000.0 - 0.5) < 0.02);

  CHECK_THROWS_AS(encode_poisson(Tensor({1}, {1.5}), 0, 0), InputError);
}

TEST_CASE("no-spike SNN with a single weighted layer is the linear map") {
  std::vector<LayerSpec> layers = {LayerSpec::linear(2),
                                   LayerSpec::output_accumulator()};
  ModelGraph g = make_graph(std::move(layers), {4}, ExecMode::kSnn, 5, 11);
  Tensor x({4}, {0.1, 0.9, 0.4, 0.7});
  Tensor flat = x;
  Tensor want = linear_forward(flat, g.params[0].w);
  SnnRun run = forward_snn(g, x, {});
  CHECK(max_abs_diff(run.logits, want) < 1e-8);
}

TEST_CASE("huge hidden thresholds integrate without spiking") {
  ModelGraph g = tiny_snn(13, 4);
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    if (g.layers[l].kind == LayerKind::kNeuron) {
      g.params[l].v_t = 1e30;
      g.params[l].l_k = 1.0;
    }
  }
  Tensor x = random_image({6, 6, 1}, 14);
  SnnOptions opt;
  SnnRun run = forward_snn(g, x, opt);
  for (double v : run.logits.data) CHECK(v == 0.0);

  // hidden membrane equals the sum of its drive: conv repeated T times
  Tensor drive = conv2d_forward(x, g.params[0].w, g.layers[0].conv);
  Tensor want = drive;
  scale_in_place(want, 4.0);
  CHECK(max_abs_diff(run.final_membrane[1], want) < 1e-8);
}

TEST_CASE("backward_snn matches finite differences of the smoothed loss") {
  ModelGraph g = tiny_snn(17, 3);
  Tensor x = random_image({6, 6, 1}, 18);
  const std::size_t label = 0;
  NeuronConfig cfg;
  cfg.fire_mode = FireMode::kSmoothed;

  SnnOptions opt;
  opt.neuron = cfg;
  opt.record = true;
  SnnRun run = forward_snn(g, x, opt);
  LossGrad lg = softmax_cross_entropy(run.logits, label);
  SnnGradients grads = backward_snn(g, run, lg.grad_logits, cfg);

  const double h = 1e-3;
  // weights of every weighted layer
  for (std::size_t l : {std::size_t(0), std::size_t(3), std::size_t(5)}) {
    for (std::size_t i = 0; i < g.params[l].w.size(); i += 4) {
      ModelGraph gp = g, gm = g;
      gp.params[l].w.data[i] += h;
      gm.params[l].w.data[i] -= h;
      double fd = (smoothed_loss(gp, x, label, cfg) - smoothed_loss(gm, x, label, cfg)) / (2 * h);
      CHECK(std::fabs(fd - grads.grad_w[l].data[i]) <= 1e-4);
    }
  }
  // thresholds and leaks
  for (std::size_t l : {std::size_t(1), std::size_t(4)}) {
    ModelGraph gp = g, gm = g;
    gp.params[l].v_t += h;
    gm.params[l].v_t -= h;
    double fd = (smoothed_loss(gp, x, label, cfg) - smoothed_loss(gm, x, label, cfg)) / (2 * h);
    CHECK(std::fabs(fd - grads.grad_v_t[l]) <= 1e-4);

    ModelGraph gp2 = g, gm2 = g;
    gp2.params[l].l_k += h;
    gm2.params[l].l_k -= h;
    fd = (smoothed_loss(gp2, x, label, cfg) - smoothed_loss(gm2, x, label, cfg)) / (2 * h);
    CHECK(std::fabs(fd - grads.grad_l_k[l]) <= 1e-4);
  }
  // input pixels
  for (std::size_t i = 0; i < x.size(); i += 5) {
    Tensor xp = x, xm = x;
    xp.data[i] += h;
    xm.data[i] -= h;
    double fd = (smoothed_loss(g, xp, label, cfg) - smoothed_loss(g, xm, label, cfg)) / (2 * h);
    CHECK(std::fabs(fd - grads.grad_input.data[i]) <= 1e-4);
  }
}

TEST_CASE("dropout is deterministic per seed and off at evaluation") {
  ModelGraph g = tiny_snn(19, 2);
  std::vector<LayerSpec> layers = g.layers;
  layers.insert(layers.begin() + 5, LayerSpec::dropout(0.3));
  ModelGraph gd = make_graph(layers, {6, 6, 1}, ExecMode::kSnn, 2, 19);

  Tensor x = random_image({6, 6, 1}, 20);
  SnnOptions train_opt;
  train_opt.training = true;
  train_opt.dropout_seed = 555;
  Tensor a = forward_snn(gd, x, train_opt).logits;
  Tensor b = forward_snn(gd, x, train_opt).logits;
  CHECK(max_abs_diff(a, b) == 0.0);

  SnnOptions eval_opt;
  Tensor c = forward_snn(gd, x, eval_opt).logits;
  Tensor d = forward_snn(gd, x, eval_opt).logits;
  CHECK(max_abs_diff(c, d) == 0.0);
}

TEST_CASE("conversion sets unit leaks and copies weights bit-exactly") {
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d(3, 2, 1, 1), LayerSpec::relu(), LayerSpec::avgpool(2),
      LayerSpec::linear(3),          LayerSpec::relu(), LayerSpec::linear(2),
      LayerSpec::output_accumulator()};
  ModelGraph ann = make_graph(std::move(layers), {6, 6, 1}, ExecMode::kAnn, 1, 23);
  std::vector<Tensor> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(random_image({6, 6, 1}, 100 + i));

  ModelGraph snn = convert_ann_to_snn(ann, batch, 99.7, 4);
  CHECK(snn.mode == ExecMode::kSnn);
  CHECK(snn.time_steps == 4);
  for (std::size_t l = 0; l < snn.layers.size(); ++l) {
    if (snn.layers[l].kind == LayerKind::kNeuron) {
      CHECK(snn.params[l].l_k == 1.0);
      CHECK(snn.params[l].v_t >= kThresholdFloor);
    }
    if (!ann.params[l].w.empty()) {
      CHECK(max_abs_diff(snn.params[l].w, ann.params[l].w) == 0.0);
    }
  }
}

TEST_CASE("conversion percentile 100 on one sample is the observed max") {
  std::vector<LayerSpec> layers = {LayerSpec::linear(3), LayerSpec::relu(),
                                   LayerSpec::linear(2),
                                   LayerSpec::output_accumulator()};
  ModelGraph ann = make_graph(std::move(layers), {4}, ExecMode::kAnn, 1, 29);
  Tensor x = random_image({4}, 30);
  ModelGraph snn = convert_ann_to_snn(ann, {x}, 100.0, 3);

  // layer 1 sees the raw linear output at every step; max over steps is the
  // single-step max since the input repeats and the prefix has no state
  Tensor flat = x;
  Tensor pre = linear_forward(flat, ann.params[0].w);
  double want = *std::max_element(pre.data.begin(), pre.data.end());
  CHECK(snn.params[1].v_t == doctest::Approx(std::max(want, kThresholdFloor)));
}

TEST_CASE("raising the percentile never lowers a threshold") {
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d(3, 2, 1, 1), LayerSpec::relu(), LayerSpec::avgpool(2),
      LayerSpec::linear(3),          LayerSpec::relu(), LayerSpec::linear(2),
      LayerSpec::output_accumulator()};
  ModelGraph ann = make_graph(std::move(layers), {6, 6, 1}, ExecMode::kAnn, 1, 31);
  std::vector<Tensor> batch;
  for (int i = 0; i < 8; ++i) batch.push_back(random_image({6, 6, 1}, 200 + i));

  ModelGraph lo = convert_ann_to_snn(ann, batch, 90.0, 4);
  ModelGraph hi = convert_ann_to_snn(ann, batch, 99.7, 4);
  for (std::size_t l = 0; l < lo.layers.size(); ++l) {
    if (lo.layers[l].kind == LayerKind::kNeuron) {
      CHECK(hi.params[l].v_t >= lo.params[l].v_t - 1e-12);
    }
  }
}

TEST_CASE("conversion needs a calibration batch") {
  std::vector<LayerSpec> layers = {LayerSpec::linear(2),
                                   LayerSpec::output_accumulator()};
  ModelGraph ann = make_graph(std::move(layers), {4}, ExecMode::kAnn, 1, 37);
  CHECK_THROWS_AS(convert_ann_to_snn(ann, {}, 99.7, 2), InputError);
}

TEST_CASE("percentile interpolation") {
  CHECK(percentile_value({1, 2, 3, 4}, 100.0) == 4.0);
  CHECK(percentile_value({1, 2, 3, 4}, 0.0) == 1.0);
  CHECK(percentile_value({1, 2, 3, 4}, 50.0) == doctest::Approx(2.5));
  CHECK_THROWS_AS(percentile_value({}, 50.0), InputError);
}

TEST_CASE("graph validation catches bad SNN stacks") {
  std::vector<LayerSpec> layers = {LayerSpec::linear(2), LayerSpec::linear(2),
                                   LayerSpec::output_accumulator()};
  CHECK_THROWS_AS(make_graph(layers, {4}, ExecMode::kSnn, 2, 1), ConfigError);

  std::vector<LayerSpec> relu_stack = {LayerSpec::linear(2), LayerSpec::relu(),
                                       LayerSpec::linear(2),
                                       LayerSpec::output_accumulator()};
  CHECK_THROWS_AS(make_graph(relu_stack, {4}, ExecMode::kSnn, 2, 1), ConfigError);
  CHECK_NOTHROW(make_graph(relu_stack, {4}, ExecMode::kAnn, 1, 1));
}

TEST_CASE("ANN forward ignores T and is deterministic") {
  std::vector<LayerSpec> layers = {LayerSpec::linear(2),
                                   LayerSpec::output_accumulator()};
  ModelGraph g = make_graph(std::move(layers), {4}, ExecMode::kAnn, 1, 41);
  Tensor x = random_image({4}, 42);
  Tensor a = forward_ann(g, x).logits;
  g.time_steps = 9;
  Tensor b = forward_ann(g, x).logits;
  CHECK(max_abs_diff(a, b) == 0.0);
}
