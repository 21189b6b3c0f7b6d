#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "snncraft/attacks.hpp"
#include "snncraft/rng.hpp"
#include "snncraft/training.hpp"

using namespace snncraft;

namespace {

// Small separable task: class 0 lights the left half, class 1 the right.
Dataset halves_dataset(std::size_t n, std::uint64_t seed, std::size_t side = 6) {
  Dataset ds;
  ds.height = side;
  ds.width = side;
  ds.channels = 1;
  ds.classes = 2;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t y = i % 2;
    Tensor img = Tensor::zeros({side, side, 1});
    for (std::size_t r = 0; r < side; ++r)
      for (std::size_t c = 0; c < side; ++c) {
        bool hot = (c < side / 2) == (y == 0);
        double v = (hot ? 0.8 : 0.2) + 0.05 * rng.normal();
        img.at3(r, c, 0) = std::min(1.0, std::max(0.0, v));
      }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(y);
  }
  return ds;
}

ModelGraph small_ann(std::uint64_t seed, std::size_t side = 6) {
  std::vector<LayerSpec> layers = {LayerSpec::linear(8), LayerSpec::relu(),
                                   LayerSpec::linear(2),
                                   LayerSpec::output_accumulator()};
  return make_graph(std::move(layers), {side, side, 1}, ExecMode::kAnn, 1, seed);
}

TrainConfig snn_config(TrainMode mode) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.time_steps = 4;
  cfg.periods = 2;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.lr = LrSchedule::snn_default();
  cfg.lr.initial = 1e-3;
  cfg.seed = 5;
  return cfg;
}

std::vector<double> flat_params(const ModelGraph& g) {
  std::vector<double> out;
  for (const LayerParams& p : g.params) {
    out.insert(out.end(), p.w.data.begin(), p.w.data.end());
    out.push_back(p.v_t);
    out.push_back(p.l_k);
  }
  return out;
}

}  // namespace

TEST_CASE("lr schedule hits the configured fractions") {
  LrSchedule ann = LrSchedule::ann_default();
  CHECK(ann.rate_at(0, 240) == doctest::Approx(0.01));
  CHECK(ann.rate_at(149, 240) == doctest::Approx(0.01));
  CHECK(ann.rate_at(150, 240) == doctest::Approx(0.001));   // 62.5%
  CHECK(ann.rate_at(180, 240) == doctest::Approx(0.0001));  // 75%
  CHECK(ann.rate_at(210, 240) == doctest::Approx(1e-5));    // 87.5%

  LrSchedule snn = LrSchedule::snn_default();
  CHECK(snn.rate_at(0, 30) == doctest::Approx(1e-4));
  CHECK(snn.rate_at(17, 30) == doctest::Approx(1e-4));
  CHECK(snn.rate_at(18, 30) == doctest::Approx(2e-5));   // 60%
  CHECK(snn.rate_at(24, 30) == doctest::Approx(4e-6));   // 80%
  CHECK(snn.rate_at(27, 30) == doctest::Approx(8e-7));   // 90%
}

TEST_CASE("zero epochs leave the weights untouched") {
  Dataset ds = halves_dataset(16, 1);
  ModelGraph g = small_ann(2);
  std::vector<double> before = flat_params(g);
  TrainConfig cfg;
  cfg.mode = TrainMode::kAnn;
  cfg.epochs = 0;
  cfg.lr = LrSchedule::ann_default();
  train_ann(g, ds, nullptr, cfg);
  CHECK(flat_params(g) == before);
}

TEST_CASE("ANN training solves a linearly separable toy task") {
  Dataset ds = halves_dataset(64, 3);
  ModelGraph g = small_ann(4);
  TrainConfig cfg;
  cfg.mode = TrainMode::kAnn;
  cfg.epochs = 30;
  cfg.batch_size = 8;
  cfg.lr = LrSchedule::ann_default();
  cfg.lr.initial = 0.05;
  cfg.seed = 5;
  TrainResult res = train_ann(g, ds, nullptr, cfg);
  CHECK(res.log.back().train_acc >= 99.0);
}

TEST_CASE("train_ann rejects SNN configs and graphs") {
  Dataset ds = halves_dataset(8, 6);
  ModelGraph g = small_ann(7);
  TrainConfig cfg;
  cfg.mode = TrainMode::kSnnHire;
  CHECK_THROWS_AS(train_ann(g, ds, nullptr, cfg), ContractViolation);
}

TEST_CASE("traditional training performs one update per batch over T steps") {
  Dataset ds = halves_dataset(32, 8);
  ModelGraph ann = small_ann(9);
  ModelGraph snn = convert_ann_to_snn(ann, {ds.images[0], ds.images[1]}, 99.7, 4);

  TrainConfig cfg = snn_config(TrainMode::kSnnTraditional);
  cfg.periods = 3;  // ignored in this mode
  cfg.epochs = 1;
  TrainResult res = train_snn(snn, ds, nullptr, cfg);
  CHECK(res.updates == 32 / 8);
  CHECK(res.peak_stored_steps == 4);
  CHECK(res.total_sim_steps == 32ull * 4);
}

TEST_CASE("hire training updates once per period") {
  Dataset ds = halves_dataset(32, 10);
  ModelGraph ann = small_ann(11);
  ModelGraph snn = convert_ann_to_snn(ann, {ds.images[0], ds.images[1]}, 99.7, 4);

  TrainConfig cfg = snn_config(TrainMode::kSnnHire);
  cfg.eps_s = 0.013;
  cfg.eps_t = 0.013;
  cfg.epochs = 1;
  TrainResult res = train_snn(snn, ds, nullptr, cfg);
  // T=4, N=2: two updates per batch, each storing 2 steps of traces
  CHECK(res.updates == (32 / 8) * 2);
  CHECK(res.peak_stored_steps == 2);
  CHECK(res.total_sim_steps == 32ull * 2 * 2);
  CHECK(res.kappa_checks > 0);
}

TEST_CASE("storage accounting helper") {
  TrainConfig cfg = snn_config(TrainMode::kSnnHire);
  cfg.time_steps = 6;
  cfg.periods = 2;
  CHECK(gradient_storage_steps(cfg) == 3);
  cfg.mode = TrainMode::kSnnTraditional;
  CHECK(gradient_storage_steps(cfg) == 6);
  cfg.mode = TrainMode::kSnnGaussian;
  cfg.periods = 1;
  CHECK(gradient_storage_steps(cfg) == 6);
  cfg.mode = TrainMode::kSnnHire;
  cfg.time_steps = 10;
  cfg.periods = 1;
  CHECK(gradient_storage_steps(cfg) == 10);
}

TEST_CASE("frozen threshold and leak stay bit-identical") {
  Dataset ds = halves_dataset(24, 12);
  ModelGraph ann = small_ann(13);
  ModelGraph snn = convert_ann_to_snn(ann, {ds.images[0], ds.images[1]}, 99.7, 4);

  std::vector<double> vts, lks;
  for (const LayerParams& p : snn.params) {
    vts.push_back(p.v_t);
    lks.push_back(p.l_k);
  }
  TrainConfig cfg = snn_config(TrainMode::kSnnHire);
  cfg.eps_s = 0.013;
  cfg.eps_t = 0.013;
  cfg.freeze_v_t = true;
  cfg.freeze_l_k = true;
  train_snn(snn, ds, nullptr, cfg);
  for (std::size_t l = 0; l < snn.params.size(); ++l) {
    CHECK(snn.params[l].v_t == vts[l]);
    CHECK(snn.params[l].l_k == lks[l]);
  }
}

TEST_CASE("hire with no noise and one period matches traditional bit for bit") {
  Dataset ds = halves_dataset(24, 14);
  ModelGraph ann = small_ann(15);
  ModelGraph base = convert_ann_to_snn(ann, {ds.images[0], ds.images[1]}, 99.7, 4);

  ModelGraph trad = base;
  TrainConfig tcfg = snn_config(TrainMode::kSnnTraditional);
  tcfg.periods = 1;
  tcfg.epochs = 3;
  train_snn(trad, ds, nullptr, tcfg);

  ModelGraph hire = base;
  TrainConfig hcfg = snn_config(TrainMode::kSnnHire);
  hcfg.periods = 1;
  hcfg.eps_s = 0.0;
  hcfg.eps_t = 0.0;
  hcfg.epochs = 3;
  train_snn(hire, ds, nullptr, hcfg);

  CHECK(flat_params(trad) == flat_params(hire));
}

TEST_CASE("gaussian noise is deterministic per seed and has the right spread") {
  Dataset ds = halves_dataset(16, 16);
  ModelGraph ann = small_ann(17);
  ModelGraph base = convert_ann_to_snn(ann, {ds.images[0], ds.images[1]}, 99.7, 4);

  TrainConfig cfg = snn_config(TrainMode::kSnnGaussian);
  cfg.eps_s = 0.013;
  cfg.eps_t = 0.1;  // wide bound so clipping is rare for the std estimate
  cfg.epochs = 1;

  std::vector<double> draws;
  auto collect = [&](const PeriodEvent& ev) {
    for (const Tensor& t : *ev.kappa_before)
      draws.insert(draws.end(), t.data.begin(), t.data.end());
  };
  ModelGraph g1 = base;
  train_snn(g1, ds, nullptr, cfg, collect);

  std::vector<double> draws2;
  auto collect2 = [&](const PeriodEvent& ev) {
    for (const Tensor& t : *ev.kappa_before)
      draws2.insert(draws2.end(), t.data.begin(), t.data.end());
  };
  ModelGraph g2 = base;
  train_snn(g2, ds, nullptr, cfg, collect2);
  CHECK(draws == draws2);

  double mean = 0.0;
  for (double v : draws) mean += v;
  mean /= static_cast<double>(draws.size());
  double var = 0.0;
  for (double v : draws) var += (v - mean) * (v - mean);
  double sd = std::sqrt(var / static_cast<double>(draws.size()));
  CHECK(std::fabs(sd - cfg.eps_s) / cfg.eps_s < 0.05);
}

TEST_CASE("kappa carries over from the last period of the previous batch") {
  Dataset ds = halves_dataset(16, 18);
  ModelGraph ann = small_ann(19);
  ModelGraph snn = convert_ann_to_snn(ann, {ds.images[0], ds.images[1]}, 99.7, 4);

  TrainConfig cfg = snn_config(TrainMode::kSnnHire);
  cfg.eps_s = 0.01;
  cfg.eps_t = 0.05;
  cfg.epochs = 1;
  cfg.batch_size = 8;  // two batches of 8

  struct Snapshot {
    std::size_t batch, period;
    std::vector<Tensor> before, after;
  };
  std::vector<Snapshot> events;
  train_snn(snn, ds, nullptr, cfg, [&](const PeriodEvent& ev) {
    events.push_back({ev.batch_index, ev.period, *ev.kappa_before, *ev.kappa_after});
  });

  REQUIRE(events.size() == 4);  // 2 batches x 2 periods
  // first period of the run starts from zero
  for (const Tensor& t : events[0].before)
    for (double v : t.data) CHECK(v == 0.0);
  // within a batch, the second period starts from the first period's output
  for (std::size_t s = 0; s < events[0].after.size(); ++s) {
    CHECK(max_abs_diff(events[1].before[s], events[0].after[s]) == 0.0);
  }
  // across the batch boundary, batch 2 period 1 starts from batch 1's last
  for (std::size_t s = 0; s < events[1].after.size(); ++s) {
    CHECK(max_abs_diff(events[2].before[s], events[1].after[s]) == 0.0);
  }
  // and the noise did actually move
  double moved = 0.0;
  for (const Tensor& t : events[1].after)
    for (double v : t.data) moved += std::fabs(v);
  CHECK(moved > 0.0);
}

TEST_CASE("kappa stays within bounds and inputs stay in range") {
  Dataset ds = halves_dataset(16, 20);
  ModelGraph ann = small_ann(21);
  ModelGraph snn = convert_ann_to_snn(ann, {ds.images[0], ds.images[1]}, 99.7, 4);

  TrainConfig cfg = snn_config(TrainMode::kSnnHire);
  cfg.eps_s = 0.02;
  cfg.eps_t = 0.04;
  cfg.epochs = 2;
  TrainResult res;
  CHECK_NOTHROW(res = train_snn(snn, ds, nullptr, cfg));
  CHECK(res.kappa_checks > 0);
  CHECK(res.log.back().kappa_saturation >= 0.0);
  CHECK(res.log.back().kappa_saturation <= 1.0);
}

TEST_CASE("training is reproducible from config plus seed") {
  Dataset ds = halves_dataset(24, 22);
  ModelGraph ann = small_ann(23);
  ModelGraph base = convert_ann_to_snn(ann, {ds.images[0], ds.images[1]}, 99.7, 4);

  TrainConfig cfg = snn_config(TrainMode::kSnnHire);
  cfg.eps_s = 0.013;
  cfg.eps_t = 0.013;

  ModelGraph a = base, b = base;
  train_snn(a, ds, nullptr, cfg);
  train_snn(b, ds, nullptr, cfg);
  CHECK(flat_params(a) == flat_params(b));
}

TEST_CASE("converted SNN stays close to its source ANN on the toy task") {
  Dataset train = halves_dataset(160, 24);
  Dataset test = halves_dataset(64, 25);

  ModelGraph ann = small_ann(26);
  TrainConfig acfg;
  acfg.mode = TrainMode::kAnn;
  acfg.epochs = 25;
  acfg.batch_size = 16;
  acfg.lr = LrSchedule::ann_default();
  acfg.lr.initial = 0.05;
  acfg.seed = 27;
  train_ann(ann, train, nullptr, acfg);

  std::vector<Tensor> calib(train.images.begin(), train.images.begin() + 32);
  ModelGraph snn = convert_ann_to_snn(ann, calib, 99.7, 6);

  TrainConfig scfg = snn_config(TrainMode::kSnnTraditional);
  scfg.time_steps = 6;
  scfg.epochs = 4;
  scfg.batch_size = 16;
  scfg.lr.initial = 1e-3;
  train_snn(snn, train, nullptr, scfg);

  double ann_acc = 0.0, snn_acc = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    ann_acc += predict_class(ann, test.images[i]) == test.labels[i] ? 1.0 : 0.0;
    snn_acc += predict_class(snn, test.images[i]) == test.labels[i] ? 1.0 : 0.0;
  }
  ann_acc *= 100.0 / static_cast<double>(test.size());
  snn_acc *= 100.0 / static_cast<double>(test.size());
  CHECK(snn_acc >= ann_acc - 2.0);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.eps_s = 0.1;
  cfg.eps_t = 0.05;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  TrainConfig hire = snn_config(TrainMode::kSnnHire);
  hire.time_steps = 2;
  hire.periods = 3;  // floor(T/N) == 0
  CHECK_THROWS_AS(hire.validate(), ConfigError);
}
