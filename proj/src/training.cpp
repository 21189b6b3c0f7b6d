#include "snncraft/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "snncraft/attacks.hpp"
#include "snncraft/error.hpp"
#include "snncraft/rng.hpp"

namespace snncraft {

const char* train_mode_name(TrainMode m) {
  switch (m) {
    case TrainMode::kAnn: return "ann";
    case TrainMode::kSnnTraditional: return "snn-traditional";
    case TrainMode::kSnnHire: return "snn-hire";
    case TrainMode::kSnnGaussian: return "snn-gaussian";
  }
  return "?";
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "ann") return TrainMode::kAnn;
  if (name == "snn-traditional" || name == "traditional") return TrainMode::kSnnTraditional;
  if (name == "snn-hire" || name == "hire") return TrainMode::kSnnHire;
  if (name == "snn-gaussian" || name == "gaussian") return TrainMode::kSnnGaussian;
  throw ConfigError("unknown training mode '" + name + "'");
}

double LrSchedule::rate_at(std::size_t epoch, std::size_t total_epochs) const {
  double r = initial;
  for (double frac : milestone_fracs) {
    if (static_cast<double>(epoch) >= frac * static_cast<double>(total_epochs) - 1e-9) {
      r *= decay;
    }
  }
  return r;
}

LrSchedule LrSchedule::ann_default() {
  return {0.01, 0.1, {0.625, 0.75, 0.875}};
}

LrSchedule LrSchedule::snn_default() {
  return {1e-4, 0.2, {0.6, 0.8, 0.9}};
}

void TrainConfig::validate() const {
  if (periods < 1) throw ConfigError("N must be >= 1");
  if (time_steps < 1) throw ConfigError("T must be >= 1");
  if (eps_s < 0.0 || eps_t < eps_s) {
    throw ConfigError("noise knobs need eps_t >= eps_s >= 0");
  }
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (gamma <= 0.0) throw ConfigError("surrogate gamma must be > 0");
  if (mode != TrainMode::kAnn && mode != TrainMode::kSnnTraditional &&
      time_steps / periods == 0) {
    throw ConfigError("floor(T/N) must be >= 1");
  }
}

std::size_t TrainConfig::period_steps() const {
  if (mode == TrainMode::kSnnTraditional) return time_steps;
  return time_steps / periods;
}

std::size_t gradient_storage_steps(const TrainConfig& cfg) {
  switch (cfg.mode) {
    case TrainMode::kAnn: return 1;
    case TrainMode::kSnnTraditional: return cfg.time_steps;
    case TrainMode::kSnnHire:
    case TrainMode::kSnnGaussian: return cfg.time_steps / cfg.periods;
  }
  return 0;
}

namespace {

// SGD (optionally with momentum) and Adam share one state container; every
// parameter element carries a first- and second-moment slot, unused under
// plain SGD.
struct Optim {
  const TrainConfig* cfg = nullptr;
  std::uint64_t step = 0;
  std::vector<Tensor> m_w, v_w;
  std::vector<double> m_vt, v_vt, m_lk, v_lk;

  void init(const ModelGraph& g, const TrainConfig& c) {
    cfg = &c;
    m_w.resize(g.layers.size());
    v_w.resize(g.layers.size());
    m_vt.assign(g.layers.size(), 0.0);
    v_vt.assign(g.layers.size(), 0.0);
    m_lk.assign(g.layers.size(), 0.0);
    v_lk.assign(g.layers.size(), 0.0);
    for (std::size_t l = 0; l < g.layers.size(); ++l) {
      if (!g.params[l].w.empty()) {
        m_w[l] = Tensor::zeros(g.params[l].w.shape);
        v_w[l] = Tensor::zeros(g.params[l].w.shape);
      }
    }
  }

  void begin_update() { ++step; }

  // Returns the scaled step to subtract (before the learning rate).
  double apply(double grad, double& m, double& v) const {
    if (cfg->optimizer == Optimizer::kSgd) {
      m = cfg->momentum * m + grad;
      return m;
    }
    m = cfg->adam_beta1 * m + (1.0 - cfg->adam_beta1) * grad;
    v = cfg->adam_beta2 * v + (1.0 - cfg->adam_beta2) * grad * grad;
    double bc1 = 1.0 - std::pow(cfg->adam_beta1, static_cast<double>(step));
    double bc2 = 1.0 - std::pow(cfg->adam_beta2, static_cast<double>(step));
    return (m / bc1) / (std::sqrt(v / bc2) + cfg->adam_eps);
  }
};

double clean_accuracy(const ModelGraph& g, const Dataset& ds, std::size_t limit) {
  std::size_t n = std::min(limit, ds.size());
  if (n == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (predict_class(g, ds.images[i]) == ds.labels[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                     std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0xba7c4u, epoch));
  rng.shuffle(order);
  return order;
}

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

TrainResult train_ann(ModelGraph& g, const Dataset& train, const Dataset* val,
                      const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.mode != TrainMode::kAnn) {
    throw ContractViolation("train_ann called with a non-ANN config");
  }
  if (g.mode != ExecMode::kAnn) {
    throw ContractViolation("train_ann needs a graph in ANN mode");
  }
  train.validate();

  TrainResult res;
  Optim opt;
  opt.init(g, cfg);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.lr.rate_at(epoch, cfg.epochs);
    std::vector<std::size_t> order = epoch_order(train.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t nb = std::min(cfg.batch_size, order.size() - start);
      std::size_t batch_index = start / cfg.batch_size;
      std::vector<Tensor> grad_sum(g.layers.size());
      for (std::size_t l = 0; l < g.layers.size(); ++l) {
        if (!g.params[l].w.empty()) grad_sum[l] = Tensor::zeros(g.params[l].w.shape);
      }

      for (std::size_t s = 0; s < nb; ++s) {
        std::size_t idx = order[start + s];
        AnnOptions opt;
        opt.record = true;
        opt.training = true;
        opt.dropout_seed = mix_seed(cfg.seed, 0xd5ee0u, epoch * 1000003 + batch_index, s);
        AnnRun run = forward_ann(g, train.images[idx], opt);
        LossGrad lg = softmax_cross_entropy(run.logits, train.labels[idx]);
        if (!std::isfinite(lg.loss)) throw TrainingError("ANN training loss diverged");
        loss_sum += lg.loss;
        ++loss_count;
        AnnGradients grads = backward_ann(g, run, lg.grad_logits);
        for (std::size_t l = 0; l < g.layers.size(); ++l) {
          if (!grads.grad_w[l].empty()) add_into(grad_sum[l], grads.grad_w[l]);
        }
      }

      double inv = 1.0 / static_cast<double>(nb);
      opt.begin_update();
      for (std::size_t l = 0; l < g.layers.size(); ++l) {
        if (g.params[l].w.empty() || !g.layers[l].train_w) continue;
        for (std::size_t i = 0; i < g.params[l].w.size(); ++i) {
          double gmean = grad_sum[l].data[i] * inv;
          g.params[l].w.data[i] -=
              lr * opt.apply(gmean, opt.m_w[l].data[i], opt.v_w[l].data[i]);
        }
      }
      ++res.updates;
    }

    TrainLogRow row;
    row.epoch = epoch;
    row.mode = train_mode_name(cfg.mode);
    row.train_acc = clean_accuracy(g, train, cfg.train_acc_samples);
    row.val_acc = val ? clean_accuracy(g, *val, val->size()) : 0.0;
    row.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    row.lr = lr;
    res.log.push_back(row);
  }
  return res;
}

TrainResult train_snn(ModelGraph& g, const Dataset& train, const Dataset* val,
                      const TrainConfig& cfg, const PeriodObserver& observer) {
  cfg.validate();
  if (cfg.mode == TrainMode::kAnn) {
    throw ContractViolation("train_snn cannot run in ANN mode");
  }
  if (g.mode != ExecMode::kSnn) {
    throw ContractViolation("train_snn needs a graph in SNN mode (convert first)");
  }
  train.validate();

  const bool traditional = cfg.mode == TrainMode::kSnnTraditional;
  const bool hire = cfg.mode == TrainMode::kSnnHire;
  const bool gaussian = cfg.mode == TrainMode::kSnnGaussian;
  // Traditional training ignores N: one update per batch over all T steps.
  const std::size_t n_periods = traditional ? 1 : cfg.periods;
  const std::size_t period_steps = cfg.period_steps();
  if (period_steps == 0) throw ConfigError("floor(T/N) must be >= 1");

  NeuronConfig ncfg;
  ncfg.gamma = cfg.gamma;
  ncfg.detach_reset = cfg.detach_reset;

  const Shape img_shape = train.images.empty() ? Shape{} : train.images[0].shape;

  TrainResult res;
  Optim opt;
  opt.init(g, cfg);

  // Per-pixel, per-batch-slot perturbation; persists across batches and
  // epochs. Truncated/zero-extended when the final batch is smaller.
  std::vector<Tensor> kappa;

  auto guard_kappa = [&](const std::vector<Tensor>& k) {
    for (const Tensor& t : k) {
      for (double v : t.data) {
        if (!(std::fabs(v) <= cfg.eps_t)) {
          throw ContractViolation("kappa left [-eps_t, eps_t]");
        }
      }
    }
    ++res.kappa_checks;
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.lr.rate_at(epoch, cfg.epochs);
    std::vector<std::size_t> order = epoch_order(train.size(), cfg.seed, epoch);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::uint64_t sim_steps_epoch = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t nb = std::min(cfg.batch_size, order.size() - start);
      std::size_t batch_index = start / cfg.batch_size;

      // Resize the noise state to the batch layout.
      if (kappa.size() > nb) kappa.resize(nb);
      while (kappa.size() < nb) kappa.push_back(Tensor::zeros(img_shape));

      // Membrane state per slot, reset at every batch boundary.
      std::vector<std::vector<Tensor>> membrane(nb);

      for (std::size_t p = 0; p < n_periods; ++p) {
        std::uint64_t period_key = mix_seed(cfg.seed, epoch, batch_index, p);

        if (gaussian && cfg.eps_t > 0.0) {
          for (std::size_t s = 0; s < nb; ++s) {
            Rng noise(mix_seed(period_key, 0x9a550u, s));
            for (double& v : kappa[s].data) {
              v = clamp(cfg.eps_s * noise.normal(), -cfg.eps_t, cfg.eps_t);
            }
          }
        }

        std::vector<Tensor> kappa_before;
        if (observer) kappa_before = kappa;
        guard_kappa(kappa);

        std::vector<Tensor> grad_w_sum(g.layers.size());
        std::vector<double> grad_vt_sum(g.layers.size(), 0.0);
        std::vector<double> grad_lk_sum(g.layers.size(), 0.0);
        for (std::size_t l = 0; l < g.layers.size(); ++l) {
          if (!g.params[l].w.empty()) grad_w_sum[l] = Tensor::zeros(g.params[l].w.shape);
        }
        std::vector<Tensor> delta_x(nb);

        for (std::size_t s = 0; s < nb; ++s) {
          std::size_t idx = order[start + s];
          const Tensor& x = train.images[idx];

          Tensor x_in = Tensor::zeros(x.shape);
          for (std::size_t i = 0; i < x.size(); ++i) {
            double v = clamp(x.data[i] + kappa[s].data[i], 0.0, 1.0);
            if (!(v >= 0.0 && v <= 1.0)) {
              throw ContractViolation("network input left [0,1]");
            }
            x_in.data[i] = v;
          }
          ++res.kappa_checks;

          SnnOptions opt;
          opt.steps = period_steps;
          opt.neuron = ncfg;
          opt.record = true;
          opt.training = true;
          opt.dropout_seed = mix_seed(period_key, 0xd5ee0u, s);
          if (cfg.carry_membrane && p > 0) opt.initial_membrane = membrane[s];
          SnnRun run = forward_snn(g, x_in, opt);
          res.peak_stored_steps = std::max(res.peak_stored_steps, run.steps);
          sim_steps_epoch += run.steps;

          LossGrad lg = softmax_cross_entropy(run.logits, train.labels[idx]);
          if (!std::isfinite(lg.loss)) throw TrainingError("SNN training loss diverged");
          loss_sum += lg.loss;
          ++loss_count;

          SnnGradients grads = backward_snn(g, run, lg.grad_logits, ncfg);
          for (std::size_t l = 0; l < g.layers.size(); ++l) {
            if (!grads.grad_w[l].empty()) add_into(grad_w_sum[l], grads.grad_w[l]);
            grad_vt_sum[l] += grads.grad_v_t[l];
            grad_lk_sum[l] += grads.grad_l_k[l];
          }
          if (hire) delta_x[s] = std::move(grads.grad_input);
          if (cfg.carry_membrane) membrane[s] = std::move(run.final_membrane);
        }

        // Perturbation update (crafted noise only), then the parameter step.
        if (hire && cfg.eps_t > 0.0) {
          for (std::size_t s = 0; s < nb; ++s) {
            for (std::size_t i = 0; i < kappa[s].size(); ++i) {
              kappa[s].data[i] = clamp(kappa[s].data[i] + cfg.eps_s * sgn(delta_x[s].data[i]),
                                       -cfg.eps_t, cfg.eps_t);
            }
          }
        }
        guard_kappa(kappa);

        double inv = 1.0 / static_cast<double>(nb);
        opt.begin_update();
        for (std::size_t l = 0; l < g.layers.size(); ++l) {
          const LayerSpec& spec = g.layers[l];
          if (!g.params[l].w.empty() && spec.train_w) {
            for (std::size_t i = 0; i < g.params[l].w.size(); ++i) {
              double gmean = grad_w_sum[l].data[i] * inv;
              g.params[l].w.data[i] -=
                  lr * opt.apply(gmean, opt.m_w[l].data[i], opt.v_w[l].data[i]);
            }
          }
          if (spec.kind == LayerKind::kNeuron) {
            if (spec.train_v_t && !cfg.freeze_v_t) {
              double gmean = grad_vt_sum[l] * inv;
              double d = opt.apply(gmean, opt.m_vt[l], opt.v_vt[l]);
              g.params[l].v_t = std::max(g.params[l].v_t - lr * d, kThresholdFloor);
            }
            if (spec.train_l_k && !cfg.freeze_l_k) {
              double gmean = grad_lk_sum[l] * inv;
              double d = opt.apply(gmean, opt.m_lk[l], opt.v_lk[l]);
              g.params[l].l_k = clamp(g.params[l].l_k - lr * d, kLeakFloor, 1.0);
            }
          }
        }
        ++res.updates;

        if (observer) {
          PeriodEvent ev;
          ev.epoch = epoch;
          ev.batch_index = batch_index;
          ev.period = p;
          ev.batch_samples = nb;
          ev.kappa_before = &kappa_before;
          ev.kappa_after = &kappa;
          observer(ev);
        }
      }
    }

    TrainLogRow row;
    row.epoch = epoch;
    row.mode = train_mode_name(cfg.mode);
    row.train_acc = clean_accuracy(g, train, cfg.train_acc_samples);
    row.val_acc = val ? clean_accuracy(g, *val, val->size()) : 0.0;
    row.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    row.lr = lr;
    row.sim_steps = sim_steps_epoch;
    if (cfg.eps_t > 0.0) {
      std::size_t at_bound = 0, total = 0;
      for (const Tensor& t : kappa) {
        for (double v : t.data) {
          if (std::fabs(v) == cfg.eps_t) ++at_bound;
        }
        total += t.size();
      }
      row.kappa_saturation =
          total ? static_cast<double>(at_bound) / static_cast<double>(total) : 0.0;
    }
    res.log.push_back(row);
    res.total_sim_steps += sim_steps_epoch;
  }
  return res;
}

}  // namespace snncraft
