#include "snncraft/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "snncraft/error.hpp"
#include "snncraft/rng.hpp"

namespace snncraft {

void AttackConfig::validate() const {
  if (epsilon < 0.0) throw ConfigError("attack epsilon must be >= 0");
  if (family == AttackFamily::kPgd) {
    if (alpha <= 0.0) throw ConfigError("PGD alpha must be > 0");
    if (iters < 1) throw ConfigError("PGD needs K >= 1");
  }
  if (clip_lo >= clip_hi) throw ConfigError("attack clip range is empty");
  if (grad_samples < 1) throw ConfigError("grad_samples must be >= 1");
}

Tensor infer_logits(const ModelGraph& g, const Tensor& x, Encoder encoder,
                    std::uint64_t seed) {
  if (g.mode == ExecMode::kAnn) {
    return forward_ann(g, x).logits;
  }
  SnnOptions opt;
  opt.encoder = encoder;
  opt.encoder_seed = seed;
  opt.record = false;
  return forward_snn(g, x, opt).logits;
}

std::size_t predict_class(const ModelGraph& g, const Tensor& x, Encoder encoder,
                          std::uint64_t seed) {
  Tensor logits = infer_logits(g, x, encoder, seed);
  return static_cast<std::size_t>(
      std::max_element(logits.data.begin(), logits.data.end()) -
      logits.data.begin());
}

Tensor input_gradient(const ModelGraph& g, const Tensor& x, std::size_t label,
                      const AttackConfig& cfg) {
  if (g.mode == ExecMode::kAnn) {
    AnnOptions opt;
    opt.record = true;
    opt.training = false;  // dropout is the identity under evaluation
    AnnRun run = forward_ann(g, x, opt);
    LossGrad lg = softmax_cross_entropy(run.logits, label);
    return backward_ann(g, run, lg.grad_logits).grad_input;
  }

  Tensor total = Tensor::zeros(x.shape);
  NeuronConfig ncfg;
  ncfg.gamma = cfg.gamma;
  ncfg.fire_mode = cfg.fire_mode;
  for (std::size_t s = 0; s < cfg.grad_samples; ++s) {
    SnnOptions opt;
    opt.encoder = cfg.encoder;
    opt.encoder_seed = mix_seed(cfg.seed, 0x6ead5u, s);
    opt.record = true;
    opt.training = false;
    opt.neuron = ncfg;
    SnnRun run = forward_snn(g, x, opt);
    LossGrad lg = softmax_cross_entropy(run.logits, label);
    SnnGradients grads = backward_snn(g, run, lg.grad_logits, ncfg);
    add_into(total, grads.grad_input);
  }
  if (cfg.grad_samples > 1) {
    scale_in_place(total, 1.0 / static_cast<double>(cfg.grad_samples));
  }
  return total;
}

namespace {

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// clip(x + delta) can land one ulp outside the L-inf ball as measured in
// double arithmetic; nudge the result toward x until the measured distance
// honors the bound exactly.
inline double apply_delta(double x, double delta, double eps, double lo, double hi) {
  double v = clamp(x + delta, lo, hi);
  while (v - x > eps) v = std::nextafter(v, x);
  while (x - v > eps) v = std::nextafter(v, x);
  return v;
}

Tensor apply_deltas(const Tensor& x, const Tensor& delta, const AttackConfig& cfg) {
  Tensor out = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.data[i] = apply_delta(x.data[i], delta.data[i], cfg.epsilon,
                              cfg.clip_lo, cfg.clip_hi);
  }
  return out;
}

}  // namespace

Tensor fgsm(const ModelGraph& g, const Tensor& x, std::size_t label,
            const AttackConfig& cfg) {
  cfg.validate();
  Tensor grad = input_gradient(g, x, label, cfg);
  Tensor delta = Tensor::zeros(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    delta.data[i] = clamp(cfg.epsilon * sgn(grad.data[i]), -cfg.epsilon, cfg.epsilon);
  }
  return apply_deltas(x, delta, cfg);
}

Tensor pgd(const ModelGraph& g, const Tensor& x, std::size_t label,
           const AttackConfig& cfg) {
  cfg.validate();
  Tensor delta = Tensor::zeros(x.shape);
  if (cfg.random_start && cfg.epsilon > 0.0) {
    Rng rng(mix_seed(cfg.seed, 0x125du));
    for (double& d : delta.data) d = rng.uniform(-cfg.epsilon, cfg.epsilon);
  }
  for (std::size_t k = 0; k < cfg.iters; ++k) {
    Tensor x_hat = apply_deltas(x, delta, cfg);
    Tensor grad = input_gradient(g, x_hat, label, cfg);
    for (std::size_t i = 0; i < x.size(); ++i) {
      delta.data[i] = clamp(delta.data[i] + cfg.alpha * sgn(grad.data[i]),
                            -cfg.epsilon, cfg.epsilon);
    }
  }
  return apply_deltas(x, delta, cfg);
}

Tensor generate_adversarial(const ModelGraph& g, const Tensor& x, std::size_t label,
                            const AttackConfig& cfg) {
  return cfg.family == AttackFamily::kFgsm ? fgsm(g, x, label, cfg)
                                           : pgd(g, x, label, cfg);
}

Tensor blackbox_generate(const ModelGraph& source, const ModelGraph& target,
                         const Tensor& x, std::size_t label, const AttackConfig& cfg) {
  if (source.input_shape != target.input_shape) {
    throw ConfigError("black-box source and target input shapes differ: " +
                      shape_str(source.input_shape) + " vs " +
                      shape_str(target.input_shape));
  }
  return generate_adversarial(source, x, label, cfg);
}

std::vector<SweepPoint> attack_sweep(const ModelGraph& g,
                                     const std::vector<Tensor>& images,
                                     const std::vector<std::size_t>& labels,
                                     SweepAxis axis, const std::vector<double>& values,
                                     const AttackConfig& base) {
  if (values.empty()) throw ConfigError("attack sweep needs at least one point");
  if (images.size() != labels.size() || images.empty()) {
    throw InputError("attack sweep needs a non-empty labeled image set");
  }
  std::vector<SweepPoint> curve;
  curve.reserve(values.size());
  for (double v : values) {
    AttackConfig cfg = base;
    if (axis == SweepAxis::kEpsilon) {
      cfg.epsilon = v;
      if (cfg.family == AttackFamily::kPgd) {
        double reach = 2.5 * v / static_cast<double>(cfg.iters);
        cfg.alpha = std::max(cfg.alpha, reach);
      }
    } else {
      cfg.iters = static_cast<std::size_t>(v);
      if (cfg.iters < 1) cfg.iters = 1;
      cfg.family = AttackFamily::kPgd;
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < images.size(); ++i) {
      Tensor adv = cfg.epsilon == 0.0 ? images[i]
                                      : generate_adversarial(g, images[i], labels[i], cfg);
      if (predict_class(g, adv, cfg.encoder, cfg.seed) == labels[i]) ++correct;
    }
    curve.push_back({v, 100.0 * static_cast<double>(correct) /
                            static_cast<double>(images.size())});
  }
  return curve;
}

}  // namespace snncraft
