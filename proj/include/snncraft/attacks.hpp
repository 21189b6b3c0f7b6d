#pragma once

#include <cstdint>
#include <vector>

#include "snncraft/model.hpp"

namespace snncraft {

enum class AttackFamily { kFgsm, kPgd };

struct AttackConfig {
  AttackFamily family = AttackFamily::kFgsm;
  double epsilon = 8.0 / 255.0;  // L-inf bound, pixel units
  double alpha = 0.01;           // PGD step size
  std::size_t iters = 7;         // PGD iterations K
  bool random_start = false;     // Eq-style PGD starts at the clean image
  double clip_lo = 0.0;
  double clip_hi = 1.0;
  Encoder encoder = Encoder::kDirect;
  std::size_t grad_samples = 1;  // encoder samplings averaged per gradient
  std::uint64_t seed = 0;        // random start + Poisson sampling
  double gamma = 0.3;            // surrogate damping for SNN gradients
  FireMode fire_mode = FireMode::kBinary;

  void validate() const;
};

// Logits of a model in evaluation configuration, either mode.
Tensor infer_logits(const ModelGraph& g, const Tensor& x,
                    Encoder encoder = Encoder::kDirect, std::uint64_t seed = 0);
std::size_t predict_class(const ModelGraph& g, const Tensor& x,
                          Encoder encoder = Encoder::kDirect, std::uint64_t seed = 0);

// Gradient of the cross-entropy loss w.r.t. every input pixel, with the
// model in evaluation configuration. For SNNs this is the sum over all time
// steps of the per-step input gradients (direct coding feeds the same pixel
// every step). For Poisson encoding the gradient is averaged over
// cfg.grad_samples independent spike samplings.
Tensor input_gradient(const ModelGraph& g, const Tensor& x, std::size_t label,
                      const AttackConfig& cfg = {});

Tensor fgsm(const ModelGraph& g, const Tensor& x, std::size_t label,
            const AttackConfig& cfg);

Tensor pgd(const ModelGraph& g, const Tensor& x, std::size_t label,
           const AttackConfig& cfg);

// Runs the configured attack family.
Tensor generate_adversarial(const ModelGraph& g, const Tensor& x, std::size_t label,
                            const AttackConfig& cfg);

// Black-box transfer: craft on `source`, to be evaluated on a target that
// shares the input shape.
Tensor blackbox_generate(const ModelGraph& source, const ModelGraph& target,
                         const Tensor& x, std::size_t label, const AttackConfig& cfg);

struct SweepPoint {
  double value = 0.0;  // epsilon or K, depending on the sweep axis
  double accuracy = 0.0;
};

enum class SweepAxis { kEpsilon, kIterations };

// Robust accuracy as a function of attack strength. For epsilon sweeps the
// PGD step is widened to 2.5*eps/K when the configured alpha could not reach
// the box boundary within K iterations.
std::vector<SweepPoint> attack_sweep(const ModelGraph& g,
                                     const std::vector<Tensor>& images,
                                     const std::vector<std::size_t>& labels,
                                     SweepAxis axis, const std::vector<double>& values,
                                     const AttackConfig& base);

}  // namespace snncraft
