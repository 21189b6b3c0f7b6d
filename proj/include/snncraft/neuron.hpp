#pragma once

#include <vector>

#include "snncraft/tensor.hpp"

namespace snncraft {

// Thresholds are clamped to at least this value after every update; the
// normalized potential z = u/v_t - 1 is ill-defined at v_t <= 0.
inline constexpr double kThresholdFloor = 0.01;
// Leak stays in (0, 1]; this is the practical lower edge of that interval.
inline constexpr double kLeakFloor = 1e-6;

// How the firing nonlinearity is evaluated in the forward pass.
//
// kBinary is the real thing: a Heaviside step on z with the hat-shaped
// surrogate used only in the backward pass. kSmoothed replaces the step by
// the C1 antiderivative of the surrogate, which makes the whole network a
// differentiable function; gradient tests diff it numerically and expect the
// backward pass to match, since both modes share the same backward code.
enum class FireMode { kBinary, kSmoothed };

struct NeuronConfig {
  double gamma = 0.3;         // surrogate damping factor
  bool detach_reset = false;  // drop the -v_t*O path from the backward recurrence
  FireMode fire_mode = FireMode::kBinary;
};

// Per-layer membrane state. v_t and l_k are layer scalars; u is one value
// per neuron.
struct NeuronState {
  Tensor u;
  double v_t = 1.0;
  double l_k = 1.0;
  std::size_t t = 0;

  void check() const;
};

// Per-step records a neuron layer keeps for the backward pass and for the
// activity metrics: the pre-reset potential and the emitted spikes.
struct SpikeTrace {
  std::vector<Tensor> potentials;  // u right before the reset, one per step
  std::vector<Tensor> spikes;      // binary in kBinary mode, graded in kSmoothed
  std::size_t steps() const { return spikes.size(); }

  double total_spikes() const;
};

// Element-wise surrogate derivative gamma * max(0, 1 - |z|).
Tensor surrogate_grad(const Tensor& z, double gamma);
double surrogate_grad(double z, double gamma);

// Value of the smoothed firing function whose derivative is the surrogate.
double smooth_fire(double z, double gamma);

// One time step: integrate the weighted input into the membrane, fire on the
// normalized potential z = u/v_t - 1 (strictly z > 0), then soft-reset by
// subtracting v_t from neurons that fired. Returns the spikes; `state.u`
// afterwards holds the post-reset potential. When `trace` is given, the
// pre-reset potential and the spikes are appended to it.
Tensor lif_step(NeuronState& state, const Tensor& weighted_input,
                const NeuronConfig& cfg, SpikeTrace* trace = nullptr);

// Gradients produced by running the reverse-time recurrence over one neuron
// layer.
struct NeuronBackward {
  std::vector<Tensor> grad_input;  // d loss / d weighted_input[t], per step
  double grad_v_t = 0.0;
  double grad_l_k = 0.0;
};

// Reverse-time traversal of the lif_step recurrence. `upstream` holds
// d loss / d spikes[t] for every recorded step. Needs the same v_t/l_k the
// forward pass used. The chain rule pieces:
//   dO/dz       = surrogate (Eq-style hat)
//   dz/du_pre   = 1/v_t,   dz/dv_t = -u_pre/v_t^2
//   u_post      = u_pre - v_t*O   (reset contributes -O to grad_v_t)
//   u_pre[t]    = l_k*u_post[t-1] + input[t]
// `initial_u` is the membrane the layer started the window with (normally
// zeros; non-zero when membrane state is carried across periods).
NeuronBackward bptt_neuron_backward(const SpikeTrace& trace,
                                    const std::vector<Tensor>& upstream,
                                    double v_t, double l_k,
                                    const NeuronConfig& cfg,
                                    const Tensor& initial_u);

}  // namespace snncraft
