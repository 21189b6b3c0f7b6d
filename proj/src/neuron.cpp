#include "snncraft/neuron.hpp"

#include <cmath>

namespace snncraft {

void NeuronState::check() const {
  if (!(v_t > 0.0)) {
    throw StateError("neuron threshold must be positive, got " + std::to_string(v_t));
  }
  if (!(l_k > 0.0) || l_k > 1.0) {
    throw StateError("leak must lie in (0,1], got " + std::to_string(l_k));
  }
}

double SpikeTrace::total_spikes() const {
  double total = 0.0;
  for (const Tensor& s : spikes)
    for (double v : s.data) total += v;
  return total;
}

double surrogate_grad(double z, double gamma) {
  double hat = 1.0 - std::fabs(z);
  return hat > 0.0 ? gamma * hat : 0.0;
}

Tensor surrogate_grad(const Tensor& z, double gamma) {
  Tensor g = z;
  for (double& v : g.data) v = surrogate_grad(v, gamma);
  return g;
}

double smooth_fire(double z, double gamma) {
  if (z <= -1.0) return 0.0;
  if (z >= 1.0) return gamma;
  if (z <= 0.0) {
    double t = z + 1.0;
    return 0.5 * gamma * t * t;
  }
  return gamma * (0.5 + z - 0.5 * z * z);
}

Tensor lif_step(NeuronState& state, const Tensor& weighted_input,
                const NeuronConfig& cfg, SpikeTrace* trace) {
  state.check();
  require_same_shape(state.u, weighted_input, "lif_step");

  const double v_t = state.v_t;
  const double l_k = state.l_k;
  Tensor spikes = Tensor::zeros(state.u.shape);
  Tensor u_pre = Tensor::zeros(state.u.shape);

  for (std::size_t i = 0; i < state.u.size(); ++i) {
    double u = l_k * state.u.data[i] + weighted_input.data[i];
    u_pre.data[i] = u;
    double z = u / v_t - 1.0;
    if (cfg.fire_mode == FireMode::kBinary) {
      if (z > 0.0) {
        spikes.data[i] = 1.0;
        u -= v_t;
      }
    } else {
      double o = smooth_fire(z, cfg.gamma);
      spikes.data[i] = o;
      u -= v_t * o;
    }
    state.u.data[i] = u;
  }
  state.t += 1;
  if (trace != nullptr) {
    trace->potentials.push_back(u_pre);
    trace->spikes.push_back(spikes);
  }
  return spikes;
}

NeuronBackward bptt_neuron_backward(const SpikeTrace& trace,
                                    const std::vector<Tensor>& upstream,
                                    double v_t, double l_k,
                                    const NeuronConfig& cfg,
                                    const Tensor& initial_u) {
  const std::size_t steps = trace.steps();
  if (upstream.size() != steps) {
    throw ContractViolation("bptt: trace has " + std::to_string(steps) +
                            " steps but " + std::to_string(upstream.size()) +
                            " upstream gradients were given");
  }
  NeuronBackward out;
  out.grad_input.resize(steps);
  if (steps == 0) return out;

  const std::size_t n = trace.spikes[0].size();
  const double inv_vt = 1.0 / v_t;

  // d loss / d u_post[t], carried backwards through the leak.
  Tensor g_upost = Tensor::zeros(trace.spikes[0].shape);

  for (std::size_t t = steps; t-- > 0;) {
    const Tensor& u_pre = trace.potentials[t];
    const Tensor& spikes = trace.spikes[t];
    Tensor g_upre = Tensor::zeros(spikes.shape);

    for (std::size_t i = 0; i < n; ++i) {
      double o = spikes.data[i];
      double z = u_pre.data[i] * inv_vt - 1.0;
      double surr = surrogate_grad(z, cfg.gamma);

      // Total gradient flowing into the spike value: the downstream consumer
      // plus, unless detached, the -v_t*O reset term of the membrane update.
      double g_o = upstream[t].data[i];
      if (!cfg.detach_reset) g_o += -v_t * g_upost.data[i];

      double g_z = g_o * surr;
      double gu = g_upost.data[i] + g_z * inv_vt;
      g_upre.data[i] = gu;

      // z depends on v_t directly; so does the reset amplitude.
      out.grad_v_t += g_z * (-u_pre.data[i] * inv_vt * inv_vt) +
                      g_upost.data[i] * (-o);

      // u_pre[t] = l_k * u_post[t-1] + input[t]
      double u_post_prev;
      if (t == 0) {
        u_post_prev = initial_u.empty() ? 0.0 : initial_u.data[i];
      } else {
        u_post_prev = trace.potentials[t - 1].data[i] -
                      v_t * trace.spikes[t - 1].data[i];
      }
      out.grad_l_k += gu * u_post_prev;
      g_upost.data[i] = gu * l_k;
    }
    out.grad_input[t] = std::move(g_upre);
  }
  return out;
}

}  // namespace snncraft
