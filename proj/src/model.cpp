#include "snncraft/model.hpp"

#include <algorithm>
#include <cmath>

#include "snncraft/error.hpp"
#include "snncraft/rng.hpp"

namespace snncraft {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kLinear: return "linear";
    case LayerKind::kAvgPool: return "avgpool";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kNeuron: return "neuron";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kOutputAccumulator: return "output-accumulator";
  }
  return "?";
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "conv") return LayerKind::kConv;
  if (name == "linear") return LayerKind::kLinear;
  if (name == "avgpool") return LayerKind::kAvgPool;
  if (name == "dropout") return LayerKind::kDropout;
  if (name == "neuron") return LayerKind::kNeuron;
  if (name == "relu") return LayerKind::kRelu;
  if (name == "output-accumulator") return LayerKind::kOutputAccumulator;
  throw ConfigError("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::conv2d(std::size_t kernel, std::size_t out_channels,
                            std::size_t stride, std::size_t padding) {
  LayerSpec s;
  s.kind = LayerKind::kConv;
  s.conv.kernel = kernel;
  s.conv.out_channels = out_channels;
  s.conv.stride = stride;
  s.conv.padding = padding;
  return s;
}

LayerSpec LayerSpec::linear(std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::kLinear;
  s.linear_out = out;
  return s;
}

LayerSpec LayerSpec::avgpool(std::size_t window) {
  LayerSpec s;
  s.kind = LayerKind::kAvgPool;
  s.pool_window = window;
  return s;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s;
  s.kind = LayerKind::kDropout;
  s.dropout_rate = rate;
  return s;
}

LayerSpec LayerSpec::neuron() {
  LayerSpec s;
  s.kind = LayerKind::kNeuron;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::kRelu;
  return s;
}

LayerSpec LayerSpec::output_accumulator() {
  LayerSpec s;
  s.kind = LayerKind::kOutputAccumulator;
  return s;
}

void ModelGraph::resolve() {
  if (layers.empty()) throw ConfigError("graph has no layers");
  if (input_shape.empty()) throw ConfigError("graph input shape not set");
  if (layers.back().kind != LayerKind::kOutputAccumulator) {
    throw ConfigError("last layer must be the output accumulator");
  }
  in_shapes.assign(layers.size(), {});
  out_shapes.assign(layers.size(), {});

  Shape cur = input_shape;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    LayerSpec& spec = layers[l];
    in_shapes[l] = cur;
    switch (spec.kind) {
      case LayerKind::kConv: {
        spec.conv.in_channels = cur.size() == 3 ? cur[2] : 0;
        spec.conv.validate(cur);
        cur = spec.conv.out_shape(cur);
        break;
      }
      case LayerKind::kLinear: {
        if (spec.linear_out == 0) throw ConfigError("linear_out must be positive");
        cur = {spec.linear_out};
        break;
      }
      case LayerKind::kAvgPool: {
        if (cur.size() != 3 || cur[0] % spec.pool_window != 0 ||
            cur[1] % spec.pool_window != 0) {
          throw ConfigError("avgpool window " + std::to_string(spec.pool_window) +
                            " does not divide " + shape_str(cur));
        }
        cur = {cur[0] / spec.pool_window, cur[1] / spec.pool_window, cur[2]};
        break;
      }
      case LayerKind::kDropout: {
        if (spec.dropout_rate < 0.0 || spec.dropout_rate >= 1.0) {
          throw ConfigError("dropout rate must be in [0,1)");
        }
        break;
      }
      case LayerKind::kNeuron:
      case LayerKind::kRelu:
        break;
      case LayerKind::kOutputAccumulator: {
        if (l + 1 != layers.size()) {
          throw ConfigError("output accumulator must be the last layer");
        }
        break;
      }
    }
    out_shapes[l] = cur;
  }

  if (mode == ExecMode::kSnn) {
    // Every weighted layer is followed by a neuron layer, except the final
    // one which feeds the accumulator directly.
    for (std::size_t l = 0; l < layers.size(); ++l) {
      LayerKind k = layers[l].kind;
      if (k == LayerKind::kRelu) {
        throw ConfigError("relu layers are not valid in SNN mode");
      }
      if (k == LayerKind::kConv || k == LayerKind::kLinear) {
        if (l + 1 >= layers.size()) throw ConfigError("weighted layer cannot be last");
        LayerKind next = layers[l + 1].kind;
        if (next != LayerKind::kNeuron && next != LayerKind::kOutputAccumulator) {
          throw ConfigError(std::string("in SNN mode, ") + layer_kind_name(k) +
                            " must be followed by a neuron layer or the accumulator");
        }
      }
    }
  }
  if (params.size() != layers.size()) params.resize(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].kind == LayerKind::kConv) {
      Shape want = layers[l].conv.weight_shape();
      if (!params[l].w.empty() && params[l].w.shape != want) {
        throw ConfigError("conv weight shape mismatch at layer " + std::to_string(l));
      }
    }
    if (layers[l].kind == LayerKind::kLinear) {
      Shape want = {numel(in_shapes[l]), layers[l].linear_out};
      if (!params[l].w.empty() && params[l].w.shape != want) {
        throw ConfigError("linear weight shape mismatch at layer " + std::to_string(l));
      }
    }
  }
}

std::size_t ModelGraph::num_classes() const {
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (layers[l].kind == LayerKind::kLinear) return layers[l].linear_out;
  }
  throw ConfigError("graph has no linear layer to define classes");
}

std::size_t ModelGraph::weight_count() const {
  std::size_t n = 0;
  for (const LayerParams& p : params) n += p.w.size();
  return n;
}

ModelGraph make_graph(std::vector<LayerSpec> layers, Shape input_shape,
                      ExecMode mode, std::size_t time_steps, std::uint64_t seed) {
  ModelGraph g;
  g.layers = std::move(layers);
  g.input_shape = std::move(input_shape);
  g.mode = mode;
  g.time_steps = time_steps;
  g.params.resize(g.layers.size());
  g.resolve();

  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    const LayerSpec& spec = g.layers[l];
    if (spec.kind == LayerKind::kConv || spec.kind == LayerKind::kLinear) {
      Shape ws = spec.kind == LayerKind::kConv
                     ? spec.conv.weight_shape()
                     : Shape{numel(g.in_shapes[l]), spec.linear_out};
      std::size_t fan_in = spec.kind == LayerKind::kConv
                               ? spec.conv.kernel * spec.conv.kernel * spec.conv.in_channels
                               : ws[0];
      double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      Rng rng(mix_seed(seed, 0x57e16457u, l));
      Tensor w = Tensor::zeros(ws);
      for (double& v : w.data) v = rng.uniform(-limit, limit);
      g.params[l].w = std::move(w);
    }
  }
  return g;
}

std::vector<LayerSpec> desk_conv_arch(std::size_t classes) {
  return {
      LayerSpec::conv2d(3, 4, 1, 1), LayerSpec::neuron(), LayerSpec::avgpool(2),
      LayerSpec::conv2d(3, 8, 1, 1), LayerSpec::neuron(), LayerSpec::avgpool(2),
      LayerSpec::linear(32),         LayerSpec::neuron(), LayerSpec::dropout(0.2),
      LayerSpec::linear(classes),    LayerSpec::output_accumulator(),
  };
}

LossGrad softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  if (label >= logits.size()) {
    throw InputError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(logits.size()) + " classes");
  }
  double m = *std::max_element(logits.data.begin(), logits.data.end());
  double sum = 0.0;
  Tensor p = logits;
  for (double& v : p.data) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : p.data) v /= sum;
  LossGrad out;
  out.loss = -std::log(std::max(p.data[label], 1e-300));
  out.grad_logits = p;
  out.grad_logits.data[label] -= 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// ANN execution

AnnRun forward_ann(const ModelGraph& g, const Tensor& x, const AnnOptions& opt) {
  if (g.mode != ExecMode::kAnn) {
    throw ContractViolation("forward_ann called on a graph in SNN mode");
  }
  AnnRun run;
  run.recorded = opt.record;
  run.inputs.resize(g.layers.size());
  run.dropout_masks.resize(g.layers.size());

  Tensor cur = x;
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    const LayerSpec& spec = g.layers[l];
    if (opt.record) run.inputs[l] = cur;
    switch (spec.kind) {
      case LayerKind::kConv:
        cur = conv2d_forward(cur, g.params[l].w, spec.conv);
        break;
      case LayerKind::kLinear: {
        Tensor flat = cur;
        flat.shape = {cur.size()};
        cur = linear_forward(flat, g.params[l].w);
        break;
      }
      case LayerKind::kAvgPool:
        cur = avgpool_forward(cur, spec.pool_window);
        break;
      case LayerKind::kDropout:
        if (opt.training && spec.dropout_rate > 0.0) {
          Tensor mask = dropout_mask(cur.shape, spec.dropout_rate,
                                     mix_seed(opt.dropout_seed, 0xd20u, l));
          for (std::size_t i = 0; i < cur.size(); ++i) cur.data[i] *= mask.data[i];
          if (opt.record) run.dropout_masks[l] = std::move(mask);
        }
        break;
      case LayerKind::kNeuron:
      case LayerKind::kRelu:
        cur = relu_forward(cur);
        break;
      case LayerKind::kOutputAccumulator:
        break;  // identity in ANN mode
    }
  }
  run.logits = std::move(cur);
  return run;
}

AnnGradients backward_ann(const ModelGraph& g, const AnnRun& run,
                          const Tensor& grad_logits) {
  if (!run.recorded) throw ContractViolation("backward_ann needs a recorded run");
  AnnGradients out;
  out.grad_w.resize(g.layers.size());

  Tensor grad = grad_logits;
  for (std::size_t l = g.layers.size(); l-- > 0;) {
    const LayerSpec& spec = g.layers[l];
    const Tensor& input = run.inputs[l];
    switch (spec.kind) {
      case LayerKind::kConv: {
        auto [gx, gw] = conv2d_backward(grad, input, g.params[l].w, spec.conv);
        out.grad_w[l] = std::move(gw);
        grad = std::move(gx);
        break;
      }
      case LayerKind::kLinear: {
        Tensor flat = input;
        flat.shape = {input.size()};
        auto [gx, gw] = linear_backward(grad, flat, g.params[l].w);
        out.grad_w[l] = std::move(gw);
        gx.shape = input.shape;
        grad = std::move(gx);
        break;
      }
      case LayerKind::kAvgPool:
        grad = avgpool_backward(grad, spec.pool_window);
        break;
      case LayerKind::kDropout:
        if (!run.dropout_masks[l].empty()) {
          for (std::size_t i = 0; i < grad.size(); ++i)
            grad.data[i] *= run.dropout_masks[l].data[i];
        }
        break;
      case LayerKind::kNeuron:
      case LayerKind::kRelu:
        grad = relu_backward(grad, input);
        break;
      case LayerKind::kOutputAccumulator:
        break;
    }
  }
  out.grad_input = std::move(grad);
  return out;
}

// ---------------------------------------------------------------------------
// SNN execution

Tensor encode_direct(const Tensor& x) { return x; }

Tensor encode_poisson(const Tensor& x, std::size_t t, std::uint64_t seed) {
  Tensor s = Tensor::zeros(x.shape);
  Rng rng(mix_seed(seed, 0x90155u, t));
  for (std::size_t i = 0; i < x.size(); ++i) {
    double p = x.data[i];
    if (p < 0.0 || p > 1.0) {
      throw InputError("poisson encoder needs pixels in [0,1], got " +
                       std::to_string(p));
    }
    s.data[i] = rng.uniform() < p ? 1.0 : 0.0;
  }
  return s;
}

SnnRun forward_snn(const ModelGraph& g, const Tensor& x, const SnnOptions& opt) {
  if (g.mode != ExecMode::kSnn) {
    throw ContractViolation("forward_snn called on a graph in ANN mode");
  }
  const std::size_t steps = opt.steps == 0 ? g.time_steps : opt.steps;
  if (steps < 1) throw ConfigError("forward_snn needs steps >= 1");
  if (x.shape != g.input_shape) {
    throw ConfigError("input shape " + shape_str(x.shape) + " != graph input " +
                      shape_str(g.input_shape));
  }
  for (double v : x.data) {
    if (v < -1e-12 || v > 1.0 + 1e-12) {
      throw InputError("SNN input pixels must lie in [0,1], got " + std::to_string(v));
    }
  }

  const std::size_t L = g.layers.size();
  SnnRun run;
  run.recorded = opt.record;
  run.steps = steps;
  run.layer_inputs.resize(L);
  run.traces.resize(L);
  run.dropout_masks.resize(L);
  run.final_membrane.resize(L);
  run.initial_membrane.resize(L);

  // Membrane state and dropout masks are fixed for the whole window.
  std::vector<NeuronState> states(L);
  for (std::size_t l = 0; l < L; ++l) {
    if (g.layers[l].kind != LayerKind::kNeuron) continue;
    states[l].u = Tensor::zeros(g.out_shapes[l]);
    if (!opt.initial_membrane.empty() && !opt.initial_membrane[l].empty()) {
      states[l].u = opt.initial_membrane[l];
    }
    states[l].v_t = g.params[l].v_t;
    states[l].l_k = g.params[l].l_k;
    run.initial_membrane[l] = states[l].u;
  }
  for (std::size_t l = 0; l < L; ++l) {
    const LayerSpec& spec = g.layers[l];
    if (spec.kind == LayerKind::kDropout && opt.training && spec.dropout_rate > 0.0) {
      run.dropout_masks[l] = dropout_mask(g.in_shapes[l], spec.dropout_rate,
                                          mix_seed(opt.dropout_seed, 0xd20u, l));
    }
  }

  Tensor acc = Tensor::zeros({g.num_classes()});
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor cur = opt.encoder == Encoder::kDirect
                     ? encode_direct(x)
                     : encode_poisson(x, t, opt.encoder_seed);
    for (std::size_t l = 0; l < L; ++l) {
      const LayerSpec& spec = g.layers[l];
      switch (spec.kind) {
        case LayerKind::kConv:
          if (opt.record) run.layer_inputs[l].push_back(cur);
          cur = conv2d_forward(cur, g.params[l].w, spec.conv);
          break;
        case LayerKind::kLinear: {
          if (opt.record) run.layer_inputs[l].push_back(cur);
          Tensor flat = std::move(cur);
          flat.shape = {flat.size()};
          cur = linear_forward(flat, g.params[l].w);
          break;
        }
        case LayerKind::kAvgPool:
          cur = avgpool_forward(cur, spec.pool_window);
          break;
        case LayerKind::kDropout:
          if (!run.dropout_masks[l].empty()) {
            for (std::size_t i = 0; i < cur.size(); ++i)
              cur.data[i] *= run.dropout_masks[l].data[i];
          }
          break;
        case LayerKind::kNeuron:
          cur = lif_step(states[l], cur, opt.neuron,
                         opt.record ? &run.traces[l] : nullptr);
          break;
        case LayerKind::kRelu:
          throw ContractViolation("relu layer reached in SNN mode");
        case LayerKind::kOutputAccumulator:
          add_into(acc, cur);
          break;
      }
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    if (g.layers[l].kind == LayerKind::kNeuron) {
      run.final_membrane[l] = std::move(states[l].u);
    }
  }
  scale_in_place(acc, 1.0 / static_cast<double>(steps));
  run.logits = std::move(acc);
  return run;
}

SnnGradients backward_snn(const ModelGraph& g, const SnnRun& run,
                          const Tensor& grad_logits, const NeuronConfig& cfg) {
  if (!run.recorded) throw ContractViolation("backward_snn needs a recorded run");
  const std::size_t L = g.layers.size();
  const std::size_t steps = run.steps;

  SnnGradients out;
  out.grad_w.resize(L);
  out.grad_v_t.assign(L, 0.0);
  out.grad_l_k.assign(L, 0.0);

  // Gradient w.r.t. the current layer's output at every step; the logits are
  // the per-step accumulator inputs averaged over the window.
  std::vector<Tensor> g_steps(steps);
  Tensor g_acc = grad_logits;
  scale_in_place(g_acc, 1.0 / static_cast<double>(steps));
  for (std::size_t t = 0; t < steps; ++t) g_steps[t] = g_acc;

  for (std::size_t l = L; l-- > 0;) {
    const LayerSpec& spec = g.layers[l];
    switch (spec.kind) {
      case LayerKind::kOutputAccumulator:
        break;
      case LayerKind::kNeuron: {
        NeuronBackward nb = bptt_neuron_backward(run.traces[l], g_steps,
                                                 g.params[l].v_t, g.params[l].l_k,
                                                 cfg, run.initial_membrane[l]);
        out.grad_v_t[l] = nb.grad_v_t;
        out.grad_l_k[l] = nb.grad_l_k;
        g_steps = std::move(nb.grad_input);
        break;
      }
      case LayerKind::kDropout: {
        if (!run.dropout_masks[l].empty()) {
          const Tensor& mask = run.dropout_masks[l];
          for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t i = 0; i < g_steps[t].size(); ++i)
              g_steps[t].data[i] *= mask.data[i];
        }
        break;
      }
      case LayerKind::kAvgPool: {
        for (std::size_t t = 0; t < steps; ++t)
          g_steps[t] = avgpool_backward(g_steps[t], spec.pool_window);
        break;
      }
      case LayerKind::kLinear: {
        Tensor gw_total = Tensor::zeros(g.params[l].w.shape);
        for (std::size_t t = 0; t < steps; ++t) {
          Tensor flat = run.layer_inputs[l][t];
          Shape orig = flat.shape;
          flat.shape = {flat.size()};
          auto [gx, gw] = linear_backward(g_steps[t], flat, g.params[l].w);
          add_into(gw_total, gw);
          gx.shape = orig;
          g_steps[t] = std::move(gx);
        }
        out.grad_w[l] = std::move(gw_total);
        break;
      }
      case LayerKind::kConv: {
        Tensor gw_total = Tensor::zeros(g.params[l].w.shape);
        for (std::size_t t = 0; t < steps; ++t) {
          auto [gx, gw] = conv2d_backward(g_steps[t], run.layer_inputs[l][t],
                                          g.params[l].w, spec.conv);
          add_into(gw_total, gw);
          g_steps[t] = std::move(gx);
        }
        out.grad_w[l] = std::move(gw_total);
        break;
      }
      case LayerKind::kRelu:
        throw ContractViolation("relu layer reached in SNN backward");
    }
  }

  out.grad_input = Tensor::zeros(g_steps[0].shape);
  for (const Tensor& gt : g_steps) add_into(out.grad_input, gt);
  out.grad_input_steps = std::move(g_steps);
  return out;
}

// ---------------------------------------------------------------------------
// ANN-to-SNN conversion

double percentile_value(std::vector<double> values, double pct) {
  if (values.empty()) throw InputError("percentile of empty set");
  if (pct < 0.0 || pct > 100.0) throw ConfigError("percentile must be in [0,100]");
  std::sort(values.begin(), values.end());
  double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
  std::size_t lo = static_cast<std::size_t>(rank);
  std::size_t hi = std::min(lo + 1, values.size() - 1);
  double frac = rank - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

namespace {

// Runs the spiking prefix of `g` up to (not including) layer `stop` and
// appends every weighted-input value arriving at `stop` to `sink`.
void collect_preactivations(const ModelGraph& g, const Tensor& x, std::size_t stop,
                            std::vector<double>& sink) {
  std::vector<NeuronState> states(stop);
  for (std::size_t l = 0; l < stop; ++l) {
    if (g.layers[l].kind != LayerKind::kNeuron) continue;
    states[l].u = Tensor::zeros(g.out_shapes[l]);
    states[l].v_t = g.params[l].v_t;
    states[l].l_k = g.params[l].l_k;
  }
  NeuronConfig cfg;  // binary firing; defaults are fine for a forward pass
  for (std::size_t t = 0; t < g.time_steps; ++t) {
    Tensor cur = x;
    for (std::size_t l = 0; l < stop; ++l) {
      const LayerSpec& spec = g.layers[l];
      switch (spec.kind) {
        case LayerKind::kConv:
          cur = conv2d_forward(cur, g.params[l].w, spec.conv);
          break;
        case LayerKind::kLinear: {
          Tensor flat = std::move(cur);
          flat.shape = {flat.size()};
          cur = linear_forward(flat, g.params[l].w);
          break;
        }
        case LayerKind::kAvgPool:
          cur = avgpool_forward(cur, spec.pool_window);
          break;
        case LayerKind::kDropout:
          break;  // calibration runs in evaluation configuration
        case LayerKind::kNeuron:
          cur = lif_step(states[l], cur, cfg, nullptr);
          break;
        default:
          throw ContractViolation("unexpected layer during calibration");
      }
    }
    sink.insert(sink.end(), cur.data.begin(), cur.data.end());
  }
}

}  // namespace

ModelGraph convert_ann_to_snn(const ModelGraph& ann,
                              const std::vector<Tensor>& calibration_batch,
                              double percentile, std::size_t time_steps) {
  if (calibration_batch.empty()) {
    throw InputError("conversion needs a non-empty calibration batch");
  }
  ModelGraph snn = ann;
  snn.mode = ExecMode::kSnn;
  if (time_steps != 0) snn.time_steps = time_steps;
  for (std::size_t l = 0; l < snn.layers.size(); ++l) {
    if (snn.layers[l].kind == LayerKind::kRelu) snn.layers[l].kind = LayerKind::kNeuron;
  }
  snn.resolve();

  // Sequential calibration: thresholds are set front to back, each layer
  // observing inputs produced by the already-spiking prefix.
  for (std::size_t l = 0; l < snn.layers.size(); ++l) {
    if (snn.layers[l].kind != LayerKind::kNeuron) continue;
    std::vector<double> observed;
    for (const Tensor& x : calibration_batch) {
      collect_preactivations(snn, x, l, observed);
    }
    double v = percentile_value(std::move(observed), percentile);
    snn.params[l].v_t = std::max(v, kThresholdFloor);
    snn.params[l].l_k = 1.0;
  }
  return snn;
}

}  // namespace snncraft
