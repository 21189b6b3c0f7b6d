#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snncraft/kernels.hpp"
#include "snncraft/neuron.hpp"
#include "snncraft/tensor.hpp"

namespace snncraft {

enum class LayerKind {
  kConv,
  kLinear,
  kAvgPool,
  kDropout,
  kNeuron,
  kRelu,
  kOutputAccumulator,
};

const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::kNeuron;
  ConvSpec conv;                 // kConv
  std::size_t linear_out = 0;    // kLinear
  std::size_t pool_window = 2;   // kAvgPool
  double dropout_rate = 0.0;     // kDropout
  bool train_w = true;
  bool train_v_t = true;
  bool train_l_k = true;

  static LayerSpec conv2d(std::size_t kernel, std::size_t out_channels,
                          std::size_t stride = 1, std::size_t padding = 0);
  static LayerSpec linear(std::size_t out);
  static LayerSpec avgpool(std::size_t window);
  static LayerSpec dropout(double rate);
  static LayerSpec neuron();
  static LayerSpec relu();
  static LayerSpec output_accumulator();
};

struct LayerParams {
  Tensor w;          // weighted layers only
  double v_t = 1.0;  // neuron layers
  double l_k = 1.0;
};

enum class ExecMode { kAnn, kSnn };
enum class Encoder { kDirect, kPoisson };

// Ordered layer stack plus its parameters. The same graph runs as an ANN
// (neuron layers act as ReLU, the accumulator is the identity) or as an SNN
// unrolled over time_steps.
struct ModelGraph {
  std::vector<LayerSpec> layers;
  std::vector<LayerParams> params;
  ExecMode mode = ExecMode::kAnn;
  std::size_t time_steps = 1;
  Shape input_shape;

  // Filled by resolve(): per-layer input/output shapes.
  std::vector<Shape> in_shapes;
  std::vector<Shape> out_shapes;

  void resolve();
  std::size_t num_classes() const;
  std::size_t weight_count() const;
};

// Builds a graph with He-uniform initialized weights, v_t = 1, l_k = 1.
ModelGraph make_graph(std::vector<LayerSpec> layers, Shape input_shape,
                      ExecMode mode, std::size_t time_steps, std::uint64_t seed);

// The VGG-style desk architecture: two conv blocks and two linear layers.
std::vector<LayerSpec> desk_conv_arch(std::size_t classes);

struct LossGrad {
  double loss = 0.0;
  Tensor grad_logits;
};
LossGrad softmax_cross_entropy(const Tensor& logits, std::size_t label);

// ---------------------------------------------------------------------------
// ANN execution

struct AnnRun {
  Tensor logits;
  std::vector<Tensor> inputs;   // per-layer input tape (when recorded)
  std::vector<Tensor> dropout_masks;
  bool recorded = false;
};

struct AnnOptions {
  bool record = false;
  bool training = false;   // dropout active
  std::uint64_t dropout_seed = 0;
};

AnnRun forward_ann(const ModelGraph& g, const Tensor& x, const AnnOptions& opt = {});

struct AnnGradients {
  std::vector<Tensor> grad_w;
  Tensor grad_input;
};
AnnGradients backward_ann(const ModelGraph& g, const AnnRun& run,
                          const Tensor& grad_logits);

// ---------------------------------------------------------------------------
// SNN execution

Tensor encode_direct(const Tensor& x);
Tensor encode_poisson(const Tensor& x, std::size_t t, std::uint64_t seed);

struct SnnOptions {
  std::size_t steps = 0;  // 0 means the graph's time_steps
  Encoder encoder = Encoder::kDirect;
  std::uint64_t encoder_seed = 0;
  NeuronConfig neuron;
  bool record = true;
  bool training = false;
  std::uint64_t dropout_seed = 0;
  // Membrane potentials to start from (one tensor per layer, empty tensors
  // for non-neuron layers); empty vector means start from rest.
  std::vector<Tensor> initial_membrane;
};

struct SnnRun {
  Tensor logits;
  std::size_t steps = 0;
  std::vector<std::vector<Tensor>> layer_inputs;  // [layer][step], weighted layers
  std::vector<SpikeTrace> traces;                 // neuron layers
  std::vector<Tensor> dropout_masks;
  std::vector<Tensor> final_membrane;             // per layer, neuron layers only
  std::vector<Tensor> initial_membrane;           // what the run started from
  bool recorded = false;
};

SnnRun forward_snn(const ModelGraph& g, const Tensor& x, const SnnOptions& opt);

struct SnnGradients {
  std::vector<Tensor> grad_w;
  std::vector<double> grad_v_t;
  std::vector<double> grad_l_k;
  std::vector<Tensor> grad_input_steps;  // d loss / d encoded input at each step
  Tensor grad_input;                     // summed over steps (direct coding)
};

SnnGradients backward_snn(const ModelGraph& g, const SnnRun& run,
                          const Tensor& grad_logits, const NeuronConfig& cfg);

// ---------------------------------------------------------------------------
// ANN-to-SNN conversion

// Copies weights, sets every leak to 1.0 and every threshold to the given
// percentile of the pre-activation values observed at that layer while the
// already-calibrated prefix of the network runs in spiking mode.
ModelGraph convert_ann_to_snn(const ModelGraph& ann,
                              const std::vector<Tensor>& calibration_batch,
                              double percentile = 99.7,
                              std::size_t time_steps = 0);

double percentile_value(std::vector<double> values, double pct);

}  // namespace snncraft
