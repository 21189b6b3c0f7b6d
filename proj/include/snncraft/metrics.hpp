#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snncraft/attacks.hpp"
#include "snncraft/dataset.hpp"
#include "snncraft/model.hpp"

namespace snncraft {

// Per-operation energy costs in pJ (45nm CMOS at 0.9V). MAC and AC are
// derived from the multiply/add entries, so e_mac = e_mult + e_add holds by
// construction; table_*() return the published rounded values.
struct EnergyConstants {
  double mult_int32 = 3.1;
  double add_int32 = 0.1;
  double mult_fp32 = 3.7;
  double add_fp32 = 0.9;

  double mac_int32() const { return mult_int32 + add_int32; }
  double ac_int32() const { return add_int32; }
  double mac_fp32() const { return mult_fp32 + add_fp32; }
  double ac_fp32() const { return add_fp32; }

  static constexpr double table_mac_int32 = 3.2;
  static constexpr double table_ac_int32 = 0.1;
  static constexpr double table_mac_fp32 = 4.6;
  static constexpr double table_ac_fp32 = 0.9;

  void validate() const;
};

enum class Precision { kInt32, kFp32 };
enum class InputMode { kRate, kDirect };

struct Activity {
  double sa = 0.0;    // spikes per neuron accumulated over T
  double tasa = 0.0;  // sa / T
};

// Def-style spiking activity of a trace: total spikes over all neurons and
// steps divided by the neuron count, and its per-step average.
Activity spiking_activity(double total_spikes, std::size_t neuron_count,
                          std::size_t steps);
Activity spiking_activity(const SpikeTrace& trace, std::size_t steps);

// L2 norm of the absolute pixel difference.
double perturbation_distance(const Tensor& x, const Tensor& x_adv);

// L2 distance between per-neuron spike counts normalized by T.
double spike_pd(const Tensor& counts_clean, const Tensor& counts_adv,
                std::size_t steps);

// Per-neuron spike counts of a trace.
Tensor spike_counts(const SpikeTrace& trace);

struct LayerFlops {
  std::size_t layer = 0;
  std::string kind;
  std::size_t neurons = 0;       // output positions
  std::uint64_t flops_ann = 0;   // weighted layers only
  double zeta = 0.0;             // input spiking activity scaling
  double flops_snn = 0.0;        // flops_ann * zeta
};

// Table-style FLOPs per weighted layer. `zeta` must carry one entry per
// weighted layer (front to back) when SNN numbers are wanted; pass an empty
// vector for ANN-only accounting.
std::vector<LayerFlops> flops_report(const ModelGraph& g,
                                     const std::vector<double>& zeta);

// Inference compute energy in pJ. Rate-coded inputs price every layer at AC
// cost; direct inputs price the first weighted layer at MAC cost. The ANN
// baseline prices everything at MAC cost.
double snn_energy_pj(const std::vector<LayerFlops>& layers, InputMode input_mode,
                     Precision precision, const EnergyConstants& constants = {});
double ann_energy_pj(const std::vector<LayerFlops>& layers, Precision precision,
                     const EnergyConstants& constants = {});

struct LayerActivityRecord {
  std::size_t layer = 0;
  std::string kind;
  std::size_t neurons = 0;
  double sa = 0.0;
  double tasa = 0.0;
  std::uint64_t flops_ann = 0;
  double flops_snn = 0.0;
  double energy_pj = 0.0;
};

struct EvalOptions {
  std::optional<AttackConfig> attack;
  const ModelGraph* attack_source = nullptr;  // black-box transfer source
  Encoder encoder = Encoder::kDirect;
  std::uint64_t encoder_seed = 0;
  Precision precision = Precision::kFp32;
  bool collect_pd = true;  // spike-PD needs a second recorded forward per image
};

struct EvalResult {
  double accuracy = 0.0;  // percent
  std::size_t samples = 0;
  std::vector<LayerActivityRecord> layers;
  double energy_total_pj = 0.0;
  // Perturbation-distance statistics (attacked runs only).
  double pd_mean = 0.0;
  double pd_max = 0.0;
  std::vector<double> spike_pd_mean;  // per neuron layer
};

// Accuracy plus activity/energy/PD reporting over a dataset, clean or under
// attack.
EvalResult evaluate(const ModelGraph& g, const Dataset& ds, const EvalOptions& opt);

// Accuracy difference in points between two runs (Acc_a - Acc_b).
double delta_accuracy(double acc_a, double acc_b);

struct ChecklistRow {
  std::string test;
  bool pass = false;
  std::string measured;
};

struct ChecklistOptions {
  AttackConfig attack;                 // baseline eps/alpha/K
  std::vector<double> eps_sweep;       // test (iii)/(iv) grid; must end at 1.0
  double tolerance_points = 2.0;       // noise band for (i)-(iii)
  const ModelGraph* blackbox_source = nullptr;
};

// The five gradient-obfuscation diagnostics: (i) FGSM is no stronger than
// PGD, (ii) black-box is no stronger than white-box, (iii) accuracy is
// non-increasing in eps, (iv) an unbounded attack reaches chance, (v) the
// attacks find at least one adversarial example.
std::vector<ChecklistRow> obfuscation_checklist(const ModelGraph& g,
                                                const Dataset& ds,
                                                const ChecklistOptions& opt);

}  // namespace snncraft
