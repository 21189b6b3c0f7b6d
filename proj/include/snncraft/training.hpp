#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "snncraft/dataset.hpp"
#include "snncraft/model.hpp"
#include "snncraft/report.hpp"

namespace snncraft {

enum class TrainMode { kAnn, kSnnTraditional, kSnnHire, kSnnGaussian };

const char* train_mode_name(TrainMode m);
TrainMode train_mode_from_name(const std::string& name);

// Step schedule: the rate is multiplied by `decay` once the epoch index
// passes each milestone fraction of the total epoch count.
struct LrSchedule {
  double initial = 1e-4;
  double decay = 0.2;
  std::vector<double> milestone_fracs = {0.6, 0.8, 0.9};

  double rate_at(std::size_t epoch, std::size_t total_epochs) const;

  static LrSchedule ann_default();  // 0.01, x0.1 at 62.5/75/87.5%
  static LrSchedule snn_default();  // 1e-4, /5 at 60/80/90%
};

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  TrainMode mode = TrainMode::kSnnTraditional;
  std::size_t time_steps = 6;  // T
  std::size_t periods = 1;     // N; weight updates per batch in HIRE modes
  double eps_s = 0.0;          // noise step, pixel units
  double eps_t = 0.0;          // noise bound
  LrSchedule lr;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  bool freeze_v_t = false;
  bool freeze_l_k = false;
  double gamma = 0.3;
  bool detach_reset = false;
  bool carry_membrane = false;  // keep membrane state across periods of a batch
  Optimizer optimizer = Optimizer::kSgd;
  double momentum = 0.0;        // SGD momentum; plain SGD when 0
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  // Clean-accuracy bookkeeping per epoch: train accuracy is measured on at
  // most this many (fixed, leading) training samples.
  std::size_t train_acc_samples = 512;

  void validate() const;
  std::size_t period_steps() const;  // floor(T/N)
};

// Stored per-step trace count for one weight update: floor(T/N) when noise
// periods are in play, T for traditional training.
std::size_t gradient_storage_steps(const TrainConfig& cfg);

// Fired after every period's noise update; lets tests watch the kappa
// carryover across batches.
struct PeriodEvent {
  std::size_t epoch = 0;
  std::size_t batch_index = 0;
  std::size_t period = 0;
  std::size_t batch_samples = 0;
  const std::vector<Tensor>* kappa_before = nullptr;  // as fed to the forward
  const std::vector<Tensor>* kappa_after = nullptr;   // after the Eq-style update
};
using PeriodObserver = std::function<void(const PeriodEvent&)>;

struct TrainResult {
  std::vector<TrainLogRow> log;
  std::size_t peak_stored_steps = 0;   // instrumented max trace length per update
  std::uint64_t total_sim_steps = 0;   // sample-time-steps simulated over the run
  std::uint64_t updates = 0;           // parameter updates performed
  std::uint64_t kappa_checks = 0;      // in-loop guard evaluations, all passed
};

TrainResult train_ann(ModelGraph& g, const Dataset& train, const Dataset* val,
                      const TrainConfig& cfg);

// One engine drives the traditional, HIRE and Gaussian-noise regimes; they
// differ only in how the per-pixel perturbation kappa evolves between
// periods. Traditional training ignores N (update interval is T) and uses no
// noise. kappa persists across batches: the first period of a batch starts
// from the kappa the previous batch ended with.
TrainResult train_snn(ModelGraph& g, const Dataset& train, const Dataset* val,
                      const TrainConfig& cfg, const PeriodObserver& observer = {});

}  // namespace snncraft
