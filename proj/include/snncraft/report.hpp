#pragma once

#include <string>
#include <utility>
#include <vector>

#include "snncraft/metrics.hpp"

namespace snncraft {

// All report files are plain CSV with deterministic formatting, so two runs
// with the same config and seed produce byte-identical output.

std::string format_double(double v);  // shortest round-trippable form

struct KvRow {
  std::string key;
  std::string value;
};

void write_kv_csv(const std::string& path, const std::vector<KvRow>& rows);
std::vector<KvRow> read_kv_csv(const std::string& path);
std::string kv_lookup(const std::vector<KvRow>& rows, const std::string& key);

// Fixed-header per-layer report: layer,kind,neurons,sa,tasa,flops_ann,
// flops_snn,energy_pj.
void write_layer_report(const std::string& path,
                        const std::vector<LayerActivityRecord>& layers);
std::vector<LayerActivityRecord> read_layer_report(const std::string& path);

void write_checklist_csv(const std::string& path,
                         const std::vector<ChecklistRow>& rows);

struct TrainLogRow {
  std::size_t epoch = 0;
  std::string mode;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double loss = 0.0;
  double lr = 0.0;
  double kappa_saturation = 0.0;  // fraction of kappa pixels at +-eps_t
  std::uint64_t sim_steps = 0;    // simulated time steps this epoch
};

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& rows);

// Summary of an evaluation run, written as key/value CSV so `compare` can
// subtract any two of them.
std::vector<KvRow> eval_summary_rows(const EvalResult& res, const std::string& tag);

// Delta rows (a - b) for every numeric key the two summaries share.
std::vector<KvRow> compare_summaries(const std::vector<KvRow>& a,
                                     const std::vector<KvRow>& b);

void write_sweep_csv(const std::string& path, const std::string& axis,
                     const std::vector<SweepPoint>& curve);

}  // namespace snncraft
