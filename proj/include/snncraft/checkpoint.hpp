#pragma once

#include <string>

#include "snncraft/model.hpp"

namespace snncraft {

// Pipeline stage recorded in a checkpoint, so downstream commands can refuse
// to run on the wrong kind of artifact.
enum class Stage { kAnnTrained, kConverted, kSnnTrained };

const char* stage_name(Stage s);

struct TrainMeta {
  Stage stage = Stage::kAnnTrained;
  std::string train_mode;  // "ann", "snn-traditional", "snn-hire", "snn-gaussian"
  std::uint32_t epochs = 0;
  std::uint64_t seed = 0;
  double final_lr = 0.0;
  double gamma = 0.3;
};

struct Checkpoint {
  ModelGraph graph;
  TrainMeta meta;
};

// Versioned little-endian binary container; parameter tensors are stored as
// raw 64-bit doubles so a round trip is bit-exact.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace snncraft
