#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snncraft/tensor.hpp"

namespace snncraft {

// Labeled image set with pixels scaled to [0,1].
struct Dataset {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::size_t classes = 0;
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;

  std::size_t size() const { return images.size(); }
  Shape image_shape() const { return {height, width, channels}; }
  void validate() const;
};

// IDX image/label pair (the MNIST container format).
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR binary: records of 1 label byte + 32*32*3 pixel bytes.
Dataset load_cifar_binary(const std::string& path);

// Project CSV container: a header line `# snncraft-dataset v1 <h> <w> <c>`
// followed by `label,v0,v1,...` rows with full-precision pixel values.
// Lossless, so adversarial batches can be exported and re-ingested.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

// Two-class synthetic task built from two label-correlated smooth cues: a
// strong prototype pattern whose per-sample amplitude comfortably exceeds
// the attack budget but whose sign is wrong on a small fraction of samples
// (the robust cue), and a faint second pattern that is always correct yet
// sits inside the attacker's 8/255 budget (the fragile cue). Fitting the
// flipped samples forces clean training to lean on the fragile cue, which
// is what gives bounded attacks their bite on this task.
struct SyntheticSpec {
  std::size_t count = 2000;
  std::size_t height = 28;
  std::size_t width = 28;
  std::uint64_t seed = 1;
  double signal = 0.16;           // robust-cue half-distance per pixel
  double noise_sigma = 0.04;      // per-pixel Gaussian noise
  double amplitude_jitter = 0.5;  // per-sample robust-cue spread, fraction of signal
  double fragile = 0.025;         // fragile-cue half-distance per pixel
  double fragile_jitter = 0.6;    // per-sample fragile-cue spread, fraction of fragile
  double robust_flip_rate = 0.08; // share of samples with an inverted robust cue
  double fragile_flip_rate = 0.1; // share with an inverted fragile cue
};

Dataset make_synthetic(const SyntheticSpec& spec);

Dataset subset(const Dataset& ds, std::size_t offset, std::size_t count);

}  // namespace snncraft
