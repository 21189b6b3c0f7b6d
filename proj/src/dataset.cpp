#include "snncraft/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "snncraft/error.hpp"
#include "snncraft/rng.hpp"

namespace snncraft {

void Dataset::validate() const {
  if (images.size() != labels.size()) {
    throw InputError("dataset has " + std::to_string(images.size()) + " images but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw InputError("label " + std::to_string(labels[i]) + " at index " +
                       std::to_string(i) + " exceeds class count " +
                       std::to_string(classes));
    }
  }
}

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(f),
                                    std::istreambuf_iterator<char>());
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  if (off + 4 > b.size()) throw FormatError("truncated header", off);
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::vector<unsigned char> img = read_file(images_path);
  std::vector<unsigned char> lbl = read_file(labels_path);

  if (be32(img, 0) != 0x00000803u) {
    throw FormatError("bad IDX image magic in '" + images_path + "'", 0);
  }
  if (be32(lbl, 0) != 0x00000801u) {
    throw FormatError("bad IDX label magic in '" + labels_path + "'", 0);
  }
  std::size_t n = be32(img, 4);
  std::size_t rows = be32(img, 8);
  std::size_t cols = be32(img, 12);
  if (be32(lbl, 4) != n) {
    throw FormatError("IDX image/label counts differ", 4);
  }
  std::size_t need = 16 + n * rows * cols;
  if (img.size() < need) throw FormatError("IDX image file truncated", img.size());
  if (lbl.size() < 8 + n) throw FormatError("IDX label file truncated", lbl.size());

  Dataset ds;
  ds.height = rows;
  ds.width = cols;
  ds.channels = 1;
  ds.images.reserve(n);
  ds.labels.reserve(n);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t = Tensor::zeros({rows, cols, 1});
    const unsigned char* p = img.data() + 16 + i * rows * cols;
    for (std::size_t j = 0; j < rows * cols; ++j) {
      t.data[j] = static_cast<double>(p[j]) / 255.0;
    }
    ds.images.push_back(std::move(t));
    ds.labels.push_back(lbl[8 + i]);
    max_label = std::max(max_label, ds.labels.back());
  }
  ds.classes = max_label + 1;
  ds.validate();
  return ds;
}

Dataset load_cifar_binary(const std::string& path) {
  std::vector<unsigned char> raw = read_file(path);
  constexpr std::size_t kRecord = 1 + 3 * 32 * 32;
  if (raw.empty() || raw.size() % kRecord != 0) {
    throw FormatError("CIFAR binary size " + std::to_string(raw.size()) +
                          " is not a multiple of the 3073-byte record",
                      raw.size() - raw.size() % kRecord);
  }
  std::size_t n = raw.size() / kRecord;
  Dataset ds;
  ds.height = 32;
  ds.width = 32;
  ds.channels = 3;
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec = raw.data() + i * kRecord;
    std::size_t label = rec[0];
    if (label > 99) throw FormatError("CIFAR label out of range", i * kRecord);
    Tensor t = Tensor::zeros({32, 32, 3});
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t h = 0; h < 32; ++h)
        for (std::size_t w = 0; w < 32; ++w)
          t.at3(h, w, c) = static_cast<double>(rec[1 + c * 1024 + h * 32 + w]) / 255.0;
    ds.images.push_back(std::move(t));
    ds.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  ds.classes = max_label + 1;
  ds.validate();
  return ds;
}

Dataset load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open '" + path + "'");
  std::string header;
  if (!std::getline(f, header)) throw FormatError("empty dataset file", 0);
  std::size_t h = 0, w = 0, c = 0;
  int version = 0;
  if (std::sscanf(header.c_str(), "# snncraft-dataset v%d %zu %zu %zu", &version, &h,
                  &w, &c) != 4 ||
      version != 1) {
    throw FormatError("bad dataset header '" + header + "'", 0);
  }
  Dataset ds;
  ds.height = h;
  ds.width = w;
  ds.channels = c;
  const std::size_t pixels = h * w * c;
  std::string line;
  std::uint64_t offset = header.size() + 1;
  std::size_t max_label = 0;
  while (std::getline(f, line)) {
    if (line.empty()) {
      offset += 1;
      continue;
    }
    Tensor t = Tensor::zeros({h, w, c});
    const char* p = line.c_str();
    char* end = nullptr;
    long label = std::strtol(p, &end, 10);
    if (end == p || label < 0) throw FormatError("bad label field", offset);
    p = end;
    for (std::size_t i = 0; i < pixels; ++i) {
      if (*p != ',') throw FormatError("expected ',' in pixel row", offset + (p - line.c_str()));
      ++p;
      double v = std::strtod(p, &end);
      if (end == p) throw FormatError("bad pixel value", offset + (p - line.c_str()));
      t.data[i] = v;
      p = end;
    }
    ds.images.push_back(std::move(t));
    ds.labels.push_back(static_cast<std::size_t>(label));
    max_label = std::max(max_label, ds.labels.back());
    offset += line.size() + 1;
  }
  if (ds.images.empty()) throw FormatError("dataset has no rows", offset);
  ds.classes = max_label + 1;
  ds.validate();
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write '" + path + "'");
  char buf[64];
  f << "# snncraft-dataset v1 " << ds.height << " " << ds.width << " " << ds.channels
    << "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    f << ds.labels[i];
    for (double v : ds.images[i].data) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      f << buf;
    }
    f << "\n";
  }
}

namespace {

// Smooth zero-mean field: coarse random grid, bilinearly upsampled,
// normalized to unit max amplitude.
std::vector<double> smooth_field(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  constexpr std::size_t kGrid = 7;
  std::vector<double> grid(kGrid * kGrid);
  for (double& v : grid) v = rng.uniform(-1.0, 1.0);

  std::vector<double> field(h * w);
  double max_abs = 0.0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double gy = static_cast<double>(y) / (h - 1) * (kGrid - 1);
      double gx = static_cast<double>(x) / (w - 1) * (kGrid - 1);
      std::size_t y0 = std::min<std::size_t>(static_cast<std::size_t>(gy), kGrid - 2);
      std::size_t x0 = std::min<std::size_t>(static_cast<std::size_t>(gx), kGrid - 2);
      double fy = gy - y0, fx = gx - x0;
      double v = grid[y0 * kGrid + x0] * (1 - fy) * (1 - fx) +
                 grid[y0 * kGrid + x0 + 1] * (1 - fy) * fx +
                 grid[(y0 + 1) * kGrid + x0] * fy * (1 - fx) +
                 grid[(y0 + 1) * kGrid + x0 + 1] * fy * fx;
      field[y * w + x] = v;
      max_abs = std::max(max_abs, std::fabs(v));
    }
  }
  for (double& v : field) v /= max_abs;
  return field;
}

}  // namespace

Dataset make_synthetic(const SyntheticSpec& spec) {
  const std::size_t h = spec.height, w = spec.width;
  std::vector<double> robust_field = smooth_field(h, w, mix_seed(spec.seed, 0x5e1fu));
  std::vector<double> fragile_field = smooth_field(h, w, mix_seed(spec.seed, 0xf7a61eu));

  // The cues occupy disjoint pixels: the fragile cue lives where the robust
  // field is weak, so neither cue hides inside the other's contrast.
  {
    double max_abs = 0.0;
    for (std::size_t j = 0; j < h * w; ++j) {
      if (std::fabs(robust_field[j]) < 0.35) {
        robust_field[j] = 0.0;
      } else {
        fragile_field[j] = 0.0;
      }
      max_abs = std::max(max_abs, std::fabs(fragile_field[j]));
    }
    if (max_abs > 0.0) {
      for (double& v : fragile_field) v /= max_abs;
    }
  }

  Dataset ds;
  ds.height = h;
  ds.width = w;
  ds.channels = 1;
  ds.classes = 2;
  Rng sample_rng(mix_seed(spec.seed, 0x5a371eu));
  for (std::size_t i = 0; i < spec.count; ++i) {
    std::size_t label = i % 2;
    double sign = label == 0 ? -1.0 : 1.0;
    double amp = spec.signal *
                 (1.0 + spec.amplitude_jitter * (2.0 * sample_rng.uniform() - 1.0));
    double robust_sign = sample_rng.uniform() < spec.robust_flip_rate ? -sign : sign;
    double fragile_sign = sample_rng.uniform() < spec.fragile_flip_rate ? -sign : sign;
    double fragile_amp = spec.fragile *
                 (1.0 + spec.fragile_jitter * (2.0 * sample_rng.uniform() - 1.0));
    Tensor img = Tensor::zeros({h, w, 1});
    for (std::size_t j = 0; j < img.size(); ++j) {
      double v = 0.5 + robust_sign * amp * robust_field[j] +
                 fragile_sign * fragile_amp * fragile_field[j] +
                 spec.noise_sigma * sample_rng.normal();
      img.data[j] = std::min(1.0, std::max(0.0, v));
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  ds.validate();
  return ds;
}

Dataset subset(const Dataset& ds, std::size_t offset, std::size_t count) {
  if (offset + count > ds.size()) throw InputError("subset out of range");
  Dataset out;
  out.height = ds.height;
  out.width = ds.width;
  out.channels = ds.channels;
  out.classes = ds.classes;
  out.images.assign(ds.images.begin() + offset, ds.images.begin() + offset + count);
  out.labels.assign(ds.labels.begin() + offset, ds.labels.begin() + offset + count);
  return out;
}

}  // namespace snncraft
