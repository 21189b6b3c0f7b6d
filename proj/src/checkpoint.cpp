#include "snncraft/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "snncraft/error.hpp"

namespace snncraft {

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kAnnTrained: return "ann-trained";
    case Stage::kConverted: return "converted";
    case Stage::kSnnTrained: return "snn-trained";
  }
  return "?";
}

namespace {

constexpr char kMagic[8] = {'S', 'N', 'C', 'K', 'P', 'T', '0', '1'};

class Writer {
 public:
  explicit Writer(const std::string& path) : f_(path, std::ios::binary | std::ios::trunc) {
    if (!f_) throw InputError("cannot write checkpoint '" + path + "'");
  }
  void bytes(const void* p, std::size_t n) { f_.write(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    std::uint8_t b[4] = {std::uint8_t(v), std::uint8_t(v >> 8), std::uint8_t(v >> 16),
                         std::uint8_t(v >> 24)};
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = std::uint8_t(v >> (8 * i));
    bytes(b, 8);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  bool ok() const { return static_cast<bool>(f_); }

 private:
  std::ofstream f_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : f_(path, std::ios::binary) {
    if (!f_) throw DependencyError("checkpoint '" + path + "' not found");
  }
  void bytes(void* p, std::size_t n) {
    f_.read(static_cast<char*>(p), n);
    if (!f_) throw FormatError("checkpoint truncated", offset_);
    offset_ += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint8_t b[4];
    bytes(b, 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  }
  std::uint64_t u64() {
    std::uint8_t b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    std::uint32_t n = u32();
    if (n > (1u << 20)) throw FormatError("unreasonable string length", offset_);
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }
  std::uint64_t offset() const { return offset_; }

 private:
  std::ifstream f_;
  std::uint64_t offset_ = 0;
};

void write_tensor(Writer& w, const Tensor& t) {
  w.u8(t.empty() ? 0 : 1);
  if (t.empty()) return;
  w.u32(static_cast<std::uint32_t>(t.shape.size()));
  for (std::size_t d : t.shape) w.u64(d);
  for (double v : t.data) w.f64(v);
}

Tensor read_tensor(Reader& r) {
  if (r.u8() == 0) return Tensor();
  std::uint32_t rank = r.u32();
  if (rank > 8) throw FormatError("tensor rank too large", r.offset());
  Shape shape(rank);
  for (auto& d : shape) d = r.u64();
  Tensor t = Tensor::zeros(shape);
  for (double& v : t.data) v = r.f64();
  return t;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const ModelGraph& g = ckpt.graph;
  Writer w(path);
  w.bytes(kMagic, sizeof kMagic);
  w.u32(1);  // version

  w.u8(g.mode == ExecMode::kAnn ? 0 : 1);
  w.u64(g.time_steps);
  w.u32(static_cast<std::uint32_t>(g.input_shape.size()));
  for (std::size_t d : g.input_shape) w.u64(d);

  w.u8(static_cast<std::uint8_t>(ckpt.meta.stage));
  w.str(ckpt.meta.train_mode);
  w.u32(ckpt.meta.epochs);
  w.u64(ckpt.meta.seed);
  w.f64(ckpt.meta.final_lr);
  w.f64(ckpt.meta.gamma);

  w.u64(g.layers.size());
  for (std::size_t l = 0; l < g.layers.size(); ++l) {
    const LayerSpec& s = g.layers[l];
    w.u8(static_cast<std::uint8_t>(s.kind));
    w.u64(s.conv.kernel);
    w.u64(s.conv.in_channels);
    w.u64(s.conv.out_channels);
    w.u64(s.conv.stride);
    w.u64(s.conv.padding);
    w.u64(s.linear_out);
    w.u64(s.pool_window);
    w.f64(s.dropout_rate);
    w.u8((s.train_w ? 1 : 0) | (s.train_v_t ? 2 : 0) | (s.train_l_k ? 4 : 0));

    const LayerParams& p = g.params[l];
    write_tensor(w, p.w);
    w.f64(p.v_t);
    w.f64(p.l_k);
  }
  if (!w.ok()) throw InputError("checkpoint write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw FormatError("bad checkpoint magic in '" + path + "'", 0);
  }
  std::uint32_t version = r.u32();
  if (version != 1) throw FormatError("unsupported checkpoint version", 8);

  Checkpoint ckpt;
  ModelGraph& g = ckpt.graph;
  g.mode = r.u8() == 0 ? ExecMode::kAnn : ExecMode::kSnn;
  g.time_steps = r.u64();
  std::uint32_t rank = r.u32();
  if (rank > 8) throw FormatError("input shape rank too large", r.offset());
  g.input_shape.resize(rank);
  for (auto& d : g.input_shape) d = r.u64();

  std::uint8_t stage = r.u8();
  if (stage > 2) throw FormatError("bad stage byte", r.offset());
  ckpt.meta.stage = static_cast<Stage>(stage);
  ckpt.meta.train_mode = r.str();
  ckpt.meta.epochs = r.u32();
  ckpt.meta.seed = r.u64();
  ckpt.meta.final_lr = r.f64();
  ckpt.meta.gamma = r.f64();

  std::uint64_t n_layers = r.u64();
  if (n_layers == 0 || n_layers > 1024) {
    throw FormatError("implausible layer count", r.offset());
  }
  g.layers.resize(n_layers);
  g.params.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    LayerSpec& s = g.layers[l];
    std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::kOutputAccumulator)) {
      throw FormatError("bad layer kind", r.offset());
    }
    s.kind = static_cast<LayerKind>(kind);
    s.conv.kernel = r.u64();
    s.conv.in_channels = r.u64();
    s.conv.out_channels = r.u64();
    s.conv.stride = r.u64();
    s.conv.padding = r.u64();
    s.linear_out = r.u64();
    s.pool_window = r.u64();
    s.dropout_rate = r.f64();
    std::uint8_t flags = r.u8();
    s.train_w = flags & 1;
    s.train_v_t = flags & 2;
    s.train_l_k = flags & 4;

    g.params[l].w = read_tensor(r);
    g.params[l].v_t = r.f64();
    g.params[l].l_k = r.f64();
  }
  g.resolve();
  return ckpt;
}

}  // namespace snncraft
