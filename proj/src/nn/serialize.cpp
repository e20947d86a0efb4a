#include "loadcycle/nn/serialize.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "loadcycle/error.hpp"
#include "loadcycle/nn/network.hpp"

namespace loadcycle::nn {

namespace {

constexpr char kMagic[4] = {'L', 'C', 'M', '1'};
constexpr std::uint8_t kFlagTrainable = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  const std::uint8_t* take(std::size_t n) {
    if (in_.size() - pos_ < n) fail(ErrorCode::corrupt_file, "model file truncated");
    const auto* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename U>
  U uint() {
    const auto* p = take(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  int i32() { return static_cast<int>(uint<std::uint32_t>()); }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_spec(Writer& w, const ModelSpec& s) {
  w.uint(static_cast<std::uint8_t>(s.variant));
  for (int v : {s.ws, s.in_channels, s.n_classes, s.conv_filters, s.conv_kernel, s.rnn_units[0], s.rnn_units[1],
                s.dense_units[0], s.dense_units[1], s.fcn_filters[0], s.fcn_filters[1], s.fcn_filters[2],
                s.fcn_kernels[0], s.fcn_kernels[1], s.fcn_kernels[2], s.fcn_lstm_units, s.se_reduction})
    w.uint(static_cast<std::uint32_t>(v));
}

ModelSpec read_spec(Reader& r) {
  ModelSpec s;
  const auto variant = r.uint<std::uint8_t>();
  if (variant > static_cast<std::uint8_t>(Variant::linear_softmax)) fail(ErrorCode::corrupt_file, "unknown variant");
  s.variant = static_cast<Variant>(variant);
  for (int* f : {&s.ws, &s.in_channels, &s.n_classes, &s.conv_filters, &s.conv_kernel, &s.rnn_units[0],
                 &s.rnn_units[1], &s.dense_units[0], &s.dense_units[1], &s.fcn_filters[0], &s.fcn_filters[1],
                 &s.fcn_filters[2], &s.fcn_kernels[0], &s.fcn_kernels[1], &s.fcn_kernels[2], &s.fcn_lstm_units,
                 &s.se_reduction})
    *f = r.i32();
  return s;
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> serialize_model(const Model& m) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint(kModelFormatVersion);
  write_spec(w, m.spec);
  w.uint(static_cast<std::uint8_t>(m.norm.fitted ? 1 : 0));
  for (int c = 0; c < core::kNumChannels; ++c) {
    w.f64(m.norm.mean[c]);
    w.f64(m.norm.std[c]);
    w.uint(static_cast<std::uint8_t>(m.norm.constant[c] ? 1 : 0));
  }
  w.uint(static_cast<std::uint32_t>(m.params.size()));
  for (const auto& p : m.params) {
    w.uint(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    w.uint(static_cast<std::uint8_t>(p.shape.size()));
    for (int d : p.shape) w.uint(static_cast<std::uint32_t>(d));
    w.uint(static_cast<std::uint8_t>(p.trainable ? kFlagTrainable : 0));
    w.uint(static_cast<std::uint8_t>(p.role));
    w.uint(static_cast<std::uint8_t>(p.group));
    w.f64(p.lr_multiplier);
    for (float v : p.values) w.f32(v);
  }
  const auto crc = crc32_of(w.data());
  w.uint(crc);
  return std::move(w.data());
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + 2 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    fail(ErrorCode::corrupt_file, "not a model file");
  const auto version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kModelFormatVersion)
    fail(ErrorCode::version_mismatch, "model format version " + std::to_string(version) + " is not supported");
  if (bytes.size() < 10) fail(ErrorCode::corrupt_file, "model file truncated");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (tail.uint<std::uint32_t>() != crc32_of(body)) fail(ErrorCode::corrupt_file, "model checksum mismatch");

  Reader r(body);
  r.take(6);
  Model m;
  m.spec = read_spec(r);
  try {
    validate(m.spec);
  } catch (const Error& e) {
    fail(ErrorCode::corrupt_file, std::string("bad spec in model file: ") + e.what());
  }
  m.norm.fitted = r.uint<std::uint8_t>() != 0;
  for (int c = 0; c < core::kNumChannels; ++c) {
    m.norm.mean[c] = r.f64();
    m.norm.std[c] = r.f64();
    m.norm.constant[c] = r.uint<std::uint8_t>() != 0;
  }
  const auto decls = declare_params(m.spec);
  const auto count = r.uint<std::uint32_t>();
  if (count != decls.size()) fail(ErrorCode::corrupt_file, "tensor count does not match the spec");
  for (const auto& d : decls) {
    Parameter<float> p;
    const auto len = r.uint<std::uint16_t>();
    const auto* name = r.take(len);
    p.name.assign(reinterpret_cast<const char*>(name), len);
    const auto ndim = r.uint<std::uint8_t>();
    std::size_t n = 1;
    for (int i = 0; i < ndim; ++i) {
      p.shape.push_back(r.i32());
      n *= static_cast<std::size_t>(p.shape.back());
    }
    p.trainable = (r.uint<std::uint8_t>() & kFlagTrainable) != 0;
    p.role = static_cast<Role>(r.uint<std::uint8_t>());
    p.group = static_cast<Group>(r.uint<std::uint8_t>());
    p.lr_multiplier = r.f64();
    if (p.name != d.name || p.shape != d.shape || p.role != d.role || p.group != d.group)
      fail(ErrorCode::corrupt_file, "tensor '" + p.name + "' does not match the spec");
    p.values.resize(n);
    for (auto& v : p.values) v = r.f32();
    m.params.push_back(std::move(p));
  }
  if (!r.done()) fail(ErrorCode::corrupt_file, "trailing bytes in model file");
  m.set_network(build_network<float>(m.spec));
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_failure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io_failure, "cannot write " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_failure, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace loadcycle::nn
