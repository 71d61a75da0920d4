#include "unimatch/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "unimatch/config.hpp"
#include "unimatch/errors.hpp"

namespace unimatch {
namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

constexpr char kMagic[8] = {'U', 'M', 'C', 'K', 'P', 'T', '\0', '\0'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  template <typename T>
  T get(const char* what) {
    T v;
    raw(&v, sizeof(T), what);
    return v;
  }
  void raw(void* dst, std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) fail(std::string("truncated while reading ") + what);
    std::memcpy(dst, b_.data() + pos_, n);
    pos_ += n;
  }
  std::string str(const char* what) {
    const auto n = get<std::uint32_t>(what);
    std::string s(n, '\0');
    raw(s.data(), n, what);
    return s;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError("checkpoint: " + msg + " at byte offset " + std::to_string(pos_));
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint make_checkpoint(const UniMatch& model) {
  Checkpoint c;
  c.model = model.config();
  const auto& p = model.params();
  c.names = p.names();
  for (const auto& t : p.tensors()) {
    c.shapes.push_back(t.shape());
    c.values.emplace_back(t.values().begin(), t.values().end());
  }
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  KeyValues kv;
  write_model_config(ckpt.model, kv);
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(Checkpoint::kVersion);
  w.str(kv.str());
  w.put<std::uint64_t>(ckpt.model.fingerprint());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.names.size()));
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < ckpt.names.size(); ++i) {
    w.str(ckpt.names[i]);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.shapes[i].size()));
    for (auto d : ckpt.shapes[i]) w.put<std::uint64_t>(d);
    w.put<std::uint64_t>(offset);
    offset += ckpt.values[i].size();
  }
  w.put<std::uint64_t>(offset);
  for (const auto& v : ckpt.values) w.bytes(v.data(), v.size() * sizeof(float));
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw FormatError("checkpoint: bad magic at byte offset 0");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != Checkpoint::kVersion) r.fail("unsupported version " + std::to_string(version));
  Checkpoint c;
  const std::string text = r.str("model config");
  try {
    c.model = read_model_config(KeyValues::parse(text, "checkpoint"), ModelConfig{});
  } catch (const ConfigError& e) {
    r.fail(std::string("invalid model config (") + e.what() + ")");
  }
  const auto fingerprint = r.get<std::uint64_t>("fingerprint");
  if (fingerprint != c.model.fingerprint()) r.fail("architecture fingerprint mismatch");
  const auto count = r.get<std::uint32_t>("parameter count");
  std::vector<std::uint64_t> offsets;
  for (std::uint32_t i = 0; i < count; ++i) {
    c.names.push_back(r.str("parameter name"));
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank > 8) r.fail("implausible rank " + std::to_string(rank));
    Shape s;
    for (std::uint32_t k = 0; k < rank; ++k) s.push_back(r.get<std::uint64_t>("extent"));
    c.shapes.push_back(s);
    offsets.push_back(r.get<std::uint64_t>("offset"));
  }
  const auto total = r.get<std::uint64_t>("value count");
  std::uint64_t expect = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    if (offsets[i] != expect) r.fail("offset of '" + c.names[i] + "' is inconsistent");
    expect += shape_numel(c.shapes[i]);
  }
  if (expect != total) r.fail("value count disagrees with the manifest");
  if (r.size() - r.pos() != total * sizeof(float)) {
    r.fail("payload holds " + std::to_string(r.size() - r.pos()) + " bytes, expected " +
           std::to_string(total * sizeof(float)));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    std::vector<float> v(shape_numel(c.shapes[i]));
    r.raw(v.data(), v.size() * sizeof(float), "values");
    c.values.push_back(std::move(v));
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void apply_checkpoint(const Checkpoint& ckpt, ModelParams& params) {
  std::string problems;
  for (std::size_t i = 0; i < ckpt.names.size(); ++i) {
    if (!params.contains(ckpt.names[i])) {
      problems += " extra:" + ckpt.names[i];
    } else if (params.get(ckpt.names[i]).shape() != ckpt.shapes[i]) {
      problems += " shape:" + ckpt.names[i];
    }
  }
  for (const auto& n : params.names()) {
    if (std::find(ckpt.names.begin(), ckpt.names.end(), n) == ckpt.names.end()) {
      problems += " missing:" + n;
    }
  }
  if (!problems.empty()) throw FormatError("checkpoint does not match the model:" + problems);
  for (std::size_t i = 0; i < ckpt.names.size(); ++i) {
    Tensor t = params.get(ckpt.names[i]);
    auto dst = t.values_mut();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = ckpt.values[i][k];
  }
}

}  // namespace unimatch
