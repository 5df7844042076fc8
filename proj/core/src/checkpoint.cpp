#include "thermodepth/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <fstream>
#include <sstream>

namespace thermodepth {

namespace {

constexpr char kMagic[4] = {'T', 'D', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : b_(bytes), end_(end) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(b_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, b_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw Error(Errc::kMalformedData, "checkpoint truncated");
  }
  const std::string& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kMissingFile, "cannot read checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_checkpoint(const ModelParams& params, const ModelConfig& cfg, const std::string& path) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kVersion);
  w.str(emit_model_config(cfg));
  w.str(model_config_hash(cfg));
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    w.u8(static_cast<std::uint8_t>(p.group));
    w.u8(p.trainable ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(p.dims.size()));
    for (int d : p.dims) w.u32(static_cast<std::uint32_t>(d));
    w.raw(p.value.data(), sizeof(float) * static_cast<std::size_t>(p.value.size()));
  }
  w.u64(fnv1a64(w.bytes()));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot write checkpoint " + path);
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw Error(Errc::kIo, "short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path, const std::optional<ModelConfig>& expected) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(Errc::kMalformedData, path + " is not a checkpoint");
  }
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (fnv1a64(std::string_view(bytes.data(), body)) != stored) {
    throw Error(Errc::kContentHashMismatch, path + ": content hash mismatch (file corrupted or edited)");
  }

  Reader r(bytes, body);
  char magic[4];
  r.raw(magic, 4);
  if (const auto v = r.u32(); v != kVersion) {
    throw Error(Errc::kMalformedData, fmt::format("{}: unsupported checkpoint version {}", path, v));
  }
  Checkpoint ck;
  const std::string cfg_text = r.str();
  const std::string cfg_hash = r.str();
  try {
    ck.config = parse_model_config(cfg_text);
  } catch (const Error& e) {
    throw Error(Errc::kMalformedData, path + ": stored config unreadable: " + e.what());
  }
  if (model_config_hash(ck.config) != cfg_hash) {
    throw Error(Errc::kConfigHashMismatch, path + ": stored config does not match its recorded hash " + cfg_hash);
  }
  if (expected && model_config_hash(*expected) != cfg_hash) {
    throw Error(Errc::kConfigHashMismatch,
                fmt::format("{}: checkpoint config {} differs from requested config {} (rb {} vs {})", path,
                            cfg_hash, model_config_hash(*expected), to_string(ck.config.rb),
                            to_string(expected->rb)));
  }

  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    const auto group = static_cast<nn::ParamGroup>(r.u8());
    const bool trainable = r.u8() != 0;
    std::vector<int> dims(r.u32());
    for (int& d : dims) d = static_cast<int>(r.u32());
    if (ck.params.find(name)) throw Error(Errc::kMalformedData, path + ": duplicate tensor " + name);
    auto& p = ck.params.add(name, dims, group, trainable);
    r.raw(p.value.data(), sizeof(float) * static_cast<std::size_t>(p.value.size()));
  }
  if (!r.done()) throw Error(Errc::kMalformedData, path + ": trailing bytes after tensors");

  const auto want = expected_tensors(ck.config);
  for (const auto& t : want) {
    const auto* p = ck.params.find(t.name);
    if (!p) throw Error(Errc::kMissingTensor, path + ": missing tensor " + t.name);
    if (p->dims != t.dims) {
      throw Error(Errc::kTensorShapeMismatch, fmt::format("{}: tensor {} has dims [{}], expected [{}]", path, t.name,
                                                          fmt::join(p->dims, ","), fmt::join(t.dims, ",")));
    }
    if (p->group != t.group || p->trainable != t.trainable) {
      throw Error(Errc::kCensusMismatch,
                  fmt::format("{}: tensor {} is {} / {}, expected {} / {}", path, t.name, group_name(p->group),
                              p->trainable ? "trainable" : "fixed", group_name(t.group),
                              t.trainable ? "trainable" : "fixed"));
    }
  }
  for (const auto& p : ck.params) {
    bool known = false;
    for (const auto& t : want) known = known || t.name == p.name;
    if (!known) throw Error(Errc::kUnexpectedTensor, path + ": unexpected tensor " + p.name);
  }
  return ck;
}

std::string checkpoint_file_hash(const std::string& path) { return hex64(fnv1a64(read_file(path))); }

std::string params_hash(const ModelParams& params) {
  std::uint64_t h = fnv1a64("");
  for (const auto& p : params) {
    h = fnv1a64(p.name, h);
    h = fnv1a64(p.dims.data(), sizeof(int) * p.dims.size(), h);
    h = fnv1a64(p.value.data(), sizeof(float) * static_cast<std::size_t>(p.value.size()), h);
  }
  return hex64(h);
}

}  // namespace thermodepth
