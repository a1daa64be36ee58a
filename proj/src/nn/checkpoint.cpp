#include "uvmakeup/nn/checkpoint.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstring>

#include "uvmakeup/core/checksum.hpp"
#include "uvmakeup/core/image_io.hpp"

namespace uvmakeup::nn {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

constexpr char kMagic[4] = {'U', 'V', 'M', 'C'};
constexpr std::size_t kDigestSize = 32;

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  void raw(void* p, std::size_t n) {
    if (n > size_ - pos_) fail(ErrorCategory::checkpoint, "checkpoint truncated");
    std::memcpy(p, data_ + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > size_ - pos_) fail(ErrorCategory::checkpoint, "checkpoint truncated");
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::array<std::uint8_t, kDigestSize> digest(const std::uint8_t* data, std::size_t n) {
  std::array<std::uint8_t, kDigestSize> out{};
  unsigned int len = 0;
  EVP_Digest(data, n, out.data(), &len, EVP_sha256(), nullptr);
  return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(Checkpoint::kFormatVersion);
  w.str(checkpoint.kind);
  w.u64(checkpoint.iteration);
  w.str(checkpoint.metadata.dump());
  w.u32(static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, t] : checkpoint.tensors) {
    w.str(name);
    const Shape s = t.shape();
    w.u32(static_cast<std::uint32_t>(s.n));
    w.u32(static_cast<std::uint32_t>(s.c));
    w.u32(static_cast<std::uint32_t>(s.h));
    w.u32(static_cast<std::uint32_t>(s.w));
    w.raw(t.data(), t.size() * sizeof(float));
  }
  const auto d = digest(w.bytes().data(), w.bytes().size());
  w.raw(d.data(), d.size());
  return std::move(w.bytes());
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes,
                            const std::string& expected_kind) {
  if (bytes.size() < 4 + 4 + kDigestSize) fail(ErrorCategory::checkpoint, "checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorCategory::checkpoint, "not a checkpoint file (bad magic)");
  }
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + 4, 4);
  if (version != Checkpoint::kFormatVersion) {
    fail(ErrorCategory::checkpoint, "unsupported checkpoint version " + std::to_string(version) +
                                        " (expected " +
                                        std::to_string(Checkpoint::kFormatVersion) + ")");
  }
  const std::size_t body = bytes.size() - kDigestSize;
  const auto d = digest(bytes.data(), body);
  if (std::memcmp(d.data(), bytes.data() + body, kDigestSize) != 0) {
    fail(ErrorCategory::checkpoint, "checkpoint digest mismatch (truncated or corrupt)");
  }

  Reader r(bytes.data() + 8, body - 8);
  Checkpoint out;
  out.kind = r.str();
  if (!expected_kind.empty() && out.kind != expected_kind) {
    fail(ErrorCategory::checkpoint,
         "checkpoint holds model kind '" + out.kind + "', expected '" + expected_kind + "'");
  }
  out.iteration = r.u64();
  try {
    out.metadata = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::checkpoint, std::string("checkpoint metadata: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    Shape s;
    s.n = static_cast<int>(r.u32());
    s.c = static_cast<int>(r.u32());
    s.h = static_cast<int>(r.u32());
    s.w = static_cast<int>(r.u32());
    std::vector<float> data(s.numel());
    r.raw(data.data(), data.size() * sizeof(float));
    out.tensors.emplace(std::move(name), Tensor<float>(s, std::move(data)));
  }
  if (!r.done()) fail(ErrorCategory::checkpoint, "trailing bytes in checkpoint");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = serialize_checkpoint(checkpoint);
  // Write-then-rename keeps a previous checkpoint intact if the write fails.
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  io::write_file(tmp, bytes);
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& expected_kind) {
  return parse_checkpoint(io::read_file(path), expected_kind);
}

std::string parameter_checksum(const std::map<std::string, Tensor<float>>& tensors) {
  Writer w;
  for (const auto& [name, t] : tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.size()));
    w.raw(t.data(), t.size() * sizeof(float));
  }
  return sha256_hex(w.bytes());
}

}  // namespace uvmakeup::nn
