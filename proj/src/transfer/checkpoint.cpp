#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "qtransfer/errors.hpp"
#include "qtransfer/transfer.hpp"

namespace qtransfer {
namespace {

constexpr char kMagic[4] = {'D', 'Q', 'N', 'C'};
constexpr std::uint32_t kMaxRank = 8;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint64_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw CheckpointError(std::string("truncated checkpoint while reading ") + what,
                            pos_);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{data_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  const std::uint8_t* raw(std::size_t n, const char* what) {
    need(n, what);
    const std::uint8_t* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error while reading " + path.string());
  return bytes;
}

}  // namespace

const Tensor& Checkpoint::get(std::string_view name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e.value;
  }
  throw ConfigError("checkpoint has no entry '" + std::string(name) + "'");
}

bool Checkpoint::has(std::string_view name) const {
  for (const auto& e : entries) {
    if (e.name == name) return true;
  }
  return false;
}

std::vector<std::uint8_t> encode_checkpoint(const QNetwork& net,
                                            const CheckpointMetadata& metadata) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.str(metadata.env_name);
  w.u32(metadata.action_count);
  w.u64(metadata.global_step);
  w.u64(metadata.config_hash);
  const auto params = net.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float f : p.value.values()) w.f32(f);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::uint8_t* magic = r.raw(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)", 0);
  }
  const std::uint64_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version),
                          version_at);
  }
  Checkpoint ckpt;
  ckpt.metadata.env_name = r.str("env name");
  ckpt.metadata.action_count = r.u32("action count");
  ckpt.metadata.global_step = r.u64("global step");
  ckpt.metadata.config_hash = r.u64("config hash");
  const std::uint32_t count = r.u32("entry count");
  for (std::uint32_t e = 0; e < count; ++e) {
    NamedTensor entry;
    entry.name = r.str("entry name");
    const std::uint64_t rank_at = r.offset();
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > kMaxRank) {
      throw CheckpointError("entry '" + entry.name + "' has invalid rank " +
                                std::to_string(rank),
                            rank_at);
    }
    Shape shape;
    std::uint64_t elements = 1;
    bool too_big = false;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(r.u32("dims"));
      elements *= shape.back();
      // Checked per dimension so the running product cannot overflow.
      too_big = too_big || elements > bytes.size();
    }
    if (too_big || elements > r.remaining() / 4) {
      throw CheckpointError("truncated checkpoint while reading tensor data",
                            r.offset());
    }
    std::vector<float> data(elements);
    const std::uint8_t* raw = r.raw(elements * 4, "tensor data");
    for (std::size_t i = 0; i < elements; ++i) {
      std::uint32_t bits = 0;
      for (int k = 0; k < 4; ++k) bits |= std::uint32_t{raw[4 * i + k]} << (8 * k);
      data[i] = std::bit_cast<float>(bits);
    }
    entry.value = Tensor(std::move(shape), std::move(data));
    ckpt.entries.push_back(std::move(entry));
  }
  if (r.remaining() != 0) {
    throw CheckpointError("unexpected trailing bytes after last entry", r.offset());
  }
  return ckpt;
}

void save_checkpoint(const QNetwork& net, const std::filesystem::path& path,
                     const CheckpointMetadata& metadata) {
  const std::vector<std::uint8_t> bytes = encode_checkpoint(net, metadata);
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error while writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : read_file(path)) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace qtransfer
