#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "c2f/errors.hpp"
#include "c2f/trainer.hpp"

namespace c2f::train {
namespace {

constexpr char kMagic[4] = {'C', '2', 'F', 'K'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw CorruptCheckpointError(std::string("truncated ") + what, pos_);
  }
  std::uint64_t uint(std::size_t width, const char* what) {
    need(width, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += width;
    return v;
  }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(uint(4, what)); }
  std::uint64_t u64(const char* what) { return uint(8, what); }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

float narrow(double v) { return static_cast<float>(v); }

void add_entry(Checkpoint& ckpt, const std::string& name, const Shape& s,
               std::span<const double> values) {
  CheckpointEntry e;
  e.name = name;
  e.dims = {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
            static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
  e.values.reserve(values.size());
  for (double v : values) e.values.push_back(narrow(v));
  ckpt.entries.push_back(std::move(e));
}

const CheckpointEntry& require(const Checkpoint& ckpt, const std::string& name, const Shape& s) {
  const CheckpointEntry* e = ckpt.find(name);
  if (!e) throw DataError("checkpoint has no entry '" + name + "'");
  const std::vector<std::uint32_t> dims = {
      static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
      static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
  if (e->dims != dims) throw DataError("checkpoint entry '" + name + "' has the wrong shape");
  return *e;
}

}  // namespace

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put_u32(out, Checkpoint::kVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    std::size_t numel = 1;
    for (auto d : e.dims) numel *= d;
    if (numel != e.values.size()) {
      throw ContractError("checkpoint entry '" + e.name + "' payload does not match its dims");
    }
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_u32(out, static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) put_u32(out, d);
    for (float v : e.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  put_u64(out, ckpt.epoch);
  put_u64(out, ckpt.step);
  put_u64(out, ckpt.optimizer_steps);
  put_u64(out, ckpt.seed);
  put_u32(out, static_cast<std::uint32_t>(ckpt.config.size()));
  out += ckpt.config;
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.bytes(4 <= bytes.size() ? 4 : bytes.size(), "magic") != std::string(kMagic, 4)) {
    throw CorruptCheckpointError("bad magic, expected C2FK", 0);
  }
  const std::size_t version_at = in.offset();
  const std::uint32_t version = in.u32("version");
  if (version != Checkpoint::kVersion) {
    throw CorruptCheckpointError("unsupported version " + std::to_string(version), version_at);
  }
  Checkpoint ckpt;
  const std::uint32_t count = in.u32("entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const std::uint32_t name_len = in.u32("name length");
    e.name = in.bytes(name_len, "name");
    const std::size_t rank_at = in.offset();
    const std::uint32_t rank = in.u32("rank");
    if (rank > 8) throw CorruptCheckpointError("implausible rank " + std::to_string(rank), rank_at);
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      e.dims.push_back(in.u32("dims"));
      numel *= e.dims.back();
      if (numel > in.remaining()) {
        throw CorruptCheckpointError("entry '" + e.name + "' larger than the file", in.offset());
      }
    }
    in.need(numel * 4, "payload");
    e.values.resize(numel);
    for (auto& v : e.values) v = std::bit_cast<float>(in.u32("payload"));
    ckpt.entries.push_back(std::move(e));
  }
  ckpt.epoch = in.u64("epoch");
  ckpt.step = in.u64("step");
  ckpt.optimizer_steps = in.u64("optimizer steps");
  ckpt.seed = in.u64("seed");
  const std::uint32_t config_len = in.u32("config length");
  ckpt.config = in.bytes(config_len, "config");
  if (in.remaining() != 0) throw CorruptCheckpointError("trailing bytes", in.offset());
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return decode_checkpoint(buf.str());
  } catch (const CorruptCheckpointError& e) {
    throw CorruptCheckpointError(path.string() + ": " + e.what(), e.offset());
  }
}

Checkpoint capture(const nn::ParamSet& params, const Adam* optimizer) {
  Checkpoint ckpt;
  for (const auto& p : params.entries()) add_entry(ckpt, p.name, p.tensor.shape(), p.tensor.data());
  if (optimizer) {
    ckpt.optimizer_steps = optimizer->steps();
    for (const auto& p : params.entries()) {
      if (!p.trainable) continue;
      const auto it = optimizer->moments().find(p.name);
      const std::vector<double> zeros(p.tensor.numel(), 0.0);
      const bool have = it != optimizer->moments().end();
      add_entry(ckpt, "adam.m/" + p.name, p.tensor.shape(), have ? it->second.m : zeros);
      add_entry(ckpt, "adam.v/" + p.name, p.tensor.shape(), have ? it->second.v : zeros);
    }
  }
  return ckpt;
}

void restore(const Checkpoint& ckpt, nn::ParamSet& params, Adam* optimizer) {
  for (const auto& p : params.entries()) {
    const auto& e = require(ckpt, p.name, p.tensor.shape());
    Tensor t = p.tensor;  // handle copy aliases the buffer
    auto d = t.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = e.values[i];
  }
  if (!optimizer) return;
  optimizer->set_steps(ckpt.optimizer_steps);
  optimizer->moments().clear();
  for (const auto& p : params.entries()) {
    if (!p.trainable) continue;
    const auto& m = require(ckpt, "adam.m/" + p.name, p.tensor.shape());
    const auto& v = require(ckpt, "adam.v/" + p.name, p.tensor.shape());
    auto& slot = optimizer->moments()[p.name];
    slot.m.assign(m.values.begin(), m.values.end());
    slot.v.assign(v.values.begin(), v.values.end());
  }
}

void snap_to_float(const nn::ParamSet& params, Adam* optimizer) {
  for (const auto& p : params.entries()) {
    Tensor t = p.tensor;
    for (double& v : t.mutable_data()) v = narrow(v);
  }
  if (!optimizer) return;
  for (auto& [name, slot] : optimizer->moments()) {
    for (double& v : slot.m) v = narrow(v);
    for (double& v : slot.v) v = narrow(v);
  }
}

}  // namespace c2f::train
