#include "xdoc/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "xdoc/error.hpp"

namespace xdoc {

namespace {

constexpr char kMagic[8] = {'X', 'D', 'O', 'C', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void raw(const void* p, size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u8(uint8_t v) { raw(&v, 1); }
  void u32(uint32_t v) {
    uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
    raw(b, 4);
  }
  void u64(uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
    raw(b, 8);
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void tensor(const Tensor& t) {
    u8(static_cast<uint8_t>(t.rank()));
    for (int64_t d = 0; d < t.rank(); ++d) u64(static_cast<uint64_t>(t.dim(d)));
    for (int64_t i = 0; i < t.size(); ++i) f64(t[i]);
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const char* data, size_t n) : p_(data), end_(data + n) {}
  void raw(void* out, size_t n) {
    if (static_cast<size_t>(end_ - p_) < n) {
      throw CheckpointCorruptionError("checkpoint truncated");
    }
    std::memcpy(out, p_, n);
    p_ += n;
  }
  uint8_t u8() {
    uint8_t v;
    raw(&v, 1);
    return v;
  }
  uint32_t u32() {
    uint8_t b[4];
    raw(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    uint8_t b[8];
    raw(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const uint64_t n = u64();
    if (n > static_cast<uint64_t>(end_ - p_)) {
      throw CheckpointCorruptionError("checkpoint truncated inside a string");
    }
    std::string s(p_, p_ + n);
    p_ += n;
    return s;
  }
  Tensor tensor() {
    const int rank = u8();
    std::vector<int64_t> shape;
    int64_t size = 1;
    for (int d = 0; d < rank; ++d) {
      shape.push_back(static_cast<int64_t>(u64()));
      size *= shape.back();
    }
    Tensor t(shape);
    for (int64_t i = 0; i < size; ++i) t[i] = f64();
    return t;
  }
  bool done() const { return p_ == end_; }

 private:
  const char* p_;
  const char* end_;
};

uint32_t crc_of(const std::vector<char>& buf) {
  return static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
}

}  // namespace

void save_checkpoint(const std::string& path, const XDocModel& model, const OptimizerState& opt,
                     const TrainerSnapshot& snap) {
  Writer w;
  w.raw(kMagic, 8);
  w.u32(kCheckpointVersion);
  w.u64(static_cast<uint64_t>(snap.step));
  w.str(snap.config_echo);
  w.str(snap.mask_rng);
  w.str(snap.dropout_rng);
  for (const auto& c : snap.sampler) {
    w.u64(static_cast<uint64_t>(c.epoch));
    w.u64(static_cast<uint64_t>(c.pos));
  }
  w.u64(model.params.count());
  for (const auto& p : model.params.items()) {
    w.str(p->name);
    w.tensor(p->value);
    auto it = opt.slots.find(p->name);
    if (it == opt.slots.end()) {
      w.u8(0);
    } else {
      w.u8(1);
      w.u64(static_cast<uint64_t>(it->second.step));
      w.tensor(it->second.m);
      w.tensor(it->second.v);
    }
  }
  Writer out;
  out.raw(w.bytes().data(), w.bytes().size());
  out.u32(crc_of(w.bytes()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot open checkpoint for writing: " + path);
  f.write(out.bytes().data(), static_cast<std::streamsize>(out.bytes().size()));
  if (!f) throw ConfigError("short write to checkpoint: " + path);
}

TrainerSnapshot load_checkpoint(const std::string& path, XDocModel& model, OptimizerState& opt) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open checkpoint: " + path);
  std::vector<char> all((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (all.size() < 12) throw CheckpointCorruptionError("checkpoint shorter than its header");

  std::vector<char> body(all.begin(), all.end() - 4);
  Reader tail(all.data() + all.size() - 4, 4);
  if (tail.u32() != crc_of(body)) {
    throw CheckpointCorruptionError("checkpoint CRC mismatch: " + path);
  }

  Reader r(body.data(), body.size());
  char magic[8];
  r.raw(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) {
    throw CheckpointCorruptionError("not a checkpoint file: " + path);
  }
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint version " + std::to_string(version) +
                                 ", expected " + std::to_string(kCheckpointVersion));
  }

  TrainerSnapshot snap;
  snap.step = static_cast<int64_t>(r.u64());
  snap.config_echo = r.str();
  snap.mask_rng = r.str();
  snap.dropout_rng = r.str();
  for (auto& c : snap.sampler) {
    c.epoch = static_cast<int64_t>(r.u64());
    c.pos = static_cast<int64_t>(r.u64());
  }

  const uint64_t n_params = r.u64();
  if (n_params != model.params.count()) {
    throw ShapeError("checkpoint holds " + std::to_string(n_params) + " parameters, model has " +
                     std::to_string(model.params.count()));
  }
  OptimizerState fresh;
  fresh.hyper = opt.hyper;
  std::vector<std::pair<Parameter*, Tensor>> staged;
  for (uint64_t i = 0; i < n_params; ++i) {
    const std::string name = r.str();
    Tensor value = r.tensor();
    Parameter* p = model.params.find(name);
    if (p == nullptr) throw ShapeError("checkpoint parameter " + name + " not in this model");
    if (!p->value.same_shape(value)) {
      throw ShapeError("checkpoint parameter " + name + " has a different shape");
    }
    if (r.u8()) {
      MomentSlot slot;
      slot.step = static_cast<int64_t>(r.u64());
      slot.m = r.tensor();
      slot.v = r.tensor();
      if (!slot.m.same_shape(p->value) || !slot.v.same_shape(p->value)) {
        throw ShapeError("checkpoint moments for " + name + " have a different shape");
      }
      fresh.slots.emplace(name, std::move(slot));
    }
    staged.emplace_back(p, std::move(value));
  }
  if (!r.done()) throw CheckpointCorruptionError("trailing bytes in checkpoint: " + path);

  // all validation passed; apply atomically
  for (auto& [p, value] : staged) {
    p->value = std::move(value);
    p->zero_grad();
  }
  opt.slots = std::move(fresh.slots);
  return snap;
}

}  // namespace xdoc
