#include "segctc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "segctc/config.hpp"

namespace segctc {
namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw Error("checkpoint truncated at byte " + std::to_string(pos_));
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  Writer w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(c.vocab.size()));
  for (const auto& s : c.vocab.symbols()) w.str(s);
  w.str(format_model_snapshot(c.model, c.train));
  w.i32(c.state.epochs_done);
  w.i32(c.state.decay_count);
  w.u8(c.state.previous_error ? 1 : 0);
  w.f64(c.state.previous_error.value_or(0.0));
  w.u64(c.train.seed);
  w.u32(static_cast<std::uint32_t>(c.state.log.records.size()));
  for (const auto& r : c.state.log.records) {
    w.i32(r.epoch);
    w.f64(r.lr);
    w.f64(r.loss_total);
    w.f64(r.loss_ctc);
    w.f64(r.loss_scrf);
    w.f64(r.valid_per);
    w.u8(r.phase == Phase::kPretrain ? 0 : 1);
  }
  auto tensors = collect_tensors(c.state.params);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.value->rows()));
    w.u32(static_cast<std::uint32_t>(t.value->cols()));
    for (double v : t.value->values()) w.f64(v);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(sizeof kCheckpointMagic) != std::string_view(kCheckpointMagic, sizeof kCheckpointMagic)) {
    throw Error("not a segctc checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  std::vector<std::string> symbols(r.u32());
  for (auto& s : symbols) s = r.str();
  c.vocab = Vocabulary(std::move(symbols));
  std::tie(c.model, c.train) = parse_model_snapshot(r.str());
  c.state.epochs_done = r.i32();
  c.state.decay_count = r.i32();
  const bool has_prev = r.u8() != 0;
  const double prev = r.f64();
  if (has_prev) c.state.previous_error = prev;
  if (r.u64() != c.train.seed) throw Error("checkpoint seed does not match its config snapshot");
  c.state.log.records.resize(r.u32());
  for (auto& rec : c.state.log.records) {
    rec.epoch = r.i32();
    rec.lr = r.f64();
    rec.loss_total = r.f64();
    rec.loss_ctc = r.f64();
    rec.loss_scrf = r.f64();
    rec.valid_per = r.f64();
    rec.phase = r.u8() == 0 ? Phase::kPretrain : Phase::kJoint;
  }

  c.state.params = init_model(c.model, 0);
  auto tensors = collect_tensors(c.state.params);
  const std::uint32_t count = r.u32();
  if (count != tensors.size()) {
    throw Error("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                std::to_string(tensors.size()));
  }
  for (const auto& t : tensors) {
    const std::string name = r.str();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    if (name != t.name || rows != t.value->rows() || cols != t.value->cols()) {
      throw Error("checkpoint tensor '" + name + "' does not match expected '" + t.name + "' (" +
                  std::to_string(t.value->rows()) + "x" + std::to_string(t.value->cols()) + ")");
    }
    for (double& v : t.value->values()) v = r.f64();
  }
  if (!r.done()) throw Error("trailing bytes after checkpoint tensors");
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open '" + tmp.string() + "' for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint '" + path.string() + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace segctc
