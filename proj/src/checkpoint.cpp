// Binary checkpoint layout, all integers and doubles little-endian:
//
//   magic "DCFCKPT1" | u32 version | str config
//   section generator | section discriminator
//   adam generator | adam discriminator
//   i64 iteration | str rng state | magic "DCFEND01"
//
//   section: u32 count, then per tensor: str name, u8 kind (0 param,
//            1 buffer), 4 x i32 shape, numel x f64
//   adam:    i64 steps, u32 count, then per slot: u64 len, len x f64 (m),
//            u64 len, len x f64 (v)
//   str:     u64 byte length, bytes
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dcf/errors.hpp"
#include "dcf/pipeline.hpp"

namespace dcf {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'F', 'C', 'K', 'P', 'T', '1'};
constexpr char kTrailer[8] = {'D', 'C', 'F', 'E', 'N', 'D', '0', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  template <typename U>
  void uint(U v) {
    unsigned char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, sizeof(U));
  }
  void u8(std::uint8_t v) { uint(v); }
  void u32(std::uint32_t v) { uint(v); }
  void u64(std::uint64_t v) { uint(v); }
  void i32(std::int32_t v) { uint(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { uint(static_cast<std::uint64_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void doubles(const double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) f64(p[i]);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(source_ + ": " + what);
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) fail("truncated checkpoint");
  }
  template <typename U>
  U uint() {
    unsigned char buf[sizeof(U)];
    bytes(buf, sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }
  std::uint8_t u8() { return uint<std::uint8_t>(); }
  std::uint32_t u32() { return uint<std::uint32_t>(); }
  std::uint64_t u64() { return uint<std::uint64_t>(); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > (1ULL << 30)) fail("implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void doubles(double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] = f64();
  }

 private:
  std::istream& in_;
  std::string source_;
};

void write_section(Writer& w, const ParamList& list) {
  w.u32(static_cast<std::uint32_t>(list.params.size() + list.buffers.size()));
  auto one = [&](const NamedTensor& t, std::uint8_t kind) {
    w.str(t.name);
    w.u8(kind);
    const Shape& s = t.tensor.shape();
    w.i32(s.n);
    w.i32(s.c);
    w.i32(s.h);
    w.i32(s.w);
    w.doubles(t.tensor.ptr(), t.tensor.numel());
  };
  for (const auto& p : list.params) one(p, 0);
  for (const auto& b : list.buffers) one(b, 1);
}

// Reads into the tensors of list, which must match name, kind and shape.
void read_section(Reader& r, const ParamList& list, const std::string& what) {
  const std::uint32_t count = r.u32();
  if (count != list.params.size() + list.buffers.size()) {
    r.fail(what + ": stored " + std::to_string(count) + " tensors, model has " +
           std::to_string(list.params.size() + list.buffers.size()));
  }
  auto one = [&](const NamedTensor& t, std::uint8_t kind) {
    const std::string name = r.str();
    if (name != t.name || r.u8() != kind) r.fail(what + ": expected tensor '" + t.name + "', found '" + name + "'");
    Shape s;
    s.n = r.i32();
    s.c = r.i32();
    s.h = r.i32();
    s.w = r.i32();
    if (s != t.tensor.shape()) {
      r.fail(what + ": tensor '" + name + "' stored as " + s.str() + ", model has " + t.tensor.shape().str());
    }
    Tensor dst = t.tensor;
    r.doubles(dst.ptr(), dst.numel());
  };
  for (const auto& p : list.params) one(p, 0);
  for (const auto& b : list.buffers) one(b, 1);
}

void write_adam(Writer& w, const Adam& a) {
  w.i64(a.steps());
  w.u32(static_cast<std::uint32_t>(a.first_moments().size()));
  for (std::size_t i = 0; i < a.first_moments().size(); ++i) {
    w.u64(a.first_moments()[i].size());
    w.doubles(a.first_moments()[i].data(), a.first_moments()[i].size());
    w.u64(a.second_moments()[i].size());
    w.doubles(a.second_moments()[i].data(), a.second_moments()[i].size());
  }
}

void read_adam(Reader& r, Adam& a, const ParamList& params, const std::string& what) {
  const std::int64_t steps = r.i64();
  const std::uint32_t count = r.u32();
  if (count != 0 && count != params.params.size()) r.fail(what + ": optimizer slot count mismatch");
  std::vector<std::vector<double>> m(count), v(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    for (auto* dst : {&m[i], &v[i]}) {
      const std::uint64_t n = r.u64();
      if (n != params.params[i].tensor.numel()) r.fail(what + ": optimizer slot size mismatch");
      dst->resize(n);
      r.doubles(dst->data(), n);
    }
  }
  a.set_steps(steps);
  a.first_moments() = std::move(m);
  a.second_moments() = std::move(v);
}


TrainConfig read_header(Reader& r) {
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) r.fail("not a DCF checkpoint");
  const std::uint32_t version = r.u32();
  if (version != kVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  TrainConfig config;
  std::istringstream text(r.str());
  try {
    config.apply(text, "checkpoint config");
  } catch (const DataError& e) {
    r.fail(e.what());
  }
  return config;
}

}  // namespace

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  // Write to a sibling file first so a crash never leaves a torn checkpoint.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(tmp.string() + ": cannot open for writing");
    Writer w(out);
    w.bytes(kMagic, 8);
    w.u32(kVersion);
    w.str(config_.serialize());
    write_section(w, net_.parameters());
    write_section(w, disc_.parameters());
    write_adam(w, adam_g_);
    write_adam(w, adam_d_);
    w.i64(iteration_);
    std::ostringstream rng_state;
    rng_state << rng_;
    w.str(rng_state.str());
    w.bytes(kTrailer, 8);
    out.flush();
    if (!out) throw DataError(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open checkpoint");
  Reader r(in, path.string());
  const TrainConfig stored = read_header(r);
  if (stored.model().resolution != config_.resolution || stored.ffc_blocks != config_.ffc_blocks ||
      stored.image_filter != config_.image_filter) {
    r.fail("checkpoint architecture differs from the configured model");
  }
  const ParamList gen = net_.parameters();
  const ParamList disc = disc_.parameters();
  read_section(r, gen, "generator");
  read_section(r, disc, "discriminator");
  read_adam(r, adam_g_, gen, "generator optimizer");
  read_adam(r, adam_d_, disc, "discriminator optimizer");
  iteration_ = r.i64();
  std::istringstream rng_state(r.str());
  rng_state >> rng_;
  if (!rng_state) r.fail("corrupt RNG state");
  char trailer[8];
  r.bytes(trailer, 8);
  if (std::memcmp(trailer, kTrailer, 8) != 0) r.fail("missing end marker");
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  std::ifstream in(checkpoint, std::ios::binary);
  if (!in) throw DataError(checkpoint.string() + ": cannot open checkpoint");
  Reader r(in, checkpoint.string());
  TrainConfig config = read_header(r);
  DCFNetwork net = DCFNetwork::build(config.model(), config.seed);
  read_section(r, net.parameters(), "generator");
  return {config, std::move(net)};
}

}  // namespace dcf
