#include "pvm/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <fstream>
#include <iterator>

namespace pvm {

namespace {

constexpr char kMagic[4] = {'P', 'V', 'M', 'S'};

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(int v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void ints(const std::vector<int>& v) {
    u64(v.size());
    for (int x : v) i32(x);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    const std::uint8_t* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const std::uint8_t* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  int i32() { return static_cast<int>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> doubles() {
    const std::uint64_t n = count(8);
    std::vector<double> v(n);
    for (double& x : v) x = f64();
    return v;
  }
  std::vector<int> ints() {
    const std::uint64_t n = count(4);
    std::vector<int> v(n);
    for (int& x : v) x = i32();
    return v;
  }
  bool done() const { return pos_ == size_; }

 private:
  // Element count prefix, rejected if it cannot fit in the remaining bytes.
  std::uint64_t count(std::size_t elem) {
    const std::uint64_t n = u64();
    if (n > (size_ - pos_) / elem) throw CheckpointError("checkpoint: corrupt length field");
    return n;
  }
  const std::uint8_t* take(std::size_t n) {
    if (size_ - pos_ < n) throw CheckpointError("checkpoint: unexpected end of payload");
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

void write_matrix(Writer& w, const Matrix& m) {
  w.i32(m.rows);
  w.i32(m.cols);
  w.doubles(m.values);
}

Matrix read_matrix(Reader& r) {
  Matrix m;
  m.rows = r.i32();
  m.cols = r.i32();
  m.values = r.doubles();
  if (m.rows < 0 || m.cols < 0 ||
      m.values.size() != static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols)) {
    throw CheckpointError("checkpoint: matrix shape does not match its data");
  }
  return m;
}

void write_payload(Writer& w, const ModelState& m) {
  const ModelConfig& c = m.config;
  w.i32(c.view_w);
  w.i32(c.view_h);
  w.ints(c.level_grids);
  w.u8(static_cast<std::uint8_t>(c.fovea));
  w.i32(c.fovea_k);
  w.i32(c.hidden_dim);
  w.u8(c.corner_contact ? 1 : 0);

  w.f64(m.learning.learning_rate);
  w.f64(m.learning.tau_integral);
  w.u64(m.learning.seed);

  const HierarchyTopology& t = m.topology;
  w.u64(t.levels.size());
  for (const LevelInfo& l : t.levels) {
    w.i32(l.grid);
    w.ints(l.unit_ids);
  }
  w.u64(t.units.size());
  for (std::size_t i = 0; i < t.units.size(); ++i) {
    const UnitSpec& u = t.units[i];
    w.i32(u.unit_id);
    w.i32(u.level);
    w.i32(u.signal_dim);
    w.i32(u.hidden_dim);
    w.i32(u.context_dim);
    w.u8(u.tile ? 1 : 0);
    const Rect r = u.tile.value_or(Rect{});
    w.i32(r.x);
    w.i32(r.y);
    w.i32(r.w);
    w.i32(r.h);
    w.ints(t.lateral[i]);
    w.ints(t.superior[i]);
    w.ints(t.inferior[i]);
  }
  w.i32(t.topmost_id);

  for (const UnitWeights& uw : m.weights) {
    write_matrix(w, uw.hidden_w);
    w.doubles(uw.hidden_b);
    write_matrix(w, uw.predict_w);
    w.doubles(uw.predict_b);
  }
  for (const UnitState& s : m.states) {
    w.u8(s.primed ? 1 : 0);
    for (const auto* v : {&s.signal, &s.signal_prev, &s.integral, &s.derivative, &s.error,
                          &s.context, &s.hidden, &s.prediction, &s.input_prev}) {
      w.doubles(*v);
    }
  }
  w.u64(m.frame_counter);
  w.u8(static_cast<std::uint8_t>(m.mode));
}

ModelState read_payload(Reader& r) {
  ModelState m;
  ModelConfig& c = m.config;
  c.view_w = r.i32();
  c.view_h = r.i32();
  c.level_grids = r.ints();
  const std::uint8_t fovea = r.u8();
  if (fovea > 2) throw CheckpointError("checkpoint: unknown fovea kind");
  c.fovea = static_cast<FoveaKind>(fovea);
  c.fovea_k = r.i32();
  c.hidden_dim = r.i32();
  c.corner_contact = r.u8() != 0;

  m.learning.learning_rate = r.f64();
  m.learning.tau_integral = r.f64();
  m.learning.seed = r.u64();

  HierarchyTopology& t = m.topology;
  const std::uint64_t n_levels = r.u64();
  if (n_levels > 64) throw CheckpointError("checkpoint: implausible level count");
  t.levels.resize(n_levels);
  for (LevelInfo& l : t.levels) {
    l.grid = r.i32();
    l.unit_ids = r.ints();
  }
  const std::uint64_t n = r.u64();
  // Far beyond any buildable hierarchy.
  if (n > 1u << 24) throw CheckpointError("checkpoint: implausible unit count");
  t.units.resize(n);
  t.lateral.resize(n);
  t.superior.resize(n);
  t.inferior.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    UnitSpec& u = t.units[i];
    u.unit_id = r.i32();
    u.level = r.i32();
    u.signal_dim = r.i32();
    u.hidden_dim = r.i32();
    u.context_dim = r.i32();
    const bool has_tile = r.u8() != 0;
    Rect rect;
    rect.x = r.i32();
    rect.y = r.i32();
    rect.w = r.i32();
    rect.h = r.i32();
    if (has_tile) u.tile = rect;
    t.lateral[i] = r.ints();
    t.superior[i] = r.ints();
    t.inferior[i] = r.ints();
  }
  t.topmost_id = r.i32();

  m.weights.resize(n);
  for (UnitWeights& uw : m.weights) {
    uw.hidden_w = read_matrix(r);
    uw.hidden_b = r.doubles();
    uw.predict_w = read_matrix(r);
    uw.predict_b = r.doubles();
  }
  m.states.resize(n);
  for (UnitState& s : m.states) {
    s.primed = r.u8() != 0;
    for (auto* v : {&s.signal, &s.signal_prev, &s.integral, &s.derivative, &s.error, &s.context,
                    &s.hidden, &s.prediction, &s.input_prev}) {
      *v = r.doubles();
    }
  }
  m.frame_counter = r.u64();
  const std::uint8_t mode = r.u8();
  if (mode > 1) throw CheckpointError("checkpoint: unknown mode");
  m.mode = static_cast<Mode>(mode);
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes after payload");
  return m;
}

// Cross-checks sizes so a well-formed but inconsistent file cannot crash the engine.
void check_consistency(const ModelState& m) {
  const HierarchyTopology& t = m.topology;
  const int n = t.unit_count();
  auto bad = [](const std::string& what) { throw CheckpointError("checkpoint: " + what); };
  if (n == 0 || t.levels.empty()) bad("empty topology");
  if (t.topmost_id < 0 || t.topmost_id >= n) bad("topmost id out of range");
  auto ids_ok = [n](const std::vector<int>& ids) {
    for (int id : ids)
      if (id < 0 || id >= n) return false;
    return true;
  };
  for (const LevelInfo& l : t.levels)
    if (!ids_ok(l.unit_ids)) bad("level lists an unknown unit");
  for (int i = 0; i < n; ++i) {
    const UnitSpec& u = t.units[i];
    if (u.unit_id != i) bad("unit ids out of order");
    if (!ids_ok(t.lateral[i]) || !ids_ok(t.superior[i]) || !ids_ok(t.inferior[i])) {
      bad("adjacency lists an unknown unit");
    }
    if (u.hidden_dim != m.config.hidden_dim || u.signal_dim < 1) bad("unit dimensions");
    if (u.tile) {
      const Rect& r = *u.tile;
      if (r.x < 0 || r.y < 0 || r.w < 1 || r.h < 1 || r.x + r.w > m.config.view_w ||
          r.y + r.h > m.config.view_h || u.signal_dim != r.area() * 3) {
        bad("tile outside the view");
      }
    } else {
      std::size_t fan_in = 0;
      for (int src : t.inferior[i]) fan_in += static_cast<std::size_t>(t.units[src].hidden_dim);
      if (fan_in != static_cast<std::size_t>(u.signal_dim)) bad("fan-in does not match signal");
    }
    if (static_cast<std::size_t>(u.context_dim) !=
        context_layout(t, i).size() * static_cast<std::size_t>(u.hidden_dim)) {
      bad("context width does not match topology");
    }
    const UnitWeights& w = m.weights[i];
    if (w.hidden_w.rows != u.hidden_dim || w.hidden_w.cols != u.input_dim() ||
        w.hidden_b.size() != static_cast<std::size_t>(u.hidden_dim) ||
        w.predict_w.rows != u.signal_dim || w.predict_w.cols != u.hidden_dim ||
        w.predict_b.size() != static_cast<std::size_t>(u.signal_dim)) {
      bad("weight shapes do not match unit " + std::to_string(i));
    }
    const UnitState& s = m.states[i];
    const auto sd = static_cast<std::size_t>(u.signal_dim);
    if (s.signal.size() != sd || s.signal_prev.size() != sd || s.integral.size() != sd ||
        s.derivative.size() != sd || s.error.size() != sd || s.prediction.size() != sd ||
        s.context.size() != static_cast<std::size_t>(u.context_dim) ||
        s.hidden.size() != static_cast<std::size_t>(u.hidden_dim) ||
        (!s.input_prev.empty() && s.input_prev.size() != static_cast<std::size_t>(u.input_dim()))) {
      bad("state shapes do not match unit " + std::to_string(i));
    }
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelState& model) {
  Writer payload;
  write_payload(payload, model);
  const auto& body = payload.bytes();

  Writer file;
  for (char ch : kMagic) file.u8(static_cast<std::uint8_t>(ch));
  file.u32(kCheckpointVersion);
  file.u64(body.size());
  auto& out = file.bytes();
  out.insert(out.end(), body.begin(), body.end());
  file.u32(static_cast<std::uint32_t>(crc32(0L, body.data(), static_cast<uInt>(body.size()))));
  return std::move(out);
}

ModelState decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t kHeader = 4 + 4 + 8;
  if (bytes.size() < kHeader) throw CheckpointError("checkpoint: file too short for header");
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw CheckpointError("checkpoint: bad magic (not a PVMS file)");
  }
  Reader header(bytes.data() + 4, kHeader - 4);
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint: version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t size = header.u64();
  if (bytes.size() - kHeader < 4 || size != bytes.size() - kHeader - 4) {
    throw CheckpointError("checkpoint: checksum failure, file is truncated or has trailing data (" +
                          std::to_string(bytes.size()) + " bytes on disk)");
  }
  const std::uint8_t* body = bytes.data() + kHeader;
  Reader trailer(body + size, 4);
  const std::uint32_t stored = trailer.u32();
  const auto actual = static_cast<std::uint32_t>(crc32(0L, body, static_cast<uInt>(size)));
  if (stored != actual) throw CheckpointError("checkpoint: checksum failure, payload is corrupt");

  Reader r(body, size);
  ModelState m = read_payload(r);
  check_consistency(m);
  return m;
}

void save_checkpoint(const ModelState& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("error while writing checkpoint " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace pvm
