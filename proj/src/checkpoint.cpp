#include <cstring>
#include <fstream>

#include "qtae/trainer.hpp"

// Layout (little-endian):
//   "QTAE1" | u8 version | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 rank | u64 extents[rank] | f32 data
//   u64 JSON length | JSON (config, factor space, lattice, optimiser, RNG, epoch, sweep)

namespace qtae {

using nlohmann::json;

namespace {

constexpr char kMagic[5] = {'Q', 'T', 'A', 'E', '1'};
constexpr std::uint8_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    le(u);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  std::size_t pos() const { return pos_; }
  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated in ") + what, b_.size());
  }
  template <typename U>
  U le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32(const char* what) {
    const auto u = le<std::uint32_t>(what);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

void put_tensor(Writer& w, const std::string& name, const Tensor<float>& t) {
  w.le(static_cast<std::uint32_t>(name.size()));
  w.bytes(name.data(), name.size());
  w.le(static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) w.le(static_cast<std::uint64_t>(e));
  for (std::size_t i = 0; i < t.numel(); ++i) w.f32(t[i]);
}

json sweep_json(const std::vector<SweepEntry>& sweep) {
  json out = json::array();
  for (const auto& e : sweep) {
    json curve = json::array();
    for (const auto& r : e.curve) curve.push_back({r.epoch, r.lr, r.loss, r.psnr, r.ssim});
    out.push_back({{"lr", e.lr},
                   {"diverged", e.diverged},
                   {"failure", e.failure},
                   {"initial_loss", e.initial_loss},
                   {"val_psnr", e.val_psnr},
                   {"val_ssim", e.val_ssim},
                   {"curve", curve}});
  }
  return out;
}

std::vector<SweepEntry> sweep_from_json(const json& j) {
  std::vector<SweepEntry> out;
  for (const auto& ej : j) {
    SweepEntry e;
    e.lr = ej.at("lr");
    e.diverged = ej.at("diverged");
    e.failure = ej.at("failure");
    e.initial_loss = ej.at("initial_loss");
    e.val_psnr = ej.at("val_psnr");
    e.val_ssim = ej.at("val_ssim");
    for (const auto& r : ej.at("curve")) e.curve.push_back({r.at(0), r.at(1), r.at(2), r.at(3), r.at(4)});
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
  require(c.adam.m.size() == c.params.size() && c.adam.v.size() == c.params.size(),
          "checkpoint optimiser state does not match its parameters");
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.le(kVersion);
  w.le(static_cast<std::uint32_t>(3 * c.params.size() + 1));
  for (const auto& p : c.params) put_tensor(w, p.name, p.value);
  for (std::size_t i = 0; i < c.params.size(); ++i) put_tensor(w, "adam.m/" + c.params[i].name, c.adam.m[i]);
  for (std::size_t i = 0; i < c.params.size(); ++i) put_tensor(w, "adam.v/" + c.params[i].name, c.adam.v[i]);
  put_tensor(w, "mean_image", c.mean_image);
  const json meta = {{"config", c.config},
                     {"space", c.space},
                     {"lattice", c.spec},
                     {"rng", c.rng_state},
                     {"epoch", c.epoch},
                     {"lr", c.lr},
                     {"adam",
                      {{"step", c.adam.step},
                       {"lr", c.adam.hyper.lr},
                       {"beta1", c.adam.hyper.beta1},
                       {"beta2", c.adam.hyper.beta2},
                       {"epsilon", c.adam.hyper.epsilon}}},
                     {"sweep", sweep_json(c.sweep)}};
  const std::string text = meta.dump();
  w.le(static_cast<std::uint64_t>(text.size()));
  w.bytes(text.data(), text.size());
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError("not a QTAE1 checkpoint (bad magic)", 0);
  r.str(sizeof kMagic, "magic");
  const auto version = r.le<std::uint8_t>("version");
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version), sizeof kMagic);
  const auto count = r.le<std::uint32_t>("tensor count");
  std::vector<NamedTensor> tensors;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name = r.str(r.le<std::uint32_t>("tensor name length"), "tensor name");
    const auto rank = r.le<std::uint32_t>("tensor rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<std::size_t>(r.le<std::uint64_t>("extents")));
    const std::size_t at = r.pos();
    for (auto e : shape)
      if (e == 0) throw FormatError("tensor '" + name + "' has a zero extent", at);
    const std::size_t n = shape_numel(shape);
    r.need(4 * n, "tensor data");
    std::vector<float> data(n);
    for (auto& v : data) v = r.f32("tensor data");
    tensors.push_back({name, Tensor<float>(shape, std::move(data))});
  }
  const auto len = r.le<std::uint64_t>("metadata length");
  const std::size_t meta_at = r.pos();
  const auto text = r.str(static_cast<std::size_t>(len), "metadata");
  if (!r.done()) throw FormatError("trailing bytes after checkpoint metadata", r.pos());

  Checkpoint c;
  try {
    const json meta = json::parse(text);
    c.config = meta.at("config").get<TrainConfig>();
    c.space = meta.at("space").get<FactorSpace>();
    c.spec = meta.at("lattice").get<LatticeSpec>();
    c.rng_state = meta.at("rng").get<std::string>();
    c.epoch = meta.at("epoch");
    c.lr = meta.at("lr");
    const auto& a = meta.at("adam");
    c.adam.step = a.at("step");
    c.adam.hyper = {a.at("lr"), a.at("beta1"), a.at("beta2"), a.at("epsilon")};
    c.sweep = sweep_from_json(meta.at("sweep"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint metadata: ") + e.what(), meta_at);
  }
  if (tensors.empty() || (tensors.size() - 1) % 3 != 0 || tensors.back().name != "mean_image")
    throw FormatError("checkpoint tensor table is malformed", meta_at);
  const std::size_t np = (tensors.size() - 1) / 3;
  for (std::size_t i = 0; i < np; ++i) {
    if (tensors[np + i].name != "adam.m/" + tensors[i].name || tensors[2 * np + i].name != "adam.v/" + tensors[i].name)
      throw FormatError("checkpoint optimiser tensors do not match the parameters", meta_at);
    c.params.push_back(tensors[i]);
    c.adam.m.push_back(tensors[np + i].value);
    c.adam.v.push_back(tensors[2 * np + i].value);
  }
  c.mean_image = tensors.back().value;
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

bool bit_identical(const Checkpoint& a, const Checkpoint& b) { return serialize_checkpoint(a) == serialize_checkpoint(b); }

}  // namespace qtae
