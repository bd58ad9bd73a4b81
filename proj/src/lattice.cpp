#include "qtae/lattice.hpp"

#include <algorithm>
#include <numeric>

namespace qtae {

const char* to_string(LatticeMode mode) { return mode == LatticeMode::product ? "product" : "additive"; }

LatticeMode lattice_mode_from_string(const std::string& name) {
  if (name == "product") return LatticeMode::product;
  if (name == "additive") return LatticeMode::additive;
  throw ContractError("unknown lattice mode '" + name + "'");
}

std::size_t LatticeSpec::element_count(const std::vector<LatticeFactor>& factors, std::size_t channels,
                                       LatticeMode mode) {
  if (factors.empty()) return channels;
  std::size_t cells = mode == LatticeMode::product ? 1 : 0;
  for (const auto& f : factors) cells = mode == LatticeMode::product ? cells * f.extent : cells + f.extent;
  return cells * channels;
}

std::size_t LatticeSpec::element_count() const { return element_count(factors, channels, mode); }

Shape LatticeSpec::embedding_shape() const {
  if (mode == LatticeMode::additive) {
    std::size_t rows = 0;
    for (const auto& f : factors) rows += f.extent;
    return {std::max<std::size_t>(rows, 1), channels};
  }
  Shape s;
  for (const auto& f : factors) s.push_back(f.extent);
  s.push_back(channels);
  return s;
}

std::size_t LatticeSpec::block_offset(std::size_t factor) const {
  require(factor < factors.size(), "block_offset: factor index out of range");
  std::size_t off = 0;
  for (std::size_t i = 0; i < factor; ++i) off += factors[i].extent;
  return off;
}

std::size_t LatticeSpec::factor_index(const std::string& name) const {
  for (std::size_t i = 0; i < factors.size(); ++i)
    if (factors[i].name == name) return i;
  throw ContractError("lattice has no factor named '" + name + "'");
}

bool LatticeSpec::all_periodic() const {
  return std::all_of(factors.begin(), factors.end(), [](const LatticeFactor& f) { return f.periodic; });
}

void LatticeSpec::validate() const {
  require(channels >= 1, "lattice channels must be >= 1");
  for (const auto& f : factors) {
    require(f.extent >= 1, "lattice factor '" + f.name + "' needs extent >= 1");
    require(f.stride >= 1, "lattice factor '" + f.name + "' needs stride >= 1");
  }
}

void to_json(nlohmann::json& j, const LatticeSpec& spec) {
  nlohmann::json factors = nlohmann::json::array();
  for (const auto& f : spec.factors)
    factors.push_back({{"name", f.name}, {"extent", f.extent}, {"periodic", f.periodic}, {"stride", f.stride}});
  j = {{"factors", factors}, {"channels", spec.channels}, {"mode", to_string(spec.mode)}};
}

void from_json(const nlohmann::json& j, LatticeSpec& spec) {
  static const std::vector<std::string> top_keys{"factors", "channels", "mode"};
  static const std::vector<std::string> factor_keys{"name", "extent", "periodic", "stride"};
  require(j.is_object(), "lattice spec must be a JSON object");
  for (const auto& [key, value] : j.items())
    require(std::find(top_keys.begin(), top_keys.end(), key) != top_keys.end(), "unknown lattice spec key '" + key + "'");
  spec = LatticeSpec{};
  for (const auto& fj : j.at("factors")) {
    for (const auto& [key, value] : fj.items())
      require(std::find(factor_keys.begin(), factor_keys.end(), key) != factor_keys.end(),
              "unknown lattice factor key '" + key + "'");
    LatticeFactor f;
    f.name = fj.at("name").get<std::string>();
    f.extent = fj.at("extent").get<std::size_t>();
    f.periodic = fj.value("periodic", false);
    f.stride = fj.value("stride", std::size_t{1});
    spec.factors.push_back(f);
  }
  spec.channels = j.at("channels").get<std::size_t>();
  spec.mode = lattice_mode_from_string(j.value("mode", std::string("product")));
  spec.validate();
}

std::string to_string(const LatticeOffset& u) {
  std::string s = "(";
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(u[i]);
  }
  return s + ")";
}

EmbeddingTensor::EmbeddingTensor(Tensor<float> tensor, LatticeSpec spec) : tensor_(std::move(tensor)), spec_(std::move(spec)) {
  spec_.validate();
  const Shape expected = spec_.embedding_shape();
  if (tensor_.shape() != expected) {
    require(tensor_.numel() == spec_.element_count(), "embedding has " + std::to_string(tensor_.numel()) +
                                                          " elements, lattice needs " +
                                                          std::to_string(spec_.element_count()));
    tensor_.reshape(expected);
  }
}

EmbeddingTensor::EmbeddingTensor(LatticeSpec spec) : EmbeddingTensor(Tensor<float>(spec.embedding_shape()), spec) {}

std::vector<float> EmbeddingTensor::cell(const std::vector<std::size_t>& index) const {
  require(spec_.mode == LatticeMode::product, "cell(): product-mode embeddings only");
  require(index.size() == spec_.factor_count(), "cell(): index arity mismatch");
  std::size_t flat = 0;
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < spec_.factors[i].extent, "cell(): index out of range");
    flat = flat * spec_.factors[i].extent + index[i];
  }
  const auto m = spec_.channels;
  return {tensor_.ptr() + flat * m, tensor_.ptr() + (flat + 1) * m};
}

namespace {

// Source coordinate along one factor, or -1 when it falls off an aperiodic edge.
std::int64_t source_coord(std::int64_t v, std::int64_t amount, std::int64_t extent, bool periodic) {
  std::int64_t s = v + amount;
  if (periodic) {
    s %= extent;
    return s < 0 ? s + extent : s;
  }
  return (s >= 0 && s < extent) ? s : -1;
}

// amounts are raw lattice steps (strides already applied).
IndexMap build_map(const LatticeSpec& spec, const std::vector<std::int64_t>& amounts) {
  const std::size_t m = spec.channels;
  IndexMap map(spec.element_count());
  const std::size_t t = spec.factor_count();
  if (spec.mode == LatticeMode::product) {
    std::vector<std::int64_t> index(t, 0);
    const std::size_t cells = t == 0 ? 1 : spec.element_count() / m;
    for (std::size_t cell = 0; cell < cells; ++cell) {
      std::size_t rem = cell;
      for (std::size_t i = t; i-- > 0;) {
        index[i] = static_cast<std::int64_t>(rem % spec.factors[i].extent);
        rem /= spec.factors[i].extent;
      }
      std::int64_t src = 0;
      bool valid = true;
      for (std::size_t i = 0; i < t && valid; ++i) {
        const auto& f = spec.factors[i];
        const auto s = source_coord(index[i], amounts[i], static_cast<std::int64_t>(f.extent), f.periodic);
        valid = s >= 0;
        src = src * static_cast<std::int64_t>(f.extent) + s;
      }
      for (std::size_t c = 0; c < m; ++c)
        map[cell * m + c] = valid ? static_cast<std::int32_t>(src * static_cast<std::int64_t>(m) + static_cast<std::int64_t>(c)) : -1;
    }
    return map;
  }
  if (t == 0) {
    std::iota(map.begin(), map.end(), 0);
    return map;
  }
  std::size_t row0 = 0;
  for (std::size_t i = 0; i < t; ++i) {
    const auto& f = spec.factors[i];
    for (std::size_t v = 0; v < f.extent; ++v) {
      const auto s = source_coord(static_cast<std::int64_t>(v), amounts[i], static_cast<std::int64_t>(f.extent), f.periodic);
      for (std::size_t c = 0; c < m; ++c)
        map[(row0 + v) * m + c] = s < 0 ? -1 : static_cast<std::int32_t>((row0 + static_cast<std::size_t>(s)) * m + c);
    }
    row0 += f.extent;
  }
  return map;
}

EmbeddingTensor apply_map(const EmbeddingTensor& y, const IndexMap& map) {
  Tensor<float> out(y.tensor().shape());
  const float* src = y.tensor().ptr();
  for (std::size_t j = 0; j < map.size(); ++j) out[j] = map[j] < 0 ? 0.0f : src[map[j]];
  return EmbeddingTensor(std::move(out), y.spec());
}

void check_arity(const LatticeSpec& spec, const LatticeOffset& u) {
  require(u.size() == spec.factor_count(), "offset has " + std::to_string(u.size()) + " components, lattice has " +
                                               std::to_string(spec.factor_count()) + " factors");
}

std::vector<std::int64_t> strided(const LatticeSpec& spec, const LatticeOffset& u) {
  std::vector<std::int64_t> a(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) a[i] = u[i] * static_cast<std::int64_t>(spec.factors[i].stride);
  return a;
}

EmbeddingTensor single_axis(const EmbeddingTensor& y, std::size_t axis, std::int64_t amount, bool want_periodic,
                            const char* op) {
  const auto& spec = y.spec();
  require(axis < spec.factor_count(), std::string(op) + ": axis " + std::to_string(axis) + " out of range");
  require(spec.factors[axis].periodic == want_periodic,
          std::string(op) + ": factor '" + spec.factors[axis].name + "' is " +
              (spec.factors[axis].periodic ? "periodic" : "aperiodic"));
  std::vector<std::int64_t> amounts(spec.factor_count(), 0);
  amounts[axis] = amount;
  return apply_map(y, build_map(spec, amounts));
}

}  // namespace

EmbeddingTensor roll_axis(const EmbeddingTensor& y, std::size_t axis, std::int64_t amount) {
  return single_axis(y, axis, amount, true, "roll_axis");
}

EmbeddingTensor shift_zero_axis(const EmbeddingTensor& y, std::size_t axis, std::int64_t amount) {
  return single_axis(y, axis, amount, false, "shift_zero_axis");
}

EmbeddingTensor apply_offset(const EmbeddingTensor& y, const LatticeOffset& u) {
  require(y.spec().mode == LatticeMode::product, "apply_offset: product-mode embedding required");
  check_arity(y.spec(), u);
  return apply_map(y, build_map(y.spec(), strided(y.spec(), u)));
}

EmbeddingTensor apply_offset_additive(const EmbeddingTensor& y, const LatticeOffset& u) {
  require(y.spec().mode == LatticeMode::additive, "apply_offset_additive: additive-mode embedding required");
  check_arity(y.spec(), u);
  return apply_map(y, build_map(y.spec(), strided(y.spec(), u)));
}

EmbeddingTensor shift(const EmbeddingTensor& y, const LatticeOffset& u) {
  return y.spec().mode == LatticeMode::product ? apply_offset(y, u) : apply_offset_additive(y, u);
}

LatticeOffset compose_offsets(const LatticeOffset& u, const LatticeOffset& v, const LatticeSpec& spec) {
  require(u.size() == v.size(), "compose_offsets: arity mismatch");
  check_arity(spec, u);
  LatticeOffset w;
  for (std::size_t i = 0; i < u.size(); ++i) {
    std::int64_t s = u[i] + v[i];
    if (spec.factors[i].periodic) {
      const auto d = static_cast<std::int64_t>(spec.factors[i].extent);
      s %= d;
      if (s < 0) s += d;
    }
    w.components.push_back(s);
  }
  return w;
}

LatticeOffset negate(const LatticeOffset& u, const LatticeSpec& spec) {
  LatticeOffset z = LatticeOffset::zeros(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) z.components[i] = -u[i];
  return compose_offsets(z, LatticeOffset::zeros(u.size()), spec);
}

IndexMap shift_index_map(const LatticeSpec& spec, const LatticeOffset& u) {
  check_arity(spec, u);
  return build_map(spec, strided(spec, u));
}

template <typename T>
Tensor<T> roll_tensor(const Tensor<T>& x, std::size_t axis, std::int64_t amount) {
  require(axis < x.rank(), "roll_tensor: axis out of range");
  const std::size_t d = x.dim(axis);
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  Tensor<T> out(x.shape());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t v = 0; v < d; ++v) {
      const auto s = source_coord(static_cast<std::int64_t>(v), amount, static_cast<std::int64_t>(d), true);
      const T* src = x.ptr() + (o * d + static_cast<std::size_t>(s)) * inner;
      std::copy(src, src + inner, out.ptr() + (o * d + v) * inner);
    }
  return out;
}

template Tensor<float> roll_tensor(const Tensor<float>&, std::size_t, std::int64_t);
template Tensor<double> roll_tensor(const Tensor<double>&, std::size_t, std::int64_t);

}  // namespace qtae
