#include "qtae/model.hpp"

#include <cmath>
#include <random>

namespace qtae {

const char* to_string(LatticeMapping mapping) {
  return mapping == LatticeMapping::projection ? "projection" : "spatial";
}

LatticeMapping lattice_mapping_from_string(const std::string& name) {
  if (name == "projection") return LatticeMapping::projection;
  if (name == "spatial") return LatticeMapping::spatial;
  throw ContractError("unknown lattice mapping '" + name + "'");
}

std::size_t BackboneConfig::total_stride() const {
  std::size_t s = 1;
  for (auto k : strides) s *= k;
  return s;
}

void BackboneConfig::validate() const {
  require(widths.size() == 3, "backbone needs exactly 3 hidden widths (4 convolutions)");
  require(strides.size() == 4, "backbone needs exactly 4 strides");
  require(image_channels >= 1 && code_channels >= 1, "backbone channel counts must be positive");
  for (auto w : widths) require(w >= 1, "backbone widths must be positive");
  for (auto s : strides) {
    require(s >= 1 && kernel >= s, "backbone stride must be in [1, kernel]");
    require((kernel - s) % 2 == 0, "kernel minus stride must be even for size-exact up/down sampling");
  }
  const auto ts = total_stride();
  require(image_height % ts == 0 && image_width % ts == 0,
          "image extents must be divisible by the total stride " + std::to_string(ts));
}

void to_json(nlohmann::json& j, const BackboneConfig& c) {
  j = {{"image_channels", c.image_channels},
       {"image_height", c.image_height},
       {"image_width", c.image_width},
       {"widths", c.widths},
       {"code_channels", c.code_channels},
       {"strides", c.strides},
       {"kernel", c.kernel},
       {"padding", to_string(c.padding)},
       {"mapping", to_string(c.mapping)}};
}

void from_json(const nlohmann::json& j, BackboneConfig& c) {
  static const std::vector<std::string> keys{"image_channels", "image_height", "image_width", "widths", "code_channels",
                                             "strides", "kernel", "padding", "mapping"};
  require(j.is_object(), "backbone config must be a JSON object");
  for (const auto& [key, value] : j.items())
    require(std::find(keys.begin(), keys.end(), key) != keys.end(), "unknown backbone key '" + key + "'");
  c = BackboneConfig{};
  c.image_channels = j.value("image_channels", c.image_channels);
  c.image_height = j.value("image_height", c.image_height);
  c.image_width = j.value("image_width", c.image_width);
  c.widths = j.value("widths", c.widths);
  c.code_channels = j.value("code_channels", c.code_channels);
  c.strides = j.value("strides", c.strides);
  c.kernel = j.value("kernel", c.kernel);
  c.padding = pad_mode_from_string(j.value("padding", std::string("zero")));
  c.mapping = lattice_mapping_from_string(j.value("mapping", std::string("projection")));
  c.validate();
}

namespace {

struct LayerShape {
  std::string name;
  Shape shape;
  double fan_in;  // 0 for biases
};

std::vector<LayerShape> layer_shapes(const BackboneConfig& c, std::size_t code_size, std::size_t* encoder_count) {
  const std::size_t K = c.kernel;
  const std::vector<std::size_t> chans{c.image_channels, c.widths[0], c.widths[1], c.widths[2], c.code_channels};
  std::vector<LayerShape> out;
  for (std::size_t l = 0; l < 4; ++l) {
    const auto name = "enc.conv" + std::to_string(l + 1);
    out.push_back({name + ".weight", {chans[l + 1], chans[l], K, K}, double(chans[l] * K * K)});
    out.push_back({name + ".bias", {chans[l + 1]}, 0.0});
  }
  const bool proj = c.mapping == LatticeMapping::projection;
  const std::size_t feat = c.feature_count();
  if (proj) {
    out.push_back({"enc.proj.weight", {code_size, feat}, double(feat)});
    out.push_back({"enc.proj.bias", {code_size}, 0.0});
  }
  if (encoder_count) *encoder_count = out.size();
  if (proj) {
    out.push_back({"dec.proj.weight", {feat, code_size}, double(code_size)});
    out.push_back({"dec.proj.bias", {feat}, 0.0});
  }
  for (std::size_t l = 0; l < 4; ++l) {
    const std::size_t in = chans[4 - l], outc = chans[3 - l], s = c.strides[3 - l];
    const auto name = "dec.deconv" + std::to_string(l + 1);
    out.push_back({name + ".weight", {in, outc, K, K}, double(in * K * K) / double(s * s)});
    out.push_back({name + ".bias", {outc}, 0.0});
  }
  return out;
}

}  // namespace

std::size_t parameter_count(const BackboneConfig& config, std::size_t code_size) {
  std::size_t n = 0;
  for (const auto& l : layer_shapes(config, code_size, nullptr)) n += shape_numel(l.shape);
  return n;
}

template <typename T>
Backbone<T>::Backbone(BackboneConfig config, std::size_t code_size, std::uint64_t seed)
    : config_(std::move(config)), code_size_(code_size) {
  config_.validate();
  require(code_size_ >= 1, "backbone code size must be positive");
  if (config_.mapping == LatticeMapping::spatial)
    require(code_size_ == config_.feature_count(),
            "spatial mapping needs code size " + std::to_string(config_.feature_count()) + ", got " +
                std::to_string(code_size_));
  std::mt19937_64 rng(seed);
  for (const auto& l : layer_shapes(config_, code_size_, &encoder_params_)) {
    Tensor<T> t(l.shape);
    if (l.fan_in > 0) {
      const T bound = static_cast<T>(std::sqrt(6.0 / l.fan_in));
      std::uniform_real_distribution<T> dist(-bound, bound);
      for (auto& v : t.data()) v = dist(rng);
    }
    params_.push_back({l.name, Var<T>(std::move(t), true)});
  }
}

template <typename T>
std::vector<Var<T>> Backbone<T>::param_vars() const {
  std::vector<Var<T>> v;
  v.reserve(params_.size());
  for (const auto& p : params_) v.push_back(p.var);
  return v;
}

template <typename T>
void Backbone<T>::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

template <typename T>
Var<T> Backbone<T>::encode_with(const std::vector<Var<T>>& p, const Var<T>& x) const {
  require(p.size() == params_.size(), "encode: parameter list size mismatch");
  const auto& c = config_;
  require(x.value().rank() == 4 && x.shape()[1] == c.image_channels && x.shape()[2] == c.image_height &&
              x.shape()[3] == c.image_width,
          "encode: expected [N," + std::to_string(c.image_channels) + "," + std::to_string(c.image_height) + "," +
              std::to_string(c.image_width) + "] images, got " + shape_str(x.shape()));
  Var<T> h = x;
  for (std::size_t l = 0; l < 4; ++l) {
    const ConvParams cp{c.strides[l], c.layer_padding(l), c.padding};
    h = ag::add_channel_bias(ag::conv2d(h, p[2 * l], cp), p[2 * l + 1]);
    if (l < 3 || c.mapping == LatticeMapping::projection) h = ag::relu(h);
  }
  const std::size_t n = x.shape()[0];
  if (c.mapping == LatticeMapping::spatial) return ag::reshape(ag::to_channels_last(h), {n, code_size_});
  return ag::linear(ag::reshape(h, {n, c.feature_count()}), p[8], p[9]);
}

template <typename T>
Var<T> Backbone<T>::decode_with(const std::vector<Var<T>>& p, const Var<T>& code) const {
  require(p.size() == params_.size(), "decode: parameter list size mismatch");
  require(code.value().rank() == 2 && code.shape()[1] == code_size_,
          "decode: expected [N," + std::to_string(code_size_) + "] code, got " + shape_str(code.shape()));
  const auto& c = config_;
  const std::size_t n = code.shape()[0], fh = c.feature_height(), fw = c.feature_width();
  Var<T> h;
  std::size_t base;
  if (c.mapping == LatticeMapping::projection) {
    h = ag::relu(ag::reshape(ag::linear(code, p[10], p[11]), {n, c.code_channels, fh, fw}));
    base = 12;
  } else {
    h = ag::to_channels_first(ag::reshape(code, {n, fh, fw, c.code_channels}));
    base = 8;
  }
  for (std::size_t l = 0; l < 4; ++l) {
    const std::size_t s = c.strides[3 - l];
    const ConvParams cp{s, (c.kernel - s) / 2, c.padding};
    h = ag::add_channel_bias(ag::deconv2d(h, p[base + 2 * l], cp), p[base + 2 * l + 1]);
    h = l < 3 ? ag::relu(h) : ag::sigmoid(h);
  }
  return h;
}

template class Backbone<float>;
template class Backbone<double>;

// ---------------------------------------------------------------------------

namespace {

Tensor<float> as_batch(const Tensor<float>& x) {
  Shape s{1};
  s.insert(s.end(), x.shape().begin(), x.shape().end());
  return x.reshaped(s);
}

}  // namespace

QtaeModel::QtaeModel(BackboneConfig config, LatticeSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), backbone_(std::move(config), spec_.element_count(), seed) {
  spec_.validate();
  if (backbone_.config().mapping == LatticeMapping::spatial)
    require(spec_.mode == LatticeMode::product && spec_.factor_count() == 2 &&
                spec_.factors[0].extent == backbone_.config().feature_height() &&
                spec_.factors[1].extent == backbone_.config().feature_width() &&
                spec_.channels == backbone_.config().code_channels,
            "spatial mapping needs a 2-factor lattice matching the feature map");
}

void QtaeModel::check_image(const Tensor<float>& x) const {
  require(x.shape() == image_shape(), "expected image " + shape_str(image_shape()) + ", got " + shape_str(x.shape()));
}

EmbeddingTensor QtaeModel::encode(const Tensor<float>& x) const {
  check_image(x);
  auto code = encode_batch(as_batch(x));
  return EmbeddingTensor(code.reshaped(spec_.embedding_shape()), spec_);
}

Tensor<float> QtaeModel::decode(const EmbeddingTensor& y) const {
  require(y.spec() == spec_, "decode: embedding lattice does not match the model");
  Var<float> code(y.tensor().reshaped({1, spec_.element_count()}));
  return backbone_.decode(code).value().reshaped(image_shape());
}

Tensor<float> QtaeModel::predict_transformed(const Tensor<float>& x, const LatticeOffset& u) const {
  return decode(shift(encode(x), u));
}

Tensor<float> QtaeModel::encode_batch(const Tensor<float>& images) const {
  return backbone_.encode(Var<float>(images)).value();
}

Var<float> QtaeModel::shifted_decode(const Var<float>& code, const std::vector<LatticeOffset>& offsets) const {
  require(offsets.size() == code.shape()[0], "shifted_decode: one offset per sample required");
  std::vector<IndexMap> maps;
  maps.reserve(offsets.size());
  for (const auto& u : offsets) maps.push_back(shift_index_map(spec_, u));
  return backbone_.decode(ag::gather(code, maps));
}

Tensor<float> QtaeModel::predict_batch(const Tensor<float>& images, const std::vector<LatticeOffset>& offsets) const {
  Var<float> code(encode_batch(images));
  return shifted_decode(code, offsets).value();
}

// ---------------------------------------------------------------------------

TaeBaselineModel::TaeBaselineModel(BackboneConfig config, std::size_t slots, std::size_t width, std::uint64_t seed)
    : slots_(slots), backbone_(std::move(config), width, seed) {
  require(slots_ <= width, "transformation slots exceed embedding width");
}

Tensor<float> TaeBaselineModel::encode(const Tensor<float>& x) const {
  require(x.shape() == config().image_shape(), "tae encode: image shape mismatch");
  return encode_batch(as_batch(x)).reshaped({width()});
}

Tensor<float> TaeBaselineModel::slot_offsets(const std::vector<std::vector<double>>& u, std::size_t batch) const {
  require(u.size() == batch, "tae: one offset vector per sample required");
  Tensor<float> c({batch, width()});
  for (std::size_t n = 0; n < batch; ++n) {
    require(u[n].size() == slots_, "tae: offset has " + std::to_string(u[n].size()) + " components, model has " +
                                       std::to_string(slots_) + " slots");
    for (std::size_t i = 0; i < slots_; ++i) c[n * width() + i] = static_cast<float>(u[n][i]);
  }
  return c;
}

Tensor<float> TaeBaselineModel::encode_batch(const Tensor<float>& images) const {
  return backbone_.encode(Var<float>(images)).value();
}

Tensor<float> TaeBaselineModel::predict_batch(const Tensor<float>& images,
                                              const std::vector<std::vector<double>>& u) const {
  Var<float> code(encode_batch(images));
  return backbone_.decode(ag::add_constant(code, slot_offsets(u, images.dim(0)))).value();
}

Tensor<float> TaeBaselineModel::tae_predict(const Tensor<float>& x, const std::vector<double>& u) const {
  require(x.shape() == config().image_shape(), "tae_predict: image shape mismatch");
  return predict_batch(as_batch(x), {u}).reshaped(config().image_shape());
}

}  // namespace qtae
