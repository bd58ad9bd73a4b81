#pragma once

// Encoder/decoder backbone and the two auto-encoders built on it:
//  - QtaeModel: embedding is a lattice; a transformation is a lattice shift.
//  - TaeBaselineModel: flat embedding whose first t slots receive +u.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtae/autograd.hpp"
#include "qtae/lattice.hpp"

namespace qtae {

/// How the encoder's final feature map becomes the flat code.
///  projection: flatten, then a dense layer to the code size (any lattice).
///  spatial:    the feature map itself is the lattice, H' x W' x E (CNN case).
enum class LatticeMapping { projection, spatial };

const char* to_string(LatticeMapping mapping);
LatticeMapping lattice_mapping_from_string(const std::string& name);

struct BackboneConfig {
  std::size_t image_channels = 1;
  std::size_t image_height = 32;
  std::size_t image_width = 32;
  /// Output channels of the first three convolutions.
  std::vector<std::size_t> widths{32, 64, 128};
  /// Output channels of the fourth convolution.
  std::size_t code_channels = 128;
  /// Encoder strides; the decoder uses them in reverse.
  std::vector<std::size_t> strides{2, 2, 2, 2};
  std::size_t kernel = 4;
  PadMode padding = PadMode::zero;
  LatticeMapping mapping = LatticeMapping::projection;

  std::size_t total_stride() const;
  std::size_t feature_height() const { return image_height / total_stride(); }
  std::size_t feature_width() const { return image_width / total_stride(); }
  std::size_t feature_count() const { return code_channels * feature_height() * feature_width(); }
  std::size_t layer_padding(std::size_t layer) const { return (kernel - strides.at(layer)) / 2; }
  Shape image_shape() const { return {image_channels, image_height, image_width}; }
  void validate() const;

  bool operator==(const BackboneConfig&) const = default;
};

void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);

/// Trainable parameter count of a backbone producing `code_size` code values.
std::size_t parameter_count(const BackboneConfig& config, std::size_t code_size);

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
};

/// Four convolutions down to a code of `code_size` values, four transposed
/// convolutions back to the image. ReLU between layers, sigmoid on the output.
template <typename T>
class Backbone {
 public:
  Backbone(BackboneConfig config, std::size_t code_size, std::uint64_t seed);

  const BackboneConfig& config() const { return config_; }
  std::size_t code_size() const { return code_size_; }

  std::vector<NamedParam<T>>& params() { return params_; }
  const std::vector<NamedParam<T>>& params() const { return params_; }
  std::vector<Var<T>> param_vars() const;
  std::size_t encoder_param_count() const { return encoder_params_; }

  /// x [N, C, H, W] -> code [N, code_size]
  Var<T> encode(const Var<T>& x) const { return encode_with(param_vars(), x); }
  /// code [N, code_size] -> image [N, C, H, W] in [0, 1]
  Var<T> decode(const Var<T>& code) const { return decode_with(param_vars(), code); }

  /// Same stacks with explicitly supplied parameters (ordered as params()).
  Var<T> encode_with(const std::vector<Var<T>>& params, const Var<T>& x) const;
  Var<T> decode_with(const std::vector<Var<T>>& params, const Var<T>& code) const;

  void zero_grad();

 private:
  BackboneConfig config_;
  std::size_t code_size_;
  std::size_t encoder_params_ = 0;
  std::vector<NamedParam<T>> params_;
};

extern template class Backbone<float>;
extern template class Backbone<double>;

class QtaeModel {
 public:
  QtaeModel(BackboneConfig config, LatticeSpec spec, std::uint64_t seed);

  const LatticeSpec& spec() const { return spec_; }
  const BackboneConfig& config() const { return backbone_.config(); }
  Backbone<float>& backbone() { return backbone_; }
  const Backbone<float>& backbone() const { return backbone_; }
  Shape image_shape() const { return config().image_shape(); }

  /// x is one [C, H, W] image.
  EmbeddingTensor encode(const Tensor<float>& x) const;
  Tensor<float> decode(const EmbeddingTensor& y) const;
  /// decode(shift(encode(x), u))
  Tensor<float> predict_transformed(const Tensor<float>& x, const LatticeOffset& u) const;

  /// Batched: images [N, C, H, W] -> embeddings [N, element_count], no gradient.
  Tensor<float> encode_batch(const Tensor<float>& images) const;
  /// Batched prediction with per-sample offsets.
  Tensor<float> predict_batch(const Tensor<float>& images, const std::vector<LatticeOffset>& offsets) const;

  /// Differentiable pieces for training.
  Var<float> shifted_decode(const Var<float>& code, const std::vector<LatticeOffset>& offsets) const;

 private:
  void check_image(const Tensor<float>& x) const;

  LatticeSpec spec_;
  Backbone<float> backbone_;
};

class TaeBaselineModel {
 public:
  /// `slots` continuous transformation slots inside an embedding of `width` values.
  TaeBaselineModel(BackboneConfig config, std::size_t slots, std::size_t width, std::uint64_t seed);

  std::size_t slots() const { return slots_; }
  std::size_t width() const { return backbone_.code_size(); }
  const BackboneConfig& config() const { return backbone_.config(); }
  Backbone<float>& backbone() { return backbone_; }
  const Backbone<float>& backbone() const { return backbone_; }

  /// y = (y_t, y_e) for one [C, H, W] image.
  Tensor<float> encode(const Tensor<float>& x) const;
  /// decode(encode(x) + (u, 0))
  Tensor<float> tae_predict(const Tensor<float>& x, const std::vector<double>& u) const;
  /// Adds u to the first t slots of every row of a [N, width] code.
  Tensor<float> slot_offsets(const std::vector<std::vector<double>>& u, std::size_t batch) const;

  Tensor<float> encode_batch(const Tensor<float>& images) const;
  Tensor<float> predict_batch(const Tensor<float>& images, const std::vector<std::vector<double>>& u) const;

 private:
  std::size_t slots_;
  Backbone<float> backbone_;
};

}  // namespace qtae
