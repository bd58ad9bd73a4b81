#pragma once

// Discrete lattice embeddings and the shift operators acting on them.
//
// A product-mode embedding has shape d_1 x ... x d_t x m; an additive-mode
// embedding stacks one d_i x m block per factor into (d_1 + ... + d_t) x m.
// Shifting by offset u follows out[v] = in[v + u*k] along every factor axis:
// periodic axes wrap (roll), aperiodic axes read zero when v + u*k leaves
// [0, d). The m channel axis is never touched.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtae/autograd.hpp"
#include "qtae/tensor.hpp"

namespace qtae {

struct LatticeFactor {
  std::string name;
  std::size_t extent = 1;
  bool periodic = false;
  std::size_t stride = 1;

  bool operator==(const LatticeFactor&) const = default;
};

enum class LatticeMode { product, additive };

const char* to_string(LatticeMode mode);
LatticeMode lattice_mode_from_string(const std::string& name);

struct LatticeSpec {
  std::vector<LatticeFactor> factors;
  std::size_t channels = 1;
  LatticeMode mode = LatticeMode::product;

  std::size_t factor_count() const { return factors.size(); }
  /// (prod d_i) * m or (sum d_i) * m; both are m when there are no factors.
  std::size_t element_count() const;
  /// Element count of the other mode, without building a spec.
  static std::size_t element_count(const std::vector<LatticeFactor>& factors, std::size_t channels, LatticeMode mode);
  Shape embedding_shape() const;
  /// First row of factor i's block (additive mode).
  std::size_t block_offset(std::size_t factor) const;
  std::size_t factor_index(const std::string& name) const;
  bool all_periodic() const;
  void validate() const;

  bool operator==(const LatticeSpec&) const = default;
};

void to_json(nlohmann::json& j, const LatticeSpec& spec);
void from_json(const nlohmann::json& j, LatticeSpec& spec);

/// Integer shift, one component per factor.
struct LatticeOffset {
  std::vector<std::int64_t> components;

  static LatticeOffset zeros(std::size_t t) { return {std::vector<std::int64_t>(t, 0)}; }
  std::size_t size() const { return components.size(); }
  std::int64_t operator[](std::size_t i) const { return components[i]; }
  bool operator==(const LatticeOffset&) const = default;
};

std::string to_string(const LatticeOffset& u);

/// A float tensor shaped by its LatticeSpec.
class EmbeddingTensor {
 public:
  EmbeddingTensor(Tensor<float> tensor, LatticeSpec spec);
  /// Zero embedding.
  explicit EmbeddingTensor(LatticeSpec spec);

  const Tensor<float>& tensor() const { return tensor_; }
  Tensor<float>& tensor() { return tensor_; }
  const LatticeSpec& spec() const { return spec_; }

  /// m-vector stored at a product-mode lattice cell.
  std::vector<float> cell(const std::vector<std::size_t>& index) const;

 private:
  Tensor<float> tensor_;
  LatticeSpec spec_;
};

/// out[v] = in[(v + amount) mod d] along one periodic factor.
EmbeddingTensor roll_axis(const EmbeddingTensor& y, std::size_t axis, std::int64_t amount);

/// out[v] = in[v + amount] when in range, else 0, along one aperiodic factor.
EmbeddingTensor shift_zero_axis(const EmbeddingTensor& y, std::size_t axis, std::int64_t amount);

/// Composite shift of a product-mode embedding; stride k_i scales component i.
EmbeddingTensor apply_offset(const EmbeddingTensor& y, const LatticeOffset& u);

/// Independent shift of each block of an additive-mode embedding.
EmbeddingTensor apply_offset_additive(const EmbeddingTensor& y, const LatticeOffset& u);

/// Dispatches on the spec's mode.
EmbeddingTensor shift(const EmbeddingTensor& y, const LatticeOffset& u);

/// Componentwise sum; periodic components reduced into [0, d).
LatticeOffset compose_offsets(const LatticeOffset& u, const LatticeOffset& v, const LatticeSpec& spec);
LatticeOffset negate(const LatticeOffset& u, const LatticeSpec& spec);

/// Flat gather map realising shift(., u) on a flattened embedding of `spec`:
/// out[j] = in[map[j]] or 0 where map[j] < 0.
IndexMap shift_index_map(const LatticeSpec& spec, const LatticeOffset& u);

/// Roll of an arbitrary tensor along one axis, same convention as roll_axis.
template <typename T>
Tensor<T> roll_tensor(const Tensor<T>& x, std::size_t axis, std::int64_t amount);

}  // namespace qtae
