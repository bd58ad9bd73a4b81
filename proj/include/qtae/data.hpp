#pragma once

// Paired-transformation datasets.
//
// A FactorSpace lists the attributes that generate an image. Factors marked
// `transform` become lattice axes and differ between source and target by
// the pair's offset; the others are content, sampled once per pair and
// shared by both images.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtae/image.hpp"
#include "qtae/lattice.hpp"

namespace qtae {

struct FactorDef {
  std::string name;
  std::size_t extent = 2;
  bool periodic = false;
  /// Continuous range: [lo, hi) when periodic, [lo, hi] otherwise.
  double lo = 0.0;
  double hi = 1.0;
  bool transform = true;

  bool operator==(const FactorDef&) const = default;
};

struct FactorSpace {
  std::vector<FactorDef> factors;

  std::size_t index(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<std::size_t> transform_factors() const;
  std::size_t state_count() const;
  /// Lattice over the transform factors, in order.
  LatticeSpec lattice(std::size_t channels, LatticeMode mode) const;
  void validate() const;

  bool operator==(const FactorSpace&) const = default;
};

void to_json(nlohmann::json& j, const FactorSpace& s);
void from_json(const nlohmann::json& j, FactorSpace& s);

/// Lattice bin of a continuous factor value.
///  aperiodic: round((v - lo) / (hi - lo) * (d - 1)), clamped; more than half a bin outside the range is an error.
///  periodic:  v is wrapped into [lo, hi), then round((v - lo) * d / (hi - lo)) mod d.
std::size_t quantise_param(double value, const FactorDef& factor);
/// Bin centre of `index`.
double dequantise_param(std::size_t index, const FactorDef& factor);
/// Width of one bin in the factor's units.
double bin_width(const FactorDef& factor);

/// Signed offset in bins -> continuous amount, the TAE baseline's u.
double offset_amount(std::int64_t offset, const FactorDef& factor);

struct SamplePair {
  Image source;
  Image target;
  /// One component per transform factor.
  LatticeOffset offset;
  /// Indices of every factor for each image.
  std::vector<std::size_t> source_indices;
  std::vector<std::size_t> target_indices;
  /// Seed of the per-pair content (glyph shape).
  std::uint64_t content_seed = 0;
};

/// Target indices = source indices with `u` applied to the transform factors.
std::vector<std::size_t> apply_offset_to_indices(const FactorSpace& space, const std::vector<std::size_t>& source,
                                                 const LatticeOffset& u);

// ---- procedural glyphs and affine warps ----------------------------------

struct AffineParams {
  double tx = 0.0, ty = 0.0;  // pixels
  double rotation = 0.0;      // radians
  double scale = 1.0;
  double shear = 0.0;  // radians
};

/// Bilinear warp about the image centre with a constant-zero exterior.
/// Output pixel p samples the input at A^-1 (p - c - t) + c.
Image warp_affine(const Image& image, const AffineParams& params);

/// Random strokes and an optional elliptical ring, anti-aliased, on a size x size canvas.
Image render_glyph(std::uint64_t seed, std::size_t size = 32);

/// Affine factor space with the default ranges (+-21 px translation,
/// +-15 degree rotation, scale [1/1.9, 1], +-11 degree shear); extents per factor.
FactorSpace default_affine_space(std::size_t extent = 7);
/// Single periodic full-circle rotation factor with `extent` bins.
FactorSpace rotation_space(std::size_t extent);

/// Affine pair images map raster intensity v to background + (ink - background) v
/// after warping, so the warp exterior and the glyph background coincide.
inline constexpr float kGlyphBackground = 0.1f;
inline constexpr float kGlyphInk = 0.9f;
Image glyph_levels(Image image);

AffineParams affine_params(const FactorSpace& space, const std::vector<std::size_t>& indices);

/// Random glyph at random source indices, target displaced by a uniformly drawn valid offset.
SamplePair synth_affine_pair(std::uint64_t seed, const FactorSpace& space, std::size_t size = 32);
/// Same, but with a given base image instead of a procedural glyph.
SamplePair affine_pair_from_image(const Image& base, std::uint64_t seed, const FactorSpace& space);

// ---- procedural mini-scenes -------------------------------------------------

/// Names understood by the scene renderer.
inline constexpr const char* kSceneFactorNames[] = {"floorColour", "wallColour", "objectColour",
                                                    "scale",       "shape",      "orientation"};
inline constexpr const char* kShapeNames[] = {"cube", "cylinder", "sphere", "capsule"};

/// Full scene space with extents (10, 10, 10, 8, 4, 15).
FactorSpace default_scene_space();
/// Scene factor with its standard range and periodicity, at the given extent.
FactorDef scene_factor(const std::string& name, std::size_t extent, bool transform = true);

struct SceneState {
  double floor_hue = 0.0, wall_hue = 0.3, object_hue = 0.6;
  double scale = 1.0;
  std::size_t shape = 0;
  double orientation = 0.0;
};

SceneState scene_state(const FactorSpace& space, const std::vector<std::size_t>& indices);
/// Wall above row 22, floor below, one sprite in front. [3, size, size].
Image render_scene(const SceneState& state, std::size_t size = 32);
/// Rows of the floor band for a given canvas size.
std::size_t scene_horizon(std::size_t size);
/// Colour name of a hue in [0, 1), e.g. "blue".
std::string hue_name(double hue);

SamplePair synth_scene_pair(std::uint64_t seed, const FactorSpace& space, std::size_t size = 32);

/// Every index vector of the space, last factor fastest.
std::vector<std::vector<std::size_t>> enumerate_states(const FactorSpace& space);

// ---- hold-out splitting -----------------------------------------------------

struct FactorValue {
  std::string factor;
  std::size_t index;
};
using Combination = std::vector<FactorValue>;

/// "objectColour=blue,shape=sphere" or "objectColour=7,shape=2": values are
/// bin indices, colour names (colour factors) or shape names (shape).
Combination parse_combination(const FactorSpace& space, const std::string& text);

bool hits(const FactorSpace& space, const std::vector<std::size_t>& indices, const Combination& combo);

struct HoldoutSplit {
  std::vector<SamplePair> train;
  std::vector<SamplePair> test;
};

/// train: neither image hits the combination. test: the target hits it.
HoldoutSplit split_holdout(const std::vector<SamplePair>& pairs, const FactorSpace& space, const Combination& combo);

// ---- persistence --------------------------------------------------------------

struct PairDataset {
  std::string generator;  // "affine", "scene" or "idx-affine"
  FactorSpace space;
  std::uint64_t seed = 0;
  std::size_t image_size = 32;
  std::vector<SamplePair> pairs;
};

/// `count` pairs, pair i generated from a seed derived from (seed, i).
PairDataset generate_dataset(const std::string& generator, const FactorSpace& space, std::uint64_t seed,
                             std::size_t count, std::size_t image_size = 32);
PairDataset generate_dataset_from_images(const std::vector<Image>& bases, const FactorSpace& space,
                                         std::uint64_t seed, std::size_t count, std::size_t image_size = 32);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Writes `manifest` (JSON) and a sibling raw blob `<stem>.bin`:
/// for each pair, source then target, each H*W*C bytes, row-major, channels interleaved.
void save_dataset(const PairDataset& dataset, const std::filesystem::path& manifest);
PairDataset load_dataset(const std::filesystem::path& manifest);

// ---- IDX ----------------------------------------------------------------------

/// IDX image file: big-endian magic 0x00000803, three u32 extents (count, rows, cols), unsigned bytes.
std::vector<Image> parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<Image> load_idx(const std::filesystem::path& path);

}  // namespace qtae
