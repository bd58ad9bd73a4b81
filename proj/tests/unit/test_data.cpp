#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "qtae/data.hpp"

using namespace qtae;

namespace {

constexpr double kPi = std::numbers::pi;

FactorDef periodic(std::size_t d) { return {"a", d, true, 0.0, 2 * kPi, true}; }
FactorDef aperiodic(std::size_t d, double lo = 0.0, double hi = 1.0) { return {"b", d, false, lo, hi, true}; }

double mean_abs(const Image& a, const Image& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.numel());
}

std::vector<std::uint8_t> idx_header(std::uint32_t magic, std::uint32_t n, std::uint32_t r, std::uint32_t c) {
  std::vector<std::uint8_t> b;
  for (auto v : {magic, n, r, c})
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
  return b;
}

FactorSpace reduced_scene() {
  FactorSpace s;
  const std::size_t ext[] = {2, 2, 2, 2, 2, 3};
  for (std::size_t i = 0; i < 6; ++i) s.factors.push_back(scene_factor(kSceneFactorNames[i], ext[i]));
  return s;
}

}  // namespace

TEST(Quantise, Examples) {
  EXPECT_EQ(quantise_param(kPi, periodic(4)), 2u);
  EXPECT_EQ(quantise_param(2 * kPi - 0.01, periodic(4)), 0u);
  EXPECT_EQ(quantise_param(-kPi / 2, periodic(4)), 3u);
  EXPECT_EQ(quantise_param(0.5, aperiodic(5)), 2u);
  EXPECT_EQ(quantise_param(1.05, aperiodic(5)), 4u);
  EXPECT_THROW(quantise_param(1.5, aperiodic(5)), ContractError);
}

TEST(Quantise, RoundTripWithinHalfBin) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 7.0);
  for (std::size_t d : {2, 5, 8, 15}) {
    const auto f = aperiodic(d, -3.0, 7.0);
    for (int i = 0; i < 200; ++i) {
      const double v = u(rng);
      EXPECT_LE(std::abs(dequantise_param(quantise_param(v, f), f) - v), bin_width(f) / 2 + 1e-12);
    }
  }
}

TEST(Quantise, PeriodicShiftConsistency) {
  for (std::size_t d : {3, 8, 15}) {
    const auto f = periodic(d);
    for (std::size_t i = 0; i < d; ++i)
      EXPECT_EQ(quantise_param(dequantise_param(i, f) + bin_width(f), f), (i + 1) % d);
  }
}

TEST(Affine, TranslationBinWidth) {
  const auto s = default_affine_space(7);
  EXPECT_DOUBLE_EQ(bin_width(s.factors[s.index("tx")]), 42.0 / 6.0);
  EXPECT_DOUBLE_EQ(bin_width(default_affine_space(11).factors[0]), 42.0 / 10.0);
}

TEST(Affine, IdentityWarpIsBitExact) {
  const auto g = render_glyph(5);
  EXPECT_EQ(warp_affine(g, {}), g);
}

TEST(Affine, PairWithZeroOffsetHasEqualImages) {
  std::size_t seen = 0;
  for (std::uint64_t seed = 0; seed < 400 && seen < 3; ++seed) {
    const auto p = synth_affine_pair(seed, rotation_space(4));
    if (p.offset.components[0] != 0) continue;
    ++seen;
    EXPECT_EQ(p.source, p.target);
  }
  EXPECT_GT(seen, 0u);
}

TEST(Affine, DoubleWarpReturnsSource) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = render_glyph(seed);
    AffineParams fwd, back;
    fwd.rotation = 2 * kPi / 8;
    back.rotation = -fwd.rotation;
    EXPECT_LT(mean_abs(warp_affine(warp_affine(g, fwd), back), g), 0.05);
  }
}

TEST(Affine, OffsetConsistency) {
  const auto space = default_affine_space(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = synth_affine_pair(seed, space);
    EXPECT_EQ(p.target_indices, apply_offset_to_indices(space, p.source_indices, p.offset));
    const auto g = render_glyph(p.content_seed);
    EXPECT_EQ(p.target, glyph_levels(warp_affine(g, affine_params(space, p.target_indices))));
    for (std::size_t i = 0; i < 5; ++i) EXPECT_LT(p.target_indices[i], 5u);
    for (auto v : p.source.storage()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
}

TEST(Affine, Deterministic) {
  const auto a = synth_affine_pair(17, default_affine_space());
  const auto b = synth_affine_pair(17, default_affine_space());
  EXPECT_EQ(a.source, b.source);
  EXPECT_EQ(a.target, b.target);
  EXPECT_EQ(a.offset, b.offset);
}

TEST(Affine, PeriodicOffsetsAreSignedRepresentatives) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto p = synth_affine_pair(seed, rotation_space(8));
    const auto u = p.offset.components[0];
    EXPECT_GE(u, -4);
    EXPECT_LE(u, 3);
    EXPECT_EQ(p.target_indices[0], static_cast<std::size_t>((std::int64_t(p.source_indices[0]) + u + 8) % 8));
  }
}

TEST(Scene, DeterministicAndLocal) {
  const auto space = default_scene_space();
  const std::vector<std::size_t> idx{1, 2, 3, 4, 1, 5};
  EXPECT_EQ(render_scene(scene_state(space, idx)), render_scene(scene_state(space, idx)));
  auto other = idx;
  other[1] = 7;
  const auto a = render_scene(scene_state(space, idx)), b = render_scene(scene_state(space, other));
  const std::size_t h = scene_horizon(32);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = h; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) EXPECT_EQ(a[(c * 32 + y) * 32 + x], b[(c * 32 + y) * 32 + x]);
  EXPECT_NE(a, b);
}

TEST(Scene, ReducedEnumerationIsDistinct) {
  const auto space = reduced_scene();
  const auto states = enumerate_states(space);
  ASSERT_EQ(states.size(), 96u);
  std::set<std::vector<float>> seen;
  for (const auto& s : states) seen.insert(render_scene(scene_state(space, s)).storage());
  EXPECT_EQ(seen.size(), 96u);
}

TEST(Scene, PairOffsetsStayInRange) {
  const auto space = default_scene_space();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto p = synth_scene_pair(seed, space);
    EXPECT_EQ(p.target_indices, apply_offset_to_indices(space, p.source_indices, p.offset));
    EXPECT_EQ(p.target, render_scene(scene_state(space, p.target_indices)));
    for (std::size_t i = 0; i < 6; ++i) EXPECT_LT(p.target_indices[i], space.factors[i].extent);
  }
}

TEST(Scene, HueNames) {
  EXPECT_EQ(hue_name(0.0), "red");
  EXPECT_EQ(hue_name(0.7), "blue");
  EXPECT_EQ(hue_name(1.0), "red");
}

TEST(Holdout, CountsAndFilter) {
  FactorSpace space;
  space.factors = {scene_factor("objectColour", 10), scene_factor("shape", 4), scene_factor("scale", 3)};
  const Combination combo{{"objectColour", 7}, {"shape", 2}};
  const auto states = enumerate_states(space);
  std::size_t hit = 0;
  for (const auto& s : states) hit += hits(space, s, combo);
  EXPECT_EQ(hit * 40, states.size());

  const auto ds = generate_dataset("scene", space, 3, 800);
  const auto split = split_holdout(ds.pairs, space, combo);
  EXPECT_LE(split.train.size() + split.test.size(), ds.pairs.size());
  for (const auto& p : split.train) {
    EXPECT_FALSE(hits(space, p.source_indices, combo));
    EXPECT_FALSE(hits(space, p.target_indices, combo));
  }
  for (const auto& p : split.test) EXPECT_TRUE(hits(space, p.target_indices, combo));
  EXPECT_THROW(split_holdout(std::vector<SamplePair>(ds.pairs.begin(), ds.pairs.begin() + 1), space,
                             {{"objectColour", 7}, {"shape", 2}, {"scale", 2}}),
               ContractError);
}

TEST(Idx, ParsesOneImage) {
  auto bytes = idx_header(0x803, 1, 28, 28);
  for (int i = 0; i < 784; ++i) bytes.push_back(static_cast<std::uint8_t>(i % 256));
  bytes[16] = 255;
  const auto imgs = parse_idx_images(bytes);
  ASSERT_EQ(imgs.size(), 1u);
  EXPECT_EQ(imgs[0].shape(), (Shape{1, 28, 28}));
  EXPECT_EQ(imgs[0][0], 1.0f);
  EXPECT_FLOAT_EQ(imgs[0][1], 1.0f / 255.0f);
}

TEST(Idx, Errors) {
  auto label = idx_header(0x801, 1, 28, 28);
  try {
    parse_idx_images(label);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  auto trunc = idx_header(0x803, 2, 4, 4);
  trunc.resize(16 + 20);
  EXPECT_THROW(parse_idx_images(trunc), FormatError);
  EXPECT_THROW(parse_idx_images(std::vector<std::uint8_t>{0, 0, 8}), FormatError);

  const auto path = std::filesystem::temp_directory_path() / "qtae_test.idx";
  auto good = idx_header(0x803, 2, 2, 3);
  for (int i = 0; i < 12; ++i) good.push_back(static_cast<std::uint8_t>(20 * i));
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(good.data()), good.size());
  const auto imgs = load_idx(path);
  ASSERT_EQ(imgs.size(), 2u);
  EXPECT_FLOAT_EQ(imgs[1][5], 220.0f / 255.0f);
  std::filesystem::remove(path);
}

TEST(Dataset, SaveLoadRoundTrip) {
  const auto ds = generate_dataset("scene", reduced_scene(), 9, 12);
  const auto dir = std::filesystem::temp_directory_path() / "qtae_ds_test";
  std::filesystem::create_directories(dir);
  save_dataset(ds, dir / "pairs.json");
  EXPECT_TRUE(std::filesystem::exists(dir / "pairs.bin"));
  const auto back = load_dataset(dir / "pairs.json");
  EXPECT_EQ(back.space, ds.space);
  EXPECT_EQ(back.seed, 9u);
  ASSERT_EQ(back.pairs.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(back.pairs[i].offset, ds.pairs[i].offset);
    EXPECT_EQ(back.pairs[i].source_indices, ds.pairs[i].source_indices);
    for (std::size_t j = 0; j < ds.pairs[i].source.numel(); ++j)
      EXPECT_EQ(to_byte(back.pairs[i].source[j]), to_byte(ds.pairs[i].source[j]));
  }
  std::filesystem::remove_all(dir);
}

TEST(Dataset, ParallelGenerationMatchesSerial) {
  const auto space = default_affine_space();
  const auto ds = generate_dataset("affine", space, 4, 16);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(ds.pairs[i].target, synth_affine_pair(derive_seed(4, i), space).target);
}

TEST(FactorSpaceJson, RejectsUnknownKeys) {
  const nlohmann::json j = default_scene_space();
  EXPECT_EQ(j.get<FactorSpace>(), default_scene_space());
  auto bad = j;
  bad[0]["colour"] = 1;
  EXPECT_THROW(bad.get<FactorSpace>(), ContractError);
}
