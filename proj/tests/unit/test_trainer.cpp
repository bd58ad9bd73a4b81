#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "qtae/trainer.hpp"

using namespace qtae;

namespace {

TrainConfig tiny(TrainMode mode = TrainMode::qtae_product) {
  TrainConfig c;
  c.mode = mode;
  c.backbone.image_height = c.backbone.image_width = 16;
  c.backbone.widths = {4, 6, 8};
  c.backbone.code_channels = 8;
  c.channels = 2;
  c.epochs = 1;
  c.batch_size = 4;
  c.learning_rates = {1e-3};
  c.seed = 5;
  return c;
}

PairDataset glyphs(std::size_t n, std::uint64_t seed = 1) { return generate_dataset("affine", rotation_space(4), seed, n, 16); }

std::vector<float> flat(const std::vector<EpochRecord>& curve) {
  std::vector<float> out;
  for (const auto& r : curve) out.insert(out.end(), {float(r.loss), float(r.psnr), float(r.ssim)});
  return out;
}

}  // namespace

TEST(Train, DeterministicUnderFixedSeed) {
  const auto ds = glyphs(8);
  for (auto mode : {TrainMode::qtae_product, TrainMode::qtae_additive, TrainMode::tae_baseline}) {
    const auto a = train(tiny(mode), ds), b = train(tiny(mode), ds);
    EXPECT_EQ(a.sweep, b.sweep);
    EXPECT_TRUE(bit_identical(a.best, b.best));
    EXPECT_EQ(a.best.epoch, 1u);
  }
}

TEST(Train, ZeroOffsetReducesToAutoEncoding) {
  auto ds = glyphs(6);
  for (auto& p : ds.pairs) {
    p.offset = LatticeOffset::zeros(1);
    p.target = p.source;
  }
  const auto c = initial_checkpoint(tiny(), ds);
  const TrainedModel m(c);
  double want = 0;
  for (const auto& p : ds.pairs) {
    const auto rec = m.qtae().decode(m.qtae().encode(p.source));
    double s = 0;
    for (std::size_t i = 0; i < rec.numel(); ++i) s += std::abs(double(rec[i]) - p.source[i]);
    want += s / double(rec.numel());
  }
  EXPECT_NEAR(objective(c, ds.pairs), want / 6.0, 1e-6);
}

TEST(Train, DirectionsAgreeOnRelabeledPairs) {
  const auto ds = glyphs(6);
  auto relabeled = ds;
  for (auto& p : relabeled.pairs) {
    std::swap(p.source, p.target);
    for (auto& v : p.offset.components) v = -v;
  }
  auto fwd = tiny(), inv = tiny();
  inv.direction = Direction::inverse;
  const auto ga = batch_gradients(initial_checkpoint(fwd, ds), ds.pairs);
  const auto gb = batch_gradients(initial_checkpoint(inv, relabeled), relabeled.pairs);
  ASSERT_EQ(ga.size(), gb.size());
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_EQ(ga[i], gb[i]);
}

TEST(Train, SweepKeepsEveryRateAndPicksBestValidation) {
  auto c = tiny();
  c.learning_rates = {1e-5, 3e-3};
  c.epochs = 2;
  const auto r = train(c, glyphs(20));
  ASSERT_EQ(r.sweep.size(), 2u);
  const auto& best =
      r.sweep[0].val_psnr >= r.sweep[1].val_psnr ? r.sweep[0] : r.sweep[1];
  EXPECT_EQ(r.best.lr, best.lr);
  for (const auto& e : r.sweep) {
    EXPECT_FALSE(e.diverged);
    EXPECT_EQ(e.curve.size(), 2u);
    EXPECT_GT(e.initial_loss, 0.0);
  }
  EXPECT_EQ(r.best.sweep, r.sweep);
}

TEST(Train, ShortRunReducesLoss) {
  auto c = tiny();
  c.epochs = 8;
  c.learning_rates = {3e-3};
  const auto r = train(c, glyphs(64));
  EXPECT_LT(r.sweep[0].curve.back().loss, r.sweep[0].initial_loss);
}

TEST(Train, RejectsBadInputs) {
  auto c = tiny();
  EXPECT_THROW(train(c, PairDataset{}), ContractError);
  EXPECT_THROW(train(c, generate_dataset("affine", rotation_space(4), 1, 4, 32)), ContractError);
  c.learning_rates.clear();
  EXPECT_THROW(train(c, glyphs(4)), ContractError);
}

TEST(Split, FixedBySeed) {
  const auto a = split_indices(100, 0.1, 3), b = split_indices(100, 0.1, 3), c = split_indices(100, 0.1, 4);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_NE(a.validation, c.validation);
  EXPECT_EQ(a.validation.size(), 10u);
  EXPECT_EQ(a.train.size(), 90u);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  all.insert(a.validation.begin(), a.validation.end());
  EXPECT_EQ(all.size(), 100u);
  EXPECT_EQ(split_indices(1, 0.5, 0).train.size(), 1u);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const auto ds = glyphs(8);
  for (auto mode : {TrainMode::qtae_product, TrainMode::tae_baseline}) {
    const auto c = train(tiny(mode), ds).best;
    const auto path = std::filesystem::temp_directory_path() / "qtae_ckpt_test.bin";
    save_checkpoint(c, path);
    const auto back = load_checkpoint(path);
    EXPECT_TRUE(bit_identical(c, back));
    EXPECT_EQ(back.params, c.params);
    EXPECT_EQ(back.config, c.config);
    EXPECT_EQ(back.sweep, c.sweep);
    save_checkpoint(back, path.string() + "2");
    std::ifstream f1(path, std::ios::binary), f2(path.string() + "2", std::ios::binary);
    EXPECT_TRUE(std::equal(std::istreambuf_iterator<char>(f1), {}, std::istreambuf_iterator<char>(f2)));
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + "2");
  }
}

TEST(Checkpoint, CorruptionIsAFormatError) {
  const auto bytes = serialize_checkpoint(initial_checkpoint(tiny(), glyphs(4)));
  auto bad = bytes;
  bad[0] = 'X';
  try {
    deserialize_checkpoint(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  bad = bytes;
  bad[5] = 9;
  try {
    deserialize_checkpoint(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 5u);
  }
  for (std::size_t cut : {std::size_t(3), std::size_t(12), bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(deserialize_checkpoint(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + long(cut))),
                 FormatError);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(deserialize_checkpoint(bad), FormatError);
}

TEST(Checkpoint, ResumeEqualsUninterrupted) {
  const auto ds = glyphs(12);
  for (auto mode : {TrainMode::qtae_product, TrainMode::tae_baseline}) {
    auto full = tiny(mode);
    full.epochs = 3;
    const auto straight = train(full, ds).best;
    const auto first = train(tiny(mode), ds).best;
    const auto path = std::filesystem::temp_directory_path() / "qtae_resume.bin";
    save_checkpoint(first, path);
    const auto resumed = resume(load_checkpoint(path), ds, 3);
    EXPECT_TRUE(bit_identical(straight, resumed));
    EXPECT_EQ(flat(straight.sweep[0].curve), flat(resumed.sweep[0].curve));
    std::filesystem::remove(path);
  }
}

TEST(Evaluate, PassThroughAndBaseline) {
  const auto ds = glyphs(10);
  std::vector<Image> targets;
  for (const auto& p : ds.pairs) targets.push_back(p.target);
  const auto r = score_predictions(targets, ds.pairs);
  EXPECT_EQ(r.psnr, 120.0);
  EXPECT_EQ(r.ssim, 1.0);
  EXPECT_EQ(r.samples, 10u);
  const auto c = initial_checkpoint(tiny(), ds);
  const auto e = evaluate(c, ds.pairs);
  EXPECT_EQ(e.model.samples, 10u);
  const auto mean = score_predictions(std::vector<Image>(10, c.mean_image), ds.pairs);
  EXPECT_EQ(e.mean_baseline.psnr, mean.psnr);
}

TEST(Evaluate, BaselinePoseUsesSlotDifference) {
  const auto ds = glyphs(4);
  const TrainedModel m(initial_checkpoint(tiny(TrainMode::tae_baseline), ds));
  EXPECT_TRUE(m.is_baseline());
  const auto u = m.estimate_pose(ds.pairs[0].source, ds.pairs[0].source);
  EXPECT_EQ(u, LatticeOffset::zeros(1));
}

TEST(Capacity, Counts) {
  LatticeSpec six{{{"floorColour", 10, true, 1}, {"wallColour", 10, true, 1}, {"objectColour", 10, true, 1},
                   {"scale", 8, false, 1}, {"shape", 4, false, 1}, {"orientation", 15, true, 1}},
                  4,
                  LatticeMode::product};
  const BackboneConfig bb;
  const auto r = report_capacity(six, bb);
  EXPECT_EQ(r.product_cells, 1920000u);
  EXPECT_EQ(r.additive_cells, 228u);
  EXPECT_GT(r.product_params, r.additive_params);
  const auto one = report_capacity({{{"a", 7, true, 1}}, 3, LatticeMode::product}, bb);
  EXPECT_EQ(one.product_cells, one.additive_cells);
  EXPECT_EQ(one.product_params, one.additive_params);
  const auto none = report_capacity({{}, 5, LatticeMode::additive}, bb);
  EXPECT_EQ(none.product_cells, 5u);
  EXPECT_EQ(none.additive_cells, 5u);
}

TEST(Config, JsonRoundTripAndUnknownKey) {
  auto c = tiny(TrainMode::qtae_additive);
  c.direction = Direction::inverse;
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<TrainConfig>(), c);
  auto bad = j;
  bad["epoch"] = 3;
  try {
    bad.get<TrainConfig>();
    FAIL();
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("'epoch'"), std::string::npos);
  }
  bad = j;
  bad["mode"] = "cnn";
  EXPECT_THROW(bad.get<TrainConfig>(), ContractError);
}

TEST(Curves, CsvFormat) {
  auto c = tiny();
  c.epochs = 2;
  const auto r = train(c, glyphs(8));
  const auto path = std::filesystem::temp_directory_path() / "qtae_curve.csv";
  write_curve_csv(path, r.sweep);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "epoch,lr,loss,psnr,ssim");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 8), "1,0.001,");
  std::filesystem::remove(path);
  EXPECT_EQ(round6(1.23456789), 1.23457);
}
