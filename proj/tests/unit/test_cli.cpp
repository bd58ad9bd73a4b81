#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("qtae_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = "cd " + work().string() + " && " + env + " " + QTAE_CLI_PATH + " " + args +
                          " > last.out 2> last.err";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(work() / p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json json_of(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

void write(const fs::path& p, const std::string& text) { std::ofstream(work() / p) << text; }

const char* kConfig =
    R"({"backbone": {"image_height": 16, "image_width": 16, "widths": [4, 6, 8], "code_channels": 8},
        "channels": 2, "epochs": 2, "batch_size": 8, "learning_rates": [0.001]})";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    write("cfg.json", kConfig);
    ASSERT_EQ(run("gen-data --generator rotation --count 24 --size 16 --seed 3 --out data"), 0);
    ASSERT_EQ(run("train --config cfg.json --data data/pairs.json --out run --quiet"), 0);
  }
};

}  // namespace

TEST_F(Cli, GenDataWritesManifestAndBlob) {
  EXPECT_TRUE(fs::exists(work() / "data/pairs.bin"));
  const auto m = json_of("data/manifest.json");
  EXPECT_EQ(m["command"], "gen-data");
  EXPECT_EQ(m["seed"], 3);
  EXPECT_EQ(fs::file_size(work() / "data/pairs.bin"), 24u * 2 * 16 * 16);
}

TEST_F(Cli, TrainEvalPosePipeline) {
  EXPECT_TRUE(fs::exists(work() / "run/checkpoint.bin"));
  EXPECT_EQ(slurp("run/curve.csv").substr(0, 24), "epoch,lr,loss,psnr,ssim\n");
  ASSERT_EQ(run("eval --checkpoint run/checkpoint.bin --pairs data/pairs.json --out eval"), 0);
  const auto rep = json_of("eval/report.json");
  EXPECT_TRUE(rep["model"].contains("psnr"));
  EXPECT_TRUE(rep["mean_baseline"].contains("ssim"));
  ASSERT_EQ(run("pose --checkpoint run/checkpoint.bin --pairs data/pairs.json --out pose --scores 1"), 0);
  const auto pose = json_of("pose/pose.json");
  EXPECT_TRUE(pose.contains("mean_abs_bin_error"));
  EXPECT_EQ(pose["predictions"].size(), 24u);
  EXPECT_EQ(slurp("pose/scores.csv").substr(0, 17), "u_rotation,score\n");
}

TEST_F(Cli, RenderWritesOneRowPerFactor) {
  ASSERT_EQ(run("render --checkpoint run/checkpoint.bin --pairs data/pairs.json --factor rotation --steps 8 --out render"),
            0);
  const auto ppm = slurp("render/render.ppm");
  EXPECT_EQ(ppm.substr(0, 13), "P6\n128 16\n255");
  EXPECT_EQ(ppm.size(), 14u + 128 * 16 * 3);
}

TEST_F(Cli, OutputsAreRerunnable) {
  ASSERT_EQ(run("train --config cfg.json --data data/pairs.json --out run2 --quiet"), 0);
  EXPECT_EQ(slurp("run/checkpoint.bin"), slurp("run2/checkpoint.bin"));
  EXPECT_EQ(slurp("run/curve.csv"), slurp("run2/curve.csv"));
  ASSERT_EQ(run("render --checkpoint run/checkpoint.bin --pairs data/pairs.json --out r1"), 0);
  ASSERT_EQ(run("render --checkpoint run/checkpoint.bin --pairs data/pairs.json --out r2"), 0);
  EXPECT_EQ(slurp("r1/render.ppm"), slurp("r2/render.ppm"));
  EXPECT_EQ(slurp("r1/manifest.json"), slurp("r2/manifest.json"));
}

TEST_F(Cli, ResumeMatchesLongerRun) {
  write("cfg1.json", std::string(kConfig).replace(std::string(kConfig).find("\"epochs\": 2"), 11, "\"epochs\": 1"));
  ASSERT_EQ(run("train --config cfg1.json --data data/pairs.json --out short --quiet"), 0);
  ASSERT_EQ(run("train --resume short/checkpoint.bin --epochs 2 --data data/pairs.json --out resumed --quiet"), 0);
  EXPECT_EQ(slurp("resumed/checkpoint.bin"), slurp("run/checkpoint.bin"));
}

TEST_F(Cli, SeedEnvironmentOverride) {
  ASSERT_EQ(run("gen-data --generator scene --count 4 --out env", "QTAE_SEED=41"), 0);
  EXPECT_EQ(json_of("env/manifest.json")["seed"], 41);
  ASSERT_EQ(run("gen-data --generator scene --count 4 --seed 7 --out flag", "QTAE_SEED=41"), 0);
  EXPECT_EQ(json_of("flag/manifest.json")["seed"], 7);
  EXPECT_NE(run("gen-data --generator scene --count 4 --out bad", "QTAE_SEED=x1"), 0);
}

TEST_F(Cli, CapacityOfSixFactorScene) {
  write("scene6.json", R"({"factors": [
      {"name": "floorColour", "extent": 10, "periodic": true}, {"name": "wallColour", "extent": 10, "periodic": true},
      {"name": "objectColour", "extent": 10, "periodic": true}, {"name": "scale", "extent": 8},
      {"name": "shape", "extent": 4}, {"name": "orientation", "extent": 15, "periodic": true}],
      "channels": 4, "mode": "product"})");
  ASSERT_EQ(run("capacity --spec scene6.json --out cap"), 0);
  const auto c = json_of("cap/capacity.json");
  EXPECT_EQ(c["product"]["cells"], 1920000);
  EXPECT_EQ(c["additive"]["cells"], 228);
}

TEST_F(Cli, HoldoutReportsBothModelsOnBothSplits) {
  write("scene_cfg.json", R"({"backbone": {"image_channels": 3, "image_height": 16, "image_width": 16,
      "widths": [4, 6, 8], "code_channels": 8}, "channels": 2, "epochs": 1, "batch_size": 8,
      "learning_rates": [0.001]})");
  ASSERT_EQ(run("holdout --config scene_cfg.json --train-count 60 --test-count 4 --seed 2 --out hold"), 0);
  std::istringstream csv(slurp("hold/holdout.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "model,split,psnr,ssim,samples");
  std::size_t rows = 0;
  while (std::getline(csv, line)) rows += !line.empty();
  EXPECT_EQ(rows, 4u);
  EXPECT_TRUE(fs::exists(work() / "hold/qtae.bin"));
  EXPECT_TRUE(fs::exists(work() / "hold/tae.bin"));
  EXPECT_EQ(json_of("hold/manifest.json")["command"], "holdout");
}

TEST_F(Cli, GradcheckReport) {
  ASSERT_EQ(run("gradcheck --instances 2 --out gc"), 0);
  const auto g = json_of("gc/gradcheck.json");
  EXPECT_TRUE(g["passed"].get<bool>());
  EXPECT_NE(slurp("last.out").find("PASS conv2d/zero"), std::string::npos);
}

TEST_F(Cli, ErrorsNameTheProblem) {
  write("typo.json", R"({"epochz": 3})");
  EXPECT_NE(run("train --config typo.json --data data/pairs.json --out x"), 0);
  EXPECT_NE(slurp("last.err").find("'epochz'"), std::string::npos);
  EXPECT_NE(run("train --data data/pairs.json --bogus 1 --out x"), 0);
  EXPECT_NE(slurp("last.err").find("bogus"), std::string::npos);
  EXPECT_NE(run("eval --checkpoint missing.bin --pairs data/pairs.json"), 0);
  EXPECT_NE(run("frobnicate"), 0);
  write("notckpt.bin", "hello world");
  EXPECT_NE(run("eval --checkpoint notckpt.bin --pairs data/pairs.json --out x"), 0);
  EXPECT_NE(slurp("last.err").find("magic"), std::string::npos);
}
