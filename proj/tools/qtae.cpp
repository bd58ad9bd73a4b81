// qtae: data generation, training, evaluation, rendering, pose estimation,
// hold-out experiments, gradient checks and capacity reports.
//
// Every command writes its artifacts and a manifest.json under --out.
// Seeds: --seed beats the QTAE_SEED environment variable, which beats the
// config file and built-in defaults.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qtae/data.hpp"
#include "qtae/gradcheck.hpp"
#include "qtae/pose.hpp"
#include "qtae/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qtae;

namespace {

struct Common {
  std::string out = ".";
  std::optional<std::uint64_t> seed;
};

std::uint64_t resolve_seed(const Common& c, std::uint64_t fallback) {
  if (c.seed) return *c.seed;
  if (const char* env = std::getenv("QTAE_SEED")) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw ContractError(std::string("QTAE_SEED is not an unsigned integer: '") + env + "'");
  }
  return fallback;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

// Floats rounded to 6 significant digits so reruns are byte-identical.
json rounded(const json& j) {
  if (j.is_number_float()) return round6(j.get<double>());
  if (j.is_array() || j.is_object()) {
    json out = j;
    for (auto& v : out) v = rounded(v);
    return out;
  }
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << rounded(j).dump(2) << "\n";
}

void write_manifest(const Common& c, const std::string& command, std::uint64_t seed, const json& inputs,
                    const json& config, const std::vector<std::string>& outputs) {
  write_json(fs::path(c.out) / "manifest.json", {{"command", command},
                                                 {"seed", seed},
                                                 {"inputs", inputs},
                                                 {"config", config},
                                                 {"outputs", outputs}});
}

fs::path prepare_out(const Common& c) {
  fs::create_directories(c.out);
  return fs::path(c.out);
}

json metrics_json(const MetricReport& r) { return {{"psnr", r.psnr}, {"ssim", r.ssim}, {"samples", r.samples}}; }

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
  app->add_option("--seed", c.seed, "Seed (overrides QTAE_SEED)");
}

// ---- gen-data ---------------------------------------------------------------

struct GenData {
  Common common;
  std::string generator;
  std::size_t count = 1000;
  std::optional<std::size_t> extent;
  std::string space_path;
  std::string idx_path;
  std::size_t size = 32;
  std::string name = "pairs";
};

int run_gen_data(const GenData& g) {
  const auto out = prepare_out(g.common);
  const auto seed = resolve_seed(g.common, 0);
  FactorSpace space;
  if (!g.space_path.empty())
    space = read_json(g.space_path).get<FactorSpace>();
  else if (g.generator == "rotation")
    space = rotation_space(g.extent.value_or(8));
  else if (g.generator == "scene")
    space = default_scene_space();
  else
    space = default_affine_space(g.extent.value_or(7));

  PairDataset ds;
  if (g.generator == "idx") {
    if (g.idx_path.empty()) throw ContractError("--idx is required for the idx generator");
    ds = generate_dataset_from_images(load_idx(g.idx_path), space, seed, g.count, g.size);
  } else {
    ds = generate_dataset(g.generator == "scene" ? "scene" : "affine", space, seed, g.count, g.size);
  }
  const auto manifest = out / (g.name + ".json");
  save_dataset(ds, manifest);
  write_manifest(g.common, "gen-data", seed,
                 {{"generator", g.generator}, {"count", g.count}, {"size", g.size}, {"idx", g.idx_path},
                  {"space_file", g.space_path}},
                 {{"space", space}}, {manifest.filename().string(), g.name + ".bin"});
  std::cout << "wrote " << ds.pairs.size() << " pairs to " << manifest.string() << "\n";
  return 0;
}

// ---- train --------------------------------------------------------------------

struct TrainCmd {
  Common common;
  std::string config_path;
  std::string data_path;
  std::optional<std::size_t> epochs;
  std::vector<double> lrs;
  std::string resume_path;
  bool quiet = false;
};

TrainConfig load_config(const std::string& path, const PairDataset* ds) {
  TrainConfig c;
  json j = path.empty() ? json::object() : read_json(path);
  c = j.get<TrainConfig>();
  if (ds && !j.contains("backbone") && !ds->pairs.empty()) {
    const auto& shape = ds->pairs.front().source.shape();
    c.backbone.image_channels = shape[0];
    c.backbone.image_height = shape[1];
    c.backbone.image_width = shape[2];
  }
  return c;
}

int run_train(const TrainCmd& t) {
  const auto out = prepare_out(t.common);
  const auto ds = load_dataset(t.data_path);
  const ProgressFn progress = [&](const EpochRecord& r) {
    if (!t.quiet)
      std::cout << "lr " << fmt6(r.lr) << " epoch " << r.epoch << " loss " << fmt6(r.loss) << " val_psnr "
                << fmt6(r.psnr) << " val_ssim " << fmt6(r.ssim) << std::endl;
  };
  Checkpoint best;
  std::uint64_t seed = 0;
  if (!t.resume_path.empty()) {
    const auto start = load_checkpoint(t.resume_path);
    seed = start.config.seed;
    best = resume(start, ds, t.epochs.value_or(start.config.epochs), progress);
  } else {
    auto config = load_config(t.config_path, &ds);
    config.seed = resolve_seed(t.common, config.seed);
    if (t.epochs) config.epochs = *t.epochs;
    if (!t.lrs.empty()) config.learning_rates = t.lrs;
    config.validate();
    seed = config.seed;
    best = train(config, ds, progress).best;
  }
  save_checkpoint(best, out / "checkpoint.bin");
  write_curve_csv(out / "curve.csv", best.sweep);
  json sweep = json::array();
  for (const auto& e : best.sweep)
    sweep.push_back({{"lr", e.lr},
                     {"diverged", e.diverged},
                     {"failure", e.failure},
                     {"initial_loss", e.initial_loss},
                     {"val_psnr", e.val_psnr},
                     {"val_ssim", e.val_ssim},
                     {"epochs", e.curve.size()}});
  write_json(out / "sweep.json", {{"best_lr", best.lr}, {"sweep", sweep}});
  write_manifest(t.common, "train", seed, {{"data", t.data_path}, {"config_file", t.config_path}, {"resume", t.resume_path}},
                 best.config, {"checkpoint.bin", "curve.csv", "sweep.json"});
  std::cout << "best lr " << fmt6(best.lr) << " after " << best.epoch << " epochs\n";
  return 0;
}

// ---- eval ------------------------------------------------------------------------

struct EvalCmd {
  Common common;
  std::string checkpoint;
  std::string pairs;
};

int run_eval(const EvalCmd& e) {
  const auto out = prepare_out(e.common);
  const auto ckpt = load_checkpoint(e.checkpoint);
  const auto ds = load_dataset(e.pairs);
  const auto r = evaluate(ckpt, ds.pairs);
  write_json(out / "report.json", {{"model", metrics_json(r.model)}, {"mean_baseline", metrics_json(r.mean_baseline)}});
  std::ofstream csv(out / "report.csv");
  csv << "predictor,psnr,ssim,samples\n";
  csv << "model," << fmt6(r.model.psnr) << "," << fmt6(r.model.ssim) << "," << r.model.samples << "\n";
  csv << "mean_baseline," << fmt6(r.mean_baseline.psnr) << "," << fmt6(r.mean_baseline.ssim) << ","
      << r.mean_baseline.samples << "\n";
  write_manifest(e.common, "eval", ckpt.config.seed, {{"checkpoint", e.checkpoint}, {"pairs", e.pairs}}, ckpt.config,
                 {"report.json", "report.csv"});
  std::cout << "psnr " << fmt6(r.model.psnr) << " ssim " << fmt6(r.model.ssim) << " (mean image: psnr "
            << fmt6(r.mean_baseline.psnr) << " ssim " << fmt6(r.mean_baseline.ssim) << ")\n";
  return 0;
}

// ---- render -------------------------------------------------------------------

struct RenderCmd {
  Common common;
  std::string checkpoint;
  std::string input;
  std::string pairs;
  std::size_t index = 0;
  std::vector<std::string> factors;
  std::optional<std::size_t> steps;
};

// Periodic factors sweep 0..steps-1; aperiodic ones sweep offsets centred on 0.
std::vector<std::int64_t> sweep_offsets(const LatticeFactor& f, std::size_t steps) {
  std::vector<std::int64_t> out;
  const auto n = static_cast<std::int64_t>(steps);
  const std::int64_t first = f.periodic ? 0 : -(n - 1) / 2;
  for (std::int64_t k = 0; k < n; ++k) out.push_back(first + k);
  return out;
}

int run_render(const RenderCmd& r) {
  const auto out = prepare_out(r.common);
  const auto ckpt = load_checkpoint(r.checkpoint);
  const TrainedModel model(ckpt);
  Image input;
  if (!r.input.empty()) {
    input = read_ppm(r.input, model.image_shape()[0]);
  } else if (!r.pairs.empty()) {
    const auto ds = load_dataset(r.pairs);
    if (r.index >= ds.pairs.size()) throw ContractError("--index is past the end of the pair set");
    input = ds.pairs[r.index].source;
  } else {
    throw ContractError("render needs --input or --pairs");
  }
  if (input.shape() != model.image_shape())
    throw ContractError("input image " + shape_str(input.shape()) + " does not match the model input " +
                        shape_str(model.image_shape()));
  const auto& spec = model.spec();
  std::vector<std::size_t> rows;
  if (r.factors.empty())
    for (std::size_t i = 0; i < spec.factor_count(); ++i) rows.push_back(i);
  else
    for (const auto& name : r.factors) rows.push_back(spec.factor_index(name));
  if (rows.empty()) throw ContractError("the model has no transformation factors to sweep");

  std::size_t cols = r.steps.value_or(0);
  if (!cols)
    for (auto i : rows) cols = std::max(cols, spec.factors[i].extent);
  std::vector<Image> frames;
  json offsets = json::array();
  for (auto i : rows) {
    json row = json::array();
    for (auto k : sweep_offsets(spec.factors[i], cols)) {
      auto u = LatticeOffset::zeros(spec.factor_count());
      u.components[i] = k;
      frames.push_back(model.predict_one(input, u));
      row.push_back(k);
    }
    offsets.push_back({{"factor", spec.factors[i].name}, {"offsets", row}});
  }
  write_ppm(out / "render.ppm", tile_grid(frames, rows.size(), cols));
  write_json(out / "render.json", {{"rows", offsets}, {"frame_shape", model.image_shape()}});
  write_manifest(r.common, "render", ckpt.config.seed,
                 {{"checkpoint", r.checkpoint}, {"input", r.input}, {"pairs", r.pairs}, {"index", r.index},
                  {"steps", cols}},
                 ckpt.config, {"render.ppm", "render.json"});
  std::cout << "rendered " << rows.size() << " x " << cols << " grid\n";
  return 0;
}

// ---- pose ------------------------------------------------------------------------

struct PoseCmd {
  Common common;
  std::string checkpoint;
  std::string pairs;
  std::optional<std::size_t> scores;
};

int run_pose(const PoseCmd& p) {
  const auto out = prepare_out(p.common);
  const auto ckpt = load_checkpoint(p.checkpoint);
  const TrainedModel model(ckpt);
  const auto ds = load_dataset(p.pairs);
  if (ds.pairs.empty()) throw ContractError("pose: the pair set is empty");
  const auto& spec = model.spec();
  std::vector<double> per_factor(spec.factor_count(), 0.0);
  std::size_t exact = 0;
  json predictions = json::array();
  for (const auto& pair : ds.pairs) {
    const auto est = model.estimate_pose(pair.source, pair.target);
    const auto err = bin_error(est, pair.offset, spec);
    bool all = true;
    for (std::size_t i = 0; i < err.size(); ++i) {
      per_factor[i] += static_cast<double>(err[i]);
      all = all && err[i] == 0;
    }
    exact += all;
    predictions.push_back({{"estimate", est.components}, {"truth", pair.offset.components}});
  }
  const double n = static_cast<double>(ds.pairs.size());
  json factor_err = json::object();
  double total = 0.0;
  for (std::size_t i = 0; i < per_factor.size(); ++i) {
    factor_err[spec.factors[i].name] = per_factor[i] / n;
    total += per_factor[i];
  }
  const double mean_err = per_factor.empty() ? 0.0 : total / (n * static_cast<double>(per_factor.size()));
  std::vector<std::string> outputs{"pose.json"};
  if (p.scores) {
    if (model.is_baseline()) throw ContractError("--scores needs a lattice model");
    if (*p.scores >= ds.pairs.size()) throw ContractError("--scores is past the end of the pair set");
    const auto& pair = ds.pairs[*p.scores];
    write_score_csv(out / "scores.csv",
                    estimate_offset(model.qtae().encode(pair.source), model.qtae().encode(pair.target)), spec);
    outputs.push_back("scores.csv");
  }
  write_json(out / "pose.json", {{"pairs", ds.pairs.size()},
                                 {"exact_fraction", static_cast<double>(exact) / n},
                                 {"mean_abs_bin_error", mean_err},
                                 {"mean_abs_bin_error_per_factor", factor_err},
                                 {"predictions", predictions}});
  write_manifest(p.common, "pose", ckpt.config.seed, {{"checkpoint", p.checkpoint}, {"pairs", p.pairs}}, ckpt.config,
                 outputs);
  std::cout << "exact " << fmt6(static_cast<double>(exact) / n) << " mean abs bin error " << fmt6(mean_err) << "\n";
  return 0;
}

// ---- holdout -----------------------------------------------------------------------

struct HoldoutCmd {
  Common common;
  std::string config_path;
  std::string space_path;
  std::string exclude = "objectColour=blue,shape=sphere";
  std::size_t train_count = 2000;
  std::size_t test_count = 200;
  std::optional<std::size_t> epochs;
};

FactorSpace default_holdout_space() {
  FactorSpace s;
  s.factors = {scene_factor("floorColour", 10), scene_factor("wallColour", 10), scene_factor("objectColour", 10),
               scene_factor("shape", 4), scene_factor("scale", 4)};
  return s;
}

int run_holdout(const HoldoutCmd& h) {
  const auto out = prepare_out(h.common);
  const FactorSpace space = h.space_path.empty() ? default_holdout_space() : read_json(h.space_path).get<FactorSpace>();
  TrainConfig config = load_config(h.config_path, nullptr);
  json j = h.config_path.empty() ? json::object() : read_json(h.config_path);
  if (!j.contains("backbone")) config.backbone.image_channels = 3;
  if (!j.contains("mode")) config.mode = TrainMode::qtae_additive;
  if (!j.contains("channels")) config.channels = 4;
  if (!j.contains("epochs")) config.epochs = 60;
  if (!j.contains("learning_rates")) config.learning_rates = {1e-3};
  if (h.epochs) config.epochs = *h.epochs;
  config.seed = resolve_seed(h.common, config.seed);
  config.validate();
  const auto combo = parse_combination(space, h.exclude);
  const auto r = holdout_experiment(config, space, combo, h.train_count, h.test_count, config.seed);
  std::ofstream csv(out / "holdout.csv");
  csv << "model,split,psnr,ssim,samples\n";
  auto row = [&](const char* model, const char* split, const MetricReport& m) {
    csv << model << "," << split << "," << fmt6(m.psnr) << "," << fmt6(m.ssim) << "," << m.samples << "\n";
  };
  row(to_string(config.mode), "holdout", r.qtae_holdout);
  row(to_string(config.mode), "in_distribution", r.qtae_in_distribution);
  row("tae-baseline", "holdout", r.tae_holdout);
  row("tae-baseline", "in_distribution", r.tae_in_distribution);
  csv.close();
  json combo_json = json::object();
  for (const auto& fv : combo) combo_json[fv.factor] = fv.index;
  save_checkpoint(r.qtae, out / "qtae.bin");
  save_checkpoint(r.tae, out / "tae.bin");
  write_manifest(h.common, "holdout", config.seed,
                 {{"exclude", combo_json}, {"train_count", h.train_count}, {"test_count", h.test_count},
                  {"train_pairs", r.train_pairs}, {"space", space}},
                 config, {"holdout.csv", "qtae.bin", "tae.bin"});
  std::cout << "holdout psnr: " << to_string(config.mode) << " " << fmt6(r.qtae_holdout.psnr) << " (in-distribution "
            << fmt6(r.qtae_in_distribution.psnr) << "), tae-baseline " << fmt6(r.tae_holdout.psnr) << "\n";
  return 0;
}

// ---- gradcheck ------------------------------------------------------------------------

struct GradcheckCmd {
  Common common;
  std::size_t instances = 20;
};

int run_gradcheck(const GradcheckCmd& g) {
  const auto out = prepare_out(g.common);
  const auto seed = resolve_seed(g.common, 0);
  const auto suite = gradcheck_suite(g.instances, seed);
  json checks = json::array();
  bool ok = true;
  for (const auto& s : suite) {
    checks.push_back({{"name", s.name},
                      {"instances", s.instances},
                      {"max_rel_error", s.max_rel_error},
                      {"tolerance", s.tolerance},
                      {"passed", s.passed()}});
    ok = ok && s.passed();
    std::cout << (s.passed() ? "PASS " : "FAIL ") << s.name << " max_rel_error " << fmt6(s.max_rel_error) << " (< "
              << fmt6(s.tolerance) << ", " << s.instances << " instances)\n";
  }
  write_json(out / "gradcheck.json", {{"passed", ok}, {"checks", checks}});
  write_manifest(g.common, "gradcheck", seed, {{"instances", g.instances}}, json::object(), {"gradcheck.json"});
  return ok ? 0 : 1;
}

// ---- capacity -------------------------------------------------------------------------

struct CapacityCmd {
  Common common;
  std::string spec_path;
  std::size_t channels = 4;
  std::string config_path;
};

int run_capacity(const CapacityCmd& c) {
  const auto out = prepare_out(c.common);
  const json j = read_json(c.spec_path);
  LatticeSpec spec;
  if (j.is_array()) {
    spec = j.get<FactorSpace>().lattice(c.channels, LatticeMode::product);
  } else {
    spec = j.get<LatticeSpec>();
  }
  const auto config = load_config(c.config_path, nullptr);
  const auto r = report_capacity(spec, config.backbone);
  const json report = {{"product", {{"cells", r.product_cells}, {"params", r.product_params}}},
                       {"additive", {{"cells", r.additive_cells}, {"params", r.additive_params}}},
                       {"channels", spec.channels},
                       {"extents", [&] {
                          json e = json::array();
                          for (const auto& f : spec.factors) e.push_back(f.extent);
                          return e;
                        }()}};
  write_json(out / "capacity.json", report);
  write_manifest(c.common, "capacity", resolve_seed(c.common, 0), {{"spec", c.spec_path}}, {{"lattice", spec}},
                 {"capacity.json"});
  std::cout << "product cells " << r.product_cells << " params " << r.product_params << "\n"
            << "additive cells " << r.additive_cells << " params " << r.additive_params << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantised transforming auto-encoder toolkit"};
  app.require_subcommand(1);

  GenData gen;
  auto* g = app.add_subcommand("gen-data", "Generate a paired-transformation dataset");
  add_common(g, gen.common);
  g->add_option("--generator", gen.generator, "affine, rotation, scene or idx")
      ->required()
      ->check(CLI::IsMember({"affine", "rotation", "scene", "idx"}));
  g->add_option("--count", gen.count, "Number of pairs")->capture_default_str();
  g->add_option("--extent", gen.extent, "Bins per factor (affine, rotation)");
  g->add_option("--space", gen.space_path, "Factor space JSON")->check(CLI::ExistingFile);
  g->add_option("--idx", gen.idx_path, "IDX image file (idx generator)")->check(CLI::ExistingFile);
  g->add_option("--size", gen.size, "Canvas size")->capture_default_str();
  g->add_option("--name", gen.name, "Manifest stem")->capture_default_str();

  TrainCmd tr;
  auto* t = app.add_subcommand("train", "Train a model (sweeping learning rates)");
  add_common(t, tr.common);
  t->add_option("--config", tr.config_path, "Training config JSON")->check(CLI::ExistingFile);
  t->add_option("--data", tr.data_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
  t->add_option("--epochs", tr.epochs, "Epoch budget (overrides the config)");
  t->add_option("--lr", tr.lrs, "Learning rates (override the config)");
  t->add_option("--resume", tr.resume_path, "Continue a checkpoint")->check(CLI::ExistingFile);
  t->add_flag("--quiet", tr.quiet, "No per-epoch progress");

  EvalCmd ev;
  auto* e = app.add_subcommand("eval", "PSNR/SSIM of a checkpoint on a pair set");
  add_common(e, ev.common);
  e->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  e->add_option("--pairs", ev.pairs, "Dataset manifest")->required()->check(CLI::ExistingFile);

  RenderCmd rc;
  auto* r = app.add_subcommand("render", "Sweep each factor from one input image");
  add_common(r, rc.common);
  r->add_option("--checkpoint", rc.checkpoint)->required()->check(CLI::ExistingFile);
  r->add_option("--input", rc.input, "PPM/PGM image")->check(CLI::ExistingFile);
  r->add_option("--pairs", rc.pairs, "Dataset manifest (uses the source of --index)")->check(CLI::ExistingFile);
  r->add_option("--index", rc.index, "Pair index with --pairs")->capture_default_str();
  r->add_option("--factor", rc.factors, "Factor to sweep (repeatable; default all)");
  r->add_option("--steps", rc.steps, "Frames per row (default: largest extent)");

  PoseCmd pc;
  auto* p = app.add_subcommand("pose", "Relative pose between source and target of each pair");
  add_common(p, pc.common);
  p->add_option("--checkpoint", pc.checkpoint)->required()->check(CLI::ExistingFile);
  p->add_option("--pairs", pc.pairs, "Dataset manifest")->required()->check(CLI::ExistingFile);
  p->add_option("--scores", pc.scores, "Write the score map of this pair to scores.csv");

  HoldoutCmd hc;
  auto* h = app.add_subcommand("holdout", "Compositional hold-out: lattice model vs. baseline");
  add_common(h, hc.common);
  h->add_option("--config", hc.config_path, "Training config JSON")->check(CLI::ExistingFile);
  h->add_option("--space", hc.space_path, "Scene factor space JSON")->check(CLI::ExistingFile);
  h->add_option("--exclude", hc.exclude, "Excluded combination, e.g. objectColour=blue,shape=sphere")
      ->capture_default_str();
  h->add_option("--train-count", hc.train_count)->capture_default_str();
  h->add_option("--test-count", hc.test_count)->capture_default_str();
  h->add_option("--epochs", hc.epochs, "Epoch budget (overrides the config)");

  GradcheckCmd gc;
  auto* k = app.add_subcommand("gradcheck", "Finite-difference checks of every op and the stacks");
  add_common(k, gc.common);
  k->add_option("--instances", gc.instances, "Random instances per check")->capture_default_str();

  CapacityCmd cc;
  auto* c = app.add_subcommand("capacity", "Embedding cells and parameters, product vs. additive");
  add_common(c, cc.common);
  c->add_option("--spec", cc.spec_path, "Lattice spec or factor space JSON")->required()->check(CLI::ExistingFile);
  c->add_option("--channels", cc.channels, "Channels m when --spec is a factor space")->capture_default_str();
  c->add_option("--config", cc.config_path, "Training config JSON (backbone)")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return run_gen_data(gen);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*r) return run_render(rc);
    if (*p) return run_pose(pc);
    if (*h) return run_holdout(hc);
    if (*k) return run_gradcheck(gc);
    if (*c) return run_capacity(cc);
  } catch (const std::exception& ex) {
    std::cerr << "qtae: error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}
