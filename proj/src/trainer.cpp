#include "qtae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "qtae/pose.hpp"

namespace qtae {

using nlohmann::json;

const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::qtae_product: return "qtae-product";
    case TrainMode::qtae_additive: return "qtae-additive";
    default: return "tae-baseline";
  }
}

TrainMode train_mode_from_string(const std::string& name) {
  if (name == "qtae-product") return TrainMode::qtae_product;
  if (name == "qtae-additive") return TrainMode::qtae_additive;
  if (name == "tae-baseline") return TrainMode::tae_baseline;
  throw ContractError("unknown training mode '" + name + "'");
}

const char* to_string(Direction d) { return d == Direction::forward ? "forward" : "inverse"; }

Direction direction_from_string(const std::string& name) {
  if (name == "forward") return Direction::forward;
  if (name == "inverse") return Direction::inverse;
  throw ContractError("unknown objective direction '" + name + "'");
}

void TrainConfig::validate() const {
  backbone.validate();
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(!learning_rates.empty(), "learning_rates must be non-empty");
  for (double lr : learning_rates) require(lr > 0.0 && std::isfinite(lr), "learning rates must be positive");
  require(channels >= 1, "channels must be >= 1");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0, "validation_fraction must be in [0, 1)");
}

void to_json(json& j, const TrainConfig& c) {
  j = {{"mode", to_string(c.mode)},
       {"backbone", c.backbone},
       {"channels", c.channels},
       {"tae_width", c.tae_width},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rates", c.learning_rates},
       {"seed", c.seed},
       {"direction", to_string(c.direction)},
       {"validation_fraction", c.validation_fraction},
       {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}}};
}

void from_json(const json& j, TrainConfig& c) {
  static const std::vector<std::string> keys{"mode",  "backbone",   "channels",  "tae_width",
                                             "epochs", "batch_size", "learning_rates", "seed",
                                             "direction", "validation_fraction", "adam"};
  require(j.is_object(), "training config must be a JSON object");
  for (const auto& [key, value] : j.items())
    require(std::find(keys.begin(), keys.end(), key) != keys.end(), "unknown config key '" + key + "'");
  c = TrainConfig{};
  if (j.contains("mode")) c.mode = train_mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("backbone")) c.backbone = j.at("backbone").get<BackboneConfig>();
  c.channels = j.value("channels", c.channels);
  c.tae_width = j.value("tae_width", c.tae_width);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rates = j.value("learning_rates", c.learning_rates);
  c.seed = j.value("seed", c.seed);
  if (j.contains("direction")) c.direction = direction_from_string(j.at("direction").get<std::string>());
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    require(a.is_object(), "adam must be a JSON object");
    for (const auto& [key, value] : a.items())
      require(key == "beta1" || key == "beta2" || key == "epsilon", "unknown config key 'adam." + key + "'");
    c.adam.beta1 = a.value("beta1", c.adam.beta1);
    c.adam.beta2 = a.value("beta2", c.adam.beta2);
    c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
  }
  c.validate();
}

LatticeSpec lattice_for(const TrainConfig& config, const FactorSpace& space) {
  const auto mode = config.mode == TrainMode::qtae_additive ? LatticeMode::additive : LatticeMode::product;
  return space.lattice(config.channels, mode);
}

std::vector<double> continuous_offset(const FactorSpace& space, const LatticeOffset& u) {
  const auto tf = space.transform_factors();
  require(u.size() == tf.size(), "offset arity does not match the transform factors");
  std::vector<double> out;
  for (std::size_t k = 0; k < tf.size(); ++k) out.push_back(offset_amount(u[k], space.factors[tf[k]]));
  return out;
}

double round6(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::strtod(buf, nullptr);
}

namespace {

std::size_t tae_width(const TrainConfig& c, const LatticeSpec& spec) {
  return c.tae_width ? c.tae_width : LatticeSpec::element_count(spec.factors, spec.channels, LatticeMode::product);
}

Tensor<float> stack(const std::vector<const SamplePair*>& batch, bool target) {
  const auto& s = (target ? batch.front()->target : batch.front()->source).shape();
  Shape shape{batch.size()};
  shape.insert(shape.end(), s.begin(), s.end());
  Tensor<float> out(shape);
  const std::size_t per = shape_numel(s);
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const auto& img = target ? batch[n]->target : batch[n]->source;
    require(img.shape() == s, "batch images must share a shape");
    std::copy(img.ptr(), img.ptr() + per, out.ptr() + n * per);
  }
  return out;
}

LatticeOffset raw_negate(const LatticeOffset& u) {
  LatticeOffset out = u;
  for (auto& c : out.components) c = -c;
  return out;
}

void load_params(Backbone<float>& backbone, const std::vector<NamedTensor>& params) {
  auto& own = backbone.params();
  require(own.size() == params.size(), "checkpoint has " + std::to_string(params.size()) + " parameters, model needs " +
                                           std::to_string(own.size()));
  for (std::size_t i = 0; i < own.size(); ++i) {
    require(own[i].name == params[i].name, "checkpoint parameter '" + params[i].name + "' does not match '" +
                                               own[i].name + "'");
    require(own[i].var.shape() == params[i].value.shape(), "checkpoint parameter '" + params[i].name +
                                                                "' has shape " + shape_str(params[i].value.shape()));
    own[i].var.mutable_value() = params[i].value;
  }
}

std::vector<NamedTensor> store_params(const Backbone<float>& backbone) {
  std::vector<NamedTensor> out;
  for (const auto& p : backbone.params()) out.push_back({p.name, p.var.value()});
  return out;
}

// Mutable model state for one training run.
class Runner {
 public:
  explicit Runner(const Checkpoint& c) : cfg_(c.config), space_(c.space), spec_(c.spec) {
    if (cfg_.mode == TrainMode::tae_baseline)
      tae_.emplace(cfg_.backbone, space_.transform_factors().size(), tae_width(cfg_, spec_), 0);
    else
      qtae_.emplace(cfg_.backbone, spec_, 0);
    if (!c.params.empty()) load_params(backbone(), c.params);
  }

  Backbone<float>& backbone() { return qtae_ ? qtae_->backbone() : tae_->backbone(); }

  Var<float> loss(const std::vector<const SamplePair*>& batch) {
    std::vector<LatticeOffset> u;
    for (const auto* p : batch) u.push_back(p->offset);
    if (tae_) {
      std::vector<std::vector<double>> amounts;
      for (const auto& o : u) {
        auto a = continuous_offset(space_, o);
        for (auto& v : a) v = -v;
        amounts.push_back(std::move(a));
      }
      const auto& bb = tae_->backbone();
      Var<float> code = bb.encode(Var<float>(stack(batch, true)));
      Var<float> pred = bb.decode(ag::add_constant(code, tae_->slot_offsets(amounts, batch.size())));
      return ag::l1_loss(pred, stack(batch, false));
    }
    const bool fwd = cfg_.direction == Direction::forward;
    if (!fwd)
      for (auto& o : u) o = raw_negate(o);
    Var<float> code = qtae_->backbone().encode(Var<float>(stack(batch, !fwd)));
    return ag::l1_loss(qtae_->shifted_decode(code, u), stack(batch, fwd));
  }

  Tensor<float> predict(const Tensor<float>& images, const std::vector<LatticeOffset>& offsets) const {
    if (qtae_) return qtae_->predict_batch(images, offsets);
    std::vector<std::vector<double>> amounts;
    for (const auto& o : offsets) amounts.push_back(continuous_offset(space_, o));
    return tae_->predict_batch(images, amounts);
  }

 private:
  TrainConfig cfg_;
  FactorSpace space_;
  LatticeSpec spec_;
  std::optional<QtaeModel> qtae_;
  std::optional<TaeBaselineModel> tae_;
};

constexpr std::size_t kEvalChunk = 64;

template <typename Predict>
MetricReport score_with(const std::vector<SamplePair>& pairs, const std::vector<std::size_t>& idx, Predict predict) {
  MetricReport r;
  double ps = 0.0, ss = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += kEvalChunk) {
    std::vector<const SamplePair*> chunk;
    for (std::size_t i = start; i < std::min(idx.size(), start + kEvalChunk); ++i) chunk.push_back(&pairs[idx[i]]);
    std::vector<LatticeOffset> u;
    for (const auto* p : chunk) u.push_back(p->offset);
    const Tensor<float> pred = predict(stack(chunk, false), u);
    const auto& shape = chunk.front()->target.shape();
    const std::size_t per = shape_numel(shape);
    for (std::size_t n = 0; n < chunk.size(); ++n) {
      Image img(shape, std::vector<float>(pred.ptr() + n * per, pred.ptr() + (n + 1) * per));
      ps += psnr(img, chunk[n]->target);
      ss += ssim(img, chunk[n]->target);
    }
  }
  r.samples = idx.size();
  if (r.samples) {
    r.psnr = ps / static_cast<double>(r.samples);
    r.ssim = ss / static_cast<double>(r.samples);
  }
  return r;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

// Fisher-Yates with raw generator output so the order does not depend on the
// standard library's distribution implementation.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 rng_from_text(const std::string& text) {
  std::mt19937_64 rng;
  std::istringstream is(text);
  is >> rng;
  require(!is.fail(), "checkpoint RNG state is unreadable");
  return rng;
}

double mean_objective(Runner& runner, const std::vector<SamplePair>& pairs, const std::vector<std::size_t>& idx,
                      std::size_t batch) {
  double total = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += batch) {
    std::vector<const SamplePair*> b;
    for (std::size_t i = start; i < std::min(idx.size(), start + batch); ++i) b.push_back(&pairs[idx[i]]);
    const double l = runner.loss(b).value()[0];
    if (!std::isfinite(l)) throw NumericError("non-finite objective");
    total += l * static_cast<double>(b.size());
  }
  return idx.empty() ? 0.0 : total / static_cast<double>(idx.size());
}

SweepEntry& entry_for(Checkpoint& c) {
  for (auto& e : c.sweep)
    if (e.lr == c.lr) return e;
  c.sweep.push_back({});
  c.sweep.back().lr = c.lr;
  return c.sweep.back();
}

void check_dataset(const TrainConfig& config, const PairDataset& ds) {
  require(!ds.pairs.empty(), "training needs a non-empty dataset");
  require(ds.pairs.front().source.shape() == config.backbone.image_shape(),
          "dataset images " + shape_str(ds.pairs.front().source.shape()) + " do not match the backbone input " +
              shape_str(config.backbone.image_shape()));
  require(!ds.space.transform_factors().empty() || config.mode != TrainMode::tae_baseline,
          "the baseline needs at least one transformation factor");
}

// Trains c in place from c.epoch up to `total` epochs at rate c.lr.
void run_epochs(Checkpoint& c, const PairDataset& ds, std::size_t total, const ProgressFn& progress) {
  const Split split = split_indices(ds.pairs.size(), c.config.validation_fraction, c.config.seed);
  const auto& val = split.validation.empty() ? split.train : split.validation;
  Runner runner(c);
  auto params = runner.backbone().param_vars();
  auto rng = rng_from_text(c.rng_state);
  c.adam.hyper.lr = c.lr;
  SweepEntry& entry = entry_for(c);
  for (std::size_t epoch = c.epoch; epoch < total; ++epoch) {
    auto order = split.train;
    shuffle(order, rng);
    double total_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += c.config.batch_size) {
      std::vector<const SamplePair*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + c.config.batch_size); ++i)
        batch.push_back(&ds.pairs[order[i]]);
      Var<float> loss = runner.loss(batch);
      const double l = loss.value()[0];
      if (!std::isfinite(l)) throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1));
      backward(loss);
      adam_step(params, c.adam);
      runner.backbone().zero_grad();
      total_loss += l * static_cast<double>(batch.size());
    }
    const auto metrics = score_with(ds.pairs, val, [&](const Tensor<float>& x, const std::vector<LatticeOffset>& u) {
      return runner.predict(x, u);
    });
    EpochRecord rec{epoch + 1, c.lr, total_loss / static_cast<double>(order.size()), metrics.psnr, metrics.ssim};
    entry.curve.push_back(rec);
    entry.val_psnr = metrics.psnr;
    entry.val_ssim = metrics.ssim;
    c.epoch = epoch + 1;
    if (progress) progress(rec);
  }
  c.params = store_params(runner.backbone());
  c.rng_state = rng_text(rng);
}

}  // namespace

Split split_indices(std::size_t count, double fraction, std::uint64_t seed) {
  auto order = iota(count);
  std::mt19937_64 rng(derive_seed(seed, 0x5137));
  shuffle(order, rng);
  std::size_t nval = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(count)));
  if (count < 2) nval = 0;
  nval = std::min(nval, count - 1);
  Split s;
  s.validation.assign(order.begin(), order.begin() + static_cast<long>(nval));
  s.train.assign(order.begin() + static_cast<long>(nval), order.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

Checkpoint initial_checkpoint(const TrainConfig& config, const PairDataset& ds) {
  config.validate();
  check_dataset(config, ds);
  Checkpoint c;
  c.config = config;
  c.space = ds.space;
  c.spec = lattice_for(config, ds.space);
  const std::uint64_t init_seed = derive_seed(config.seed, 0x1417);
  if (config.mode == TrainMode::tae_baseline) {
    TaeBaselineModel m(config.backbone, ds.space.transform_factors().size(), tae_width(config, c.spec), init_seed);
    c.params = store_params(m.backbone());
    c.adam = AdamState<float>(m.backbone().param_vars(), config.adam);
  } else {
    QtaeModel m(config.backbone, c.spec, init_seed);
    c.params = store_params(m.backbone());
    c.adam = AdamState<float>(m.backbone().param_vars(), config.adam);
  }
  c.rng_state = rng_text(std::mt19937_64(derive_seed(config.seed, 0x5eed)));
  c.lr = config.learning_rates.front();
  c.adam.hyper.lr = c.lr;

  const Split split = split_indices(ds.pairs.size(), config.validation_fraction, config.seed);
  c.mean_image = Tensor<float>(config.backbone.image_shape());
  std::vector<double> acc(c.mean_image.numel(), 0.0);
  for (auto i : split.train)
    for (const Image* img : {&ds.pairs[i].source, &ds.pairs[i].target})
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += (*img)[k];
  for (std::size_t k = 0; k < acc.size(); ++k)
    c.mean_image[k] = static_cast<float>(acc[k] / (2.0 * static_cast<double>(split.train.size())));
  return c;
}

TrainResult train(const TrainConfig& config, const PairDataset& ds, const ProgressFn& progress) {
  const Checkpoint init = initial_checkpoint(config, ds);
  const Split split = split_indices(ds.pairs.size(), config.validation_fraction, config.seed);
  TrainResult result;
  std::optional<Checkpoint> best;
  for (double lr : config.learning_rates) {
    Checkpoint c = init;
    c.lr = lr;
    c.sweep.clear();
    SweepEntry entry;
    entry.lr = lr;
    try {
      Runner runner(c);
      entry.initial_loss = mean_objective(runner, ds.pairs, split.train, config.batch_size);
      c.sweep.push_back(entry);
      run_epochs(c, ds, config.epochs, progress);
      entry = c.sweep.back();
      if (!std::isfinite(entry.val_psnr)) throw NumericError("non-finite validation PSNR");
    } catch (const NumericError& e) {
      if (!c.sweep.empty()) entry = c.sweep.back();
      entry.diverged = true;
      entry.failure = e.what();
      entry.val_psnr = 0.0;
      entry.val_ssim = 0.0;
    }
    result.sweep.push_back(entry);
    if (!entry.diverged && (!best || entry.val_psnr > best->sweep.back().val_psnr)) best = c;
  }
  if (!best) throw NumericError("training diverged at every learning rate");
  result.best = *best;
  result.best.sweep = result.sweep;
  return result;
}

Checkpoint resume(const Checkpoint& checkpoint, const PairDataset& ds, std::size_t total_epochs,
                  const ProgressFn& progress) {
  check_dataset(checkpoint.config, ds);
  require(ds.space == checkpoint.space, "resume: dataset factor space differs from the checkpoint's");
  require(total_epochs >= checkpoint.epoch, "resume: checkpoint is already past the requested epoch");
  Checkpoint c = checkpoint;
  c.config.epochs = total_epochs;
  run_epochs(c, ds, total_epochs, progress);
  return c;
}

double objective(const Checkpoint& checkpoint, const std::vector<SamplePair>& pairs) {
  Runner runner(checkpoint);
  return mean_objective(runner, pairs, iota(pairs.size()), checkpoint.config.batch_size);
}

std::vector<Tensor<float>> batch_gradients(const Checkpoint& checkpoint, const std::vector<SamplePair>& batch) {
  require(!batch.empty(), "batch_gradients: empty batch");
  Runner runner(checkpoint);
  std::vector<const SamplePair*> ptrs;
  for (const auto& p : batch) ptrs.push_back(&p);
  backward(runner.loss(ptrs));
  std::vector<Tensor<float>> grads;
  for (const auto& p : runner.backbone().params())
    grads.push_back(p.var.has_grad() ? p.var.grad() : Tensor<float>(p.var.shape()));
  return grads;
}

// ---- trained models -------------------------------------------------------------

TrainedModel::TrainedModel(const Checkpoint& c) : config_(c.config), space_(c.space), spec_(c.spec) {
  if (config_.mode == TrainMode::tae_baseline) {
    tae_.emplace(config_.backbone, space_.transform_factors().size(), tae_width(config_, spec_), 0);
    load_params(tae_->backbone(), c.params);
  } else {
    qtae_.emplace(config_.backbone, spec_, 0);
    load_params(qtae_->backbone(), c.params);
  }
}

Tensor<float> TrainedModel::predict(const Tensor<float>& images, const std::vector<LatticeOffset>& offsets) const {
  if (qtae_) return qtae_->predict_batch(images, offsets);
  std::vector<std::vector<double>> amounts;
  for (const auto& o : offsets) amounts.push_back(continuous_offset(space_, o));
  return tae_->predict_batch(images, amounts);
}

Image TrainedModel::predict_one(const Image& image, const LatticeOffset& offset) const {
  require(image.shape() == image_shape(), "predict: image " + shape_str(image.shape()) + " does not match the model input " +
                                              shape_str(image_shape()));
  Shape s{1};
  s.insert(s.end(), image.shape().begin(), image.shape().end());
  return predict(image.reshaped(s), {offset}).reshaped(image_shape());
}

LatticeOffset TrainedModel::estimate_pose(const Image& a, const Image& b) const {
  if (qtae_) return estimate_offset(qtae_->encode(a), qtae_->encode(b)).best;
  const auto ya = tae_->encode(a), yb = tae_->encode(b);
  const auto tf = space_.transform_factors();
  LatticeOffset u = LatticeOffset::zeros(tf.size());
  for (std::size_t k = 0; k < tf.size(); ++k) {
    const auto& f = space_.factors[tf[k]];
    const auto d = static_cast<std::int64_t>(f.extent);
    const auto bins = static_cast<std::int64_t>(std::llround((static_cast<double>(yb[k]) - ya[k]) / bin_width(f)));
    u.components[k] = f.periodic ? wrap_signed(bins, f.extent) : std::clamp<std::int64_t>(bins, -(d - 1), d - 1);
  }
  return u;
}

// ---- evaluation -------------------------------------------------------------

MetricReport score_predictions(const std::vector<Image>& predictions, const std::vector<SamplePair>& pairs) {
  require(predictions.size() == pairs.size(), "score_predictions: one prediction per pair required");
  MetricReport r;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    r.psnr += psnr(predictions[i], pairs[i].target);
    r.ssim += ssim(predictions[i], pairs[i].target);
  }
  r.samples = pairs.size();
  if (r.samples) {
    r.psnr /= static_cast<double>(r.samples);
    r.ssim /= static_cast<double>(r.samples);
  }
  return r;
}

EvalReport evaluate(const Checkpoint& checkpoint, const std::vector<SamplePair>& pairs) {
  require(!pairs.empty(), "evaluate: no pairs");
  const TrainedModel model(checkpoint);
  EvalReport r;
  r.model = score_with(pairs, iota(pairs.size()), [&](const Tensor<float>& x, const std::vector<LatticeOffset>& u) {
    return model.predict(x, u);
  });
  r.mean_baseline = score_predictions(std::vector<Image>(pairs.size(), checkpoint.mean_image), pairs);
  return r;
}

HoldoutReport holdout_experiment(const TrainConfig& config, const FactorSpace& space, const Combination& combo,
                                 std::size_t train_count, std::size_t test_count, std::uint64_t seed,
                                 const ProgressFn& progress) {
  require(test_count >= 1, "holdout: test_count must be >= 1");
  require(!combo.empty(), "holdout: empty combination");
  for (const auto& fv : combo)
    require(fv.index < space.factors[space.index(fv.factor)].extent,
            "holdout: index out of range for '" + fv.factor + "'");
  const std::size_t size = config.backbone.image_height;
  PairDataset train_set = generate_dataset("scene", space, seed, train_count, size);
  std::erase_if(train_set.pairs, [&](const SamplePair& p) {
    return hits(space, p.source_indices, combo) || hits(space, p.target_indices, combo);
  });
  require(!train_set.pairs.empty(), "holdout: no training pairs avoid the excluded combination");

  // Fresh pairs for both test sets; the held-out one keeps drawing until full.
  std::vector<SamplePair> held, in_dist;
  for (std::uint64_t round = 1; held.size() < test_count || in_dist.size() < test_count; ++round) {
    require(round <= 1000, "holdout: could not draw enough test pairs");
    const auto extra = generate_dataset("scene", space, derive_seed(seed, round), 4 * test_count, size);
    for (const auto& p : extra.pairs) {
      const bool src = hits(space, p.source_indices, combo), tgt = hits(space, p.target_indices, combo);
      if (tgt && held.size() < test_count) held.push_back(p);
      if (!src && !tgt && in_dist.size() < test_count) in_dist.push_back(p);
    }
  }

  HoldoutReport r;
  r.train_pairs = train_set.pairs.size();
  r.qtae = train(config, train_set, progress).best;
  // The baseline's code is as wide as the embedding it is compared with.
  auto baseline = config;
  baseline.mode = TrainMode::tae_baseline;
  if (baseline.tae_width == 0) baseline.tae_width = lattice_for(config, space).element_count();
  r.tae = train(baseline, train_set, progress).best;
  r.qtae_holdout = evaluate(r.qtae, held).model;
  r.qtae_in_distribution = evaluate(r.qtae, in_dist).model;
  r.tae_holdout = evaluate(r.tae, held).model;
  r.tae_in_distribution = evaluate(r.tae, in_dist).model;
  return r;
}

CapacityReport report_capacity(const LatticeSpec& spec, const BackboneConfig& config) {
  spec.validate();
  CapacityReport r;
  r.product_cells = LatticeSpec::element_count(spec.factors, spec.channels, LatticeMode::product);
  r.additive_cells = LatticeSpec::element_count(spec.factors, spec.channels, LatticeMode::additive);
  r.product_params = parameter_count(config, r.product_cells);
  r.additive_params = parameter_count(config, r.additive_cells);
  return r;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<SweepEntry>& sweep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,lr,loss,psnr,ssim\n";
  char buf[128];
  for (const auto& e : sweep)
    for (const auto& r : e.curve) {
      std::snprintf(buf, sizeof buf, "%zu,%.6g,%.6g,%.6g,%.6g\n", r.epoch, r.lr, r.loss, r.psnr, r.ssim);
      out << buf;
    }
}

}  // namespace qtae
