#pragma once

// Training, evaluation and checkpoints for the lattice auto-encoder and the
// continuous-slot baseline.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtae/adam.hpp"
#include "qtae/data.hpp"
#include "qtae/metrics.hpp"
#include "qtae/model.hpp"

namespace qtae {

enum class TrainMode { qtae_product, qtae_additive, tae_baseline };
const char* to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

/// forward: decode(shift(encode(source), u)) against the target.
/// inverse: decode(shift(encode(target), -u)) against the source.
/// The baseline always trains in the inverse form, subtracting u from its slots.
enum class Direction { forward, inverse };
const char* to_string(Direction d);
Direction direction_from_string(const std::string& name);

struct TrainConfig {
  TrainMode mode = TrainMode::qtae_product;
  BackboneConfig backbone;
  /// Lattice channels m.
  std::size_t channels = 8;
  /// Baseline embedding width; 0 uses the product-lattice element count.
  std::size_t tae_width = 0;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::vector<double> learning_rates{1e-5, 1e-4, 1e-3};
  std::uint64_t seed = 0;
  Direction direction = Direction::forward;
  double validation_fraction = 0.1;
  AdamHyper adam;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Rejects unknown keys; missing keys keep their defaults.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  /// Validation metrics after the epoch.
  double psnr = 0.0;
  double ssim = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct SweepEntry {
  double lr = 0.0;
  bool diverged = false;
  std::string failure;
  /// Training objective before the first update.
  double initial_loss = 0.0;
  double val_psnr = 0.0;
  double val_ssim = 0.0;
  std::vector<EpochRecord> curve;
  bool operator==(const SweepEntry&) const = default;
};

struct NamedTensor {
  std::string name;
  Tensor<float> value;
  bool operator==(const NamedTensor&) const = default;
};

struct Checkpoint {
  TrainConfig config;
  FactorSpace space;
  LatticeSpec spec;
  std::vector<NamedTensor> params;
  AdamState<float> adam;
  /// Shuffle generator state (std::mt19937_64 text form).
  std::string rng_state;
  std::size_t epoch = 0;
  double lr = 0.0;
  Tensor<float> mean_image;
  /// Sweep table; the entry for `lr` holds this run's curve so far.
  std::vector<SweepEntry> sweep;
};

bool bit_identical(const Checkpoint& a, const Checkpoint& b);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws FormatError (with byte offset) on bad magic, version or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Lattice used by a config over a factor space.
LatticeSpec lattice_for(const TrainConfig& config, const FactorSpace& space);

/// A trained model rebuilt from a checkpoint.
class TrainedModel {
 public:
  explicit TrainedModel(const Checkpoint& checkpoint);

  bool is_baseline() const { return tae_.has_value(); }
  const LatticeSpec& spec() const { return spec_; }
  const FactorSpace& space() const { return space_; }
  const QtaeModel& qtae() const { return *qtae_; }
  const TaeBaselineModel& tae() const { return *tae_; }
  Shape image_shape() const { return config_.backbone.image_shape(); }

  /// images [N, C, H, W], one offset per image.
  Tensor<float> predict(const Tensor<float>& images, const std::vector<LatticeOffset>& offsets) const;
  Image predict_one(const Image& image, const LatticeOffset& offset) const;
  /// Lattice model: shift matching of the two embeddings. Baseline: slot
  /// difference converted to bins.
  LatticeOffset estimate_pose(const Image& a, const Image& b) const;

 private:
  TrainConfig config_;
  FactorSpace space_;
  LatticeSpec spec_;
  std::optional<QtaeModel> qtae_;
  std::optional<TaeBaselineModel> tae_;
};

/// Continuous slot amounts of a lattice offset (bins times bin width).
std::vector<double> continuous_offset(const FactorSpace& space, const LatticeOffset& u);

using ProgressFn = std::function<void(const EpochRecord&)>;

struct TrainResult {
  /// Checkpoint of the learning rate with the best validation PSNR.
  Checkpoint best;
  std::vector<SweepEntry> sweep;
};

/// Sweeps config.learning_rates; each rate starts from the same initial
/// weights. A rate whose loss or gradient turns non-finite is recorded as
/// diverged and skipped. Throws NumericError if every rate diverges.
TrainResult train(const TrainConfig& config, const PairDataset& dataset, const ProgressFn& progress = {});

/// Continues the checkpoint's run until `total_epochs` epochs are done.
Checkpoint resume(const Checkpoint& checkpoint, const PairDataset& dataset, std::size_t total_epochs,
                  const ProgressFn& progress = {});

/// Indices of the validation split (fixed by seed) and the remaining training indices.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};
Split split_indices(std::size_t count, double fraction, std::uint64_t seed);

/// Mean L1 of the configured objective over the pairs, without updating.
double objective(const Checkpoint& checkpoint, const std::vector<SamplePair>& pairs);

/// Parameter gradients of the objective on one batch (in parameter order).
std::vector<Tensor<float>> batch_gradients(const Checkpoint& checkpoint, const std::vector<SamplePair>& batch);

/// Freshly initialised checkpoint for a config, before any training.
Checkpoint initial_checkpoint(const TrainConfig& config, const PairDataset& dataset);

struct EvalReport {
  MetricReport model;
  /// Training-mean image used as the prediction.
  MetricReport mean_baseline;
};

EvalReport evaluate(const Checkpoint& checkpoint, const std::vector<SamplePair>& pairs);
/// Metrics of arbitrary predictions; used for the pass-through check.
MetricReport score_predictions(const std::vector<Image>& predictions, const std::vector<SamplePair>& pairs);

/// Compositional hold-out: trains the configured lattice model and the
/// baseline (same backbone and budget) on scene pairs that never show the
/// excluded combination, then scores both on pairs whose target shows it and
/// on in-distribution pairs.
struct HoldoutReport {
  MetricReport qtae_holdout;
  MetricReport qtae_in_distribution;
  MetricReport tae_holdout;
  MetricReport tae_in_distribution;
  std::size_t train_pairs = 0;
  Checkpoint qtae;
  Checkpoint tae;
};

HoldoutReport holdout_experiment(const TrainConfig& config, const FactorSpace& space, const Combination& combo,
                                 std::size_t train_count, std::size_t test_count, std::uint64_t seed,
                                 const ProgressFn& progress = {});

struct CapacityReport {
  std::size_t product_cells = 0;
  std::size_t additive_cells = 0;
  std::size_t product_params = 0;
  std::size_t additive_params = 0;
};

CapacityReport report_capacity(const LatticeSpec& spec, const BackboneConfig& config);

/// epoch,lr,loss,psnr,ssim with 6 significant digits.
void write_curve_csv(const std::filesystem::path& path, const std::vector<SweepEntry>& sweep);

/// "%.6g" rounding applied before JSON output.
double round6(double v);

}  // namespace qtae
