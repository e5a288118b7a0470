#pragma once

// Three-way raster classifier used as an offline judge: was a sketch drawn by
// the baseline, by the refined pipeline, or by a person?

#include <array>
#include <cstdint>
#include <span>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "strokeforge/checkpoint.hpp"
#include "strokeforge/raster.hpp"

namespace strokeforge {

enum class SketchClass : int { SketchRnn = 0, Refined = 1, Human = 2 };
inline constexpr int kNumClasses = 3;
/// Display names in class order.
inline constexpr std::array<const char*, kNumClasses> kClassNames{"Sketch-RNN", "Our model",
                                                                  "Human-drawn"};
/// Short identifiers used in CSV output and on the command line.
inline constexpr std::array<const char*, kNumClasses> kClassIds{"sketch-rnn", "refiner", "human"};

struct DiscriminatorConfig {
  std::vector<int> kernels{64, 64, 128, 128, 256, 256};
  std::vector<int> strides{1, 2, 1, 2, 1, 2};
  std::vector<int> dense_widths{512, 128};
  int input_channels = 1;
  int image_size = kRasterSize;

  static DiscriminatorConfig desk();
  void validate() const;
  nlohmann::json to_json() const;
  static DiscriminatorConfig from_json(const nlohmann::json& j);
};

struct LabeledImage {
  RasterImage image;
  int label = 0;
};

class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);
  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;
  Discriminator(Discriminator&&) = default;
  Discriminator& operator=(Discriminator&&) = default;
  static Discriminator from_checkpoint(const Checkpoint& ckpt);

  const DiscriminatorConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  Tensor image_batch(const std::vector<const RasterImage*>& images) const;
  /// Activations of the last hidden dense layer, [B, dense_widths[1]].
  Var penultimate(const Var& images) const;
  /// Class logits [B, 3].
  Var logits(const Var& images) const;

  std::array<float, kNumClasses> classify(const RasterImage& image) const;
  /// Argmax of classify(); ties go to the lowest class index.
  int predict(const RasterImage& image) const;
  std::vector<float> features(const RasterImage& image) const;

  Checkpoint to_checkpoint(const AdamState* adam, nlohmann::json extra = {}) const;

 private:
  DiscriminatorConfig cfg_;
  ParameterStore params_;
  std::vector<ConvLayer> convs_;
  DenseLayer dense1_, dense2_, out_;

  void bind();
};

int argmax_lowest(std::span<const float> v);

struct DiscTrainOptions {
  int epochs = 10;
  int batch_size = 16;
  float lr = 1e-3f;
  std::uint64_t seed = 1;
};

struct DiscEpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  std::array<double, kNumClasses> val_class_accuracy{};
};

/// Cross-entropy training with Adam. Each class needs at least 3 training
/// examples (DataError otherwise).
std::vector<DiscEpochRecord> train_discriminator(
    Discriminator& model, const std::vector<LabeledImage>& train,
    const std::vector<LabeledImage>& validation, const DiscTrainOptions& opts,
    const std::function<void(const DiscEpochRecord&)>& on_epoch = {});

// ---------------------------------------------------------------------------

/// Row = true class, column = predicted class, row-normalized percentages.
struct ConfusionMatrix {
  std::array<std::array<double, kNumClasses>, kNumClasses> percent{};
  std::array<int, kNumClasses> row_counts{};

  bool has_row(int cls) const { return row_counts[static_cast<std::size_t>(cls)] > 0; }
  /// Share of class `cls` predicted as human-drawn, in percent.
  std::optional<double> mislead_rate(int cls) const;
  double accuracy(int cls) const { return percent[static_cast<std::size_t>(cls)][static_cast<std::size_t>(cls)]; }

  std::string to_csv() const;
  /// Aligned text layout with one decimal and a percent sign per cell.
  std::string to_table() const;
};

ConfusionMatrix confusion_from_predictions(const std::vector<std::pair<int, int>>& truth_pred);
ConfusionMatrix confusion(const Discriminator& model, const std::vector<LabeledImage>& data);

/// Reads "true,pred" lines (class ids or indices), skipping a header line.
std::vector<std::pair<int, int>> read_predictions_csv(const std::string& text);
int parse_class(const std::string& token);

}  // namespace strokeforge
