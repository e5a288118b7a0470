#pragma once

// CNN decoder that looks at the raster of the strokes drawn so far and emits
// a mixture head in the same layout as the recurrent decoder. The two heads
// are blended before the mixture nonlinearities, then sampled.

#include <cstdint>
#include <functional>
#include <vector>

#include "json.hpp"
#include "strokeforge/checkpoint.hpp"
#include "strokeforge/raster.hpp"
#include "strokeforge/sketch_vae.hpp"

namespace strokeforge {

struct RefinerConfig {
  /// conv_depths[0] is the input channel count (the grayscale raster is
  /// replicated to fill it) and each layer i outputs conv_depths[i] maps.
  std::vector<int> conv_depths{3, 128, 128, 256, 256, 512};
  std::vector<int> conv_strides{1, 2, 1, 2, 2, 2};
  /// Widths of the first two dense layers; the third emits the head.
  std::vector<int> dense_widths{1024, 512};
  int mixtures = 20;
  float blend_alpha = 0.5f;
  int image_size = kRasterSize;

  static RefinerConfig desk();
  void validate() const;
  nlohmann::json to_json() const;
  static RefinerConfig from_json(const nlohmann::json& j);
  /// [channels, height, width] leaving the conv stack.
  Shape conv_output_shape() const;
};

class CnnRefiner : public StepRefiner {
 public:
  CnnRefiner(const RefinerConfig& cfg, std::uint64_t seed);
  CnnRefiner(const CnnRefiner&) = delete;
  CnnRefiner& operator=(const CnnRefiner&) = delete;
  CnnRefiner(CnnRefiner&&) = default;
  CnnRefiner& operator=(CnnRefiner&&) = default;
  static CnnRefiner from_checkpoint(const Checkpoint& ckpt);

  const RefinerConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }

  /// Stacks rasters into [B, conv_depths[0], size, size]. Throws ShapeError on
  /// a raster of the wrong size.
  Tensor image_batch(const std::vector<const RasterImage*>& images) const;
  /// Output of the conv stack, [B, C, H, W].
  Var conv_features(const Var& images) const;
  /// Raw head [B, 6M+3].
  Var forward(const Var& images) const;

  MixtureParams refine(const RasterImage& image) const;
  std::vector<float> head(const RasterImage& image) const override;
  int raster_size() const override { return cfg_.image_size; }

  Checkpoint to_checkpoint(const AdamState* adam, nlohmann::json extra = {}) const;

 private:
  RefinerConfig cfg_;
  ParameterStore params_;
  std::vector<ConvLayer> convs_;
  DenseLayer dense1_, dense2_, dense3_;
  Var skip_;  // projection for the residual path when widths differ

  void bind();
};

/// alpha * rnn + (1 - alpha) * cnn on raw heads.
Var blend_graph(const Var& rnn, const Var& cnn, float alpha);

/// Sampling loop of sample_sketch with the refiner consulted every step.
StrokeSequence refined_sample(const SketchVae& baseline, const CnnRefiner& refiner,
                              std::span<const float> z, double temperature, float alpha, Rng& rng);

// ---------------------------------------------------------------------------

/// Trains the refiner against a frozen baseline on random crops: the prefix
/// is rendered for the CNN, the recurrent state is warmed up by teacher
/// forcing the prefix, and the loss is offset + pen loss over the suffix.
class RefinerTrainer {
 public:
  RefinerTrainer(CnnRefiner& refiner, SketchVae& baseline, const TrainOptions& opts);
  void restore(const Checkpoint& ckpt);

  LossRecord step(const std::vector<StrokeSequence>& train);
  std::vector<LossRecord> run(const std::vector<StrokeSequence>& train,
                              const std::function<void(const LossRecord&)>& on_step = {});
  /// Loss on crops drawn with `crop_seed`; no update.
  LossRecord evaluate(const std::vector<StrokeSequence>& seqs, std::uint64_t crop_seed) const;

  Checkpoint checkpoint() const;
  int steps_done() const { return steps_done_; }

 private:
  struct CropBatch;
  CropBatch prepare(const std::vector<const StrokeSequence*>& seqs, Rng& rng) const;
  struct Losses {
    Var offset, pen, total;
  };
  Losses loss(const CropBatch& batch) const;

  CnnRefiner& refiner_;
  SketchVae& baseline_;
  TrainOptions opts_;
  Adam adam_;
  Rng rng_;
  int steps_done_ = 0;
};

}  // namespace strokeforge
