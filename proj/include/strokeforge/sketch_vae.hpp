#pragma once

// Sequence-to-sequence VAE over stroke-5 sketches: bidirectional LSTM
// encoder, latent reparameterization, LSTM decoder with a mixture head.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "strokeforge/checkpoint.hpp"
#include "strokeforge/mixture.hpp"
#include "strokeforge/optim.hpp"
#include "strokeforge/raster.hpp"
#include "strokeforge/stroke.hpp"

namespace strokeforge {

struct VaeConfig {
  int mixtures = 20;
  int latent = 32;
  int enc_hidden = 64;
  int dec_hidden = 128;
  int max_seq_len = kDefaultMaxSeqLen;
  float kl_weight = 1.0f;

  static VaeConfig full_scale();
  void validate() const;
  nlohmann::json to_json() const;
  static VaeConfig from_json(const nlohmann::json& j);
};

struct LatentCode {
  std::vector<float> mu;
  std::vector<float> sigma;
  std::vector<float> eps;  // noise used for z = mu + sigma * eps
  std::vector<float> z;
};

/// Teacher-forcing tensors for a batch padded to max_seq_len.
struct SequenceBatch {
  int batch = 0;
  int length = 0;
  std::vector<Tensor> encoder_inputs;  // [B,5] per step: the padded sequence
  std::vector<Tensor> decoder_inputs;  // [B,5] per step: start token, then targets shifted by one
  std::vector<Tensor> target_dx;       // [B,1]
  std::vector<Tensor> target_dy;       // [B,1]
  std::vector<Tensor> target_pen;      // [B,3] one-hot
  std::vector<Tensor> offset_mask;     // [B,1]: 1 up to and including each row's stop index
};

SequenceBatch make_batch(const std::vector<const StrokeSequence*>& seqs, int length);

struct LossBreakdown {
  double offset = 0.0;  // L_S
  double pen = 0.0;     // L_P
  double kl = 0.0;      // L_KL
  int stop = 0;         // S_stop (largest in the batch)
  int max_len = 0;      // S_max

  double reconstruction() const { return offset + pen; }
  double total(double kl_weight) const { return offset + pen + kl_weight * kl; }
};

/// Supplies a CNN head for the raster of everything drawn so far.
class StepRefiner {
 public:
  virtual ~StepRefiner() = default;
  virtual std::vector<float> head(const RasterImage& image) const = 0;
  virtual int raster_size() const = 0;
};

struct SampleOptions {
  double temperature = 1.0;
  const StepRefiner* refiner = nullptr;
  float alpha = 1.0f;
  double offset_scale = 1.0;
};

class SketchVae {
 public:
  SketchVae(const VaeConfig& cfg, std::uint64_t seed);
  SketchVae(const SketchVae&) = delete;
  SketchVae& operator=(const SketchVae&) = delete;
  SketchVae(SketchVae&&) = default;
  SketchVae& operator=(SketchVae&&) = default;
  static SketchVae from_checkpoint(const Checkpoint& ckpt);

  const VaeConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  double offset_scale() const { return offset_scale_; }
  void set_offset_scale(double s) { offset_scale_ = s; }

  struct EncoderOutput {
    Var mu;
    Var logvar;
  };
  EncoderOutput encode_graph(const std::vector<Tensor>& steps) const;
  static Var reparameterize(const Var& mu, const Var& logvar, const Tensor& eps);
  LstmState initial_state(const Var& z) const;
  /// One recurrent step: returns the raw head [B, 6M+3] and the next state.
  std::pair<Var, LstmState> decode_step(const Var& prev, const Var& z, const LstmState& s) const;

  /// Encodes one sequence (padded/truncated to max_seq_len) and samples z
  /// with noise from `rng`. Throws DataError on an empty sequence.
  LatentCode encode(const StrokeSequence& seq, Rng& rng) const;
  LatentCode encode_with_noise(const StrokeSequence& seq, std::span<const float> eps) const;

  /// Mixture outputs of a teacher-forced pass over `targets`, one per step
  /// up to max_seq_len.
  std::vector<MixtureParams> teacher_forced(const StrokeSequence& targets,
                                            std::span<const float> z) const;

  /// Graph loss over a batch. `eps` is [B,Z] reparameterization noise.
  struct GraphLoss {
    Var offset, pen, kl, total;
    Var mu;
  };
  GraphLoss batch_loss(const SequenceBatch& batch, const Tensor& eps) const;

  Checkpoint to_checkpoint(const AdamState* adam, nlohmann::json extra = {}) const;

 private:
  VaeConfig cfg_;
  ParameterStore params_;
  LstmLayer enc_fwd_, enc_bwd_;
  DenseLayer mu_head_, logvar_head_, init_head_, out_head_;
  LstmLayer dec_;
  double offset_scale_ = 1.0;

  void bind();
};

/// Autoregressive sampling from (0,0,1,0,0) until SketchEnd or max_seq_len.
/// With a refiner, each step rasterizes the points drawn so far, blends the
/// refiner head with the recurrent head and samples from the blend.
StrokeSequence sample_sketch(const SketchVae& model, std::span<const float> z, Rng& rng,
                             const SampleOptions& opts = {});

std::vector<float> sample_prior(int latent, Rng& rng);

/// Scalar losses of one sequence under teacher forcing with a given latent.
LossBreakdown sequence_loss(const SketchVae& model, const StrokeSequence& seq,
                            const LatentCode& latent);

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
  int steps = 500;
  int batch_size = 8;
  float lr = 1e-3f;
  std::uint64_t seed = 1;
};

struct LossRecord {
  int step = 0;
  double offset = 0.0;
  double pen = 0.0;
  double kl = 0.0;
  double total = 0.0;
};

/// CSV header and rows: step,L_S,L_P,L_KL,total
std::string loss_csv_header();
std::string loss_csv_row(const LossRecord& r);

class BaselineTrainer {
 public:
  BaselineTrainer(SketchVae& model, const TrainOptions& opts);
  /// Resumes optimizer state and step counter from a checkpoint.
  void restore(const Checkpoint& ckpt);

  LossRecord step(const std::vector<StrokeSequence>& train);
  std::vector<LossRecord> run(const std::vector<StrokeSequence>& train,
                              const std::function<void(const LossRecord&)>& on_step = {});

  /// Loss of a fixed batch with fixed noise, no parameter update.
  LossRecord evaluate(const std::vector<StrokeSequence>& seqs, std::uint64_t noise_seed) const;

  Checkpoint checkpoint() const;
  int steps_done() const { return steps_done_; }

 private:
  SketchVae& model_;
  TrainOptions opts_;
  Adam adam_;
  Rng rng_;
  int steps_done_ = 0;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;

  std::vector<const StrokeSequence*> next_batch(const std::vector<StrokeSequence>& train);
};

}  // namespace strokeforge
