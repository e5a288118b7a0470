#include "strokeforge/sketch_vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace strokeforge {

using nlohmann::json;

VaeConfig VaeConfig::full_scale() {
  VaeConfig c;
  c.latent = 128;
  c.enc_hidden = 256;
  c.dec_hidden = 512;
  return c;
}

void VaeConfig::validate() const {
  if (mixtures < 1) throw DataError("mixtures must be >= 1");
  if (latent < 1) throw DataError("latent size must be >= 1");
  if (enc_hidden < 1 || dec_hidden < 1) throw DataError("hidden sizes must be >= 1");
  if (max_seq_len < 2) throw DataError("max_seq_len must be >= 2");
  if (!(kl_weight >= 0.0f)) throw DataError("kl_weight must be >= 0");
}

json VaeConfig::to_json() const {
  return {{"mixtures", mixtures},     {"latent", latent},
          {"enc_hidden", enc_hidden}, {"dec_hidden", dec_hidden},
          {"max_seq_len", max_seq_len}, {"kl_weight", kl_weight}};
}

VaeConfig VaeConfig::from_json(const json& j) {
  VaeConfig c;
  c.mixtures = j.at("mixtures").get<int>();
  c.latent = j.at("latent").get<int>();
  c.enc_hidden = j.at("enc_hidden").get<int>();
  c.dec_hidden = j.at("dec_hidden").get<int>();
  c.max_seq_len = j.at("max_seq_len").get<int>();
  c.kl_weight = j.at("kl_weight").get<float>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

namespace {

void write_point(Tensor& t, int row, const Stroke5Point& p) {
  const auto a = p.as_array();
  for (int k = 0; k < 5; ++k) t.at(row, k) = a[static_cast<std::size_t>(k)];
}

Var sum_list(const std::vector<Var>& terms) {
  Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = acc + terms[i];
  return acc;
}

Tensor row_tensor(std::span<const float> v) {
  return Tensor({1, static_cast<int>(v.size())}, std::vector<float>(v.begin(), v.end()));
}

}  // namespace

SequenceBatch make_batch(const std::vector<const StrokeSequence*>& seqs, int length) {
  SequenceBatch b;
  b.batch = static_cast<int>(seqs.size());
  b.length = length;
  if (seqs.empty()) throw DataError("empty batch");
  for (int t = 0; t < length; ++t) {
    b.encoder_inputs.emplace_back(Shape{b.batch, 5});
    b.decoder_inputs.emplace_back(Shape{b.batch, 5});
    b.target_dx.emplace_back(Shape{b.batch, 1});
    b.target_dy.emplace_back(Shape{b.batch, 1});
    b.target_pen.emplace_back(Shape{b.batch, 3});
    b.offset_mask.emplace_back(Shape{b.batch, 1});
  }
  for (int row = 0; row < b.batch; ++row) {
    const StrokeSequence& seq = *seqs[static_cast<std::size_t>(row)];
    const auto padded = padded_points(seq, length);
    int stop = seq.stop_index();
    if (stop == 0 || stop > length) stop = length;
    for (int t = 0; t < length; ++t) {
      const auto& p = padded[static_cast<std::size_t>(t)];
      const auto ut = static_cast<std::size_t>(t);
      write_point(b.encoder_inputs[ut], row, p);
      write_point(b.decoder_inputs[ut], row, t == 0 ? kStartToken : padded[ut - 1]);
      b.target_dx[ut].at(row, 0) = p.dx;
      b.target_dy[ut].at(row, 0) = p.dy;
      b.target_pen[ut].at(row, static_cast<int>(p.pen)) = 1.0f;
      b.offset_mask[ut].at(row, 0) = t < stop ? 1.0f : 0.0f;
    }
  }
  return b;
}

// ---------------------------------------------------------------------------

SketchVae::SketchVae(const VaeConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  LstmLayer::create(params_, "enc_fwd", 5, cfg_.enc_hidden, rng);
  LstmLayer::create(params_, "enc_bwd", 5, cfg_.enc_hidden, rng);
  DenseLayer::create(params_, "mu", 2 * cfg_.enc_hidden, cfg_.latent, rng);
  DenseLayer::create(params_, "logvar", 2 * cfg_.enc_hidden, cfg_.latent, rng);
  DenseLayer::create(params_, "dec_init", cfg_.latent, 2 * cfg_.dec_hidden, rng);
  LstmLayer::create(params_, "dec", 5 + cfg_.latent, cfg_.dec_hidden, rng);
  DenseLayer::create(params_, "dec_head", cfg_.dec_hidden, head_size(cfg_.mixtures), rng);
  bind();
}

void SketchVae::bind() {
  enc_fwd_ = LstmLayer::bind(params_, "enc_fwd");
  enc_bwd_ = LstmLayer::bind(params_, "enc_bwd");
  mu_head_ = DenseLayer::bind(params_, "mu");
  logvar_head_ = DenseLayer::bind(params_, "logvar");
  init_head_ = DenseLayer::bind(params_, "dec_init");
  dec_ = LstmLayer::bind(params_, "dec");
  out_head_ = DenseLayer::bind(params_, "dec_head");
}

SketchVae SketchVae::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "baseline") {
    throw DataError("checkpoint is not a baseline model (kind=" + ckpt.meta.value("kind", "?") + ")");
  }
  SketchVae model(VaeConfig::from_json(ckpt.meta.at("vae")), 0);
  restore_parameters(ckpt, model.params_);
  model.offset_scale_ = ckpt.meta.value("offset_scale", 1.0);
  return model;
}

Checkpoint SketchVae::to_checkpoint(const AdamState* adam, json extra) const {
  json meta = extra.is_object() ? extra : json::object();
  meta["kind"] = "baseline";
  meta["vae"] = cfg_.to_json();
  meta["offset_scale"] = offset_scale_;
  return make_checkpoint(params_, adam, meta);
}

SketchVae::EncoderOutput SketchVae::encode_graph(const std::vector<Tensor>& steps) const {
  if (steps.empty()) throw DataError("encode: empty sequence");
  const int batch = steps.front().dim(0);
  LstmState fwd = enc_fwd_.zero_state(batch);
  for (const auto& x : steps) fwd = enc_fwd_(constant(x), fwd);
  LstmState bwd = enc_bwd_.zero_state(batch);
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) bwd = enc_bwd_(constant(*it), bwd);
  Var hidden = concat_cols({fwd.h, bwd.h});
  return {mu_head_(hidden), logvar_head_(hidden)};
}

Var SketchVae::reparameterize(const Var& mu, const Var& logvar, const Tensor& eps) {
  return mu + exp(scale(logvar, 0.5f)) * constant(eps);
}

LstmState SketchVae::initial_state(const Var& z) const {
  Var hc = tanh(init_head_(z));
  return {slice_cols(hc, 0, cfg_.dec_hidden), slice_cols(hc, cfg_.dec_hidden, cfg_.dec_hidden)};
}

std::pair<Var, LstmState> SketchVae::decode_step(const Var& prev, const Var& z,
                                                 const LstmState& s) const {
  LstmState next = dec_(concat_cols({prev, z}), s);
  return {out_head_(next.h), next};
}

LatentCode SketchVae::encode_with_noise(const StrokeSequence& seq, std::span<const float> eps) const {
  if (seq.empty()) throw DataError("encode: empty sequence");
  if (static_cast<int>(eps.size()) != cfg_.latent) throw ShapeError("encode: noise size mismatch");
  NoGradGuard guard;
  const SequenceBatch batch = make_batch({&seq}, cfg_.max_seq_len);
  const EncoderOutput out = encode_graph(batch.encoder_inputs);
  LatentCode code;
  code.mu.assign(out.mu.value().data().begin(), out.mu.value().data().end());
  code.eps.assign(eps.begin(), eps.end());
  for (std::size_t i = 0; i < code.mu.size(); ++i) {
    const float sigma = std::exp(0.5f * out.logvar.value()[i]);
    code.sigma.push_back(sigma);
    code.z.push_back(code.mu[i] + sigma * code.eps[i]);
  }
  return code;
}

LatentCode SketchVae::encode(const StrokeSequence& seq, Rng& rng) const {
  if (seq.empty()) throw DataError("encode: empty sequence");
  return encode_with_noise(seq, sample_prior(cfg_.latent, rng));
}

std::vector<MixtureParams> SketchVae::teacher_forced(const StrokeSequence& targets,
                                                     std::span<const float> z) const {
  NoGradGuard guard;
  const Var zv = constant(row_tensor(z));
  LstmState state = initial_state(zv);
  const auto padded = padded_points(targets, cfg_.max_seq_len);
  std::vector<MixtureParams> out;
  Stroke5Point prev = kStartToken;
  for (int t = 0; t < cfg_.max_seq_len; ++t) {
    Tensor x({1, 5});
    write_point(x, 0, prev);
    auto [head, next] = decode_step(constant(std::move(x)), zv, state);
    state = next;
    out.push_back(parameterize(head.value().data(), cfg_.mixtures));
    prev = padded[static_cast<std::size_t>(t)];
  }
  return out;
}

SketchVae::GraphLoss SketchVae::batch_loss(const SequenceBatch& batch, const Tensor& eps) const {
  const EncoderOutput enc = encode_graph(batch.encoder_inputs);
  const Var z = reparameterize(enc.mu, enc.logvar, eps);
  LstmState state = initial_state(z);
  std::vector<Var> offset_terms, pen_terms;
  for (int t = 0; t < batch.length; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    auto [head, next] = decode_step(constant(batch.decoder_inputs[ut]), z, state);
    state = next;
    Var nll = mixture_nll(head, batch.target_dx[ut], batch.target_dy[ut], cfg_.mixtures);
    offset_terms.push_back(sum_all(nll * constant(batch.offset_mask[ut])));
    pen_terms.push_back(sum_all(pen_cross_entropy(head, batch.target_pen[ut], cfg_.mixtures)));
  }
  const float norm = 1.0f / static_cast<float>(batch.length * batch.batch);
  GraphLoss loss;
  loss.offset = scale(sum_list(offset_terms), norm);
  loss.pen = scale(sum_list(pen_terms), norm);
  loss.kl = kl_divergence(enc.mu, enc.logvar);
  loss.total = loss.offset + loss.pen;
  if (cfg_.kl_weight != 0.0f) loss.total = loss.total + scale(loss.kl, cfg_.kl_weight);
  loss.mu = enc.mu;
  return loss;
}

// ---------------------------------------------------------------------------

std::vector<float> sample_prior(int latent, Rng& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> z(static_cast<std::size_t>(latent));
  for (auto& v : z) v = normal(rng);
  return z;
}

StrokeSequence sample_sketch(const SketchVae& model, std::span<const float> z, Rng& rng,
                             const SampleOptions& opts) {
  const VaeConfig& cfg = model.config();
  if (static_cast<int>(z.size()) != cfg.latent) throw ShapeError("sample_sketch: latent size mismatch");
  if (!(opts.temperature > 0.0)) throw Error("sample_sketch: temperature must be positive");
  NoGradGuard guard;
  const Var zv = constant(row_tensor(z));
  LstmState state = model.initial_state(zv);
  std::optional<IncrementalRaster> raster;
  if (opts.refiner) raster.emplace(opts.offset_scale, opts.refiner->raster_size());

  StrokeSequence out;
  out.source_id = "sample";
  Stroke5Point prev = kStartToken;
  for (int t = 0; t < cfg.max_seq_len; ++t) {
    Tensor x({1, 5});
    write_point(x, 0, prev);
    auto [head, next] = model.decode_step(constant(std::move(x)), zv, state);
    state = next;
    MixtureParams params;
    if (opts.refiner) {
      const std::vector<float> cnn = opts.refiner->head(raster->image());
      params = blend(head.value().data(), cnn, opts.alpha, cfg.mixtures);
    } else {
      params = parameterize(head.value().data(), cfg.mixtures);
    }
    Stroke5Point p = sample_point(params, opts.temperature, rng);
    if (t + 1 == cfg.max_seq_len) p.pen = Pen::SketchEnd;
    out.points.push_back(p);
    if (p.pen == Pen::SketchEnd) break;
    if (raster) raster->push(p);
    prev = p;
  }
  return out;
}

LossBreakdown sequence_loss(const SketchVae& model, const StrokeSequence& seq,
                            const LatentCode& latent) {
  const auto steps = model.teacher_forced(seq, latent.z);
  const int s_max = model.config().max_seq_len;
  LossBreakdown b;
  b.offset = loss_offsets(steps, seq, s_max);
  b.pen = loss_pen(steps, seq, s_max);
  b.kl = loss_kl(latent.mu, latent.sigma);
  b.stop = seq.stop_index();
  b.max_len = s_max;
  return b;
}

// ---------------------------------------------------------------------------

std::string loss_csv_header() { return "step,L_S,L_P,L_KL,total"; }

std::string loss_csv_row(const LossRecord& r) {
  std::ostringstream os;
  os.precision(9);
  os << r.step << ',' << r.offset << ',' << r.pen << ',' << r.kl << ',' << r.total;
  return os.str();
}

BaselineTrainer::BaselineTrainer(SketchVae& model, const TrainOptions& opts)
    : model_(model), opts_(opts), adam_(AdamConfig{opts.lr}), rng_(opts.seed) {
  if (opts.steps < 0 || opts.batch_size < 1) throw DataError("invalid training options");
  if (!(opts.lr >= 0.0f)) throw DataError("learning rate must be >= 0");
}

void BaselineTrainer::restore(const Checkpoint& ckpt) {
  restore_parameters(ckpt, model_.params());
  restore_adam(ckpt, adam_.state());
  steps_done_ = ckpt.meta.value("step", 0);
  rng_.seed(opts_.seed + static_cast<std::uint64_t>(steps_done_));
}

std::vector<const StrokeSequence*> BaselineTrainer::next_batch(
    const std::vector<StrokeSequence>& train) {
  if (order_.size() != train.size()) {
    order_.resize(train.size());
    std::iota(order_.begin(), order_.end(), 0);
    cursor_ = order_.size();
  }
  std::vector<const StrokeSequence*> batch;
  const int n = std::min<int>(opts_.batch_size, static_cast<int>(train.size()));
  for (int i = 0; i < n; ++i) {
    if (cursor_ >= order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    batch.push_back(&train[order_[cursor_++]]);
  }
  return batch;
}

LossRecord BaselineTrainer::step(const std::vector<StrokeSequence>& train) {
  if (train.empty()) throw DataError("training set is empty");
  const auto seqs = next_batch(train);
  const SequenceBatch batch = make_batch(seqs, model_.config().max_seq_len);
  Tensor eps({batch.batch, model_.config().latent});
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (float& v : eps.data()) v = normal(rng_);

  LossRecord rec;
  rec.step = steps_done_;
  try {
    model_.params().zero_grad();
    const auto loss = model_.batch_loss(batch, eps);
    backward(loss.total);
    adam_.step(model_.params());
    rec.offset = loss.offset.value().item();
    rec.pen = loss.pen.value().item();
    rec.kl = loss.kl.value().item();
    rec.total = loss.total.value().item();
  } catch (const NonFiniteError& e) {
    throw NonFiniteError("training diverged at step " + std::to_string(steps_done_) + ": " + e.what());
  }
  ++steps_done_;
  return rec;
}

std::vector<LossRecord> BaselineTrainer::run(const std::vector<StrokeSequence>& train,
                                             const std::function<void(const LossRecord&)>& on_step) {
  std::vector<LossRecord> log;
  for (int i = 0; i < opts_.steps; ++i) {
    log.push_back(step(train));
    if (on_step) on_step(log.back());
  }
  return log;
}

LossRecord BaselineTrainer::evaluate(const std::vector<StrokeSequence>& seqs,
                                     std::uint64_t noise_seed) const {
  std::vector<const StrokeSequence*> ptrs;
  for (const auto& s : seqs) ptrs.push_back(&s);
  const SequenceBatch batch = make_batch(ptrs, model_.config().max_seq_len);
  Rng rng(noise_seed);
  Tensor eps({batch.batch, model_.config().latent});
  std::normal_distribution<float> normal(0.0f, 1.0f);
  for (float& v : eps.data()) v = normal(rng);
  NoGradGuard guard;
  const auto loss = model_.batch_loss(batch, eps);
  return {steps_done_, loss.offset.value().item(), loss.pen.value().item(),
          loss.kl.value().item(), loss.total.value().item()};
}

Checkpoint BaselineTrainer::checkpoint() const {
  return model_.to_checkpoint(&adam_.state(), {{"step", steps_done_}});
}

}  // namespace strokeforge
