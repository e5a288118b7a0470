#include "strokeforge/refiner.hpp"

#include <algorithm>
#include <numeric>

namespace strokeforge {

using nlohmann::json;

RefinerConfig RefinerConfig::desk() {
  RefinerConfig c;
  c.conv_depths = {3, 8, 8, 16, 16, 16};
  c.dense_widths = {64, 64};
  c.mixtures = 5;
  return c;
}

void RefinerConfig::validate() const {
  if (conv_depths.size() != 6 || conv_strides.size() != 6) {
    throw DataError("refiner needs exactly 6 conv depths and 6 strides");
  }
  for (int d : conv_depths)
    if (d < 1) throw DataError("conv depths must be positive");
  for (int s : conv_strides)
    if (s != 1 && s != 2) throw DataError("conv strides must be 1 or 2");
  if (dense_widths.size() != 2 || dense_widths[0] < 1 || dense_widths[1] < 1) {
    throw DataError("refiner needs two positive dense widths");
  }
  if (mixtures < 1) throw DataError("mixtures must be >= 1");
  if (!(blend_alpha >= 0.0f && blend_alpha <= 1.0f)) throw DataError("blend_alpha must lie in [0, 1]");
  if (image_size < 3) throw DataError("image_size must be >= 3");
}

json RefinerConfig::to_json() const {
  return {{"conv_depths", conv_depths}, {"conv_strides", conv_strides},
          {"dense_widths", dense_widths}, {"mixtures", mixtures},
          {"blend_alpha", blend_alpha},   {"image_size", image_size}};
}

RefinerConfig RefinerConfig::from_json(const json& j) {
  RefinerConfig c;
  c.conv_depths = j.at("conv_depths").get<std::vector<int>>();
  c.conv_strides = j.at("conv_strides").get<std::vector<int>>();
  c.dense_widths = j.at("dense_widths").get<std::vector<int>>();
  c.mixtures = j.at("mixtures").get<int>();
  c.blend_alpha = j.at("blend_alpha").get<float>();
  c.image_size = j.at("image_size").get<int>();
  c.validate();
  return c;
}

Shape RefinerConfig::conv_output_shape() const {
  int side = image_size;
  for (int s : conv_strides) side = (side + s - 1) / s;
  return {conv_depths.back(), side, side};
}

// ---------------------------------------------------------------------------

CnnRefiner::CnnRefiner(const RefinerConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  int in = cfg_.conv_depths[0];
  for (std::size_t i = 0; i < 6; ++i) {
    ConvLayer::create(params_, "conv" + std::to_string(i), in, cfg_.conv_depths[i],
                      cfg_.conv_strides[i], rng);
    in = cfg_.conv_depths[i];
  }
  const Shape feat = cfg_.conv_output_shape();
  const int flat = feat[0] * feat[1] * feat[2];
  const int w1 = cfg_.dense_widths[0], w2 = cfg_.dense_widths[1];
  DenseLayer::create(params_, "dense1", flat, w1, rng);
  DenseLayer::create(params_, "dense2", w1, w2, rng);
  if (w1 != w2) params_.add("skip.w", glorot_uniform({w1, w2}, w1, w2, rng));
  DenseLayer::create(params_, "dense3", w2, head_size(cfg_.mixtures), rng);
  bind();
}

void CnnRefiner::bind() {
  convs_.clear();
  for (std::size_t i = 0; i < 6; ++i)
    convs_.push_back(ConvLayer::bind(params_, "conv" + std::to_string(i), cfg_.conv_strides[i]));
  dense1_ = DenseLayer::bind(params_, "dense1");
  dense2_ = DenseLayer::bind(params_, "dense2");
  dense3_ = DenseLayer::bind(params_, "dense3");
  skip_ = params_.contains("skip.w") ? params_.get("skip.w") : Var();
}

CnnRefiner CnnRefiner::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "refiner") {
    throw DataError("checkpoint is not a refiner (kind=" + ckpt.meta.value("kind", "?") + ")");
  }
  CnnRefiner r(RefinerConfig::from_json(ckpt.meta.at("refiner")), 0);
  restore_parameters(ckpt, r.params_);
  return r;
}

Checkpoint CnnRefiner::to_checkpoint(const AdamState* adam, json extra) const {
  json meta = extra.is_object() ? extra : json::object();
  meta["kind"] = "refiner";
  meta["refiner"] = cfg_.to_json();
  return make_checkpoint(params_, adam, meta);
}

Tensor CnnRefiner::image_batch(const std::vector<const RasterImage*>& images) const {
  const int n = cfg_.image_size;
  const int ch = cfg_.conv_depths[0];
  Tensor t({static_cast<int>(images.size()), ch, n, n});
  auto d = t.data();
  std::size_t off = 0;
  for (const RasterImage* img : images) {
    if (img->size() != n) {
      throw ShapeError("refiner expects " + std::to_string(n) + "x" + std::to_string(n) +
                       " rasters, got " + std::to_string(img->size()));
    }
    for (int c = 0; c < ch; ++c) {
      std::copy(img->values().begin(), img->values().end(), d.begin() + static_cast<std::ptrdiff_t>(off));
      off += img->values().size();
    }
  }
  return t;
}

Var CnnRefiner::conv_features(const Var& images) const {
  Var x = images;
  for (const auto& conv : convs_) x = relu(conv(x));
  return x;
}

Var CnnRefiner::forward(const Var& images) const {
  Var feat = conv_features(images);
  const int batch = feat.dim(0);
  Var flat = reshape(feat, {batch, static_cast<int>(feat.size()) / batch});
  Var d1 = elu(dense1_(flat));
  Var d2 = elu(dense2_(d1));
  Var residual = skip_ ? matmul(d1, skip_) : d1;
  return dense3_(d2 + residual);
}

std::vector<float> CnnRefiner::head(const RasterImage& image) const {
  NoGradGuard guard;
  const Var out = forward(constant(image_batch({&image})));
  return {out.value().data().begin(), out.value().data().end()};
}

MixtureParams CnnRefiner::refine(const RasterImage& image) const {
  return parameterize(head(image), cfg_.mixtures);
}

Var blend_graph(const Var& rnn, const Var& cnn, float alpha) {
  if (rnn.shape() != cnn.shape()) {
    throw ShapeError("blend: head shapes differ " + shape_str(rnn.shape()) + " vs " +
                     shape_str(cnn.shape()));
  }
  if (alpha == 1.0f) return rnn;
  if (alpha == 0.0f) return cnn;
  return scale(rnn, alpha) + scale(cnn, 1.0f - alpha);
}

StrokeSequence refined_sample(const SketchVae& baseline, const CnnRefiner& refiner,
                              std::span<const float> z, double temperature, float alpha, Rng& rng) {
  if (refiner.config().mixtures != baseline.config().mixtures) {
    throw Error("refiner and baseline disagree on the number of mixture components");
  }
  SampleOptions opts;
  opts.temperature = temperature;
  opts.refiner = &refiner;
  opts.alpha = alpha;
  opts.offset_scale = baseline.offset_scale();
  return sample_sketch(baseline, z, rng, opts);
}

// ---------------------------------------------------------------------------

struct RefinerTrainer::CropBatch {
  int batch = 0;
  int length = 0;
  Tensor images;
  std::vector<Tensor> rnn_heads;  // [B, 6M+3] per suffix step
  std::vector<Tensor> target_dx, target_dy, target_pen, offset_mask;
};

RefinerTrainer::RefinerTrainer(CnnRefiner& refiner, SketchVae& baseline, const TrainOptions& opts)
    : refiner_(refiner), baseline_(baseline), opts_(opts), adam_(AdamConfig{opts.lr}), rng_(opts.seed) {
  if (refiner.config().mixtures != baseline.config().mixtures) {
    throw DataError("refiner mixtures (" + std::to_string(refiner.config().mixtures) +
                    ") differ from baseline mixtures (" +
                    std::to_string(baseline.config().mixtures) + ")");
  }
  if (opts.steps < 0 || opts.batch_size < 1) throw DataError("invalid training options");
  if (!(opts.lr >= 0.0f)) throw DataError("learning rate must be >= 0");
  baseline_.params().set_frozen(true);
}

void RefinerTrainer::restore(const Checkpoint& ckpt) {
  restore_parameters(ckpt, refiner_.params());
  restore_adam(ckpt, adam_.state());
  steps_done_ = ckpt.meta.value("step", 0);
  rng_.seed(opts_.seed + static_cast<std::uint64_t>(steps_done_));
}

RefinerTrainer::CropBatch RefinerTrainer::prepare(const std::vector<const StrokeSequence*>& seqs,
                                                  Rng& rng) const {
  const VaeConfig& vcfg = baseline_.config();
  const int length = vcfg.max_seq_len;
  const int heads = head_size(vcfg.mixtures);
  CropBatch b;
  b.batch = static_cast<int>(seqs.size());
  b.length = length;
  for (int t = 0; t < length; ++t) {
    b.rnn_heads.emplace_back(Shape{b.batch, heads});
    b.target_dx.emplace_back(Shape{b.batch, 1});
    b.target_dy.emplace_back(Shape{b.batch, 1});
    b.target_pen.emplace_back(Shape{b.batch, 3});
    b.offset_mask.emplace_back(Shape{b.batch, 1});
  }
  std::vector<RasterImage> rasters;
  rasters.reserve(seqs.size());

  NoGradGuard guard;
  for (int row = 0; row < b.batch; ++row) {
    const StrokeSequence& seq = *seqs[static_cast<std::size_t>(row)];
    const CropPair crop = random_crop(seq, rng);
    rasters.push_back(render(crop.prefix, baseline_.offset_scale(), refiner_.config().image_size));

    // Latent from the full sketch's posterior mean.
    const SequenceBatch enc_in = make_batch({&seq}, length);
    const Var z = baseline_.encode_graph(enc_in.encoder_inputs).mu;
    LstmState state = baseline_.initial_state(z);
    auto feed = [&](const Stroke5Point& p) {
      Tensor x({1, 5});
      const auto a = p.as_array();
      std::copy(a.begin(), a.end(), x.data().begin());
      auto [head, next] = baseline_.decode_step(constant(std::move(x)), z, state);
      state = next;
      return head;
    };
    // Warm the state on the prefix; the last prefix point feeds the first
    // suffix prediction.
    feed(kStartToken);
    for (std::size_t i = 0; i + 1 < crop.prefix.size(); ++i) feed(crop.prefix.points[i]);
    Stroke5Point prev = crop.prefix.points.back();

    const auto targets = padded_points(crop.suffix, length);
    int stop = crop.suffix.stop_index();
    if (stop == 0 || stop > length) stop = length;
    for (int t = 0; t < length; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      const Var head = feed(prev);
      std::copy(head.value().data().begin(), head.value().data().end(),
                b.rnn_heads[ut].data().begin() + static_cast<std::ptrdiff_t>(row) * heads);
      const auto& p = targets[ut];
      b.target_dx[ut].at(row, 0) = p.dx;
      b.target_dy[ut].at(row, 0) = p.dy;
      b.target_pen[ut].at(row, static_cast<int>(p.pen)) = 1.0f;
      b.offset_mask[ut].at(row, 0) = t < stop ? 1.0f : 0.0f;
      prev = p;
    }
  }
  std::vector<const RasterImage*> ptrs;
  for (const auto& r : rasters) ptrs.push_back(&r);
  b.images = refiner_.image_batch(ptrs);
  return b;
}

RefinerTrainer::Losses RefinerTrainer::loss(const CropBatch& batch) const {
  const int m = refiner_.config().mixtures;
  const float alpha = refiner_.config().blend_alpha;
  const Var cnn = refiner_.forward(constant(batch.images));
  std::vector<Var> offset_terms, pen_terms;
  for (int t = 0; t < batch.length; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    const Var head = blend_graph(constant(batch.rnn_heads[ut]), cnn, alpha);
    Var nll = mixture_nll(head, batch.target_dx[ut], batch.target_dy[ut], m);
    offset_terms.push_back(sum_all(nll * constant(batch.offset_mask[ut])));
    pen_terms.push_back(sum_all(pen_cross_entropy(head, batch.target_pen[ut], m)));
  }
  auto total_of = [](const std::vector<Var>& v) {
    Var acc = v.front();
    for (std::size_t i = 1; i < v.size(); ++i) acc = acc + v[i];
    return acc;
  };
  const float norm = 1.0f / static_cast<float>(batch.length * batch.batch);
  Losses l;
  l.offset = scale(total_of(offset_terms), norm);
  l.pen = scale(total_of(pen_terms), norm);
  l.total = l.offset + l.pen;
  return l;
}

LossRecord RefinerTrainer::step(const std::vector<StrokeSequence>& train) {
  std::vector<const StrokeSequence*> usable;
  for (const auto& s : train)
    if (s.size() >= 2) usable.push_back(&s);
  if (usable.empty()) throw DataError("no training sequence has at least 2 points");
  std::vector<const StrokeSequence*> picked;
  std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);
  if (static_cast<int>(usable.size()) <= opts_.batch_size) {
    picked = usable;
  } else {
    for (int i = 0; i < opts_.batch_size; ++i) picked.push_back(usable[pick(rng_)]);
  }
  const CropBatch batch = prepare(picked, rng_);

  LossRecord rec;
  rec.step = steps_done_;
  try {
    refiner_.params().zero_grad();
    const Losses l = loss(batch);
    backward(l.total);
    adam_.step(refiner_.params());
    rec.offset = l.offset.value().item();
    rec.pen = l.pen.value().item();
    rec.total = l.total.value().item();
  } catch (const NonFiniteError& e) {
    throw NonFiniteError("refiner training diverged at step " + std::to_string(steps_done_) + ": " +
                         e.what());
  }
  ++steps_done_;
  return rec;
}

std::vector<LossRecord> RefinerTrainer::run(const std::vector<StrokeSequence>& train,
                                            const std::function<void(const LossRecord&)>& on_step) {
  std::vector<LossRecord> log;
  for (int i = 0; i < opts_.steps; ++i) {
    log.push_back(step(train));
    if (on_step) on_step(log.back());
  }
  return log;
}

LossRecord RefinerTrainer::evaluate(const std::vector<StrokeSequence>& seqs,
                                    std::uint64_t crop_seed) const {
  std::vector<const StrokeSequence*> usable;
  for (const auto& s : seqs)
    if (s.size() >= 2) usable.push_back(&s);
  if (usable.empty()) throw DataError("no evaluation sequence has at least 2 points");
  Rng rng(crop_seed);
  const CropBatch batch = prepare(usable, rng);
  NoGradGuard guard;
  const Losses l = loss(batch);
  return {steps_done_, l.offset.value().item(), l.pen.value().item(), 0.0, l.total.value().item()};
}

Checkpoint RefinerTrainer::checkpoint() const {
  return refiner_.to_checkpoint(&adam_.state(), {{"step", steps_done_}});
}

}  // namespace strokeforge
