#include "strokeforge/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "strokeforge/optim.hpp"

namespace strokeforge {

using nlohmann::json;

DiscriminatorConfig DiscriminatorConfig::desk() {
  DiscriminatorConfig c;
  c.kernels = {4, 4, 8, 8, 16, 16};
  c.dense_widths = {64, 32};
  return c;
}

void DiscriminatorConfig::validate() const {
  if (kernels.size() != 6 || strides.size() != 6) {
    throw DataError("discriminator needs exactly 6 conv layers");
  }
  for (int k : kernels)
    if (k < 1) throw DataError("kernel counts must be positive");
  for (int s : strides)
    if (s != 1 && s != 2) throw DataError("strides must be 1 or 2");
  if (dense_widths.size() != 2 || dense_widths[0] < 1 || dense_widths[1] < 1) {
    throw DataError("discriminator needs two positive dense widths");
  }
  if (input_channels < 1) throw DataError("input_channels must be >= 1");
  if (image_size < 3) throw DataError("image_size must be >= 3");
}

json DiscriminatorConfig::to_json() const {
  return {{"kernels", kernels},           {"strides", strides},
          {"dense_widths", dense_widths}, {"input_channels", input_channels},
          {"image_size", image_size}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const json& j) {
  DiscriminatorConfig c;
  c.kernels = j.at("kernels").get<std::vector<int>>();
  c.strides = j.at("strides").get<std::vector<int>>();
  c.dense_widths = j.at("dense_widths").get<std::vector<int>>();
  c.input_channels = j.at("input_channels").get<int>();
  c.image_size = j.at("image_size").get<int>();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

Discriminator::Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  int in = cfg_.input_channels;
  int side = cfg_.image_size;
  for (std::size_t i = 0; i < 6; ++i) {
    ConvLayer::create(params_, "conv" + std::to_string(i), in, cfg_.kernels[i], cfg_.strides[i], rng);
    in = cfg_.kernels[i];
    side = (side + cfg_.strides[i] - 1) / cfg_.strides[i];
  }
  const int flat = in * side * side;
  DenseLayer::create(params_, "dense1", flat, cfg_.dense_widths[0], rng);
  DenseLayer::create(params_, "dense2", cfg_.dense_widths[0], cfg_.dense_widths[1], rng);
  DenseLayer::create(params_, "out", cfg_.dense_widths[1], kNumClasses, rng);
  bind();
}

void Discriminator::bind() {
  convs_.clear();
  for (std::size_t i = 0; i < 6; ++i)
    convs_.push_back(ConvLayer::bind(params_, "conv" + std::to_string(i), cfg_.strides[i]));
  dense1_ = DenseLayer::bind(params_, "dense1");
  dense2_ = DenseLayer::bind(params_, "dense2");
  out_ = DenseLayer::bind(params_, "out");
}

Discriminator Discriminator::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "discriminator") {
    throw DataError("checkpoint is not a discriminator (kind=" + ckpt.meta.value("kind", "?") + ")");
  }
  Discriminator d(DiscriminatorConfig::from_json(ckpt.meta.at("discriminator")), 0);
  restore_parameters(ckpt, d.params_);
  return d;
}

Checkpoint Discriminator::to_checkpoint(const AdamState* adam, json extra) const {
  json meta = extra.is_object() ? extra : json::object();
  meta["kind"] = "discriminator";
  meta["discriminator"] = cfg_.to_json();
  return make_checkpoint(params_, adam, meta);
}

Tensor Discriminator::image_batch(const std::vector<const RasterImage*>& images) const {
  const int n = cfg_.image_size;
  const int ch = cfg_.input_channels;
  Tensor t({static_cast<int>(images.size()), ch, n, n});
  auto d = t.data();
  std::size_t off = 0;
  for (const RasterImage* img : images) {
    if (img->size() != n) {
      throw ShapeError("discriminator expects " + std::to_string(n) + "x" + std::to_string(n) +
                       " rasters, got " + std::to_string(img->size()));
    }
    for (int c = 0; c < ch; ++c) {
      std::copy(img->values().begin(), img->values().end(), d.begin() + static_cast<std::ptrdiff_t>(off));
      off += img->values().size();
    }
  }
  return t;
}

Var Discriminator::penultimate(const Var& images) const {
  Var x = images;
  for (const auto& conv : convs_) x = relu(conv(x));
  const int batch = x.dim(0);
  Var flat = reshape(x, {batch, static_cast<int>(x.size()) / batch});
  return elu(dense2_(elu(dense1_(flat))));
}

Var Discriminator::logits(const Var& images) const { return out_(penultimate(images)); }

std::array<float, kNumClasses> Discriminator::classify(const RasterImage& image) const {
  NoGradGuard guard;
  const Var probs = softmax_rows(logits(constant(image_batch({&image}))));
  std::array<float, kNumClasses> out{};
  std::copy(probs.value().data().begin(), probs.value().data().end(), out.begin());
  return out;
}

int argmax_lowest(std::span<const float> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
  return best;
}

int Discriminator::predict(const RasterImage& image) const {
  const auto p = classify(image);
  return argmax_lowest(p);
}

std::vector<float> Discriminator::features(const RasterImage& image) const {
  NoGradGuard guard;
  const Var f = penultimate(constant(image_batch({&image})));
  return {f.value().data().begin(), f.value().data().end()};
}

// ---------------------------------------------------------------------------

std::vector<DiscEpochRecord> train_discriminator(
    Discriminator& model, const std::vector<LabeledImage>& train,
    const std::vector<LabeledImage>& validation, const DiscTrainOptions& opts,
    const std::function<void(const DiscEpochRecord&)>& on_epoch) {
  std::array<int, kNumClasses> counts{};
  for (const auto& ex : train) {
    if (ex.label < 0 || ex.label >= kNumClasses) throw DataError("label out of range");
    ++counts[static_cast<std::size_t>(ex.label)];
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[static_cast<std::size_t>(c)] < 3) {
      throw DataError(std::string("class ") + kClassIds[static_cast<std::size_t>(c)] + " has " +
                      std::to_string(counts[static_cast<std::size_t>(c)]) +
                      " training examples; at least 3 are required");
    }
  }
  if (opts.epochs < 0 || opts.batch_size < 1) throw DataError("invalid discriminator options");

  Adam adam(AdamConfig{opts.lr});
  Rng rng(opts.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<DiscEpochRecord> log;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(opts.batch_size));
      std::vector<const RasterImage*> imgs;
      Tensor one_hot({static_cast<int>(end - start), kNumClasses});
      for (std::size_t i = start; i < end; ++i) {
        imgs.push_back(&train[order[i]].image);
        one_hot.at(static_cast<int>(i - start), train[order[i]].label) = 1.0f;
      }
      model.params().zero_grad();
      const Var logp = log_softmax_rows(model.logits(constant(model.image_batch(imgs))));
      const Var loss = scale(mean_all(sum_rows(logp * constant(one_hot))), -1.0f);
      backward(loss);
      adam.step(model.params());
      loss_sum += loss.value().item();
      ++batches;
    }
    DiscEpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches ? loss_sum / batches : 0.0;
    if (!validation.empty()) {
      const ConfusionMatrix cm = confusion(model, validation);
      double hits = 0.0;
      for (int c = 0; c < kNumClasses; ++c) {
        rec.val_class_accuracy[static_cast<std::size_t>(c)] = cm.has_row(c) ? cm.accuracy(c) : 0.0;
        hits += cm.accuracy(c) / 100.0 * cm.row_counts[static_cast<std::size_t>(c)];
      }
      rec.val_accuracy = 100.0 * hits / static_cast<double>(validation.size());
    }
    log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return log;
}

// ---------------------------------------------------------------------------

std::optional<double> ConfusionMatrix::mislead_rate(int cls) const {
  if (!has_row(cls)) return std::nullopt;
  return percent[static_cast<std::size_t>(cls)][static_cast<std::size_t>(SketchClass::Human)];
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream os;
  os << "label";
  for (const char* id : kClassIds) os << ',' << id;
  os << ",count\n";
  os << std::fixed << std::setprecision(1);
  for (int r = 0; r < kNumClasses; ++r) {
    os << kClassIds[static_cast<std::size_t>(r)];
    for (int c = 0; c < kNumClasses; ++c) {
      if (has_row(r)) {
        os << ',' << percent[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      } else {
        os << ",NA";
      }
    }
    os << ',' << row_counts[static_cast<std::size_t>(r)] << '\n';
  }
  return os.str();
}

std::string ConfusionMatrix::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(16) << "Label \\ Predict";
  for (const char* name : kClassNames) os << std::right << std::setw(14) << name;
  os << '\n';
  for (int r = 0; r < kNumClasses; ++r) {
    os << std::left << std::setw(16) << kClassNames[static_cast<std::size_t>(r)];
    for (int c = 0; c < kNumClasses; ++c) {
      std::ostringstream cell;
      if (has_row(r)) {
        cell << std::fixed << std::setprecision(1)
             << percent[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] << '%';
      } else {
        cell << "n/a";
      }
      os << std::right << std::setw(14) << cell.str();
    }
    os << '\n';
  }
  return os.str();
}

ConfusionMatrix confusion_from_predictions(const std::vector<std::pair<int, int>>& truth_pred) {
  std::array<std::array<int, kNumClasses>, kNumClasses> counts{};
  ConfusionMatrix cm;
  for (const auto& [t, p] : truth_pred) {
    if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses) {
      throw DataError("class index out of range in predictions");
    }
    ++counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    ++cm.row_counts[static_cast<std::size_t>(t)];
  }
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    if (cm.row_counts[r] == 0) continue;
    for (std::size_t c = 0; c < kNumClasses; ++c)
      cm.percent[r][c] = 100.0 * counts[r][c] / static_cast<double>(cm.row_counts[r]);
  }
  return cm;
}

ConfusionMatrix confusion(const Discriminator& model, const std::vector<LabeledImage>& data) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(data.size());
  for (const auto& ex : data) pairs.emplace_back(ex.label, model.predict(ex.image));
  return confusion_from_predictions(pairs);
}

int parse_class(const std::string& token) {
  for (int c = 0; c < kNumClasses; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    if (token == kClassIds[uc] || token == kClassNames[uc] || token == std::to_string(c)) return c;
  }
  throw DataError("unknown class '" + token + "'");
}

std::vector<std::pair<int, int>> read_predictions_csv(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw DataError("prediction line lacks a comma: " + line);
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t");
      const auto e = v.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    const std::string a = trim(line.substr(0, comma)), b = trim(line.substr(comma + 1));
    if (first && (a == "true" || a == "label")) {
      first = false;
      continue;
    }
    first = false;
    out.emplace_back(parse_class(a), parse_class(b));
  }
  return out;
}

}  // namespace strokeforge
