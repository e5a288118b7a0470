// strokeforge: ingest QuickDraw data, train the three models, sample and evaluate.
//
// Exit codes: 0 success, 1 internal error, 2 user or data error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "strokeforge/checkpoint.hpp"
#include "strokeforge/config.hpp"
#include "strokeforge/discriminator.hpp"
#include "strokeforge/raster.hpp"
#include "strokeforge/refiner.hpp"
#include "strokeforge/sketch_vae.hpp"
#include "strokeforge/stroke.hpp"
#include "strokeforge/svg.hpp"
#include "strokeforge/synthetic.hpp"
#include "strokeforge/tsne.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace strokeforge;

namespace {

void log(const std::string& msg) { std::cerr << msg << '\n'; }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + " is not valid JSON: " + e.what());
  }
}

RunConfig resolve_config(const std::string& path, std::optional<std::uint64_t> seed) {
  RunConfig cfg = path.empty() ? RunConfig::desk() : load_config(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

Checkpoint require_checkpoint(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) {
    throw DataError("missing " + what + " checkpoint " + path.string() + " (train it first)");
  }
  return load_checkpoint(path);
}

struct Dataset {
  std::vector<StrokeSequence> train, test, validation;
  double offset_scale = 1.0;
};

Dataset load_dataset(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  Dataset d;
  d.offset_scale = manifest.at("offset_scale").get<double>();
  d.train = read_jsonl(dir / "train.jsonl");
  if (fs::exists(dir / "test.jsonl")) d.test = read_jsonl(dir / "test.jsonl");
  if (fs::exists(dir / "validation.jsonl")) d.validation = read_jsonl(dir / "validation.jsonl");
  if (d.train.empty()) throw DataError("training split in " + dir.string() + " is empty");
  return d;
}

// Sketch i uses its own generator seeded with base + i, so any subset of a
// run can be reproduced independently.
std::vector<StrokeSequence> generate(const SketchVae& vae, const CnnRefiner* refiner, int count,
                                     std::uint64_t seed, double temperature, float alpha) {
  std::vector<StrokeSequence> out;
  for (int i = 0; i < count; ++i) {
    Rng rng(seed + static_cast<std::uint64_t>(i));
    const auto z = sample_prior(vae.config().latent, rng);
    out.push_back(refiner ? refined_sample(vae, *refiner, z, temperature, alpha, rng)
                          : sample_sketch(vae, z, rng, {.temperature = temperature}));
  }
  return out;
}

std::vector<RasterImage> rasterize(const std::vector<StrokeSequence>& seqs, double offset_scale) {
  std::vector<RasterImage> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(render(s, offset_scale));
  return out;
}

std::vector<StrokeSequence> cycle(const std::vector<StrokeSequence>& src, int count) {
  std::vector<StrokeSequence> out;
  for (int i = 0; i < count; ++i) out.push_back(src[static_cast<std::size_t>(i) % src.size()]);
  return out;
}

void write_pgm(const fs::path& path, const RasterImage& img) {
  std::ostringstream os;
  os << "P5\n" << img.size() << ' ' << img.size() << "\n255\n";
  for (float v : img.values()) os.put(static_cast<char>(255 - static_cast<int>(std::lround(v * 255.0f))));
  write_text_file(path, os.str());
}

// ---------------------------------------------------------------------------

int cmd_ingest(const std::string& input, const fs::path& out, const std::string& config_path,
               std::optional<std::uint64_t> seed, int max_len, std::optional<int> n_train,
               std::optional<int> n_test, std::optional<int> n_val) {
  const RunConfig cfg = resolve_config(config_path, seed);
  if (max_len <= 0) max_len = cfg.vae.max_seq_len;
  const ParseResult parsed = parse_ndjson(input, max_len);
  const ParseStats& st = parsed.stats;
  if (parsed.sequences.empty()) {
    throw DataError("no usable sketches in " + input + " (malformed=" + std::to_string(st.malformed) +
                    ", empty=" + std::to_string(st.empty) + ", too_long=" + std::to_string(st.too_long) + ")");
  }
  SplitSizes sizes = cfg.splits;
  if (n_train) sizes.train = *n_train;
  if (n_test) sizes.test = *n_test;
  if (n_val) sizes.validation = *n_val;
  const DatasetSplit split = split_dataset(parsed.sequences, sizes, cfg.seed);
  write_jsonl(out / "train.jsonl", split.train);
  write_jsonl(out / "test.jsonl", split.test);
  write_jsonl(out / "validation.jsonl", split.validation);
  json manifest{{"source", fs::absolute(input).string()},
                {"seed", cfg.seed},
                {"max_seq_len", max_len},
                {"offset_scale", split.offset_scale},
                {"parsed", st.parsed},
                {"splits", {{"train", split.train.size()}, {"test", split.test.size()}, {"validation", split.validation.size()}}},
                {"warnings", {{"malformed", st.malformed}, {"empty", st.empty}, {"too_long", st.too_long}}}};
  write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
  if (st.malformed + st.empty + st.too_long > 0) {
    log("warning: skipped " + std::to_string(st.malformed) + " malformed, " + std::to_string(st.empty) +
        " empty and " + std::to_string(st.too_long) + " over-length drawings");
  }
  std::cout << "ingested " << st.parsed << " sketches: train=" << split.train.size()
            << " test=" << split.test.size() << " validation=" << split.validation.size()
            << " offset_scale=" << split.offset_scale << "\n";
  return 0;
}

int train_baseline(const RunConfig& cfg) {
  const Dataset data = load_dataset(cfg.data_dir);
  SketchVae vae(cfg.vae, cfg.seed);
  vae.set_offset_scale(data.offset_scale);
  BaselineTrainer trainer(vae, {cfg.baseline_steps, cfg.batch_size, cfg.lr, cfg.seed});
  fs::create_directories(cfg.out_dir);
  std::ofstream csv(cfg.out_dir / "baseline_loss.csv");
  csv << loss_csv_header() << '\n';
  trainer.run(data.train, [&](const LossRecord& r) {
    csv << loss_csv_row(r) << '\n';
    if (r.step % 50 == 0) log("baseline step " + std::to_string(r.step) + " loss " + std::to_string(r.total));
  });
  save_checkpoint(cfg.baseline_checkpoint(), trainer.checkpoint());
  std::cout << "wrote " << cfg.baseline_checkpoint().string() << " and "
            << (cfg.out_dir / "baseline_loss.csv").string() << "\n";
  return 0;
}

int train_refiner(const RunConfig& cfg) {
  SketchVae vae = SketchVae::from_checkpoint(require_checkpoint(cfg.baseline_checkpoint(), "baseline"));
  const Dataset data = load_dataset(cfg.data_dir);
  CnnRefiner refiner(cfg.refiner, cfg.seed);
  RefinerTrainer trainer(refiner, vae, {cfg.refiner_steps, cfg.batch_size, cfg.lr, cfg.seed});
  std::ofstream csv(cfg.out_dir / "refiner_loss.csv");
  csv << loss_csv_header() << '\n';
  trainer.run(data.train, [&](const LossRecord& r) {
    csv << loss_csv_row(r) << '\n';
    if (r.step % 25 == 0) log("refiner step " + std::to_string(r.step) + " loss " + std::to_string(r.total));
  });
  save_checkpoint(cfg.refiner_checkpoint(), trainer.checkpoint());
  std::cout << "wrote " << cfg.refiner_checkpoint().string() << " and "
            << (cfg.out_dir / "refiner_loss.csv").string() << "\n";
  return 0;
}

// Sketch-RNN samples, refined samples and human sketches, rendered and labeled.
std::vector<LabeledImage> labeled_population(const RunConfig& cfg, const SketchVae& vae,
                                             const CnnRefiner& refiner,
                                             const std::vector<StrokeSequence>& human, int per_class,
                                             std::uint64_t seed) {
  if (human.empty()) throw DataError("no human sketches available for the discriminator");
  std::vector<LabeledImage> out;
  const double s = vae.offset_scale();
  for (auto& img : rasterize(generate(vae, nullptr, per_class, seed, cfg.temperature, 1.0f), s))
    out.push_back({std::move(img), static_cast<int>(SketchClass::SketchRnn)});
  for (auto& img : rasterize(generate(vae, &refiner, per_class, seed + 500000, cfg.temperature, cfg.alpha), s))
    out.push_back({std::move(img), static_cast<int>(SketchClass::Refined)});
  for (auto& img : rasterize(cycle(human, per_class), s))
    out.push_back({std::move(img), static_cast<int>(SketchClass::Human)});
  return out;
}

int train_discriminator_cmd(const RunConfig& cfg) {
  SketchVae vae = SketchVae::from_checkpoint(require_checkpoint(cfg.baseline_checkpoint(), "baseline"));
  CnnRefiner refiner = CnnRefiner::from_checkpoint(require_checkpoint(cfg.refiner_checkpoint(), "refiner"));
  const Dataset data = load_dataset(cfg.data_dir);
  std::vector<LabeledImage> all = labeled_population(cfg, vae, refiner, data.train, cfg.disc_per_class, cfg.seed);
  Rng rng(cfg.seed);
  std::shuffle(all.begin(), all.end(), rng);
  const auto n_val = all.size() / 5;
  std::vector<LabeledImage> val(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<LabeledImage> train(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
  Discriminator disc(cfg.discriminator, cfg.seed);
  std::ofstream csv(cfg.out_dir / "discriminator_log.csv");
  csv << "epoch,train_loss,val_accuracy\n";
  train_discriminator(disc, train, val, {cfg.disc_epochs, cfg.disc_batch_size, cfg.lr, cfg.seed},
                      [&](const DiscEpochRecord& r) {
                        csv << r.epoch << ',' << r.train_loss << ',' << r.val_accuracy << '\n';
                        log("epoch " + std::to_string(r.epoch) + " loss " + std::to_string(r.train_loss) +
                            " val acc " + std::to_string(r.val_accuracy) + "%");
                      });
  save_checkpoint(cfg.discriminator_checkpoint(), disc.to_checkpoint(nullptr));
  std::cout << "wrote " << cfg.discriminator_checkpoint().string() << "\n";
  return 0;
}

int cmd_sample(const RunConfig& cfg, int count, float alpha, double temperature, std::uint64_t seed,
               const fs::path& svg_dir, int columns) {
  if (count < 1) throw DataError("--count must be >= 1");
  if (!(alpha >= 0.0f && alpha <= 1.0f)) throw DataError("--alpha must be in [0, 1]");
  if (!(temperature > 0.0)) throw DataError("--temperature must be positive");
  SketchVae vae = SketchVae::from_checkpoint(require_checkpoint(cfg.baseline_checkpoint(), "baseline"));
  std::optional<CnnRefiner> refiner;
  if (alpha < 1.0f) refiner = CnnRefiner::from_checkpoint(require_checkpoint(cfg.refiner_checkpoint(), "refiner"));
  const auto sketches = generate(vae, refiner ? &*refiner : nullptr, count, seed, temperature, alpha);
  fs::create_directories(svg_dir);
  for (std::size_t i = 0; i < sketches.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "sketch_%03zu", i);
    write_text_file(svg_dir / (std::string(stem) + ".svg"), sketch_to_svg(sketches[i], vae.offset_scale()));
    write_pgm(svg_dir / (std::string(stem) + ".pgm"), render(sketches[i], vae.offset_scale()));
  }
  write_text_file(svg_dir / "grid.svg", grid_svg(sketches, vae.offset_scale(), columns));
  write_jsonl(svg_dir / "samples.jsonl", sketches);
  std::cout << "wrote " << count << " sketches (" << (refiner ? "refined" : "baseline") << ") to "
            << svg_dir.string() << "\n";
  return 0;
}

int eval_discriminator(const RunConfig& cfg, const std::string& predictions, const std::string& out_csv) {
  ConfusionMatrix cm;
  if (!predictions.empty()) {
    std::ifstream in(predictions);
    if (!in) throw DataError("cannot open " + predictions);
    std::stringstream buf;
    buf << in.rdbuf();
    cm = confusion_from_predictions(read_predictions_csv(buf.str()));
  } else {
    Discriminator disc = Discriminator::from_checkpoint(
        require_checkpoint(cfg.discriminator_checkpoint(), "discriminator"));
    SketchVae vae = SketchVae::from_checkpoint(require_checkpoint(cfg.baseline_checkpoint(), "baseline"));
    CnnRefiner refiner = CnnRefiner::from_checkpoint(require_checkpoint(cfg.refiner_checkpoint(), "refiner"));
    const Dataset data = load_dataset(cfg.data_dir);
    const auto& human = data.test.empty() ? data.validation : data.test;
    // Seeds disjoint from the ones used to build the training population.
    cm = confusion(disc, labeled_population(cfg, vae, refiner, human, cfg.eval_per_class, cfg.seed + 1000000));
  }
  std::cout << cm.to_table();
  for (int c : {static_cast<int>(SketchClass::SketchRnn), static_cast<int>(SketchClass::Refined)}) {
    if (const auto rate = cm.mislead_rate(c)) {
      std::ostringstream os;
      os << std::fixed << std::setprecision(1) << *rate;
      std::cout << "mislead rate " << kClassNames[static_cast<std::size_t>(c)] << ": " << os.str() << "%\n";
    }
  }
  const fs::path csv_path = out_csv.empty() ? cfg.out_dir / "confusion.csv" : fs::path(out_csv);
  write_text_file(csv_path, cm.to_csv());
  return 0;
}

int eval_tsne(const RunConfig& cfg, int count, const std::string& features, double perplexity,
              int iterations, const std::string& svg_out) {
  if (count < 5) throw DataError("--count must be >= 5");
  FeatureMode mode;
  if (features == "flat") {
    mode = FeatureMode::Flat;
  } else if (features == "discriminator") {
    mode = FeatureMode::DiscriminatorPenultimate;
  } else {
    throw DataError("--features must be flat or discriminator");
  }
  std::optional<Discriminator> disc;
  if (mode == FeatureMode::DiscriminatorPenultimate) {
    disc = Discriminator::from_checkpoint(require_checkpoint(cfg.discriminator_checkpoint(), "discriminator"));
  }
  SketchVae vae = SketchVae::from_checkpoint(require_checkpoint(cfg.baseline_checkpoint(), "baseline"));
  CnnRefiner refiner = CnnRefiner::from_checkpoint(require_checkpoint(cfg.refiner_checkpoint(), "refiner"));
  std::vector<RasterImage> images = rasterize(generate(vae, nullptr, count, cfg.seed, cfg.temperature, 1.0f), vae.offset_scale());
  for (auto& img : rasterize(generate(vae, &refiner, count, cfg.seed + 500000, cfg.temperature, cfg.alpha), vae.offset_scale()))
    images.push_back(std::move(img));
  std::vector<int> labels(images.size(), 0);
  std::fill(labels.begin() + count, labels.end(), 1);

  TsneOptions opts;
  opts.perplexity = perplexity;
  opts.iterations = iterations;
  opts.seed = cfg.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const EmbeddingRun run = tsne(feature_extract(images, mode, disc ? &*disc : nullptr), opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path svg_path = svg_out.empty() ? cfg.out_dir / "tsne.svg" : fs::path(svg_out);
  const ScatterStats stats = scatter_export(run, labels, {kClassNames[0], kClassNames[1]}, svg_path);
  json report{{"perplexity", run.perplexity},
              {"iterations", run.iterations},
              {"learning_rate", run.learning_rate},
              {"features", features},
              {"seconds", secs},
              {"final_kl", run.kl_trace.back()},
              {"bandwidth_fallbacks", run.bandwidth_fallbacks},
              {"classes", json::array()}};
  for (std::size_t c = 0; c < stats.class_names.size(); ++c) {
    report["classes"].push_back({{"name", stats.class_names[c]},
                                 {"count", stats.class_counts[c]},
                                 {"mean_pairwise_distance", stats.mean_pairwise_distance[c]}});
    std::cout << stats.class_names[c] << ": n=" << stats.class_counts[c]
              << " mean pairwise distance=" << stats.mean_pairwise_distance[c] << "\n";
  }
  write_text_file(svg_path.parent_path() / (svg_path.stem().string() + "_stats.json"), report.dump(2) + "\n");
  std::cout << "wrote " << svg_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"strokeforge: sketch generation with a CNN-refined recurrent decoder"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;

  auto* ingest = app.add_subcommand("ingest", "Parse, normalize and split a QuickDraw ndjson file");
  std::string ingest_input;
  std::string ingest_out;
  int max_len = 0;
  std::optional<int> n_train, n_test, n_val;
  ingest->add_option("ndjson", ingest_input, "QuickDraw .ndjson file")->required();
  ingest->add_option("--out", ingest_out, "Output directory (default: $STROKEFORGE_DATA_DIR or ./data)");
  ingest->add_option("--config", config_path, "Run config JSON");
  ingest->add_option("--seed", seed, "Shuffle seed");
  ingest->add_option("--max-len", max_len, "Drop drawings with more points (default: config max_seq_len)");
  ingest->add_option("--train", n_train, "Training split size");
  ingest->add_option("--test", n_test, "Test split size");
  ingest->add_option("--validation", n_val, "Validation split size");

  auto* synth = app.add_subcommand("synth", "Write procedural cat doodles as QuickDraw ndjson");
  int synth_count = 200;
  std::uint64_t synth_seed = 1;
  std::string synth_out;
  synth->add_option("--count", synth_count, "Number of drawings");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output .ndjson path")->required();

  auto* train = app.add_subcommand("train", "Train baseline, refiner or discriminator");
  std::string which;
  train->add_option("model", which, "baseline | refiner | discriminator")
      ->required()
      ->check(CLI::IsMember({"baseline", "refiner", "discriminator"}));
  train->add_option("--config", config_path, "Run config JSON");
  train->add_option("--seed", seed, "Override the config seed");

  auto* sample = app.add_subcommand("sample", "Generate sketches and export SVG, raster and jsonl");
  int count = 50;
  float alpha = 1.0f;
  double temperature = 1.0;
  std::uint64_t sample_seed = 1;
  std::string svg_dir = "samples";
  int columns = 10;
  sample->add_option("--count", count, "Number of sketches");
  sample->add_option("--alpha", alpha, "Blend weight of the recurrent head (1 = baseline only)");
  sample->add_option("--temperature", temperature, "Sampling temperature");
  sample->add_option("--seed", sample_seed, "Base seed; sketch i uses seed + i");
  sample->add_option("--svg-dir", svg_dir, "Output directory");
  sample->add_option("--columns", columns, "Columns of grid.svg");
  sample->add_option("--config", config_path, "Run config JSON (locates checkpoints)");

  auto* eval = app.add_subcommand("eval", "Evaluate with the discriminator or t-SNE");
  std::string eval_what;
  std::string predictions, out_csv, features = "flat", svg_out;
  double perplexity = 30.0;
  int iterations = 1000;
  int tsne_count = 1000;
  eval->add_option("what", eval_what, "discriminator | tsne")
      ->required()
      ->check(CLI::IsMember({"discriminator", "tsne"}));
  eval->add_option("--config", config_path, "Run config JSON");
  eval->add_option("--seed", seed, "Override the config seed");
  eval->add_option("--predictions", predictions, "CSV of true,predicted labels (skips the model)");
  eval->add_option("--out", out_csv, "Confusion CSV path (default: <out_dir>/confusion.csv)");
  eval->add_option("--count", tsne_count, "t-SNE: sketches per model");
  eval->add_option("--features", features, "t-SNE: flat | discriminator");
  eval->add_option("--perplexity", perplexity, "t-SNE perplexity");
  eval->add_option("--iterations", iterations, "t-SNE iterations");
  eval->add_option("--svg", svg_out, "t-SNE scatter path (default: <out_dir>/tsne.svg)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) {
      const fs::path out = ingest_out.empty() ? default_data_dir() : fs::path(ingest_out);
      return cmd_ingest(ingest_input, out, config_path, seed, max_len, n_train, n_test, n_val);
    }
    if (*synth) {
      if (synth_count < 1) throw DataError("--count must be >= 1");
      write_text_file(synth_out, cat_ndjson(synth_count, synth_seed));
      std::cout << "wrote " << synth_count << " drawings to " << synth_out << "\n";
      return 0;
    }
    const RunConfig cfg = resolve_config(config_path, seed);
    if (*train) {
      fs::create_directories(cfg.out_dir);
      if (which == "baseline") return train_baseline(cfg);
      if (which == "refiner") return train_refiner(cfg);
      return train_discriminator_cmd(cfg);
    }
    if (*sample) return cmd_sample(cfg, count, alpha, temperature, sample_seed, svg_dir, columns);
    if (*eval) {
      if (eval_what == "discriminator") return eval_discriminator(cfg, predictions, out_csv);
      return eval_tsne(cfg, tsne_count, features, perplexity, iterations, svg_out);
    }
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
