#pragma once

// Run configuration: one flat JSON object. A "preset" key ("desk" or "full")
// picks the starting values; every other key overrides one field. Unknown
// keys and out-of-range values are rejected.

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "strokeforge/discriminator.hpp"
#include "strokeforge/refiner.hpp"
#include "strokeforge/sketch_vae.hpp"
#include "strokeforge/stroke.hpp"

namespace strokeforge {

struct RunConfig {
  std::string preset = "desk";
  std::filesystem::path data_dir;  // ingested dataset (manifest.json + *.jsonl)
  std::filesystem::path out_dir;   // checkpoints, logs, exports
  std::uint64_t seed = 1;

  VaeConfig vae;
  RefinerConfig refiner;
  DiscriminatorConfig discriminator;
  SplitSizes splits;

  int baseline_steps = 500;
  int refiner_steps = 500;
  int batch_size = 8;
  float lr = 1e-3f;
  float alpha = 0.5f;
  double temperature = 1.0;

  int disc_epochs = 10;
  int disc_batch_size = 16;
  /// Images per class generated for discriminator training.
  int disc_per_class = 60;
  /// Images per class for discriminator evaluation.
  int eval_per_class = 100;

  static RunConfig desk();
  static RunConfig full();
  void validate() const;
  nlohmann::json to_json() const;

  std::filesystem::path baseline_checkpoint() const { return out_dir / "baseline.ckpt"; }
  std::filesystem::path refiner_checkpoint() const { return out_dir / "refiner.ckpt"; }
  std::filesystem::path discriminator_checkpoint() const { return out_dir / "discriminator.ckpt"; }
};

/// Default data root: $STROKEFORGE_DATA_DIR, else "data".
std::filesystem::path default_data_dir();

RunConfig config_from_json(const nlohmann::json& j);
/// Throws DataError on a missing file, bad JSON or invalid values.
RunConfig load_config(const std::filesystem::path& path);

}  // namespace strokeforge
