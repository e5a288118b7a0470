#include "strokeforge/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace strokeforge {

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("STROKEFORGE_DATA_DIR"); env && *env) return env;
  return "data";
}

RunConfig RunConfig::desk() {
  RunConfig c;
  c.preset = "desk";
  c.data_dir = default_data_dir();
  c.out_dir = "runs/desk";
  c.vae.mixtures = 5;
  c.vae.latent = 16;
  c.vae.enc_hidden = 32;
  c.vae.dec_hidden = 64;
  c.vae.max_seq_len = 64;
  c.refiner = RefinerConfig::desk();
  c.discriminator = DiscriminatorConfig::desk();
  c.splits = {200, 20, 20};
  c.baseline_steps = 300;
  c.refiner_steps = 200;
  return c;
}

RunConfig RunConfig::full() {
  RunConfig c;
  c.preset = "full";
  c.data_dir = default_data_dir();
  c.out_dir = "runs/full";
  c.vae = VaeConfig::full_scale();
  c.refiner = RefinerConfig{};
  c.discriminator = DiscriminatorConfig{};
  c.splits = SplitSizes{};
  c.baseline_steps = 50000;
  c.refiner_steps = 50000;
  c.batch_size = 100;
  c.disc_per_class = 3000;
  c.eval_per_class = 1000;
  c.disc_epochs = 20;
  return c;
}

void RunConfig::validate() const {
  vae.validate();
  refiner.validate();
  discriminator.validate();
  if (refiner.mixtures != vae.mixtures) {
    throw DataError("refiner.mixtures must equal mixtures (the heads are blended)");
  }
  if (splits.train < 1 || splits.test < 0 || splits.validation < 0) {
    throw DataError("split sizes must be non-negative with at least one training sketch");
  }
  if (baseline_steps < 0 || refiner_steps < 0) throw DataError("step counts must be >= 0");
  if (batch_size < 1 || disc_batch_size < 1) throw DataError("batch sizes must be >= 1");
  if (!(lr > 0.0f) || !std::isfinite(lr)) throw DataError("lr must be positive");
  if (!(alpha >= 0.0f && alpha <= 1.0f)) throw DataError("alpha must be in [0, 1]");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw DataError("temperature must be positive");
  if (disc_epochs < 1) throw DataError("disc_epochs must be >= 1");
  if (disc_per_class < 5) throw DataError("disc_per_class must be >= 5");
  if (eval_per_class < 1) throw DataError("eval_per_class must be >= 1");
  if (out_dir.empty()) throw DataError("out_dir must not be empty");
}

namespace {

using nlohmann::json;

// One entry per accepted key: reads the value into the config, or writes it out.
struct Field {
  std::function<void(RunConfig&, const json&)> read;
  std::function<json(const RunConfig&)> write;
};

template <typename T, typename Get>
Field field(Get get) {
  return {[get](RunConfig& c, const json& v) { get(c) = v.get<T>(); },
          [get](const RunConfig& c) { return json(get(const_cast<RunConfig&>(c))); }};
}

Field path_field(std::filesystem::path RunConfig::*member) {
  return {[member](RunConfig& c, const json& v) { c.*member = v.get<std::string>(); },
          [member](const RunConfig& c) { return json((c.*member).string()); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["data_dir"] = path_field(&RunConfig::data_dir);
    t["out_dir"] = path_field(&RunConfig::out_dir);
    t["seed"] = field<std::uint64_t>([](RunConfig& c) -> auto& { return c.seed; });
    t["mixtures"] = {[](RunConfig& c, const json& v) {
                       c.vae.mixtures = v.get<int>();
                       c.refiner.mixtures = c.vae.mixtures;
                     },
                     [](const RunConfig& c) { return json(c.vae.mixtures); }};
    t["latent"] = field<int>([](RunConfig& c) -> auto& { return c.vae.latent; });
    t["enc_hidden"] = field<int>([](RunConfig& c) -> auto& { return c.vae.enc_hidden; });
    t["dec_hidden"] = field<int>([](RunConfig& c) -> auto& { return c.vae.dec_hidden; });
    t["max_seq_len"] = field<int>([](RunConfig& c) -> auto& { return c.vae.max_seq_len; });
    t["kl_weight"] = field<float>([](RunConfig& c) -> auto& { return c.vae.kl_weight; });
    t["refiner_conv_depths"] = field<std::vector<int>>([](RunConfig& c) -> auto& { return c.refiner.conv_depths; });
    t["refiner_conv_strides"] = field<std::vector<int>>([](RunConfig& c) -> auto& { return c.refiner.conv_strides; });
    t["refiner_dense_widths"] = field<std::vector<int>>([](RunConfig& c) -> auto& { return c.refiner.dense_widths; });
    t["disc_kernels"] = field<std::vector<int>>([](RunConfig& c) -> auto& { return c.discriminator.kernels; });
    t["disc_strides"] = field<std::vector<int>>([](RunConfig& c) -> auto& { return c.discriminator.strides; });
    t["disc_dense_widths"] = field<std::vector<int>>([](RunConfig& c) -> auto& { return c.discriminator.dense_widths; });
    t["split_train"] = field<int>([](RunConfig& c) -> auto& { return c.splits.train; });
    t["split_test"] = field<int>([](RunConfig& c) -> auto& { return c.splits.test; });
    t["split_validation"] = field<int>([](RunConfig& c) -> auto& { return c.splits.validation; });
    t["baseline_steps"] = field<int>([](RunConfig& c) -> auto& { return c.baseline_steps; });
    t["refiner_steps"] = field<int>([](RunConfig& c) -> auto& { return c.refiner_steps; });
    t["batch_size"] = field<int>([](RunConfig& c) -> auto& { return c.batch_size; });
    t["lr"] = field<float>([](RunConfig& c) -> auto& { return c.lr; });
    t["alpha"] = {[](RunConfig& c, const json& v) {
                    c.alpha = v.get<float>();
                    c.refiner.blend_alpha = c.alpha;
                  },
                  [](const RunConfig& c) { return json(c.alpha); }};
    t["temperature"] = field<double>([](RunConfig& c) -> auto& { return c.temperature; });
    t["disc_epochs"] = field<int>([](RunConfig& c) -> auto& { return c.disc_epochs; });
    t["disc_batch_size"] = field<int>([](RunConfig& c) -> auto& { return c.disc_batch_size; });
    t["disc_per_class"] = field<int>([](RunConfig& c) -> auto& { return c.disc_per_class; });
    t["eval_per_class"] = field<int>([](RunConfig& c) -> auto& { return c.eval_per_class; });
    return t;
  }();
  return table;
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
  json j;
  j["preset"] = preset;
  for (const auto& [key, f] : fields()) j[key] = f.write(*this);
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("config must be a JSON object");
  std::string preset = "desk";
  if (j.contains("preset")) {
    if (!j["preset"].is_string()) throw DataError("config key 'preset' must be a string");
    preset = j["preset"].get<std::string>();
  }
  RunConfig c;
  if (preset == "desk") {
    c = RunConfig::desk();
  } else if (preset == "full") {
    c = RunConfig::full();
  } else {
    throw DataError("unknown preset '" + preset + "' (expected desk or full)");
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") continue;
    const auto it = fields().find(key);
    if (it == fields().end()) throw DataError("unknown config key '" + key + "'");
    try {
      it->second.read(c, value);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("config key '" + key + "' has the wrong type: " + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace strokeforge
