#pragma once

// Checkpoint file layout:
//   "SFCKPT1\n"                 8-byte version tag
//   u64 little-endian           manifest byte length
//   manifest                    JSON: {"meta": {...},
//                                      "tensors": [{"name", "shape", "offset"}, ...]}
//   payload                     raw little-endian float32; offsets are bytes
//                               from the start of the payload

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "strokeforge/optim.hpp"
#include "strokeforge/tensor.hpp"

namespace strokeforge {

inline constexpr char kCheckpointTag[] = "SFCKPT1\n";

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
  std::map<std::string, Tensor> as_map(const std::string& prefix = "") const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters under "param/<name>", Adam moments under "adam.m/<name>" and
/// "adam.v/<name>", the Adam step counter in meta["adam_step"].
Checkpoint make_checkpoint(const ParameterStore& params, const AdamState* adam,
                           nlohmann::json meta);
void restore_parameters(const Checkpoint& ckpt, ParameterStore& params);
void restore_adam(const Checkpoint& ckpt, AdamState& adam);

}  // namespace strokeforge
