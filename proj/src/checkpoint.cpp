#include "strokeforge/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace strokeforge {

namespace {

constexpr std::size_t kTagSize = sizeof(kCheckpointTag) - 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f32(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float get_f32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

std::map<std::string, Tensor> Checkpoint::as_map(const std::string& prefix) const {
  std::map<std::string, Tensor> out;
  for (const auto& [n, t] : tensors)
    if (n.rfind(prefix, 0) == 0) out.emplace(n.substr(prefix.size()), t);
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["meta"] = ckpt.meta;
  manifest["tensors"] = nlohmann::json::array();
  std::string payload;
  for (const auto& [name, t] : ckpt.tensors) {
    manifest["tensors"].push_back(
        {{"name", name}, {"shape", t.shape()}, {"offset", payload.size()}});
    for (float v : t.data()) put_f32(payload, v);
  }
  const std::string text = manifest.dump();
  std::string header(kCheckpointTag, kTagSize);
  put_u64(header, text.size());

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kTagSize + 8 || std::memcmp(raw, kCheckpointTag, kTagSize) != 0) {
    throw DataError(path.string() + " is not a SFCKPT1 checkpoint");
  }
  const std::uint64_t manifest_len = get_u64(raw + kTagSize);
  const std::size_t payload_start = kTagSize + 8 + manifest_len;
  if (payload_start > bytes.size()) throw DataError("truncated checkpoint " + path.string());

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(kTagSize + 8, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint manifest in " + path.string() + ": " + e.what());
  }

  Checkpoint ckpt;
  ckpt.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& entry : manifest.at("tensors")) {
    Shape shape = entry.at("shape").get<Shape>();
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t n = shape_size(shape);
    if (payload_start + offset + 4 * n > bytes.size()) {
      throw DataError("tensor " + entry.at("name").get<std::string>() + " overruns " +
                      path.string());
    }
    std::vector<float> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = get_f32(raw + payload_start + offset + 4 * i);
    ckpt.tensors.emplace_back(entry.at("name").get<std::string>(),
                              Tensor(std::move(shape), std::move(data)));
  }
  return ckpt;
}

Checkpoint make_checkpoint(const ParameterStore& params, const AdamState* adam,
                           nlohmann::json meta) {
  Checkpoint ckpt;
  ckpt.meta = std::move(meta);
  for (const auto& p : params.all()) ckpt.tensors.emplace_back("param/" + p.name(), p.value());
  if (adam) {
    ckpt.meta["adam_step"] = adam->step;
    for (const auto& [n, t] : adam->m) ckpt.tensors.emplace_back("adam.m/" + n, t);
    for (const auto& [n, t] : adam->v) ckpt.tensors.emplace_back("adam.v/" + n, t);
  }
  return ckpt;
}

void restore_parameters(const Checkpoint& ckpt, ParameterStore& params) {
  params.assign(ckpt.as_map("param/"));
}

void restore_adam(const Checkpoint& ckpt, AdamState& adam) {
  adam.m = ckpt.as_map("adam.m/");
  adam.v = ckpt.as_map("adam.v/");
  adam.step = ckpt.meta.value("adam_step", 0L);
}

}  // namespace strokeforge
