#include "nam/io/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace nam::io {

const numerics::Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw IoError("checkpoint has no tensor named '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return true;
  }
  return false;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot write " + path);
  out.write("NAMC", 4);
  out.write(reinterpret_cast<const char*>(&kCheckpointFormatVersion), 1);
  const std::string json = checkpoint.meta.dump();
  const std::uint32_t json_len = static_cast<std::uint32_t>(json.size());
  out.write(reinterpret_cast<const char*>(&json_len), 4);
  out.write(json.data(), json_len);
  const std::uint32_t count = static_cast<std::uint32_t>(checkpoint.tensors.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (const auto& [name, tensor] : checkpoint.tensors) {
    const std::uint32_t name_len = static_cast<std::uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&name_len), 4);
    out.write(name.data(), name_len);
    numerics::write_tensor(out, tensor);
  }
  if (!out) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "NAMC", 4) != 0) {
    throw IoError("checkpoint: bad magic in " + path);
  }
  std::uint8_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 1);
  if (version != kCheckpointFormatVersion) {
    throw IoError("checkpoint: unknown format version " + std::to_string(version) + " in " + path);
  }
  std::uint32_t json_len = 0;
  in.read(reinterpret_cast<char*>(&json_len), 4);
  std::string json(json_len, '\0');
  in.read(json.data(), json_len);
  if (!in) throw IoError("checkpoint: truncated metadata in " + path);

  Checkpoint ckpt;
  try {
    ckpt.meta = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint: bad metadata in " + path + ": " + e.what());
  }
  std::uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), 4);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError("checkpoint: truncated tensor name in " + path);
    ckpt.tensors.emplace_back(std::move(name), numerics::read_tensor(in));
  }
  return ckpt;
}

}  // namespace nam::io
