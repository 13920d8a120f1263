#pragma once

#include "nam/numerics/tensor.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace nam::io {

// Checkpoint container: JSON metadata plus named tensor blocks.
// Layout: magic "NAMC", u8 format version, u32 json length, json bytes,
// u32 tensor count, then per tensor u32 name length, name bytes, "NAMT" block.
// Readers reject unknown format versions.
constexpr std::uint8_t kCheckpointFormatVersion = 1;

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, numerics::Tensor>> tensors;

  const numerics::Tensor& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace nam::io
