#pragma once

#include "nam/dsp/mel.hpp"

#include <string>

namespace nam::dsp {

// Feature file format "NAMF":
//   magic "NAMF", u32 rows, u32 cols, f32 little-endian row-major data,
//   24-byte trailer: f32 sample_rate, u32 hop, u32 window, u32 n_mels,
//   u32 format_version, u32 reserved.
// Readers reject unknown format versions.
constexpr std::uint32_t kFeatureFormatVersion = 1;

struct FeatureMeta {
  float sample_rate = 16000.0f;
  std::uint32_t hop = 320;
  std::uint32_t window = 800;
  std::uint32_t n_mels = 0;  // 0 when the rows are not mel frames
};

struct FeatureFile {
  Matrix data;  // rows x cols
  FeatureMeta meta;
};

void write_features(const std::string& path, const Matrix& data, const FeatureMeta& meta);
FeatureFile read_features(const std::string& path);

void write_mel(const std::string& path, const MelSpectrogram& mel);
MelSpectrogram read_mel(const std::string& path);

}  // namespace nam::dsp
