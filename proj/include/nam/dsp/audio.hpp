#pragma once

#include "nam/common.hpp"

#include <string>

namespace nam::dsp {

// Mono audio, samples nominally in [-1, 1].
struct AudioBuffer {
  Vector samples;
  double sample_rate = 16000.0;

  int size() const { return static_cast<int>(samples.size()); }
  double duration() const { return samples.size() / sample_rate; }
};

// 16-bit PCM mono RIFF/WAVE only. Sample i maps to samples[i] = s_i / 32768.
AudioBuffer load_wav(const std::string& path);
void save_wav(const AudioBuffer& audio, const std::string& path);

// Windowed-sinc resampler: 32 zero-crossings per side, Hann window, cutoff at
// the lower of the two Nyquist frequencies. Output length ceil(n * ratio).
AudioBuffer resample(const AudioBuffer& audio, double target_rate);

}  // namespace nam::dsp
