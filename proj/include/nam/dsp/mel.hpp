#pragma once

#include "nam/dsp/audio.hpp"
#include "nam/dsp/stft.hpp"

namespace nam::dsp {

struct MelParams {
  int n_mels = 80;
  int hop = 320;
  int window = 800;
  double sample_rate = 16000.0;
  double floor = 1e-5;  // magnitude floor before the natural log

  StftConfig stft() const { return StftConfig{hop, window, next_pow2(window)}; }
};

// T x n_mels natural-log mel magnitudes. With the default 16 kHz / hop 320
// framing one second gives exactly 50 frames.
struct MelSpectrogram {
  Matrix frames;
  MelParams params;

  int frame_count() const { return static_cast<int>(frames.rows()); }
};

// Triangular filters with peaks equally spaced on the HTK mel scale over
// [0, sample_rate/2]; rows are filters, columns FFT bins. Adjacent filters
// tile: no bin's total weight exceeds 1.
Matrix mel_filterbank(int n_mels, int n_fft, double sample_rate);

// Peak (center) frequency of each filter in Hz.
Vector mel_center_frequencies(int n_mels, double sample_rate);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

MelSpectrogram mel_spectrogram(const AudioBuffer& audio, const MelParams& params = {});

}  // namespace nam::dsp
