#include "nam/dsp/mel.hpp"

#include <cmath>

namespace nam::dsp {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

// n_mels + 2 corner frequencies in Hz, equally spaced in mel.
Vector corner_frequencies(int n_mels, double sample_rate) {
  const double mel_max = hz_to_mel(sample_rate / 2.0);
  Vector corners(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    corners[i] = mel_to_hz(mel_max * i / (n_mels + 1));
  }
  return corners;
}

}  // namespace

Vector mel_center_frequencies(int n_mels, double sample_rate) {
  const Vector corners = corner_frequencies(n_mels, sample_rate);
  return corners.segment(1, n_mels);
}

Matrix mel_filterbank(int n_mels, int n_fft, double sample_rate) {
  if (n_mels < 1) throw ContractError("mel_filterbank: n_mels must be >= 1");
  const int bins = n_fft / 2 + 1;
  const Vector corners = corner_frequencies(n_mels, sample_rate);
  Matrix fb = Matrix::Zero(n_mels, bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = corners[m], center = corners[m + 1], hi = corners[m + 2];
    for (int b = 0; b < bins; ++b) {
      const double f = b * sample_rate / n_fft;
      if (f <= lo || f >= hi) continue;
      fb(m, b) = f <= center ? (f - lo) / (center - lo) : (hi - f) / (hi - center);
    }
  }
  return fb;
}

MelSpectrogram mel_spectrogram(const AudioBuffer& audio, const MelParams& params) {
  if (audio.size() < params.window) {
    throw ContractError("mel_spectrogram: audio shorter than one window (" +
                        std::to_string(audio.size()) + " < " + std::to_string(params.window) +
                        " samples)");
  }
  const StftConfig cfg = params.stft();
  const CMatrix spec = stft(audio.samples, cfg);
  const Matrix magnitude = spec.cwiseAbs();
  const Matrix fb = mel_filterbank(params.n_mels, cfg.n_fft, params.sample_rate);
  Matrix mel = magnitude * fb.transpose();  // frames x n_mels
  mel = mel.array().max(params.floor).log();
  return MelSpectrogram{std::move(mel), params};
}

}  // namespace nam::dsp
