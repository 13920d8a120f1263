#include "nam/dsp/stft.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>

namespace nam::dsp {

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

Vector hann_window(int length) {
  Vector w(length);
  for (int i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / length);
  }
  return w;
}

int stft_frame_count(int n_samples, int hop) {
  return static_cast<int>((static_cast<long long>(n_samples) + hop - 1) / hop);
}

namespace {

// Reflect-padded sample access (no edge repeat, librosa-style).
inline double padded_at(const Vector& x, long long i) {
  const long long n = x.size();
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return x[static_cast<Eigen::Index>(i)];
}

}  // namespace

CMatrix stft(const Vector& samples, const StftConfig& cfg) {
  if (cfg.hop <= 0 || cfg.window <= 0 || cfg.hop > cfg.window || cfg.n_fft < cfg.window) {
    throw ContractError("stft: bad config (hop " + std::to_string(cfg.hop) + ", window " +
                        std::to_string(cfg.window) + ", n_fft " + std::to_string(cfg.n_fft) + ")");
  }
  if (samples.size() < cfg.window) {
    throw ContractError("stft: signal shorter than one window (" +
                        std::to_string(samples.size()) + " < " + std::to_string(cfg.window) + ")");
  }

  const int T = stft_frame_count(static_cast<int>(samples.size()), cfg.hop);
  const Vector win = hann_window(cfg.window);
  const int half = cfg.window / 2;

  Eigen::FFT<double> fft;
  std::vector<double> frame(cfg.n_fft, 0.0);
  std::vector<std::complex<double>> spec(cfg.n_fft);
  CMatrix out(T, cfg.bins());
  for (int t = 0; t < T; ++t) {
    const long long start = static_cast<long long>(t) * cfg.hop - half;
    for (int i = 0; i < cfg.window; ++i) frame[i] = padded_at(samples, start + i) * win[i];
    std::fill(frame.begin() + cfg.window, frame.end(), 0.0);
    fft.fwd(spec, frame);
    for (int b = 0; b < cfg.bins(); ++b) out(t, b) = spec[b];
  }
  return out;
}

Vector istft(const CMatrix& spectrum, const StftConfig& cfg, int n_samples) {
  const int T = static_cast<int>(spectrum.rows());
  if (spectrum.cols() != cfg.bins()) {
    throw ContractError("istft: expected " + std::to_string(cfg.bins()) + " bins, got " +
                        std::to_string(spectrum.cols()));
  }
  const Vector win = hann_window(cfg.window);
  const int half = cfg.window / 2;
  const long long padded_len = static_cast<long long>(T - 1) * cfg.hop + cfg.window;

  Vector acc = Vector::Zero(static_cast<Eigen::Index>(padded_len));
  Vector norm = Vector::Zero(static_cast<Eigen::Index>(padded_len));

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> full(cfg.n_fft);
  std::vector<double> frame(cfg.n_fft);
  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < cfg.bins(); ++b) full[b] = spectrum(t, b);
    for (int b = cfg.bins(); b < cfg.n_fft; ++b) full[b] = std::conj(full[cfg.n_fft - b]);
    fft.inv(frame, full);
    const long long start = static_cast<long long>(t) * cfg.hop;
    for (int i = 0; i < cfg.window; ++i) {
      acc[static_cast<Eigen::Index>(start + i)] += frame[i] * win[i];
      norm[static_cast<Eigen::Index>(start + i)] += win[i] * win[i];
    }
  }

  Vector out(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const long long p = static_cast<long long>(i) + half;
    const double d = p < padded_len ? norm[static_cast<Eigen::Index>(p)] : 0.0;
    out[i] = d > 1e-12 ? acc[static_cast<Eigen::Index>(p)] / d : 0.0;
  }
  return out;
}

}  // namespace nam::dsp
