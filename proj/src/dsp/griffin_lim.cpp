#include "nam/dsp/griffin_lim.hpp"

#include <cmath>

namespace nam::dsp {

AudioBuffer griffin_lim(const MelSpectrogram& mel, int iterations,
                        std::vector<double>* convergence) {
  if (iterations <= 0) throw ContractError("griffin_lim: iterations must be >= 1");
  const MelParams& p = mel.params;
  const StftConfig cfg = p.stft();
  const int T = mel.frame_count();
  const int n_samples = T * p.hop;

  // Linear magnitude target from the pseudo-inverse filterbank, clamped >= 0.
  const Matrix fb = mel_filterbank(p.n_mels, cfg.n_fft, p.sample_rate);
  const Matrix pinv = fb.completeOrthogonalDecomposition().pseudoInverse();
  const Matrix mel_mag = mel.frames.array().exp();
  Matrix target = (mel_mag * pinv.transpose()).cwiseMax(0.0);  // frames x bins
  const double target_norm = std::max(target.norm(), 1e-12);

  CMatrix spec = target.cast<std::complex<double>>();  // zero phase
  Vector signal = istft(spec, cfg, n_samples);
  if (convergence != nullptr) convergence->clear();

  for (int it = 0; it < iterations; ++it) {
    const CMatrix estimate = stft(signal, cfg);
    if (convergence != nullptr) {
      const Matrix est_mag = estimate.cwiseAbs();
      convergence->push_back((est_mag - target).norm() / target_norm);
    }
    // Keep the estimated phase, restore the target magnitude.
    for (int t = 0; t < T; ++t) {
      for (int b = 0; b < cfg.bins(); ++b) {
        const double a = std::abs(estimate(t, b));
        spec(t, b) = a > 1e-12 ? estimate(t, b) / a * target(t, b)
                               : std::complex<double>(target(t, b), 0.0);
      }
    }
    signal = istft(spec, cfg, n_samples);
  }

  AudioBuffer out;
  out.sample_rate = p.sample_rate;
  out.samples = signal;
  return out;
}

}  // namespace nam::dsp
