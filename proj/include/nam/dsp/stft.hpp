#pragma once

#include "nam/common.hpp"

#include <complex>

namespace nam::dsp {

using CMatrix = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic,
                              Eigen::RowMajor>;

struct StftConfig {
  int hop = 320;
  int window = 800;
  int n_fft = 1024;  // >= window; frames are zero-padded up to this length

  int bins() const { return n_fft / 2 + 1; }
};

int next_pow2(int n);

// Periodic Hann window of the given length.
Vector hann_window(int length);

// Centered STFT with reflect padding: frame t is centered on sample t*hop and
// the frame count is exactly ceil(n / hop). Output is frames x bins.
CMatrix stft(const Vector& samples, const StftConfig& cfg);

// Weighted overlap-add inverse; returns exactly `n_samples` samples (the
// center-padding is trimmed).
Vector istft(const CMatrix& spectrum, const StftConfig& cfg, int n_samples);

int stft_frame_count(int n_samples, int hop);

}  // namespace nam::dsp
