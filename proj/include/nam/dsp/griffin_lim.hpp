#pragma once

#include "nam/dsp/mel.hpp"

#include <vector>

namespace nam::dsp {

// Phase reconstruction from a log-mel spectrogram: the mel filterbank is
// pseudo-inverted to a linear magnitude target, then iterated STFT->ISTFT
// phase projection. Output length is frame_count * hop. Deterministic (zero
// initial phase). If `convergence` is given it receives the spectral
// convergence error per iteration, a non-increasing sequence.
AudioBuffer griffin_lim(const MelSpectrogram& mel, int iterations,
                        std::vector<double>* convergence = nullptr);

}  // namespace nam::dsp
