#pragma once

#include "nam/align/hmm.hpp"

namespace nam::align {

// Multiplies every duration by an integer factor (25 Hz -> 50 Hz uses 2).
Durations upsample_durations(const Durations& durations, int factor = 2);

// Repeats embedding row i durations[i] times, order preserved. Output has
// sum(durations) rows.
Matrix length_regulate(const Matrix& embeddings, const std::vector<int>& durations);

// Repeats every row `factor` times; the frame-rate counterpart of
// upsample_durations (25 Hz lip frames -> 50 Hz mel frames).
Matrix repeat_frames(const Matrix& frames, int factor = 2);

}  // namespace nam::align
