#include "nam/dsp/audio.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace nam::dsp {

namespace {

template <typename T>
T read_raw(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError(std::string("wav: truncated while reading ") + what);
  return v;
}

template <typename T>
void write_raw(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

AudioBuffer load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("wav: cannot open " + path);

  char riff[4], wave[4];
  in.read(riff, 4);
  read_raw<std::uint32_t>(in, "riff size");
  in.read(wave, 4);
  if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0) {
    throw IoError("wav: malformed header in " + path);
  }

  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<std::int16_t> pcm;

  while (in.peek() != EOF) {
    char id[4];
    in.read(id, 4);
    if (!in) break;
    const auto size = read_raw<std::uint32_t>(in, "chunk size");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      const auto format = read_raw<std::uint16_t>(in, "format tag");
      channels = read_raw<std::uint16_t>(in, "channels");
      rate = read_raw<std::uint32_t>(in, "sample rate");
      read_raw<std::uint32_t>(in, "byte rate");
      read_raw<std::uint16_t>(in, "block align");
      bits = read_raw<std::uint16_t>(in, "bits per sample");
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      if (format != 1) throw IoError("wav: unsupported format tag " + std::to_string(format));
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw IoError("wav: data chunk before fmt in " + path);
      pcm.resize(size / 2);
      in.read(reinterpret_cast<char*>(pcm.data()), size);
      if (!in) throw IoError("wav: truncated data chunk in " + path);
      break;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);  // chunks are word-aligned
    }
  }

  if (!have_fmt) throw IoError("wav: missing fmt chunk in " + path);
  if (channels != 1) throw IoError("wav: expected mono, got " + std::to_string(channels) +
                                   " channels in " + path);
  if (bits != 16) throw IoError("wav: expected 16-bit PCM, got " + std::to_string(bits) +
                                " bits in " + path);

  AudioBuffer out;
  out.sample_rate = rate;
  out.samples.resize(static_cast<Eigen::Index>(pcm.size()));
  for (std::size_t i = 0; i < pcm.size(); ++i) out.samples[i] = pcm[i] / 32768.0;
  return out;
}

void save_wav(const AudioBuffer& audio, const std::string& path) {
  if (!audio.samples.allFinite()) throw ContractError("save_wav: non-finite samples");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("wav: cannot write " + path);

  const std::uint32_t n = static_cast<std::uint32_t>(audio.samples.size());
  const std::uint32_t data_size = n * 2;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));

  out.write("RIFF", 4);
  write_raw<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_raw<std::uint32_t>(out, 16);
  write_raw<std::uint16_t>(out, 1);  // PCM
  write_raw<std::uint16_t>(out, 1);  // mono
  write_raw<std::uint32_t>(out, rate);
  write_raw<std::uint32_t>(out, rate * 2);
  write_raw<std::uint16_t>(out, 2);
  write_raw<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_raw<std::uint32_t>(out, data_size);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double clamped = std::max(-1.0, std::min(1.0, audio.samples[i]));
    const long v = std::lround(clamped * 32768.0);
    const std::int16_t s = static_cast<std::int16_t>(std::max(-32768l, std::min(32767l, v)));
    write_raw<std::int16_t>(out, s);
  }
  if (!out) throw IoError("wav: write failed for " + path);
}

AudioBuffer resample(const AudioBuffer& audio, double target_rate) {
  if (target_rate <= 0) throw ContractError("resample: target rate must be positive");
  if (audio.sample_rate <= 0) throw ContractError("resample: source rate must be positive");
  if (target_rate == audio.sample_rate) return audio;

  const double ratio = target_rate / audio.sample_rate;
  const int n = audio.size();
  const int out_len = static_cast<int>(std::ceil(n * ratio));
  const double cutoff = std::min(1.0, ratio);  // relative to source Nyquist
  constexpr int kZeroCrossings = 32;
  const double support = kZeroCrossings / cutoff;

  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples = Vector::Zero(out_len);
  for (int j = 0; j < out_len; ++j) {
    const double center = j / ratio;
    const int k0 = std::max(0, static_cast<int>(std::ceil(center - support)));
    const int k1 = std::min(n - 1, static_cast<int>(std::floor(center + support)));
    double acc = 0.0;
    for (int k = k0; k <= k1; ++k) {
      const double s = (k - center) * cutoff;
      const double sinc = s == 0.0 ? 1.0 : std::sin(M_PI * s) / (M_PI * s);
      const double u = s / kZeroCrossings;  // in [-1, 1]
      const double hann = 0.5 * (1.0 + std::cos(M_PI * u));
      acc += audio.samples[k] * cutoff * sinc * hann;
    }
    out.samples[j] = acc;
  }
  return out;
}

}  // namespace nam::dsp
