#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "gsf/tensor.hpp"

namespace gsf::audio {

inline constexpr int kSampleRate = 16000;

struct Waveform {
  int sample_rate = kSampleRate;
  std::vector<std::int16_t> pcm;

  bool operator==(const Waveform&) const = default;
};

// RIFF/WAVE, PCM16, mono, 16 kHz only.
Waveform read_wav(const std::string& path);
void write_wav(const std::string& path, const Waveform& wave);

struct FilterbankConfig {
  int sample_rate = kSampleRate;
  int window = 400;
  int hop = 160;
  int fft_size = 1024;
  int channels = 80;
  double f_min = 20.0;
  double f_max = 8000.0;
  double eps = 1e-6;
};

struct AudioFeatures {
  Tensor frames;  // [T_a, channels]
  int sample_rate = kSampleRate;
  int hop = 160;
};

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& data);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters spaced evenly on the mel scale.
class MelFilterbank {
 public:
  explicit MelFilterbank(const FilterbankConfig& config);

  int channels() const { return static_cast<int>(weights_.size()); }
  int bins() const { return bins_; }
  // Lower edge, center and upper edge of channel c in Hz.
  double lower_hz(int c) const { return edges_hz_[c]; }
  double center_hz(int c) const { return edges_hz_[c + 1]; }
  double upper_hz(int c) const { return edges_hz_[c + 2]; }
  // Dense weights over the fft_size/2+1 power-spectrum bins.
  const std::vector<double>& weights(int c) const { return weights_[c]; }

  std::vector<double> apply(const std::vector<double>& power) const;

 private:
  int bins_;
  std::vector<double> edges_hz_;
  std::vector<std::vector<double>> weights_;
};

std::vector<double> hamming_window(int length);

// Power spectrum of one windowed frame zero-padded to fft_size.
std::vector<double> frame_power_spectrum(const std::vector<double>& frame, int fft_size);

// log(eps + filterbank energy) per frame, window 400 / hop 160 by default.
// Waveforms shorter than one window yield a single zero-padded frame.
AudioFeatures audio_frontend(const Waveform& wave, const FilterbankConfig& config = {});

// Per-column linear interpolation over normalized time; endpoints are kept.
Tensor resample_linear(const Tensor& features, std::size_t target_frames);

}  // namespace gsf::audio
