#include "gsf/audio.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "binary_io.hpp"

namespace gsf::audio {

Waveform read_wav(const std::string& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes, "wav '" + path + "'");
  r.expect_magic("RIFF");
  r.read<std::uint32_t>("riff size");
  r.expect_magic("WAVE");
  bool have_fmt = false;
  Waveform wave;
  while (r.remaining() > 0) {
    const std::string id = r.read_string(4, "chunk id");
    const auto size = r.read<std::uint32_t>("chunk size");
    if (id == "fmt ") {
      if (size < 16) r.fail("fmt chunk too small");
      const auto format = r.read<std::uint16_t>("audio format");
      const auto channels = r.read<std::uint16_t>("channel count");
      const auto rate = r.read<std::uint32_t>("sample rate");
      r.read<std::uint32_t>("byte rate");
      r.read<std::uint16_t>("block align");
      const auto bits = r.read<std::uint16_t>("bits per sample");
      if (format != 1 || bits != 16) r.fail("only PCM16 is supported");
      if (channels != 1) r.fail("only mono is supported, got " + std::to_string(channels) + " channels");
      if (rate != kSampleRate) r.fail("only 16 kHz is supported, got " + std::to_string(rate) + " Hz");
      wave.sample_rate = static_cast<int>(rate);
      r.read_string(size - 16, "fmt extension");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) r.fail("data chunk before fmt chunk");
      r.need(size, "sample data");
      wave.pcm.resize(size / 2);
      for (auto& s : wave.pcm) s = r.read<std::int16_t>("sample");
      if (size % 2) r.read<std::uint8_t>("pad");
      return wave;
    } else {
      r.read_string(size + (size % 2), "chunk body");
    }
  }
  r.fail("no data chunk");
}

void write_wav(const std::string& path, const Waveform& wave) {
  if (wave.sample_rate != kSampleRate) throw std::invalid_argument("write_wav: only 16 kHz is supported");
  const auto data_bytes = static_cast<std::uint32_t>(wave.pcm.size() * 2);
  detail::ByteWriter w;
  w.write_string("RIFF");
  w.write<std::uint32_t>(36 + data_bytes);
  w.write_string("WAVE");
  w.write_string("fmt ");
  w.write<std::uint32_t>(16);
  w.write<std::uint16_t>(1);
  w.write<std::uint16_t>(1);
  w.write<std::uint32_t>(kSampleRate);
  w.write<std::uint32_t>(kSampleRate * 2);
  w.write<std::uint16_t>(2);
  w.write<std::uint16_t>(16);
  w.write_string("data");
  w.write<std::uint32_t>(data_bytes);
  for (auto s : wave.pcm) w.write<std::int16_t>(s);
  detail::write_file(path, w.bytes());
}

void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft: size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

double hz_to_mel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

MelFilterbank::MelFilterbank(const FilterbankConfig& config) : bins_(config.fft_size / 2 + 1) {
  if (config.channels < 1) throw std::invalid_argument("MelFilterbank: need at least one channel");
  if (!(config.f_min >= 0.0 && config.f_max > config.f_min && config.f_max <= config.sample_rate / 2.0))
    throw std::invalid_argument("MelFilterbank: invalid frequency range");
  const double mel_lo = hz_to_mel(config.f_min), mel_hi = hz_to_mel(config.f_max);
  const int n_edges = config.channels + 2;
  std::vector<double> edges_mel(n_edges);
  for (int i = 0; i < n_edges; ++i) {
    edges_mel[i] = mel_lo + (mel_hi - mel_lo) * i / (n_edges - 1);
    edges_hz_.push_back(mel_to_hz(edges_mel[i]));
  }
  const double bin_hz = static_cast<double>(config.sample_rate) / config.fft_size;
  weights_.assign(config.channels, std::vector<double>(bins_, 0.0));
  for (int c = 0; c < config.channels; ++c) {
    const double l = edges_mel[c], m = edges_mel[c + 1], u = edges_mel[c + 2];
    for (int k = 0; k < bins_; ++k) {
      const double mel = hz_to_mel(k * bin_hz);
      if (mel > l && mel <= m)
        weights_[c][k] = (mel - l) / (m - l);
      else if (mel > m && mel < u)
        weights_[c][k] = (u - mel) / (u - m);
    }
  }
}

std::vector<double> MelFilterbank::apply(const std::vector<double>& power) const {
  if (static_cast<int>(power.size()) != bins_) throw std::invalid_argument("MelFilterbank: spectrum length mismatch");
  std::vector<double> out(weights_.size(), 0.0);
  for (std::size_t c = 0; c < weights_.size(); ++c)
    for (int k = 0; k < bins_; ++k) out[c] += weights_[c][k] * power[k];
  return out;
}

std::vector<double> hamming_window(int length) {
  std::vector<double> w(length);
  for (int i = 0; i < length; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (length - 1));
  return w;
}

std::vector<double> frame_power_spectrum(const std::vector<double>& frame, int fft_size) {
  if (static_cast<int>(frame.size()) > fft_size) throw std::invalid_argument("frame longer than fft size");
  std::vector<std::complex<double>> buf(fft_size);
  for (std::size_t i = 0; i < frame.size(); ++i) buf[i] = frame[i];
  fft_inplace(buf);
  std::vector<double> power(fft_size / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(buf[k]);
  return power;
}

AudioFeatures audio_frontend(const Waveform& wave, const FilterbankConfig& config) {
  if (wave.sample_rate != config.sample_rate)
    throw std::invalid_argument("audio_frontend: sample rate " + std::to_string(wave.sample_rate) +
                                " Hz unsupported, resample to " + std::to_string(config.sample_rate) + " Hz");
  if (wave.pcm.empty()) throw std::invalid_argument("audio_frontend: empty waveform");
  const MelFilterbank bank(config);
  const auto window = hamming_window(config.window);
  const std::size_t n = wave.pcm.size();
  const std::size_t win = static_cast<std::size_t>(config.window), hop = static_cast<std::size_t>(config.hop);
  const std::size_t frames = n < win ? 1 : 1 + (n - win) / hop;

  AudioFeatures out;
  out.sample_rate = config.sample_rate;
  out.hop = config.hop;
  out.frames = Tensor({frames, static_cast<std::size_t>(config.channels)});
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<double> frame(win, 0.0);
    for (std::size_t i = 0; i < win && t * hop + i < n; ++i)
      frame[i] = window[i] * (wave.pcm[t * hop + i] / 32768.0);
    const auto energies = bank.apply(frame_power_spectrum(frame, config.fft_size));
    for (std::size_t c = 0; c < energies.size(); ++c) out.frames.at(t, c) = std::log(config.eps + energies[c]);
  }
  return out;
}

Tensor resample_linear(const Tensor& features, std::size_t target_frames) {
  if (features.rank() != 2 || features.dim(0) == 0) throw std::invalid_argument("resample_linear: expected [T, F] with T >= 1");
  if (target_frames == 0) throw std::invalid_argument("resample_linear: target length must be positive");
  const std::size_t src = features.dim(0), cols = features.dim(1);
  if (src == target_frames) return features;
  Tensor out({target_frames, cols});
  for (std::size_t r = 0; r < target_frames; ++r) {
    const double s = target_frames == 1 ? 0.0 : static_cast<double>(r) / static_cast<double>(target_frames - 1);
    const double pos = s * static_cast<double>(src - 1);
    std::size_t i0 = static_cast<std::size_t>(std::floor(pos));
    if (i0 >= src - 1) i0 = src > 1 ? src - 2 : 0;
    const std::size_t i1 = src > 1 ? i0 + 1 : 0;
    const double frac = src > 1 ? pos - static_cast<double>(i0) : 0.0;
    for (std::size_t c = 0; c < cols; ++c)
      out.at(r, c) = frac == 0.0 ? features.at(i0, c)
                                 : (frac == 1.0 ? features.at(i1, c)
                                                : (1.0 - frac) * features.at(i0, c) + frac * features.at(i1, c));
  }
  return out;
}

}  // namespace gsf::audio
