#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "doctest.h"
#include "gsf/audio.hpp"
#include "test_support.hpp"

using namespace gsf;
using namespace gsf::testing;

namespace {

std::vector<double> dft_power(const std::vector<double>& x, int n) {
  std::vector<double> out(static_cast<std::size_t>(n / 2 + 1));
  for (int k = 0; k <= n / 2; ++k) {
    std::complex<double> s(0.0, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(i) / n;
      s += x[i] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[static_cast<std::size_t>(k)] = std::norm(s);
  }
  return out;
}

audio::Waveform sine(double hz, std::size_t samples, double amplitude = 0.5) {
  audio::Waveform w;
  w.pcm.resize(samples);
  for (std::size_t i = 0; i < samples; ++i)
    w.pcm[i] = static_cast<std::int16_t>(std::lround(amplitude * 32767.0 * std::sin(2.0 * std::numbers::pi * hz * i / 16000.0)));
  return w;
}

}  // namespace

TEST_SUITE("audio") {
  TEST_CASE("fft matches a direct DFT") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (std::size_t n : {1u, 2u, 8u, 64u, 1024u}) {
      std::vector<std::complex<double>> a(n);
      for (auto& v : a) v = {d(rng), d(rng)};
      auto f = a;
      audio::fft_inplace(f);
      for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> s(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / static_cast<double>(n);
          s += a[i] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        CHECK(std::abs(f[k] - s) < 1e-9);
      }
    }
    std::vector<std::complex<double>> bad(12);
    CHECK_THROWS_AS(audio::fft_inplace(bad), std::invalid_argument);
  }

  TEST_CASE("mel scale round trip") {
    for (double hz : {0.0, 20.0, 440.0, 1000.0, 7999.0}) CHECK(audio::mel_to_hz(audio::hz_to_mel(hz)) == doctest::Approx(hz).epsilon(1e-12));
    CHECK(audio::hz_to_mel(700.0) == doctest::Approx(1127.0 * std::log(2.0)).epsilon(1e-15));
  }

  TEST_CASE("every filterbank channel covers at least one bin") {
    const audio::MelFilterbank bank({});
    CHECK(bank.channels() == 80);
    CHECK(bank.bins() == 513);
    for (int c = 0; c < bank.channels(); ++c) {
      double s = 0.0;
      for (double w : bank.weights(c)) s += w;
      CHECK(s > 0.0);
      CHECK(bank.lower_hz(c) < bank.center_hz(c));
      CHECK(bank.center_hz(c) < bank.upper_hz(c));
    }
  }

  TEST_CASE("frame count follows window and hop") {
    audio::Waveform w;
    for (std::size_t n : {1u, 399u, 400u, 559u, 560u, 16000u}) {
      w.pcm.assign(n, 0);
      const std::size_t expected = n < 400 ? 1 : 1 + (n - 400) / 160;
      CHECK(audio::audio_frontend(w).frames.dim(0) == expected);
    }
  }

  TEST_CASE("all-zero waveform gives log(eps) everywhere") {
    audio::Waveform w;
    w.pcm.assign(3200, 0);
    const auto f = audio::audio_frontend(w);
    for (double v : f.frames.data()) CHECK(v == std::log(1e-6));
  }

  TEST_CASE("unit impulse lights every channel") {
    audio::Waveform w;
    w.pcm.assign(400, 0);
    w.pcm[200] = 32767;
    const auto f = audio::audio_frontend(w);
    REQUIRE(f.frames.dim(0) == 1);
    const audio::MelFilterbank bank({});
    const double amp = audio::hamming_window(400)[200] * 32767.0 / 32768.0;
    for (std::size_t c = 0; c < 80; ++c) {
      CHECK(f.frames.at(0, c) > std::log(1e-6));
      double s = 0.0;
      for (double wt : bank.weights(static_cast<int>(c))) s += wt;
      CHECK(f.frames.at(0, c) == doctest::Approx(std::log(1e-6 + amp * amp * s)).epsilon(1e-12));
    }
  }

  TEST_CASE("a 1 kHz tone peaks in the channel around 1 kHz") {
    const auto w = sine(1000.0, 4000);
    const auto f = audio::audio_frontend(w);
    const audio::MelFilterbank bank({});
    const auto window = audio::hamming_window(400);
    std::vector<double> frame(400);
    for (std::size_t i = 0; i < 400; ++i) frame[i] = window[i] * w.pcm[160 * 3 + i] / 32768.0;
    const auto oracle = bank.apply(dft_power(frame, 1024));
    std::size_t best_oracle = 0, best = 0;
    for (std::size_t c = 1; c < 80; ++c) {
      if (oracle[c] > oracle[best_oracle]) best_oracle = c;
      if (f.frames.at(3, c) > f.frames.at(3, best)) best = c;
    }
    CHECK(best == best_oracle);
    CHECK(bank.lower_hz(static_cast<int>(best)) < 1000.0);
    CHECK(bank.upper_hz(static_cast<int>(best)) > 1000.0);
    for (std::size_t c = 0; c < 80; ++c)
      CHECK(f.frames.at(3, c) == doctest::Approx(std::log(1e-6 + oracle[c])).epsilon(1e-9));
  }

  TEST_CASE("front-end errors") {
    audio::Waveform w;
    CHECK_THROWS_AS(audio::audio_frontend(w), std::invalid_argument);
    w.pcm.assign(800, 1);
    w.sample_rate = 44100;
    CHECK_THROWS_AS(audio::audio_frontend(w), std::invalid_argument);
  }

  TEST_CASE("resample_linear examples") {
    std::mt19937_64 rng(2);
    const Tensor a = random_tensor({6, 4}, rng);
    CHECK(audio::resample_linear(a, 6) == a);

    const Tensor two({2, 2}, {1.0, -3.0, 5.0, 7.0});
    const Tensor up = audio::resample_linear(two, 3);
    CHECK(up.at(1, 0) == 3.0);
    CHECK(up.at(1, 1) == 2.0);

    for (std::size_t src : {1u, 2u, 5u, 13u})
      for (std::size_t dst : {1u, 2u, 3u, 7u, 20u}) {
        const Tensor x = random_tensor({src, 3}, rng);
        const Tensor y = audio::resample_linear(x, dst);
        for (std::size_t r = 0; r < dst; ++r) {
          const double pos = dst == 1 ? 0.0 : static_cast<double>(r) * static_cast<double>(src - 1) / static_cast<double>(dst - 1);
          const std::size_t i0 = std::min(static_cast<std::size_t>(pos), src - 1), i1 = std::min(i0 + 1, src - 1);
          const double frac = pos - static_cast<double>(i0);
          for (std::size_t c = 0; c < 3; ++c)
            CHECK(std::fabs(y.at(r, c) - ((1 - frac) * x.at(i0, c) + frac * x.at(i1, c))) < 1e-12);
        }
        for (std::size_t c = 0; c < 3; ++c) {
          CHECK(y.at(0, c) == x.at(0, c));
          if (dst > 1) CHECK(y.at(dst - 1, c) == x.at(src - 1, c));
        }
      }
  }

  TEST_CASE("resampling there and back keeps endpoints") {
    std::mt19937_64 rng(3);
    const Tensor x = random_tensor({9, 5}, rng);
    const Tensor back = audio::resample_linear(audio::resample_linear(x, 23), 9);
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(back.at(0, c) == x.at(0, c));
      CHECK(back.at(8, c) == x.at(8, c));
    }
    CHECK_THROWS_AS(audio::resample_linear(x, 0), std::invalid_argument);
  }

  TEST_CASE("wav round trip and format errors") {
    const auto dir = scratch_dir("wav");
    std::mt19937_64 rng(4);
    audio::Waveform w;
    std::uniform_int_distribution<int> d(-32768, 32767);
    for (int i = 0; i < 1001; ++i) w.pcm.push_back(static_cast<std::int16_t>(d(rng)));
    audio::write_wav((dir / "a.wav").string(), w);
    CHECK(audio::read_wav((dir / "a.wav").string()) == w);

    std::string bytes = slurp(dir / "a.wav");
    std::string stereo = bytes;
    stereo[22] = 2;
    spit(dir / "stereo.wav", stereo);
    CHECK_THROWS_WITH_AS(audio::read_wav((dir / "stereo.wav").string()), doctest::Contains("mono"), std::runtime_error);
    std::string rate = bytes;
    rate[24] = static_cast<char>(0x44);
    rate[25] = static_cast<char>(0xAC);
    spit(dir / "rate.wav", rate);
    CHECK_THROWS_WITH_AS(audio::read_wav((dir / "rate.wav").string()), doctest::Contains("16 kHz"), std::runtime_error);
    spit(dir / "short.wav", bytes.substr(0, 100));
    CHECK_THROWS_WITH_AS(audio::read_wav((dir / "short.wav").string()), doctest::Contains("byte offset"), std::runtime_error);
  }
}
