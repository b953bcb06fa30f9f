#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "msr/common.hpp"
#include "msr/dsp/mel.hpp"
#include "msr/dsp/stft.hpp"
#include "msr/dsp/wav_io.hpp"
#include "msr/loss/losses.hpp"
#include "support.hpp"

using namespace msr;
namespace fs = std::filesystem;

namespace {
const dsp::StftConfig kSmall{256, 64, dsp::WindowKind::Hann, true};
}

TEST_CASE("stft of zero waveform is all zeros") {
  dsp::Waveform w(1, 4096, kSampleRate);
  const auto spec = dsp::stft(w, kSmall);
  for (const auto& v : spec.data) CHECK(std::abs(v) == 0.0f);
}

TEST_CASE("stft frame count follows the documented formula") {
  dsp::Waveform w(1, 1000, kSampleRate);
  const auto spec = dsp::stft(w, kSmall);
  CHECK(spec.frames == 1000 / kSmall.hop + 1);
  CHECK(spec.bins == kSmall.n_fft / 2 + 1);

  dsp::StftConfig nc = kSmall;
  nc.center = false;
  const auto spec2 = dsp::stft(w, nc);
  CHECK(spec2.frames == (1000 - nc.n_fft) / nc.hop + 1);
}

TEST_CASE("pure sine at a bin frequency concentrates there (rect window)") {
  // frame-aligned sine at bin k: energy outside bin k below 1e-9 of the peak
  const int n_fft = 256;
  const int k = 8;
  const double freq = static_cast<double>(k) * kSampleRate / n_fft;
  dsp::StftConfig cfg{n_fft, n_fft, dsp::WindowKind::Rect, false};
  const auto wave = msrtest::sine_wave(freq, 1, n_fft, kSampleRate, 1.0);
  const auto spec = dsp::stft(wave, cfg);
  REQUIRE(spec.frames == 1);
  const double peak = std::abs(std::complex<double>(spec.at(0, 0, k)));
  CHECK(peak > 1.0);
  for (int b = 0; b < spec.bins; ++b) {
    if (b == k) continue;
    CHECK(std::abs(std::complex<double>(spec.at(0, 0, b))) <= 1e-9 * peak);
  }
  // and the kept bins match the direct DFT oracle
  std::vector<double> frame(wave.channel(0).begin(), wave.channel(0).end());
  const auto oracle = msrtest::direct_dft(frame);
  for (int b = 0; b < spec.bins; ++b) {
    CHECK(std::abs(std::complex<double>(spec.at(0, 0, b)) - oracle[b]) < 1e-6);
  }
}

TEST_CASE("stft is linear") {
  const auto x = msrtest::seeded_noise(2, 3000, kSampleRate, 11);
  const auto y = msrtest::seeded_noise(2, 3000, kSampleRate, 12);
  dsp::Waveform combo = x;
  for (size_t i = 0; i < combo.samples.size(); ++i)
    combo.samples[i] = 2.0f * x.samples[i] + 0.5f * y.samples[i];
  const auto sx = dsp::stft(x, kSmall);
  const auto sy = dsp::stft(y, kSmall);
  const auto sc = dsp::stft(combo, kSmall);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < sc.data.size(); ++i) {
    const auto expect = 2.0f * sx.data[i] + 0.5f * sy.data[i];
    num += std::norm(std::complex<double>(sc.data[i]) - std::complex<double>(expect));
    den += std::norm(std::complex<double>(expect));
  }
  CHECK(std::sqrt(num / (den + 1e-30)) < 1e-6);
}

TEST_CASE("istft round trip reaches 60 dB on seeded noise") {
  for (const auto& cfg : loss::default_mrstft_configs()) {
    const auto x = msrtest::seeded_noise(2, kSampleRate, kSampleRate, 21);
    const auto back = dsp::istft(dsp::stft(x, cfg));
    REQUIRE(back.num_frames() == x.num_frames());
    CHECK(msrtest::si_snr_between(back, x) >= 60.0);
  }
}

TEST_CASE("istft of a 440 Hz sine matches elementwise") {
  const auto x = msrtest::sine_wave(440.0, 1, kSampleRate / 2, kSampleRate);
  const auto back = dsp::istft(dsp::stft(x, dsp::separator_stft()));
  REQUIRE(back.num_frames() == x.num_frames());
  float max_err = 0.0f;
  for (size_t i = 0; i < x.samples.size(); ++i)
    max_err = std::max(max_err, std::fabs(back.samples[i] - x.samples[i]));
  CHECK(max_err < 1e-6f);
}

TEST_CASE("istft of zeros is silence") {
  auto spec = dsp::stft(msrtest::seeded_noise(1, 8000, kSampleRate, 3), kSmall);
  std::fill(spec.data.begin(), spec.data.end(), std::complex<float>(0, 0));
  const auto out = dsp::istft(spec);
  for (float s : out.samples) CHECK(s == 0.0f);
}

TEST_CASE("istft rejects a bin-count mismatch") {
  auto spec = dsp::stft(msrtest::seeded_noise(1, 8000, kSampleRate, 3), kSmall);
  spec.config.n_fft = 512;  // bins no longer match
  CHECK_THROWS_AS(dsp::istft(spec), ShapeError);
}

TEST_CASE("stft error paths") {
  CHECK_THROWS_AS(dsp::stft(dsp::Waveform{}, kSmall), ShapeError);
  dsp::StftConfig bad = kSmall;
  bad.n_fft = 300;  // not a power of two
  CHECK_THROWS_AS(dsp::stft(msrtest::seeded_noise(1, 4096, kSampleRate, 1), bad),
                  ConfigError);
  bad = kSmall;
  bad.hop = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  // hann at hop == n_fft leaves coverage gaps
  bad = {256, 256, dsp::WindowKind::Hann, true};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("per-frame energy matches the window-scaled Parseval identity") {
  // unnormalized DFT: sum_k c_k |X_k|^2 == n_fft * sum_n (w x)_n^2
  const auto x = msrtest::seeded_noise(1, 2048, kSampleRate, 33);
  dsp::StftConfig cfg{512, 256, dsp::WindowKind::Hann, false};
  const auto spec = dsp::stft(x, cfg);
  const auto w = dsp::make_window(cfg.window, cfg.n_fft);
  for (int64_t t = 0; t < spec.frames; ++t) {
    double lhs = 0.0;
    for (int k = 0; k < spec.bins; ++k) {
      const double c = (k == 0 || k == spec.bins - 1) ? 1.0 : 2.0;
      lhs += c * std::norm(std::complex<double>(spec.at(0, t, k)));
    }
    double rhs = 0.0;
    for (int i = 0; i < cfg.n_fft; ++i) {
      const double v = w[i] * x.channel(0)[t * cfg.hop + i];
      rhs += v * v;
    }
    rhs *= cfg.n_fft;
    CHECK(std::fabs(lhs - rhs) <= 1e-4 * std::max(1.0, rhs));
  }
}

TEST_CASE("mel filterbank basics") {
  SUBCASE("single triangle spans the range, nonnegative") {
    const auto fb = dsp::mel_filterbank(1, 64, 16000, 0.0, 8000.0);
    REQUIRE(fb.size() == 1);
    double sum = 0.0;
    for (float v : fb[0]) {
      CHECK(v >= 0.0f);
      sum += v;
    }
    CHECK(sum > 0.0);
  }
  SUBCASE("bins strictly inside (f_min, f_max) are covered") {
    const int n_fft = 128, sr = 16000;
    const auto fb = dsp::mel_filterbank(6, n_fft, sr, 0.0, 8000.0);
    for (int k = 1; k < n_fft / 2; ++k) {
      double col = 0.0;
      for (const auto& row : fb) col += row[k];
      CHECK(col > 0.0);
    }
  }
  SUBCASE("tiny case matches the hand-computed mel mapping") {
    const int n_mels = 4, n_fft = 16, sr = 16000;
    const auto fb = dsp::mel_filterbank(n_mels, n_fft, sr, 0.0, 8000.0);
    auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
    auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
    const double mel_hi = mel(8000.0);
    std::vector<double> edges(n_mels + 2);
    for (int i = 0; i < n_mels + 2; ++i) edges[i] = hz(mel_hi * i / (n_mels + 1));
    for (int m = 0; m < n_mels; ++m)
      for (int k = 0; k <= n_fft / 2; ++k) {
        const double f = static_cast<double>(k) * sr / n_fft;
        double expect = 0.0;
        if (f > edges[m] && f < edges[m + 2])
          expect = f <= edges[m + 1]
                       ? (f - edges[m]) / (edges[m + 1] - edges[m])
                       : (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
        CHECK(std::fabs(fb[m][k] - expect) < 1e-6);
      }
  }
  SUBCASE("invalid ranges are rejected") {
    CHECK_THROWS_AS(dsp::mel_filterbank(4, 64, 16000, -1.0, 8000.0), ConfigError);
    CHECK_THROWS_AS(dsp::mel_filterbank(4, 64, 16000, 5000.0, 4000.0), ConfigError);
    CHECK_THROWS_AS(dsp::mel_filterbank(4, 64, 16000, 0.0, 9000.0), ConfigError);
    CHECK_THROWS_AS(dsp::mel_filterbank(0, 64, 16000, 0.0, 8000.0), ConfigError);
  }
}

TEST_CASE("peak_normalize") {
  auto w = msrtest::sine_wave(100.0, 1, 1000, kSampleRate, 0.5);
  const auto out = dsp::peak_normalize(w, -1.0);
  CHECK(dsp::peak_abs(out) == doctest::Approx(0.891250938).epsilon(1e-6));

  dsp::Waveform silent(2, 500, kSampleRate);
  const auto out2 = dsp::peak_normalize(silent, -1.0);
  CHECK(dsp::peak_abs(out2) == 0.0f);

  const auto once = dsp::peak_normalize(w, -3.0);
  const auto twice = dsp::peak_normalize(once, -3.0);
  for (size_t i = 0; i < once.samples.size(); ++i)
    CHECK(std::fabs(once.samples[i] - twice.samples[i]) < 1e-9f);
}

TEST_CASE("wav io round trips") {
  const fs::path dir = fs::temp_directory_path() / "msr_wav_test";
  fs::create_directories(dir);
  const auto w = msrtest::seeded_noise(2, 4410, kSampleRate, 99, 0.9);

  SUBCASE("float32 is bit-exact") {
    dsp::save_wav(dir / "f32.wav", w, dsp::WavFormat::Float32);
    const auto back = dsp::load_wav(dir / "f32.wav");
    REQUIRE(back.channels == 2);
    REQUIRE(back.sample_rate == kSampleRate);
    CHECK(back.samples == w.samples);
  }
  SUBCASE("pcm16 and pcm24 stay within quantization error") {
    dsp::save_wav(dir / "p16.wav", w, dsp::WavFormat::Pcm16);
    const auto b16 = dsp::load_wav(dir / "p16.wav");
    for (size_t i = 0; i < w.samples.size(); ++i)
      CHECK(std::fabs(b16.samples[i] - w.samples[i]) < 1.0f / 32000.0f);
    dsp::save_wav(dir / "p24.wav", w, dsp::WavFormat::Pcm24);
    const auto b24 = dsp::load_wav(dir / "p24.wav");
    for (size_t i = 0; i < w.samples.size(); ++i)
      CHECK(std::fabs(b24.samples[i] - w.samples[i]) < 1.0f / 8000000.0f);
  }
  SUBCASE("sample-rate validation") {
    dsp::save_wav(dir / "sr.wav", w);
    CHECK_THROWS_AS(dsp::load_wav(dir / "sr.wav", 48000), ConfigError);
  }
  SUBCASE("rejects non-wav bytes") {
    atomic_write_file(dir / "bad.wav", std::string("not a wav"));
    CHECK_THROWS_AS(dsp::load_wav(dir / "bad.wav"), IoError);
  }
}
