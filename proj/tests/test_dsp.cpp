#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "utivad/dsp/griffin_lim.hpp"
#include "utivad/dsp/melz.hpp"

namespace utivad::dsp {
namespace {

Waveform sine(double hz, double seconds, double amp = 0.5, int sr = 16000) {
  Waveform w{std::vector<double>(static_cast<std::size_t>(seconds * sr)), sr};
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / sr);
  }
  return w;
}

std::size_t argmax_band(const MelTrack& m) {
  std::vector<double> mean(m.n_mels(), 0.0);
  for (std::size_t f = 0; f < m.n_frames(); ++f)
    for (std::size_t b = 0; b < m.n_mels(); ++b) mean[b] += m.frames(f, b);
  return std::max_element(mean.begin(), mean.end()) - mean.begin();
}

TEST(FrameSignal, Arithmetic) {
  Waveform w{std::vector<double>(1600, 0.1), 16000};
  Matrix f = frame_signal(w, 10.0, 160);
  EXPECT_EQ(f.cols, 160u);
  EXPECT_EQ(f.rows, 10u);

  Waveform one{std::vector<double>(160, 0.1), 16000};
  EXPECT_EQ(frame_signal(one, 10.0, 160).rows, 1u);

  Waveform n1000{std::vector<double>(1000, 0.1), 16000};
  EXPECT_EQ(frame_signal(n1000, 10.0, 80).rows, (1000u - 160) / 80 + 1);
  EXPECT_EQ(frame_signal(n1000, 10.0, 80).rows, 11u);

  Waveform tiny{std::vector<double>(100, 0.1), 16000};
  EXPECT_EQ(frame_signal(tiny, 10.0, 160).rows, 0u);
}

TEST(FrameSignal, HannWindowTapersEdges) {
  Waveform w{std::vector<double>(320, 1.0), 16000};
  Matrix f = frame_signal(w, 10.0, 160, WindowKind::hann);
  EXPECT_EQ(f(0, 0), 0.0);
  EXPECT_NEAR(f(0, 80), 1.0, 1e-12);
}

TEST(MelFilterbank, Invariants) {
  MelConfig cfg;
  auto fb = mel_filterbank(cfg);
  ASSERT_EQ(fb.weights.rows, 80u);
  ASSERT_EQ(fb.weights.cols, 257u);
  for (std::size_t m = 0; m < fb.weights.rows; ++m) {
    // Nonnegative, nonempty, contiguous support.
    long first = -1, last = -1;
    for (std::size_t k = 0; k < fb.weights.cols; ++k) {
      ASSERT_GE(fb.weights(m, k), 0.0);
      if (fb.weights(m, k) > 0.0) {
        if (first < 0) first = static_cast<long>(k);
        last = static_cast<long>(k);
      }
    }
    ASSERT_GE(first, 0) << "band " << m;
    for (long k = first; k <= last; ++k) EXPECT_GT(fb.weights(m, k), 0.0);
    // Adjacent triangles overlap: next band starts before this one ends.
    if (m + 1 < fb.weights.rows) {
      EXPECT_LT(fb.edges_hz[m + 1], fb.edges_hz[m + 2]);
    }
  }
  for (std::size_t k = 1; k + 1 < fb.weights.cols; ++k) {
    double s = 0.0;
    for (std::size_t m = 0; m < fb.weights.rows; ++m) s += fb.weights(m, k);
    EXPECT_GT(s, 0.0) << "bin " << k;
  }
}

TEST(MelFilterbank, RejectsFmaxAboveNyquist) {
  MelConfig cfg;
  cfg.fmax = 9000.0;
  EXPECT_THROW(mel_filterbank(cfg), ValidationError);
  EXPECT_THROW(melspectrogram(sine(100, 0.1), cfg), ValidationError);
}

TEST(Melspectrogram, SilenceHitsLogFloor) {
  Waveform w{std::vector<double>(8000, 0.0), 16000};
  MelTrack m = melspectrogram(w);
  ASSERT_GT(m.n_frames(), 0u);
  for (double v : m.frames.data) EXPECT_EQ(v, std::log(1e-10));
}

TEST(Melspectrogram, SineEnergyPeaksAtNearestCentre) {
  MelConfig cfg;
  auto fb = mel_filterbank(cfg);
  std::size_t nearest = 0;
  for (std::size_t b = 0; b < cfg.n_mels; ++b) {
    if (std::abs(fb.center_hz(b) - 1000.0) < std::abs(fb.center_hz(nearest) - 1000.0)) {
      nearest = b;
    }
  }
  EXPECT_EQ(argmax_band(melspectrogram(sine(1000.0, 1.0), cfg)), nearest);
}

TEST(Melspectrogram, HopFollowsUltrasoundRate) {
  MelConfig cfg;
  cfg.fps = 81.5;
  EXPECT_EQ(cfg.hop(), 196u);
  MelTrack m = melspectrogram(sine(300, 2.0), cfg);
  EXPECT_EQ(m.n_frames(), 32000u / 196);
  EXPECT_NEAR(static_cast<double>(m.n_frames()), 2.0 * 81.5, 1.0);
  EXPECT_EQ(m.n_mels(), 80u);
  // Analysis is deterministic.
  EXPECT_EQ(melspectrogram(sine(300, 2.0), cfg).frames, m.frames);
}

MelTrack random_track(std::size_t frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(-5.0, 3.0);
  MelTrack m{Matrix(frames, 80), 81.5, false, {}};
  for (double& v : m.frames.data) v = n(rng);
  return m;
}

TEST(Standardize, RoundTripAndUnitMoments) {
  MelTrack m = random_track(50, 1);
  MelTrack s = standardize(m);
  for (std::size_t b = 0; b < 80; ++b) {
    double mean = 0.0, var = 0.0;
    for (std::size_t f = 0; f < 50; ++f) mean += s.frames(f, b);
    mean /= 50;
    for (std::size_t f = 0; f < 50; ++f) var += (s.frames(f, b) - mean) * (s.frames(f, b) - mean);
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var / 50, 1.0, 1e-12);
  }
  MelTrack back = destandardize(s);
  for (std::size_t i = 0; i < m.frames.data.size(); ++i) {
    EXPECT_NEAR(back.frames.data[i], m.frames.data[i], 1e-10);
  }
  // Standardizing already-standard values with their own stats is a no-op.
  MelTrack raw_std = s;
  raw_std.standardized = false;
  MelTrack again = standardize(raw_std);
  for (std::size_t i = 0; i < s.frames.data.size(); ++i) {
    EXPECT_NEAR(again.frames.data[i], s.frames.data[i], 1e-12);
  }
}

TEST(Standardize, ConstantBandFloorsStddev) {
  MelTrack m = random_track(20, 2);
  for (std::size_t f = 0; f < 20; ++f) m.frames(f, 3) = -7.25;
  const int before = warning_count();
  warnings_enabled() = false;
  MelTrack s = standardize(m);
  warnings_enabled() = true;
  EXPECT_EQ(warning_count(), before + 1);
  EXPECT_EQ(s.stats.stddev[3], kMinStddev);
  for (std::size_t f = 0; f < 20; ++f) EXPECT_EQ(s.frames(f, 3), 0.0);
}

TEST(Standardize, UsesProvidedStats) {
  MelTrack train = random_track(40, 3);
  MelStats stats = compute_stats(std::span<const MelTrack>(&train, 1));
  MelTrack other = random_track(10, 4);
  MelTrack s = standardize(other, stats);
  EXPECT_EQ(s.stats.mean, stats.mean);
  EXPECT_NEAR(s.frames(0, 0), (other.frames(0, 0) - stats.mean[0]) / stats.stddev[0], 1e-15);
}

TEST(MelCepstra, ConstantVector) {
  MelTrack m{Matrix(1, 80, 2.5), 81.5, false, {}};
  CepstraTrack c = mel_cepstra(m);
  ASSERT_EQ(c.frames.cols, 13u);
  EXPECT_NEAR(c.frames(0, 0), 2.5 * std::sqrt(80.0), 1e-12);
  for (std::size_t k = 1; k < 13; ++k) EXPECT_NEAR(c.frames(0, k), 0.0, 1e-12);
}

TEST(MelCepstra, CosineBasisIsolatesOneCoefficient) {
  MelTrack m{Matrix(1, 80), 81.5, false, {}};
  for (std::size_t n = 0; n < 80; ++n) m.frames(0, n) = std::cos(std::numbers::pi * (n + 0.5) * 5 / 80);
  CepstraTrack c = mel_cepstra(m);
  for (std::size_t k = 0; k < 13; ++k) {
    const double expected = k == 5 ? std::sqrt(40.0) : 0.0;
    EXPECT_NEAR(c.frames(0, k), expected, 1e-10);
  }
}

TEST(MelCepstra, MatchesDirectSummationOracle) {
  MelTrack m = random_track(100, 5);
  CepstraTrack c = mel_cepstra(m);
  for (std::size_t f = 0; f < 100; ++f) {
    std::vector<double> row(m.frames.row(f).begin(), m.frames.row(f).end());
    auto ref = oracle::dct2_ortho(row, 13);
    for (std::size_t k = 0; k < 13; ++k) EXPECT_NEAR(c.frames(f, k), ref[k], 1e-10);
  }
}

CepstraTrack random_cepstra(std::size_t frames, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  CepstraTrack c{Matrix(frames, 13)};
  for (double& v : c.frames.data) v = n(rng);
  return c;
}

TEST(Mcd, ZeroForIdenticalAndSingleCoefficientValue) {
  CepstraTrack a = random_cepstra(10, 1);
  EXPECT_EQ(mcd(a, a), 0.0);

  CepstraTrack x{Matrix(1, 13)}, y{Matrix(1, 13)};
  y.frames(0, 4) = 1.0;
  EXPECT_NEAR(mcd(x, y), 10.0 / std::log(10.0) * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(mcd(x, y), 6.1418, 1e-4);
  // c0 is excluded.
  CepstraTrack z{Matrix(1, 13)};
  z.frames(0, 0) = 100.0;
  EXPECT_EQ(mcd(x, z), 0.0);
}

TEST(Mcd, SymmetricAndLinearInScale) {
  CepstraTrack a = random_cepstra(30, 2), b = random_cepstra(30, 3);
  EXPECT_NEAR(mcd(a, b), mcd(b, a), 1e-12);
  for (double alpha : {0.5, 2.0, 3.7}) {
    CepstraTrack scaled = a;
    for (std::size_t i = 0; i < scaled.frames.data.size(); ++i) {
      scaled.frames.data[i] = a.frames.data[i] + alpha * (b.frames.data[i] - a.frames.data[i]);
    }
    EXPECT_NEAR(mcd(a, scaled), alpha * mcd(a, b), 1e-10);
  }
}

TEST(Mcd, MaskSelectsSpeechFrames) {
  // Frames 0-4 "speech" with small distortion, 5-9 "silence" with large.
  CepstraTrack ref{Matrix(10, 13)}, est{Matrix(10, 13)};
  for (std::size_t f = 0; f < 10; ++f) est.frames(f, 1) = f < 5 ? 0.1 : 2.0;
  std::vector<int> speech{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  const double masked = mcd(ref, est, speech);
  EXPECT_NEAR(masked, 10.0 / std::log(10.0) * std::sqrt(2.0) * 0.1, 1e-12);
  EXPECT_LE(masked, mcd(ref, est));
  EXPECT_THROW(mcd(ref, est, std::vector<int>(10, 0)), ValidationError);
  EXPECT_THROW(mcd(ref, random_cepstra(9, 1)), ValidationError);
}

TEST(GriffinLim, SilenceIsNearlySilent) {
  Waveform w{std::vector<double>(16000, 0.0), 16000};
  Waveform y = griffin_lim(melspectrogram(w), {}, 10, 1);
  EXPECT_EQ(y.samples.size(), (16000u / 196) * 196);
  EXPECT_LT(rms(y), 1e-3);
}

TEST(GriffinLim, PreservesDominantBand) {
  MelConfig cfg;
  for (double hz : {440.0, 1500.0}) {
    MelTrack m = melspectrogram(sine(hz, 0.5, 0.3), cfg);
    Waveform y = griffin_lim(m, cfg, 30, 7);
    const long a = static_cast<long>(argmax_band(m));
    const long b = static_cast<long>(argmax_band(melspectrogram(y, cfg)));
    EXPECT_LE(std::abs(a - b), 1) << hz << " Hz";
  }
}

TEST(GriffinLim, DeterministicForSeed) {
  MelTrack m = melspectrogram(sine(700.0, 0.3, 0.3));
  EXPECT_EQ(griffin_lim(m, {}, 5, 3).samples, griffin_lim(m, {}, 5, 3).samples);
}

TEST(Wav, EncodeDecodeQuantizesToPcm16) {
  Waveform w = sine(440, 0.05, 0.9);
  Waveform back = decode_wav(encode_wav(w));
  EXPECT_EQ(back.sample_rate, 16000);
  ASSERT_EQ(back.samples.size(), w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    EXPECT_NEAR(back.samples[i], w.samples[i], 0.5 / 32768 + 1e-12);
  }
  EXPECT_EQ(encode_wav(back), encode_wav(w));
  EXPECT_THROW(decode_wav("RIFX"), ValidationError);
}

TEST(Melz, LayoutAndRoundTrip) {
  MelTrack m = random_track(3, 9);
  std::string bytes = encode_melz(m);
  EXPECT_EQ(bytes.substr(0, 4), "MEL1");
  EXPECT_EQ(bytes.size(), 4u + 4 + 4 + 4 + 8 + 3 * 80 * 4);
  MelTrack back = decode_melz(bytes);
  EXPECT_EQ(back.fps, 81.5);
  ASSERT_EQ(back.n_frames(), 3u);
  for (std::size_t i = 0; i < m.frames.data.size(); ++i) {
    EXPECT_EQ(back.frames.data[i], static_cast<double>(static_cast<float>(m.frames.data[i])));
  }
  EXPECT_THROW(decode_melz(bytes.substr(0, 30)), ValidationError);
}

}  // namespace
}  // namespace utivad::dsp
