#include <filesystem>

#include "gtest/gtest.h"
#include "utivad/align/prep.hpp"
#include "utivad/synth/corpus.hpp"
#include "utivad/vad/speech_vad.hpp"

namespace utivad::synth {
namespace {

namespace fs = std::filesystem;

TEST(Synth, ConfigValidation) {
  SynthConfig c;
  c.max_duration_s = 7.0;
  EXPECT_THROW(gen_utterance(1, c), ValidationError);
  c = {};
  c.harmonics = 60;
  EXPECT_THROW(gen_utterance(1, c), ValidationError);
  c = {};
  c.fps = 0;
  EXPECT_THROW(gen_utterance(1, c), ValidationError);
}

TEST(Synth, TruthTilesDurationAndSync) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto u = gen_utterance(seed);
    const auto& segs = u.truth.segments;
    ASSERT_FALSE(segs.empty());
    EXPECT_EQ(segs.front().start, 0.0);
    EXPECT_EQ(segs.back().end, u.truth.duration_s);
    for (std::size_t i = 1; i < segs.size(); ++i) {
      EXPECT_EQ(segs[i].start, segs[i - 1].end);
      EXPECT_NE(segs[i].kind, segs[i - 1].kind);
    }
    EXPECT_GE(u.truth.duration_s, 2.0);
    EXPECT_LE(u.truth.duration_s, 6.0);
    const double uti_s = u.uti.n_frames() / u.uti.fps();
    EXPECT_LT(std::abs(uti_s - u.audio.duration()), 1.0 / u.uti.fps());
    EXPECT_EQ(u.uti.dtype(), align::PixelType::u8);
  }
}

TEST(Synth, Deterministic) {
  const auto a = gen_utterance(77), b = gen_utterance(77), c = gen_utterance(78);
  EXPECT_EQ(a.audio.samples, b.audio.samples);
  EXPECT_EQ(a.uti, b.uti);
  EXPECT_NE(a.audio.samples, c.audio.samples);
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
}

TEST(Synth, AllSilence) {
  SynthConfig cfg;
  cfg.all_silence = true;
  const auto u = gen_utterance(5, cfg);
  EXPECT_LT(dsp::rms(u.audio), 0.01);
  const auto rest = rest_image(cfg);
  for (std::size_t f = 0; f < u.uti.n_frames(); ++f) {
    const auto px = u.uti.frame(f);
    double se = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) se += (px[i] - rest[i]) * (px[i] - rest[i]);
    // Mean squared deviation matches the speckle variance (rounding adds 1/12).
    EXPECT_LT(se / px.size(), 1.2 * (cfg.speckle_std * cfg.speckle_std + 1.0 / 12));
  }
  EXPECT_EQ(vad::vad_decide(u.audio).speech_frames(), 0u);
}

TEST(Synth, SpeechFramesDifferFromRest) {
  SynthConfig cfg;
  cfg.speckle_std = 0.0;
  const auto u = gen_utterance(9, cfg);
  const auto rest = rest_image(cfg);
  const auto labels = u.truth.frame_labels(cfg.fps, u.uti.n_frames());
  for (std::size_t f = 0; f < u.uti.n_frames(); ++f) {
    const auto px = u.uti.frame(f);
    const bool same = std::equal(px.begin(), px.end(), rest.begin());
    EXPECT_EQ(same, labels[f] == 0) << f;
  }
}

TEST(Synth, AudioVadAgreesWithTruth) {
  Agreement total;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto u = gen_utterance(derive_seed(2024, i));
    const auto track = vad::vad_decide(u.audio);
    const auto a = agreement_with_truth(track.decisions, 100.0, u.truth);
    total.agree += a.agree;
    total.counted += a.counted;
  }
  EXPECT_GE(total.rate(), 0.98);
}

TEST(Synth, CorpusSpeechSilenceRatio) {
  const auto corpus = gen_corpus_in_memory({80, 10, 10, 3});
  std::size_t speech = 0, silence = 0, vad_speech = 0, vad_silence = 0;
  for (const auto& u : corpus) {
    for (int l : u.truth.frame_labels(u.uti.fps(), u.uti.n_frames())) (l ? speech : silence)++;
    const auto labels = align::labels_from_vad(vad::vad_decide(u.audio), u.uti.fps(),
                                               static_cast<long>(u.uti.n_frames()));
    for (int l : labels.labels) (l ? vad_speech : vad_silence)++;
  }
  const double ratio = static_cast<double>(speech) / silence;
  const double vad_ratio = static_cast<double>(vad_speech) / vad_silence;
  EXPECT_GE(ratio, 2.0);
  EXPECT_LE(ratio, 3.0);
  EXPECT_GE(vad_ratio, 2.0);
  EXPECT_LE(vad_ratio, 3.0);
}

TEST(Synth, ResizedFramesStayWithinOvershootBound) {
  const auto u = gen_utterance(31);
  for (std::size_t f = 0; f < u.uti.n_frames(); f += 10) {
    const auto norm = align::minmax_normalize(u.uti.frame(f));
    const auto out = align::bicubic_resize(norm, u.uti.height(), u.uti.width(), 64, 128);
    for (double v : out) {
      ASSERT_GE(v, -1.0 - 0.3);
      ASSERT_LE(v, 1.0 + 0.3);
    }
  }
}

TEST(Synth, TruthJsonRoundTrip) {
  const auto u = gen_utterance(12, {}, "dev_0003");
  const auto j = truth_to_json(u.truth);
  EXPECT_EQ(j.begin().key(), "id");
  const auto back = truth_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.id, "dev_0003");
  EXPECT_EQ(back.seed, 12u);
  ASSERT_EQ(back.segments.size(), u.truth.segments.size());
  EXPECT_EQ(back.segments[1].kind, u.truth.segments[1].kind);
  EXPECT_THROW(truth_from_json(nlohmann::json::parse(R"({"id":"x"})")), ValidationError);
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("utivad_synth_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

using SynthCorpus = TempDir;

TEST_F(SynthCorpus, WritesFilesAndManifest) {
  const auto m = gen_corpus({1, 1, 1, 42}, dir_);
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m[0].split, "train");
  EXPECT_EQ(m[1].split, "dev");
  EXPECT_EQ(m[2].split, "test");
  const auto read = read_manifest(dir_ / "manifest.json");
  ASSERT_EQ(read.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(read[i].id, m[i].id);
    EXPECT_TRUE(fs::exists(read[i].wav));
    EXPECT_TRUE(fs::exists(read[i].uti));
    EXPECT_TRUE(fs::exists(read[i].truth));
  }
  const auto u = gen_utterance(derive_seed(42, 1), {}, m[1].id);
  const auto wav = dsp::read_wav(read[1].wav);
  EXPECT_EQ(wav.samples.size(), u.audio.samples.size());
  EXPECT_EQ(align::read_utiz(read[1].uti), u.uti);
  const auto truth = truth_from_json(nlohmann::json::parse(io::read_file(read[1].truth)));
  EXPECT_EQ(truth.segments.size(), u.truth.segments.size());
  EXPECT_THROW(gen_corpus({0, 1, 1, 0}, dir_), ValidationError);
}

TEST_F(SynthCorpus, RegenerationIsByteIdentical) {
  gen_corpus({2, 1, 1, 5}, dir_ / "a");
  gen_corpus({2, 1, 1, 5}, dir_ / "b");
  for (const char* f : {"manifest.json", "wav/train_0000.wav", "uti/dev_0002.utiz", "truth/test_0003.json"}) {
    EXPECT_EQ(io::read_file(dir_ / "a" / f), io::read_file(dir_ / "b" / f)) << f;
  }
}

TEST_F(SynthCorpus, ManifestErrors) {
  io::write_file_atomic(dir_ / "bad.json", "{\"not\":\"array\"}");
  EXPECT_THROW(read_manifest(dir_ / "bad.json"), ValidationError);
  io::write_file_atomic(dir_ / "bad2.json", "[{\"id\":\"x\",\"wav\":\"a\",\"uti\":\"b\",\"truth\":\"c\",\"split\":\"val\"}]");
  EXPECT_THROW(read_manifest(dir_ / "bad2.json"), ValidationError);
  EXPECT_THROW(read_manifest(dir_ / "missing.json"), std::exception);
}

}  // namespace
}  // namespace utivad::synth
