#pragma once

// Energy + zero-crossing voice activity detector used to derive speech /
// silence labels from the audio channel, plus end-silence trimming.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "utivad/core/binio.hpp"
#include "utivad/core/log.hpp"
#include "utivad/dsp/mel.hpp"

namespace utivad::vad {

struct VadConfig {
  double frame_ms = 10.0;
  double energy_offset_db = 9.0;
  double zcr_threshold = 0.35;
  int onset_min_frames = 3;
  int offset_min_frames = 5;
  double keep_ms = 0.0;
  // For loud signals the noise floor estimate is capped this far below the
  // loudest decile, so recordings without any silence still get a usable
  // threshold.
  double max_floor_below_peak_db = 20.0;
  double loud_signal_db = -40.0;
  // Frames quieter than this are never speech (digital silence).
  double min_speech_energy_db = -90.0;

  void validate() const {
    if (!(frame_ms > 0.0)) fail_validation("frame_ms must be positive");
    if (onset_min_frames < 1 || offset_min_frames < 1) {
      fail_validation("hangover run lengths must be >= 1");
    }
    if (keep_ms < 0.0) fail_validation("keep_ms must be >= 0");
  }
};

struct VadFeatures {
  double energy_db = 0.0;
  double zcr = 0.0;
};

struct VadTrack {
  std::vector<int> decisions;  // 1 = speech, one per frame
  double frame_ms = 10.0;

  std::size_t n_frames() const noexcept { return decisions.size(); }
  std::size_t speech_frames() const {
    return static_cast<std::size_t>(std::count(decisions.begin(), decisions.end(), 1));
  }
};

inline VadFeatures vad_features(std::span<const double> frame) {
  if (frame.empty()) fail_validation("vad_features needs a non-empty frame");
  double ms = 0.0;
  for (double v : frame) ms += v * v;
  ms /= static_cast<double>(frame.size());
  std::size_t changes = 0;
  for (std::size_t i = 1; i < frame.size(); ++i) {
    changes += (frame[i - 1] >= 0.0) != (frame[i] >= 0.0);
  }
  VadFeatures f;
  f.energy_db = 10.0 * std::log10(ms + 1e-12);
  f.zcr = frame.size() > 1 ? static_cast<double>(changes) / (frame.size() - 1) : 0.0;
  return f;
}

/// Run-length smoothing: interior silence gaps shorter than offset_min are
/// filled, then speech runs shorter than onset_min are dropped.
inline std::vector<int> apply_hangover(std::vector<int> d, int onset_min, int offset_min) {
  const std::size_t n = d.size();
  auto runs = [&](int value, auto&& fn) {
    std::size_t i = 0;
    while (i < n) {
      if (d[i] != value) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < n && d[j] == value) ++j;
      fn(i, j);
      i = j;
    }
  };
  runs(0, [&](std::size_t a, std::size_t b) {
    const bool interior = a > 0 && b < n;
    if (interior && b - a < static_cast<std::size_t>(offset_min)) {
      std::fill(d.begin() + a, d.begin() + b, 1);
    }
  });
  runs(1, [&](std::size_t a, std::size_t b) {
    if (b - a < static_cast<std::size_t>(onset_min)) {
      std::fill(d.begin() + a, d.begin() + b, 0);
    }
  });
  return d;
}

namespace detail {
inline double median_sorted(std::span<const double> v) {
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}
}  // namespace detail

/// Median energy of the quietest 10% of frames. When the loudest 10% have a
/// median above loud_db, the estimate is capped at that median minus
/// max_below_peak_db.
inline double estimate_noise_floor(std::vector<double> energies, double max_below_peak_db,
                                   double loud_db) {
  if (energies.empty()) return 0.0;
  std::sort(energies.begin(), energies.end());
  const std::size_t k = std::max<std::size_t>(1, (energies.size() + 9) / 10);
  const std::span<const double> all(energies);
  const double quiet = detail::median_sorted(all.first(k));
  const double loud = detail::median_sorted(all.last(k));
  return loud > loud_db ? std::min(quiet, loud - max_below_peak_db) : quiet;
}

inline VadTrack vad_decide(const dsp::Waveform& w, const VadConfig& cfg = {}) {
  cfg.validate();
  const std::size_t len = dsp::frame_length(w.sample_rate, cfg.frame_ms);
  const Matrix frames = dsp::frame_signal(w, cfg.frame_ms, len);
  std::vector<VadFeatures> feats(frames.rows);
  std::vector<double> energies(frames.rows);
  for (std::size_t f = 0; f < frames.rows; ++f) {
    feats[f] = vad_features(frames.row(f));
    energies[f] = feats[f].energy_db;
  }
  const double threshold =
      estimate_noise_floor(energies, cfg.max_floor_below_peak_db, cfg.loud_signal_db) +
      cfg.energy_offset_db;
  std::vector<int> raw(frames.rows, 0);
  for (std::size_t f = 0; f < frames.rows; ++f) {
    const auto& ft = feats[f];
    raw[f] = ft.energy_db > cfg.min_speech_energy_db &&
             (ft.energy_db > threshold ||
              (ft.energy_db > threshold - 3.0 && ft.zcr > cfg.zcr_threshold));
  }
  return {apply_hangover(std::move(raw), cfg.onset_min_frames, cfg.offset_min_frames),
          cfg.frame_ms};
}

struct TrimResult {
  dsp::Waveform audio;
  std::size_t first_sample = 0;  // offset of audio within the input
  VadTrack track;                // decisions for the frames inside the kept span
};

/// Keeps [first speech frame start - keep_ms, last speech frame end + keep_ms]
/// clamped to the signal; interior silences are untouched.
inline TrimResult trim_silence_with_track(const dsp::Waveform& w, const VadTrack& track,
                                          double keep_ms) {
  if (keep_ms < 0.0) fail_validation("keep_ms must be >= 0");
  const std::size_t len = dsp::frame_length(w.sample_rate, track.frame_ms);
  if (track.n_frames() > w.samples.size() / len + 1) {
    fail_validation("VAD track has more frames than the waveform");
  }
  const auto first = std::find(track.decisions.begin(), track.decisions.end(), 1);
  if (first == track.decisions.end()) {
    warn("no speech detected; trimming yields an empty waveform");
    return {dsp::Waveform{{}, w.sample_rate}, 0, VadTrack{{}, track.frame_ms}};
  }
  const auto last = std::find(track.decisions.rbegin(), track.decisions.rend(), 1);
  const std::size_t a = static_cast<std::size_t>(first - track.decisions.begin());
  const std::size_t b = track.n_frames() - 1 -
                        static_cast<std::size_t>(last - track.decisions.rbegin());
  const auto keep = static_cast<long>(std::lround(keep_ms * w.sample_rate / 1000.0));
  const long n = static_cast<long>(w.samples.size());
  const long start = std::max(0L, static_cast<long>(a * len) - keep);
  const long end = std::min(n, static_cast<long>((b + 1) * len) + keep);
  TrimResult r;
  r.audio = dsp::Waveform{{w.samples.begin() + start, w.samples.begin() + end}, w.sample_rate};
  r.first_sample = static_cast<std::size_t>(start);
  r.track.frame_ms = track.frame_ms;
  // Frames of the trimmed signal that line up with whole input frames keep
  // their decisions; partial padding frames count as silence.
  const std::size_t out_frames = r.audio.samples.size() / len;
  r.track.decisions.assign(out_frames, 0);
  if (start % static_cast<long>(len) == 0) {
    const std::size_t offset = static_cast<std::size_t>(start) / len;
    for (std::size_t f = 0; f < out_frames && offset + f < track.n_frames(); ++f) {
      r.track.decisions[f] = track.decisions[offset + f];
    }
  }
  return r;
}

inline dsp::Waveform trim_silence(const dsp::Waveform& w, const VadTrack& track,
                                  double keep_ms) {
  return trim_silence_with_track(w, track, keep_ms).audio;
}

struct RetainedSilence {
  double keep_ms = 0.0;
  dsp::Waveform audio;
};

/// The end-silence handling configurations: A trims to the speech span, B
/// additionally keeps 180 ms at both ends, C re-runs detection on B and trims
/// again. `padded` holds one trimmed version per retained-silence step.
struct SilenceVariants {
  dsp::Waveform trimmed;
  dsp::Waveform trimmed_keep180;
  dsp::Waveform reapplied;
  std::vector<RetainedSilence> padded;
};

inline SilenceVariants silence_variants(const dsp::Waveform& w, const VadConfig& cfg = {},
                                        std::vector<double> keep_steps = {0, 180, 360, 540}) {
  const VadTrack track = vad_decide(w, cfg);
  SilenceVariants v;
  v.trimmed = trim_silence(w, track, 0.0);
  v.trimmed_keep180 = trim_silence(w, track, 180.0);
  v.reapplied = v.trimmed_keep180.empty()
                    ? v.trimmed_keep180
                    : trim_silence(v.trimmed_keep180, vad_decide(v.trimmed_keep180, cfg), 0.0);
  for (double keep : keep_steps) v.padded.push_back({keep, trim_silence(w, track, keep)});
  return v;
}

// ---- CSV: "frame_index,decision" ----

inline std::string labels_to_csv(const std::vector<int>& decisions) {
  std::string out = "frame_index,decision\n";
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(decisions[i]) + "\n";
  }
  return out;
}

inline std::vector<int> labels_from_csv(const std::string& text, const std::string& source = "csv") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "frame_index,decision") {
    fail_validation(source, ": expected header 'frame_index,decision'");
  }
  std::vector<int> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail_validation(source, ": malformed row '", line, "'");
    const long idx = std::stol(line.substr(0, comma));
    const int d = std::stoi(line.substr(comma + 1));
    if (idx != static_cast<long>(out.size()) || (d != 0 && d != 1)) {
      fail_validation(source, ": bad row '", line, "'");
    }
    out.push_back(d);
  }
  return out;
}

inline void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& d) {
  io::write_file_atomic(path, labels_to_csv(d));
}

inline std::vector<int> read_labels_csv(const std::filesystem::path& path) {
  return labels_from_csv(io::read_file(path), path.string());
}

}  // namespace utivad::vad
