#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace space {

inline constexpr int kDefaultSampleRate = 16000;
inline constexpr int kNumMfcc = 40;
inline constexpr double kVideoFps = 30.0;

struct Waveform {
  std::vector<double> samples;  // mono, in [-1, 1]
  int sample_rate = kDefaultSampleRate;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

using MfccMatrix = Eigen::Matrix<double, Eigen::Dynamic, kNumMfcc, Eigen::RowMajor>;

struct AudioFeatures {
  MfccMatrix mfcc;  // one row per video frame
  double frame_rate = kVideoFps;

  Eigen::Index frames() const { return mfcc.rows(); }
};

// Fixed analysis settings. The hop is sample_rate / 30 rounded, so feature
// frame t is centered on sample t * hop, i.e. on video frame t.
struct MfccSettings {
  static constexpr int kWindow = 1024;
  static constexpr int kMelFilters = 64;
  static constexpr double kMaxFrequency = 8000.0;
  static constexpr double kLogFloor = 1e-10;
};

int mfcc_hop(int sample_rate);
// ceil(duration * 30) frames.
Eigen::Index mfcc_frame_count(std::size_t num_samples, int sample_rate);

AudioFeatures compute_mfcc(const Waveform& w);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

// Ranges to draw augmentation parameters from. Allowed bounds: pitch within
// +-4 semitones, gain and each EQ band within +-6 dB. A zero-width range at 0
// disables that stage.
struct AugmentSpec {
  Range pitch_semitones;
  Range gain_db;
  Range low_shelf_db;   // 300 Hz low shelf
  Range mid_peak_db;    // 1.5 kHz peaking band
  Range high_shelf_db;  // 4 kHz high shelf

  static AugmentSpec mild();  // full allowed ranges
};

// Pitch shift (length preserving), three-band EQ, then gain; clipped to [-1, 1].
Waveform augment(const Waveform& w, const AugmentSpec& spec, std::uint64_t seed);

// Trim or edge-pad to exactly video_len frames. Throws MisalignedClip when the
// frame counts differ by more than 2.
AudioFeatures align_frames(const AudioFeatures& f, Eigen::Index video_len);

// Mono PCM WAV: 16-bit integer or 32-bit float. Multi-channel input is
// averaged; other sample rates are linearly resampled to 16 kHz.
Waveform read_wav(const std::filesystem::path& path);
// Writes 32-bit float WAV, so a read after write is exact.
void write_wav(const std::filesystem::path& path, const Waveform& w);

Waveform resample_linear(const Waveform& w, int target_rate);

// Feature cache: magic "SPMF", u32 version, u32 frames, u32 coefficients,
// f64 frame rate, then frames * coefficients little-endian f64 values.
void write_features(const std::filesystem::path& path, const AudioFeatures& f);
AudioFeatures read_features(const std::filesystem::path& path);

}  // namespace space
