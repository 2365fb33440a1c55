#include "space/audio.hpp"
#include "space/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>

using namespace space;

namespace {

Waveform sine(double freq, double amp, double seconds, int sr = 16000) {
  Waveform w;
  w.sample_rate = sr;
  const auto n = static_cast<std::size_t>(std::llround(seconds * sr));
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / sr);
  }
  return w;
}

Waveform chirp_noise(double seconds, std::uint64_t seed) {
  Waveform w = sine(220.0, 0.3, seconds);
  std::uint64_t s = seed;
  for (double& v : w.samples) {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    v += 0.05 * (static_cast<double>(s >> 11) / 9007199254740992.0 - 0.5);
  }
  return w;
}

// Frequency of the largest bin of a naive DFT over [lo, hi] Hz in 1 Hz steps.
double dominant_frequency(const std::vector<double>& x, int sr, double lo, double hi) {
  double best_f = lo, best = -1.0;
  for (double f = lo; f <= hi; f += 1.0) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * f * static_cast<double>(i) / sr);
    }
    if (std::abs(acc) > best) {
      best = std::abs(acc);
      best_f = f;
    }
  }
  return best_f;
}

}  // namespace

TEST_CASE("mfcc frame count") {
  const AudioFeatures f = compute_mfcc(sine(440.0, 0.5, 1.0));
  CHECK(f.frames() == 30);
  CHECK(f.mfcc.cols() == 40);
  CHECK(f.frame_rate == 30.0);

  // Oracle: count video frame timestamps t/30 s that fall inside the clip.
  for (std::size_t n : {1024u, 1600u, 16000u, 16001u, 16533u, 47999u, 48000u, 80000u}) {
    Eigen::Index expected = 0;
    while (static_cast<double>(expected) / 30.0 < static_cast<double>(n) / 16000.0) ++expected;
    CHECK(mfcc_frame_count(n, 16000) == expected);
  }
  CHECK(mfcc_hop(16000) == 533);
  CHECK(mfcc_hop(48000) == 1600);
}

TEST_CASE("mfcc of silence is the log-floor vector") {
  Waveform w;
  w.samples.assign(16000, 0.0);
  const AudioFeatures f = compute_mfcc(w);
  // Orthonormal DCT of a constant 64-vector c: first coefficient 8c, rest 0.
  const double c0 = 8.0 * std::log(1e-10);
  CHECK(c0 == doctest::Approx(-184.20680743952366));
  for (Eigen::Index t = 0; t < f.frames(); ++t) {
    CHECK(std::abs(f.mfcc(t, 0) - c0) < 1e-9);
    CHECK(f.mfcc.row(t).tail(39).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(f.mfcc.row(t) == f.mfcc.row(0));
  }
}

TEST_CASE("mfcc determinism and hop shift") {
  const Waveform w = chirp_noise(2.0, 3);
  const AudioFeatures a = compute_mfcc(w);
  CHECK(a.mfcc == compute_mfcc(w).mfcc);

  Waveform shifted = w;
  shifted.samples.insert(shifted.samples.begin(), 533, 0.0);
  shifted.samples.resize(w.samples.size());
  const AudioFeatures b = compute_mfcc(shifted);
  double worst = 0.0;
  for (Eigen::Index t = 3; t + 3 < a.frames(); ++t) {
    worst = std::max(worst, (b.mfcc.row(t + 1) - a.mfcc.row(t)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("mfcc preconditions") {
  Waveform short_clip;
  short_clip.samples.assign(1023, 0.1);
  CHECK_THROWS_AS(compute_mfcc(short_clip), InvalidArgument);
  Waveform low_rate = sine(100.0, 0.1, 1.0, 4000);
  CHECK_THROWS_AS(compute_mfcc(low_rate), InvalidArgument);
}

TEST_CASE("augment") {
  const Waveform w = chirp_noise(1.0, 9);

  SUBCASE("identity spec") {
    const Waveform out = augment(w, AugmentSpec{}, 42);
    CHECK(out.samples == w.samples);
  }

  SUBCASE("gain +6 dB on a 0.1 sine") {
    AugmentSpec spec;
    spec.gain_db = {6.0, 6.0};
    const Waveform s = sine(250.0, 0.1, 1.0);
    const Waveform out = augment(s, spec, 1);
    double peak_in = 0.0, peak_out = 0.0;
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
      peak_in = std::max(peak_in, std::abs(s.samples[i]));
      peak_out = std::max(peak_out, std::abs(out.samples[i]));
    }
    CHECK(std::abs(peak_out - peak_in * std::pow(10.0, 6.0 / 20.0)) < 1e-12);
    CHECK(std::abs(peak_out - 0.19952623149688797) < 1e-6);
  }

  SUBCASE("determinism and length") {
    const AugmentSpec spec = AugmentSpec::mild();
    const Waveform a = augment(w, spec, 77);
    const Waveform b = augment(w, spec, 77);
    CHECK(a.samples == b.samples);
    CHECK(a.samples.size() == w.samples.size());
    CHECK(augment(w, spec, 78).samples != a.samples);
    for (double v : a.samples) CHECK(std::abs(v) <= 1.0);
  }

  SUBCASE("pitch shift moves a tone by the semitone ratio") {
    AugmentSpec spec;
    spec.pitch_semitones = {4.0, 4.0};
    const Waveform s = sine(440.0, 0.5, 0.5);
    const Waveform out = augment(s, spec, 5);
    CHECK(out.samples.size() == s.samples.size());
    const std::vector<double> mid(out.samples.begin() + 2000, out.samples.begin() + 6000);
    const double f = dominant_frequency(mid, 16000, 400.0, 700.0);
    CHECK(std::abs(f - 440.0 * std::pow(2.0, 4.0 / 12.0)) < 8.0);
  }

  SUBCASE("clipping") {
    AugmentSpec spec;
    spec.gain_db = {6.0, 6.0};
    const Waveform out = augment(sine(100.0, 0.9, 0.2), spec, 0);
    double peak = 0.0;
    for (double v : out.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak == 1.0);
  }

  SUBCASE("range validation") {
    AugmentSpec spec;
    spec.pitch_semitones = {-5.0, 0.0};
    CHECK_THROWS_AS(augment(w, spec, 0), InvalidArgument);
    spec = AugmentSpec{};
    spec.gain_db = {0.0, 6.5};
    CHECK_THROWS_AS(augment(w, spec, 0), InvalidArgument);
    spec = AugmentSpec{};
    spec.high_shelf_db = {3.0, -3.0};
    CHECK_THROWS_AS(augment(w, spec, 0), InvalidArgument);
  }
}

TEST_CASE("align_frames") {
  AudioFeatures f;
  f.mfcc = MfccMatrix::Random(10, kNumMfcc);
  CHECK(align_frames(f, 10).mfcc == f.mfcc);

  const AudioFeatures trimmed = align_frames(f, 9);
  CHECK(trimmed.frames() == 9);
  CHECK(trimmed.mfcc == f.mfcc.topRows(9));

  const AudioFeatures padded = align_frames(f, 11);
  CHECK(padded.frames() == 11);
  CHECK(padded.mfcc.topRows(10) == f.mfcc);
  CHECK(padded.mfcc.row(10) == f.mfcc.row(9));

  CHECK_NOTHROW(align_frames(f, 12));
  CHECK_THROWS_AS(align_frames(f, 13), MisalignedClip);
  CHECK_THROWS_AS(align_frames(f, 7), MisalignedClip);
}

TEST_CASE("wav and feature files") {
  const auto dir = std::filesystem::temp_directory_path() / "space_test_audio";
  std::filesystem::create_directories(dir);
  Waveform w = chirp_noise(0.5, 1);
  for (double& v : w.samples) v = static_cast<float>(v);
  write_wav(dir / "a.wav", w);
  const Waveform back = read_wav(dir / "a.wav");
  CHECK(back.sample_rate == 16000);
  CHECK(back.samples == w.samples);

  const AudioFeatures f = compute_mfcc(w);
  write_features(dir / "a.spmf", f);
  const AudioFeatures g = read_features(dir / "a.spmf");
  CHECK(g.mfcc == f.mfcc);
  CHECK(g.frame_rate == 30.0);

  // Other sample rates are resampled on read.
  write_wav(dir / "b.wav", sine(200.0, 0.5, 1.0, 8000));
  const Waveform r = read_wav(dir / "b.wav");
  CHECK(r.sample_rate == 16000);
  CHECK(r.samples.size() == 16000);

  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), IoError);
  std::filesystem::remove_all(dir);
}
