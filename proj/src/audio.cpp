#include "space/audio.hpp"

#include "space/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace space {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular HTK-mel filters over the rfft bins, shape [filters, bins].
Eigen::MatrixXd mel_filterbank(int sample_rate) {
  constexpr int n_fft = MfccSettings::kWindow;
  constexpr int n_bins = n_fft / 2 + 1;
  constexpr int n_mels = MfccSettings::kMelFilters;
  const double f_max = std::min(MfccSettings::kMaxFrequency, sample_rate / 2.0);
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(f_max);

  std::array<double, n_mels + 2> edges{};
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      double w = 0.0;
      if (f > left && f <= center) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      fb(m, k) = w;
    }
  }
  return fb;
}

// Orthonormal DCT-II rows for the first kNumMfcc coefficients.
Eigen::MatrixXd dct_matrix() {
  constexpr int n = MfccSettings::kMelFilters;
  Eigen::MatrixXd d(kNumMfcc, n);
  for (int k = 0; k < kNumMfcc; ++k) {
    const double norm = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i) {
      d(k, i) = norm * std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * n));
    }
  }
  return d;
}

Eigen::VectorXd hann_periodic(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

void check_range(const Range& r, double bound, const char* what) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi || r.lo < -bound ||
      r.hi > bound) {
    throw InvalidArgument(std::string("augment: ") + what + " range must lie within +-" +
                          std::to_string(bound));
  }
}

double draw(const Range& r, std::mt19937_64& rng) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

double sample_at(const std::vector<double>& x, double pos) {
  if (pos <= 0.0) return x.front();
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= x.size()) return x.back();
  const double frac = pos - static_cast<double>(i);
  return x[i] * (1.0 - frac) + x[i + 1] * frac;
}

// WSOLA time stretch of x to exactly out_len samples: each analysis frame is
// shifted within +-kTolerance samples to best continue the previous one.
std::vector<double> stretch_to(const std::vector<double>& x, std::size_t out_len) {
  constexpr int kFrame = 1024;
  constexpr int kHop = 256;
  constexpr int kTolerance = 128;
  constexpr int kCompare = 512;
  const Eigen::VectorXd win = hann_periodic(kFrame);
  const auto in_len = static_cast<long>(x.size());
  auto at = [&](long i) { return (i < 0 || i >= in_len) ? 0.0 : x[static_cast<std::size_t>(i)]; };

  std::vector<double> out(out_len, 0.0), norm(out_len, 0.0);
  const double ratio = static_cast<double>(x.size()) / static_cast<double>(out_len);
  long prev = std::numeric_limits<long>::min();
  for (long start = -kFrame / 2; start < static_cast<long>(out_len); start += kHop) {
    const long nominal = std::lround((start + kFrame / 2) * ratio) - kFrame / 2;
    long pos = nominal;
    if (prev != std::numeric_limits<long>::min()) {
      const long natural = prev + kHop;
      double best = -std::numeric_limits<double>::infinity();
      for (long d = -kTolerance; d <= kTolerance; ++d) {
        double c = 0.0;
        for (int n = 0; n < kCompare; ++n) c += at(nominal + d + n) * at(natural + n);
        if (c > best) {
          best = c;
          pos = nominal + d;
        }
      }
    }
    prev = pos;
    for (int n = 0; n < kFrame; ++n) {
      const long o = start + n;
      if (o < 0 || o >= static_cast<long>(out_len)) continue;
      out[o] += win(n) * at(pos + n);
      norm[o] += win(n);
    }
  }
  for (std::size_t i = 0; i < out_len; ++i) {
    if (norm[i] > 1e-8) out[i] /= norm[i];
  }
  return out;
}

std::vector<double> pitch_shift(const std::vector<double>& x, double semitones) {
  const double factor = std::pow(2.0, semitones / 12.0);
  const auto resampled_len =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(x.size() / factor)));
  std::vector<double> resampled(resampled_len);
  for (std::size_t i = 0; i < resampled_len; ++i) resampled[i] = sample_at(x, i * factor);
  return stretch_to(resampled, x.size());
}

// RBJ audio-EQ-cookbook biquad, direct form I.
struct Biquad {
  double b0, b1, b2, a1, a2;

  void run(std::vector<double>& x) const {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (double& v : x) {
      const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = y;
      v = y;
    }
  }
};

enum class BandKind { low_shelf, peak, high_shelf };

Biquad make_band(BandKind kind, double freq, double gain_db, double sample_rate) {
  const double a = std::pow(10.0, gain_db / 40.0);
  const double w0 = 2.0 * std::numbers::pi * freq / sample_rate;
  const double cw = std::cos(w0), sw = std::sin(w0);
  const double q = 0.707;
  const double alpha = sw / (2.0 * q);
  const double sa = 2.0 * std::sqrt(a) * alpha;
  double b0, b1, b2, a0, a1, a2;
  switch (kind) {
    case BandKind::low_shelf:
      b0 = a * ((a + 1) - (a - 1) * cw + sa);
      b1 = 2 * a * ((a - 1) - (a + 1) * cw);
      b2 = a * ((a + 1) - (a - 1) * cw - sa);
      a0 = (a + 1) + (a - 1) * cw + sa;
      a1 = -2 * ((a - 1) + (a + 1) * cw);
      a2 = (a + 1) + (a - 1) * cw - sa;
      break;
    case BandKind::high_shelf:
      b0 = a * ((a + 1) + (a - 1) * cw + sa);
      b1 = -2 * a * ((a - 1) + (a + 1) * cw);
      b2 = a * ((a + 1) + (a - 1) * cw - sa);
      a0 = (a + 1) - (a - 1) * cw + sa;
      a1 = 2 * ((a - 1) - (a + 1) * cw);
      a2 = (a + 1) - (a - 1) * cw - sa;
      break;
    case BandKind::peak:
    default:
      b0 = 1 + alpha * a;
      b1 = -2 * cw;
      b2 = 1 - alpha * a;
      a0 = 1 + alpha / a;
      a1 = -2 * cw;
      a2 = 1 - alpha / a;
      break;
  }
  return {b0 / a0, b1 / a0, b2 / a0, a1 / a0, a2 / a0};
}

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("unexpected end of file");
  return v;
}

}  // namespace

int mfcc_hop(int sample_rate) {
  return static_cast<int>(std::lround(sample_rate / kVideoFps));
}

Eigen::Index mfcc_frame_count(std::size_t num_samples, int sample_rate) {
  const auto fps = static_cast<std::size_t>(kVideoFps);
  const auto sr = static_cast<std::size_t>(sample_rate);
  return static_cast<Eigen::Index>((num_samples * fps + sr - 1) / sr);
}

AudioFeatures compute_mfcc(const Waveform& w) {
  if (w.sample_rate < 8000) throw InvalidArgument("compute_mfcc: sample rate below 8 kHz");
  constexpr int n_fft = MfccSettings::kWindow;
  if (w.samples.size() < static_cast<std::size_t>(n_fft)) {
    throw InvalidArgument("compute_mfcc: clip shorter than one FFT window");
  }
  const int hop = mfcc_hop(w.sample_rate);
  const Eigen::Index frames = mfcc_frame_count(w.samples.size(), w.sample_rate);
  const Eigen::MatrixXd fb = mel_filterbank(w.sample_rate);
  const Eigen::MatrixXd dct = dct_matrix();
  const Eigen::VectorXd win = hann_periodic(n_fft);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(n_fft);
  std::vector<std::complex<double>> spec;
  Eigen::VectorXd power(n_fft / 2 + 1);

  AudioFeatures out;
  out.mfcc.resize(frames, kNumMfcc);
  const auto n = static_cast<long>(w.samples.size());
  for (Eigen::Index t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t) * hop - n_fft / 2;
    for (int i = 0; i < n_fft; ++i) {
      const long s = start + i;
      buf[i] = (s >= 0 && s < n) ? w.samples[s] * win(i) : 0.0;
    }
    fft.fwd(spec, buf);
    for (int k = 0; k <= n_fft / 2; ++k) power(k) = std::norm(spec[k]);
    Eigen::VectorXd mel = fb * power;
    for (Eigen::Index m = 0; m < mel.size(); ++m) {
      mel(m) = std::log(std::max(mel(m), MfccSettings::kLogFloor));
    }
    out.mfcc.row(t) = (dct * mel).transpose();
  }
  return out;
}

AugmentSpec AugmentSpec::mild() {
  AugmentSpec s;
  s.pitch_semitones = {-4.0, 4.0};
  s.gain_db = {-6.0, 6.0};
  s.low_shelf_db = {-6.0, 6.0};
  s.mid_peak_db = {-6.0, 6.0};
  s.high_shelf_db = {-6.0, 6.0};
  return s;
}

Waveform augment(const Waveform& w, const AugmentSpec& spec, std::uint64_t seed) {
  check_range(spec.pitch_semitones, 4.0, "pitch");
  check_range(spec.gain_db, 6.0, "gain");
  check_range(spec.low_shelf_db, 6.0, "low shelf");
  check_range(spec.mid_peak_db, 6.0, "mid band");
  check_range(spec.high_shelf_db, 6.0, "high shelf");
  if (w.samples.empty()) throw InvalidArgument("augment: empty waveform");

  std::mt19937_64 rng(seed);
  const double pitch = draw(spec.pitch_semitones, rng);
  const double low = draw(spec.low_shelf_db, rng);
  const double mid = draw(spec.mid_peak_db, rng);
  const double high = draw(spec.high_shelf_db, rng);
  const double gain = draw(spec.gain_db, rng);

  Waveform out = w;
  if (pitch != 0.0) out.samples = pitch_shift(out.samples, pitch);
  const double sr = w.sample_rate;
  if (low != 0.0) make_band(BandKind::low_shelf, 300.0, low, sr).run(out.samples);
  if (mid != 0.0) make_band(BandKind::peak, 1500.0, mid, sr).run(out.samples);
  if (high != 0.0) make_band(BandKind::high_shelf, std::min(4000.0, 0.45 * sr), high, sr)
                       .run(out.samples);
  if (gain != 0.0) {
    const double g = std::pow(10.0, gain / 20.0);
    for (double& v : out.samples) v *= g;
  }
  for (double& v : out.samples) v = std::clamp(v, -1.0, 1.0);
  return out;
}

AudioFeatures align_frames(const AudioFeatures& f, Eigen::Index video_len) {
  if (video_len < 1) throw InvalidArgument("align_frames: video length must be positive");
  const Eigen::Index t = f.frames();
  if (t < 1 || std::abs(t - video_len) > 2) {
    throw MisalignedClip("audio has " + std::to_string(t) + " frames, video has " +
                         std::to_string(video_len));
  }
  AudioFeatures out;
  out.frame_rate = f.frame_rate;
  out.mfcc.resize(video_len, kNumMfcc);
  const Eigen::Index keep = std::min(t, video_len);
  out.mfcc.topRows(keep) = f.mfcc.topRows(keep);
  for (Eigen::Index i = keep; i < video_len; ++i) out.mfcc.row(i) = f.mfcc.row(t - 1);
  return out;
}

Waveform resample_linear(const Waveform& w, int target_rate) {
  if (w.sample_rate == target_rate) return w;
  if (w.samples.empty()) return Waveform{{}, target_rate};
  Waveform out;
  out.sample_rate = target_rate;
  const double step = static_cast<double>(w.sample_rate) / target_rate;
  const auto len = static_cast<std::size_t>(std::floor(w.samples.size() / step));
  out.samples.resize(len);
  for (std::size_t i = 0; i < len; ++i) out.samples[i] = sample_at(w.samples, i * step);
  return out;
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char tag[4];
  auto read_tag = [&](const char* expect) {
    in.read(tag, 4);
    if (!in || std::memcmp(tag, expect, 4) != 0) {
      throw IoError("'" + path.string() + "' is not a RIFF/WAVE file");
    }
  };
  read_tag("RIFF");
  get<std::uint32_t>(in);
  read_tag("WAVE");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<char> data;
  while (in.read(tag, 4)) {
    const auto size = get<std::uint32_t>(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = get<std::uint16_t>(in);
      channels = get<std::uint16_t>(in);
      rate = get<std::uint32_t>(in);
      get<std::uint32_t>(in);
      get<std::uint16_t>(in);
      bits = get<std::uint16_t>(in);
      in.seekg(size - 16 + (size & 1), std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(size);
      in.read(data.data(), size);
      if (!in) throw IoError("'" + path.string() + "': truncated data chunk");
      break;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || channels == 0) throw IoError("'" + path.string() + "': missing fmt chunk");
  const bool pcm16 = format == 1 && bits == 16;
  const bool float32 = format == 3 && bits == 32;
  if (!pcm16 && !float32) {
    throw IoError("'" + path.string() + "': only 16-bit PCM and 32-bit float WAV are supported");
  }
  const std::size_t bytes = bits / 8;
  const std::size_t frames = data.size() / (bytes * channels);
  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const char* p = data.data() + (i * channels + c) * bytes;
      if (pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        acc += v / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        acc += v;
      }
    }
    w.samples[i] = std::clamp(acc / channels, -1.0, 1.0);
  }
  if (w.sample_rate != kDefaultSampleRate) w = resample_linear(w, kDefaultSampleRate);
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 4);
  out.write("RIFF", 4);
  put<std::uint32_t>(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, 3);  // IEEE float
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate * 4));
  put<std::uint16_t>(out, 4);
  put<std::uint16_t>(out, 32);
  out.write("data", 4);
  put<std::uint32_t>(out, data_bytes);
  for (double v : w.samples) put<float>(out, static_cast<float>(v));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_features(const std::filesystem::path& path, const AudioFeatures& f) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write("SPMF", 4);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(f.frames()));
  put<std::uint32_t>(out, kNumMfcc);
  put<double>(out, f.frame_rate);
  out.write(reinterpret_cast<const char*>(f.mfcc.data()),
            static_cast<std::streamsize>(f.mfcc.size() * sizeof(double)));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

AudioFeatures read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SPMF", 4) != 0) {
    throw IoError("'" + path.string() + "' is not a feature cache");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != 1) throw IoError("unsupported feature cache version");
  const auto frames = get<std::uint32_t>(in);
  const auto coeffs = get<std::uint32_t>(in);
  if (coeffs != kNumMfcc) throw IoError("feature cache has wrong coefficient count");
  AudioFeatures f;
  f.frame_rate = get<double>(in);
  f.mfcc.resize(frames, kNumMfcc);
  in.read(reinterpret_cast<char*>(f.mfcc.data()),
          static_cast<std::streamsize>(f.mfcc.size() * sizeof(double)));
  if (!in) throw IoError("'" + path.string() + "': truncated feature cache");
  return f;
}

}  // namespace space
