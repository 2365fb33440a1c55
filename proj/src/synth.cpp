#include "space/synth.hpp"

#include "space/errors.hpp"
#include "space/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace space {

namespace {

constexpr double kPi = std::numbers::pi;

constexpr std::array<const char*, kNumEmotions> kEmotionNames = {
    "neutral", "happy", "sad", "angry", "fear", "surprise", "disgust", "contempt"};

// Paired (upper, lower) lid landmarks of the 68-point face.
constexpr std::array<std::pair<int, int>, 4> kFaceLidPairs = {
    std::pair{37, 41}, std::pair{38, 40}, std::pair{43, 47}, std::pair{44, 46}};

struct EyeGeometry {
  double cx, cy, width, height;
};

std::array<EyeGeometry, 2> eye_geometry(const FaceShape& s) {
  const double spacing = 0.40 * (1.0 + 0.10 * s.eye_spacing);
  const double width = 0.26 * (1.0 + 0.10 * s.eye_size);
  const double height = 0.09 * (1.0 + 0.10 * s.eye_size);
  return {EyeGeometry{-spacing, 0.28, width, height}, EyeGeometry{spacing, 0.28, width, height}};
}

void set(FaceMatrix& f, int i, double x, double y, double z) { f.row(i) << x, y, z; }

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Rescales a matrix to the requested spectral norm.
Eigen::MatrixXd with_spectral_norm(Eigen::MatrixXd m, double norm) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return m * (norm / svd.singularValues()(0));
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = n(rng);
  }
  return m;
}

struct Vowel {
  double f1, f2, openness, spread;
};

constexpr std::array<Vowel, 5> kVowels = {
    Vowel{750, 1200, 1.00, 0.3},   // a
    Vowel{500, 1900, 0.70, 0.6},   // e
    Vowel{300, 2300, 0.45, 1.0},   // i
    Vowel{500, 900, 0.75, -0.6},   // o
    Vowel{320, 800, 0.50, -1.0}};  // u

struct Syllable {
  std::size_t begin = 0;  // samples
  std::size_t end = 0;
  double loudness = 1.0;
  int vowel = 0;
};

// Voiced syllables separated by pauses; returns per-sample envelope,
// openness and spread, and the synthesized samples.
struct SpeechTrack {
  std::vector<double> samples;
  std::vector<double> envelope;
  std::vector<double> openness;
  std::vector<double> spread;
};

SpeechTrack synthesize_speech(std::size_t n, int sr, bool silent, std::mt19937_64& rng) {
  SpeechTrack track;
  track.samples.assign(n, 0.0);
  track.envelope.assign(n, 0.0);
  track.openness.assign(n, 0.0);
  track.spread.assign(n, 0.0);
  if (silent) return track;

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };

  std::vector<Syllable> syllables;
  auto pos = static_cast<std::size_t>(uniform(0.1, 0.3) * sr);
  while (pos < n) {
    const int count = 1 + static_cast<int>(u01(rng) * 3.0);
    for (int k = 0; k < count && pos < n; ++k) {
      Syllable s;
      s.begin = pos;
      s.end = std::min(n, pos + static_cast<std::size_t>(uniform(0.12, 0.28) * sr));
      s.loudness = uniform(0.5, 1.0);
      s.vowel = static_cast<int>(u01(rng) * kVowels.size()) % static_cast<int>(kVowels.size());
      syllables.push_back(s);
      pos = s.end;
    }
    const double pause = u01(rng) < 0.25 ? uniform(0.4, 0.6) : uniform(0.05, 0.3);
    pos += static_cast<std::size_t>(pause * sr);
  }

  const double f0_base = uniform(100.0, 220.0);
  const double intonation_phase = uniform(0.0, 2.0 * kPi);
  std::normal_distribution<double> noise(0.0, 1.0);
  double phase = 0.0;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double f0 = f0_base * (1.0 + 0.08 * std::sin(2.0 * kPi * 0.7 * t + intonation_phase));
    phase += 2.0 * kPi * f0 / sr;
    if (phase > 2.0 * kPi * 64.0) phase -= 2.0 * kPi * 64.0;
    while (next < syllables.size() && syllables[next].end <= i) ++next;
    if (next >= syllables.size() || i < syllables[next].begin) continue;
    const Syllable& s = syllables[next];
    const double tau = static_cast<double>(i - s.begin) / static_cast<double>(s.end - s.begin);
    const double env = s.loudness * std::sin(kPi * tau);
    const Vowel& v = kVowels[s.vowel];

    double voiced = 0.0, norm = 0.0;
    for (int h = 1; h * f0 < 5000.0; ++h) {
      const double f = h * f0;
      double a = 0.0;
      for (double formant : {v.f1, v.f2, 2500.0}) {
        const double d = (f - formant) / 120.0;
        a += 1.0 / (1.0 + d * d);
      }
      voiced += a * std::sin(h * phase);
      norm += a * a;
    }
    voiced /= std::sqrt(norm / 2.0);
    track.samples[i] = 0.2 * env * voiced + 0.01 * env * noise(rng);
    track.envelope[i] = env;
    track.openness[i] = env * (0.6 + 0.4 * v.openness);
    track.spread[i] = env * v.spread;
  }
  for (double& x : track.samples) x = static_cast<float>(std::clamp(x, -1.0, 1.0));
  return track;
}

// Mean of a per-sample signal over the hop-wide window centered on frame t.
std::vector<double> per_frame(const std::vector<double>& x, std::size_t frames, int hop) {
  std::vector<double> out(frames, 0.0);
  const auto n = static_cast<long>(x.size());
  for (std::size_t t = 0; t < frames; ++t) {
    const long c = static_cast<long>(t) * hop;
    long lo = std::max(0L, c - hop / 2), hi = std::min(n, c + hop / 2);
    double acc = 0.0;
    for (long i = lo; i < hi; ++i) acc += x[i];
    out[t] = hi > lo ? acc / static_cast<double>(hi - lo) : 0.0;
  }
  return out;
}

// Bounded, smoothed Ornstein-Uhlenbeck walk around a start value.
std::vector<double> bounded_walk(std::size_t frames, double start, double sigma, double bound,
                                 std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<double> raw(frames);
  double a = start;
  for (std::size_t t = 0; t < frames; ++t) {
    raw[t] = a;
    a += 0.04 * (start - a) + n(rng);
  }
  std::vector<double> out(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    double acc = 0.0;
    int count = 0;
    for (long k = static_cast<long>(t) - 3; k <= static_cast<long>(t) + 3; ++k) {
      if (k < 0 || k >= static_cast<long>(frames)) continue;
      acc += raw[k];
      ++count;
    }
    out[t] = bound * std::tanh(acc / count / bound);
  }
  return out;
}

void recompute_latents(ClipRecord& clip, const LatentOracle& oracle) {
  clip.latents.resize(clip.frames());
  for (std::size_t t = 0; t < clip.frames(); ++t) {
    clip.latents[t] = oracle(apply_pose(clip.landmarks.frames[t], clip.landmarks.poses[t]));
  }
}

}  // namespace

std::string_view to_string(Emotion e) { return kEmotionNames[static_cast<int>(e)]; }

Emotion emotion_from_string(std::string_view name) {
  for (int i = 0; i < kNumEmotions; ++i) {
    if (name == kEmotionNames[i]) return static_cast<Emotion>(i);
  }
  throw InvalidArgument("unknown emotion '" + std::string(name) + "'");
}

EmotionVector EmotionVector::one_hot(Emotion e, double intensity) {
  EmotionVector v;
  if (e != Emotion::neutral) v.weights[static_cast<int>(e)] = intensity;
  v.validate();
  return v;
}

void EmotionVector::validate() const {
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0 || w > 1.0) {
      throw InvalidArgument("emotion weights must lie in [0, 1]");
    }
  }
}

double EmotionVector::intensity() const {
  double s = 0.0;
  for (double w : weights) s += w * w;
  return std::sqrt(s);
}

Emotion EmotionVector::dominant() const {
  int best = 0;
  for (int i = 1; i < kNumEmotions; ++i) {
    if (weights[i] > weights[best]) best = i;
  }
  return weights[best] > 0.0 ? static_cast<Emotion>(best) : Emotion::neutral;
}

FaceShape FaceShape::sample(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0xFACE));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FaceShape s;
  s.eye_spacing = u(rng);
  s.eye_size = u(rng);
  s.nose_length = u(rng);
  s.mouth_width = u(rng);
  s.jaw_length = u(rng);
  s.brow_height = u(rng);
  s.face_depth = u(rng);
  return s;
}

LandmarkFrame neutral_face(const FaceShape& s, double mouth_open, double lip_spread) {
  FaceMatrix f;
  const double depth = 1.0 + 0.10 * s.face_depth;

  // Jaw contour 0..16, ears at the ends.
  for (int i = 0; i <= 16; ++i) {
    const double phi = kPi * i / 16.0;
    const double sn = std::sin(phi);
    const double y = 0.1 - (1.05 + 0.08 * s.jaw_length) * std::pow(sn, 1.3) -
                     0.7 * mouth_open * sn * sn;
    set(f, i, -std::cos(phi), y, (-0.5 + 0.5 * sn) * depth);
  }
  // Brows 17..21 (left, outer to inner), 22..26 (right, inner to outer).
  const double brow_y = 0.55 + 0.05 * s.brow_height;
  for (int k = 0; k < 5; ++k) {
    const double arch = 0.06 * std::sin(kPi * (k + 0.5) / 5.0);
    set(f, 17 + k, -0.78 + 0.15 * k, brow_y + arch, (0.2 + 0.025 * k) * depth);
    set(f, 26 - k, 0.78 - 0.15 * k, brow_y + arch, (0.2 + 0.025 * k) * depth);
  }
  // Nose bridge 27..30, tip at 30.
  const double nose_step = 0.13 * (1.0 + 0.15 * s.nose_length);
  for (int k = 0; k < 4; ++k) set(f, 27 + k, 0.0, 0.38 - nose_step * k, (0.3 + 0.1 * k) * depth);
  const double tip_y = 0.38 - nose_step * 3;
  for (int k = 0; k < 5; ++k) {
    const double off = std::abs(k - 2) / 2.0;
    set(f, 31 + k, 0.09 * (k - 2), tip_y - 0.08 + 0.03 * off, (0.48 - 0.06 * off) * depth);
  }
  // Eye contours 36..41 and 42..47.
  const auto eyes = eye_geometry(s);
  for (int e = 0; e < 2; ++e) {
    const EyeGeometry& g = eyes[e];
    const int base = 36 + 6 * e;
    const double z = 0.22 * depth;
    const double hx = g.width / 2.0, hy = g.height / 2.0;
    const double s60 = std::sin(kPi / 3.0);
    set(f, base + 0, g.cx - hx, g.cy, z);
    set(f, base + 1, g.cx - hx / 2.0, g.cy + hy * s60, z);
    set(f, base + 2, g.cx + hx / 2.0, g.cy + hy * s60, z);
    set(f, base + 3, g.cx + hx, g.cy, z);
    set(f, base + 4, g.cx + hx / 2.0, g.cy - hy * s60, z);
    set(f, base + 5, g.cx - hx / 2.0, g.cy - hy * s60, z);
  }
  // Lips: outer 48..59, inner 60..67.
  const double cy = -0.42;
  const double mw = 0.28 * (1.0 + 0.10 * s.mouth_width + 0.15 * lip_spread);
  const double z_outer = 0.42 * depth, z_inner = 0.40 * depth;
  set(f, 48, -mw, cy, z_outer - 0.04);
  set(f, 54, mw, cy, z_outer - 0.04);
  for (int k = 1; k <= 5; ++k) {
    const double sk = std::sin(kPi * k / 6.0);
    const double x = mw * std::cos(kPi * k / 6.0);
    set(f, 48 + k, -x, cy + 0.07 * sk + 0.02 + 0.15 * mouth_open * sk, z_outer);
    set(f, 54 + k, x, cy - 0.08 * sk - mouth_open * sk, z_outer);
  }
  const double iw = 0.75 * mw;
  set(f, 60, -iw, cy, z_inner);
  set(f, 64, iw, cy, z_inner);
  for (int k = 1; k <= 3; ++k) {
    const double sk = std::sin(kPi * k / 4.0);
    const double x = iw * std::cos(kPi * k / 4.0);
    set(f, 60 + k, -x, cy + 0.01 * sk + 0.15 * mouth_open * sk, z_inner);
    set(f, 64 + k, x, cy - 0.01 * sk - mouth_open * sk, z_inner);
  }

  LandmarkFrame frame;
  frame.face = f;
  // 2D eyes: 9 upper-lid, 9 lower-lid, 8 iris points per eye.
  for (int e = 0; e < 2; ++e) {
    const EyeGeometry& g = eyes[e];
    const int base = e * eye::kPerEye;
    for (int k = 0; k < eye::kLidPoints; ++k) {
      const double u = kPi * k / (eye::kLidPoints - 1);
      const double x = g.cx - (g.width / 2.0) * std::cos(u);
      const double dy = (g.height / 2.0) * std::sin(u);
      frame.eyes.row(base + eye::kUpperLid + k) << x, g.cy + dy;
      frame.eyes.row(base + eye::kLowerLid + k) << x, g.cy - dy;
    }
    const double r = 0.045 * (1.0 + 0.10 * s.eye_size);
    for (int j = 0; j < eye::kIrisPoints; ++j) {
      const double a = 2.0 * kPi * j / eye::kIrisPoints;
      frame.eyes.row(base + eye::kIris + j) << g.cx + r * std::cos(a), g.cy + r * std::sin(a);
    }
  }
  frame.space = LandmarkSpace::frontal;
  return frame;
}

LandmarkOffset emotion_offset(Emotion e) {
  LandmarkOffset o;
  auto face = [&](int i, double dx, double dy, double dz = 0.0) {
    o.face.row(i) += Eigen::RowVector3d(dx, dy, dz);
  };
  auto lids = [&](bool upper, double dy) {
    for (auto [u, l] : kFaceLidPairs) face(upper ? u : l, 0.0, dy);
    for (int eye_idx = 0; eye_idx < 2; ++eye_idx) {
      const int base = eye_idx * eye::kPerEye + (upper ? eye::kUpperLid : eye::kLowerLid);
      for (int k = 1; k < eye::kLidPoints - 1; ++k) o.eyes(base + k, 1) += dy;
    }
  };
  auto brows = [&](double dy_inner, double dy_outer, double dx_inward) {
    for (int k = 0; k < 5; ++k) {
      const double w = k / 4.0;  // 0 outer, 1 inner
      const double dy = dy_outer + (dy_inner - dy_outer) * w;
      face(17 + k, dx_inward * w, dy);
      face(26 - k, -dx_inward * w, dy);
    }
  };
  switch (e) {
    case Emotion::neutral:
      break;
    case Emotion::happy:
      face(48, -0.03, 0.05);
      face(54, 0.03, 0.05);
      face(60, -0.02, 0.04);
      face(64, 0.02, 0.04);
      face(49, -0.01, 0.02);
      face(53, 0.01, 0.02);
      face(59, -0.01, 0.025);
      face(55, 0.01, 0.025);
      face(3, -0.01, 0.015);
      face(13, 0.01, 0.015);
      lids(false, 0.015);
      break;
    case Emotion::sad:
      face(48, 0.01, -0.04);
      face(54, -0.01, -0.04);
      face(60, 0.005, -0.03);
      face(64, -0.005, -0.03);
      brows(0.05, -0.01, 0.01);
      lids(true, -0.01);
      break;
    case Emotion::angry:
      brows(-0.06, -0.02, 0.03);
      lids(true, -0.015);
      face(48, 0.02, 0.0);
      face(54, -0.02, 0.0);
      for (int i = 61; i <= 63; ++i) face(i, 0.0, -0.01);
      for (int i = 65; i <= 67; ++i) face(i, 0.0, 0.01);
      break;
    case Emotion::fear:
      brows(0.06, 0.03, 0.02);
      lids(true, 0.02);
      face(48, -0.04, -0.01);
      face(54, 0.04, -0.01);
      face(60, -0.03, -0.01);
      face(64, 0.03, -0.01);
      break;
    case Emotion::surprise:
      brows(0.08, 0.08, 0.0);
      lids(true, 0.025);
      for (int i = 5; i <= 11; ++i) face(i, 0.0, -0.06 * std::sin(kPi * (i - 4) / 8.0));
      for (int i = 55; i <= 59; ++i) face(i, 0.0, -0.06);
      for (int i = 65; i <= 67; ++i) face(i, 0.0, -0.06);
      break;
    case Emotion::disgust:
      for (int i = 49; i <= 53; ++i) face(i, 0.0, 0.04);
      for (int i = 61; i <= 63; ++i) face(i, 0.0, 0.035);
      for (int i = 31; i <= 35; ++i) face(i, 0.0, 0.02);
      brows(-0.02, -0.02, 0.01);
      break;
    case Emotion::contempt:
      face(54, 0.02, 0.04);
      face(64, 0.015, 0.03);
      face(53, 0.01, 0.02);
      face(55, 0.01, 0.02);
      break;
  }
  return o;
}

LandmarkOffset emotion_offset(const EmotionVector& emotion) {
  LandmarkOffset total;
  for (int i = 0; i < kNumEmotions; ++i) {
    const double w = emotion.weights[i];
    if (w == 0.0) continue;
    const LandmarkOffset o = emotion_offset(static_cast<Emotion>(i));
    total.face += w * o.face;
    total.eyes += w * o.eyes;
  }
  return total;
}

void close_lids(LandmarkFrame& frame, double closure) {
  if (!(closure >= 0.0 && closure <= 1.0)) throw InvalidArgument("lid closure must be in [0, 1]");
  if (closure == 0.0) return;
  const double keep = 1.0 - closure;
  for (auto [u, l] : kFaceLidPairs) {
    const Eigen::RowVector3d mid = 0.5 * (frame.face.row(u) + frame.face.row(l));
    frame.face.row(u) = keep * frame.face.row(u) + closure * mid;
    frame.face.row(l) = keep * frame.face.row(l) + closure * mid;
  }
  for (int e = 0; e < 2; ++e) {
    const int base = e * eye::kPerEye;
    for (int k = 0; k < eye::kLidPoints; ++k) {
      const int u = base + eye::kUpperLid + k, l = base + eye::kLowerLid + k;
      const Eigen::RowVector2d mid = 0.5 * (frame.eyes.row(u) + frame.eyes.row(l));
      frame.eyes.row(u) = keep * frame.eyes.row(u) + closure * mid;
      frame.eyes.row(l) = keep * frame.eyes.row(l) + closure * mid;
    }
  }
}

double lid_aperture(const LandmarkFrame& frame) {
  double gap = 0.0;
  for (int e = 0; e < 2; ++e) {
    const int base = e * eye::kPerEye;
    for (int k = 0; k < eye::kLidPoints; ++k) {
      gap = std::max(gap, std::abs(frame.eyes(base + eye::kUpperLid + k, 1) -
                                   frame.eyes(base + eye::kLowerLid + k, 1)));
    }
  }
  return gap;
}

double mouth_opening(const LandmarkFrame& frame) {
  return frame.face(lmk::kInnerLipTop, 1) - frame.face(lmk::kInnerLipBottom, 1);
}

std::string_view to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::none: return "none";
    case AnomalyKind::temporal_jump: return "temporal_jump";
    case AnomalyKind::rotation: return "rotation";
    case AnomalyKind::scale_sweep: return "scale_sweep";
  }
  return "none";
}

AnomalyKind anomaly_from_string(std::string_view s) {
  if (s == "none") return AnomalyKind::none;
  if (s == "temporal_jump") return AnomalyKind::temporal_jump;
  if (s == "rotation") return AnomalyKind::rotation;
  if (s == "scale_sweep") return AnomalyKind::scale_sweep;
  throw InvalidArgument("unknown anomaly kind '" + std::string(s) + "'");
}

LatentOracle::LatentOracle(std::uint64_t seed) : seed_(seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x0EAC1E));
  w1_ = with_spectral_norm(gaussian_matrix(kHidden, kFaceDims, rng), kSpectralNorm);
  b1_ = gaussian_matrix(kHidden, 1, rng, 0.5);
  w2_ = with_spectral_norm(gaussian_matrix(kLatentDims, kHidden, rng), kSpectralNorm);
  b2_ = gaussian_matrix(kLatentDims, 1, rng, 0.1);
}

LatentKeypoints LatentOracle::operator()(const LandmarkFrame& posed) const {
  if (posed.space != LandmarkSpace::posed) {
    throw ContractError("latent oracle expects posed landmarks");
  }
  const Eigen::Map<const Eigen::VectorXd> x(posed.face.data(), kFaceDims);
  const Eigen::VectorXd h = (w1_ * x + b1_).array().tanh();
  const Eigen::VectorXd kp = (w2_ * h + b2_).array().tanh();
  LatentKeypoints out;
  Eigen::Map<Eigen::VectorXd>(out.data(), kLatentDims) = kp;
  return out;
}

ClipRecord generate_clip(const ClipSpec& spec, std::uint64_t seed, const LatentOracle& oracle) {
  if (!(spec.duration_s >= 1.0 && spec.duration_s <= 10.0)) {
    throw InvalidArgument("clip duration must be within [1, 10] s");
  }
  if (!(spec.max_angle_deg > 0.0 && spec.max_angle_deg <= 45.0)) {
    throw InvalidArgument("clip pose bound must be within (0, 45] degrees");
  }
  spec.emotion.validate();

  std::mt19937_64 rng(mix_seed(seed, 1));
  const int sr = kDefaultSampleRate;
  const auto n_samples = static_cast<std::size_t>(std::llround(spec.duration_s * sr));
  const auto frames = static_cast<std::size_t>(mfcc_frame_count(n_samples, sr));
  const int hop = mfcc_hop(sr);

  ClipRecord clip;
  clip.emotion = spec.emotion;
  clip.shape = FaceShape::sample(spec.identity_seed);

  SpeechTrack speech = synthesize_speech(n_samples, sr, spec.silent, rng);
  clip.waveform.sample_rate = sr;
  clip.waveform.samples = std::move(speech.samples);

  const auto open_f = per_frame(speech.openness, frames, hop);
  const auto spread_f = per_frame(speech.spread, frames, hop);
  const auto env_f = per_frame(speech.envelope, frames, hop);

  // Blink events every 2-4 s, 7 frames long.
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> closure(frames, 0.0);
  double next_blink = 15.0 + u01(rng) * 60.0;
  while (next_blink < static_cast<double>(frames)) {
    const double center = std::round(next_blink);
    for (std::size_t t = 0; t < frames; ++t) {
      const double d = std::abs(static_cast<double>(t) - center);
      closure[t] = std::max(closure[t], std::max(0.0, 1.0 - d / 3.5));
    }
    next_blink += 60.0 + u01(rng) * 60.0;
  }

  const LandmarkOffset emo = emotion_offset(spec.emotion);
  clip.mouth_drive.resize(frames);
  clip.landmarks.frames.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    // Articulation follows the audio with a one-frame lag.
    const double drive = t == 0 ? 0.0 : open_f[t - 1];
    const double spread = t == 0 ? 0.0 : spread_f[t - 1];
    clip.mouth_drive[t] = drive;
    LandmarkFrame f = neutral_face(clip.shape, 0.12 * drive, 0.8 * spread);
    // Expressions ramp in over the first 12 frames.
    const double onset = smoothstep(static_cast<double>(t) / 12.0);
    f.face += onset * emo.face;
    f.eyes += onset * emo.eyes;
    close_lids(f, closure[t]);
    const Eigen::RowVector3d c = face_centroid(f.face);
    f.face.rowwise() -= c;
    f.eyes.rowwise() -= c.head<2>();
    clip.landmarks.frames[t] = normalize_scale(f).frame;
  }

  // Head pose: bounded random walk plus a loudness-driven nod.
  const double bound = spec.max_angle_deg;
  std::uniform_real_distribution<double> start(-1.0, 1.0);
  const auto yaw = bounded_walk(frames, 0.5 * bound * start(rng), 0.5, bound, rng);
  const auto pitch = bounded_walk(frames, 0.3 * bound * start(rng), 0.4, bound, rng);
  const auto roll = bounded_walk(frames, 0.25 * bound * start(rng), 0.3, bound, rng);
  const auto tx = bounded_walk(frames, 0.05 * start(rng), 0.002, 0.1, rng);
  const auto ty = bounded_walk(frames, 0.05 * start(rng), 0.002, 0.1, rng);
  const double base_scale = 0.9 + 0.2 * u01(rng);
  const double scale_phase = 2.0 * kPi * u01(rng);
  clip.landmarks.poses.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    HeadPose& p = clip.landmarks.poses[t];
    const double nod = t == 0 ? 0.0 : 4.0 * env_f[t - 1];
    p.yaw = yaw[t];
    p.pitch = bound * std::tanh((pitch[t] + nod) / bound);
    p.roll = roll[t];
    p.tx = tx[t];
    p.ty = ty[t];
    p.tz = 0.0;
    p.scale = base_scale * (1.0 + 0.02 * std::sin(2.0 * kPi * t / 90.0 + scale_phase));
  }

  recompute_latents(clip, oracle);
  return clip;
}

void inject_anomaly(ClipRecord& clip, AnomalyKind kind, std::uint64_t seed,
                    const LatentOracle& oracle) {
  const std::size_t frames = clip.frames();
  if (kind == AnomalyKind::none || frames < 4) return;
  std::mt19937_64 rng(mix_seed(seed, 0xA70));
  std::uniform_int_distribution<std::size_t> pick(frames / 3, std::max(frames / 3, 2 * frames / 3));
  const std::size_t at = pick(rng);
  clip.flags.anomaly = kind;

  switch (kind) {
    case AnomalyKind::temporal_jump: {
      // Constant displacement field from the cut on: mean displacement 0.5,
      // ear anchors fixed so the frames stay ear-normalized.
      std::normal_distribution<double> n(0.0, 1.0);
      FaceMatrix field;
      const double magnitude = 0.5 * kNumFaceLandmarks / (kNumFaceLandmarks - 2);
      for (int i = 0; i < kNumFaceLandmarks; ++i) {
        Eigen::RowVector3d d(n(rng), n(rng), n(rng));
        field.row(i) = (i == lmk::kLeftEar || i == lmk::kRightEar)
                           ? Eigen::RowVector3d::Zero()
                           : Eigen::RowVector3d(d.normalized() * magnitude);
      }
      for (std::size_t t = at; t < frames; ++t) clip.landmarks.frames[t].face += field;
      break;
    }
    case AnomalyKind::rotation: {
      const double sign = (rng() & 1) ? 1.0 : -1.0;
      for (std::size_t t = 0; t < frames; ++t) {
        const double d = std::abs(static_cast<double>(t) - static_cast<double>(at));
        const double w = smoothstep(1.0 - std::max(0.0, d - 5.0) / 10.0);
        HeadPose& p = clip.landmarks.poses[t];
        p.yaw = p.yaw + (sign * 95.0 - p.yaw) * w;
      }
      break;
    }
    case AnomalyKind::scale_sweep: {
      const double s0 = clip.landmarks.poses.front().scale;
      for (std::size_t t = 0; t < frames; ++t) {
        clip.landmarks.poses[t].scale = s0 * (1.0 + 1.8 * t / static_cast<double>(frames - 1));
      }
      break;
    }
    case AnomalyKind::none:
      break;
  }
  recompute_latents(clip, oracle);
}

}  // namespace space
