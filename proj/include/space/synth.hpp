#pragma once

#include "space/audio.hpp"
#include "space/geometry.hpp"
#include "space/sequence_io.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace space {

inline constexpr int kNumEmotions = 8;

enum class Emotion { neutral, happy, sad, angry, fear, surprise, disgust, contempt };

std::string_view to_string(Emotion e);
Emotion emotion_from_string(std::string_view name);

// Nonnegative weights over the 8 emotion labels; overall intensity is the
// vector magnitude, and every weight is at most 1.
struct EmotionVector {
  std::array<double, kNumEmotions> weights{};

  static EmotionVector neutral() { return {}; }
  static EmotionVector one_hot(Emotion e, double intensity);

  void validate() const;
  double intensity() const;
  // Label with the largest weight, neutral when all weights are 0.
  Emotion dominant() const;
  bool operator==(const EmotionVector&) const = default;
};

// Identity (face shape) parameters, each a relative deviation around 0.
struct FaceShape {
  double eye_spacing = 0.0;
  double eye_size = 0.0;
  double nose_length = 0.0;
  double mouth_width = 0.0;
  double jaw_length = 0.0;
  double brow_height = 0.0;
  double face_depth = 0.0;

  static FaceShape sample(std::uint64_t seed);
};

// Neutral frontal_normalized face for a shape with the given articulation.
// mouth_open >= 0 drops the jaw and lower lip; lip_spread widens (>0) or
// rounds (<0) the lips.
LandmarkFrame neutral_face(const FaceShape& shape, double mouth_open = 0.0,
                           double lip_spread = 0.0);

// Fixed per-emotion displacement field over the face and eye landmarks.
struct LandmarkOffset {
  FaceMatrix face = FaceMatrix::Zero();
  EyeMatrix eyes = EyeMatrix::Zero();
};
LandmarkOffset emotion_offset(Emotion e);
// Sum of per-label offsets scaled by their weights.
LandmarkOffset emotion_offset(const EmotionVector& emotion);

// Lid closure in [0, 1] for both eye sets: 1 puts each upper-lid point on the
// midpoint of its lower-lid partner. Iris points are left alone.
void close_lids(LandmarkFrame& frame, double closure);
// Largest vertical gap between paired upper/lower lid points of the 2D eyes.
double lid_aperture(const LandmarkFrame& frame);
// Vertical inner-lip gap (landmarks 62 and 66).
double mouth_opening(const LandmarkFrame& frame);

struct ClipSpec {
  double duration_s = 3.0;  // [1, 10]
  EmotionVector emotion;
  bool silent = false;
  std::uint64_t identity_seed = 0;
  double max_angle_deg = 30.0;  // bound on the head-pose random walk, <= 45
};

enum class AnomalyKind { none, temporal_jump, rotation, scale_sweep };
std::string_view to_string(AnomalyKind k);
AnomalyKind anomaly_from_string(std::string_view s);

struct FilterFlags {
  AnomalyKind anomaly = AnomalyKind::none;
  bool hands_detected = false;
};

struct ClipRecord {
  std::string clip_id;
  Waveform waveform;
  LandmarkSequence landmarks;  // frontal_normalized frames + per-frame head pose
  std::vector<LatentKeypoints> latents;
  EmotionVector emotion;
  FaceShape shape;
  double fps = kVideoFps;
  FilterFlags flags;
  // Per-frame articulation the landmarks were generated from (not persisted).
  std::vector<double> mouth_drive;

  std::size_t frames() const { return landmarks.size(); }
};

// Deterministic stand-in for an image encoder that maps posed landmarks to
// 20 latent 3D keypoints: kp = tanh(W2 tanh(W1 x + b1) + b2) over the
// flattened posed face x. The weights are drawn once from the seed and both
// weight matrices are rescaled to spectral norm kSpectralNorm.
class LatentOracle {
 public:
  static constexpr int kHidden = 96;
  static constexpr double kSpectralNorm = 2.0;

  explicit LatentOracle(std::uint64_t seed);

  LatentKeypoints operator()(const LandmarkFrame& posed) const;
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  Eigen::MatrixXd w1_;
  Eigen::VectorXd b1_;
  Eigen::MatrixXd w2_;
  Eigen::VectorXd b2_;
};

inline constexpr std::uint64_t kDefaultOracleSeed = 20221216;

// Synthesizes one clip. Landmarks and latents use oracle for ground truth.
ClipRecord generate_clip(const ClipSpec& spec, std::uint64_t seed, const LatentOracle& oracle);

// Injects a labeled anomaly that exceeds the default filter threshold by at
// least a factor of 2 (a 0.5 landmark cut, a 95 degree yaw excursion or a
// 1 -> 2.8 scale sweep).
void inject_anomaly(ClipRecord& clip, AnomalyKind kind, std::uint64_t seed,
                    const LatentOracle& oracle);

struct CorpusConfig {
  int clips = 100;
  double train_ratio = 0.8;
  double val_ratio = 0.1;
  double test_ratio = 0.1;
  std::uint64_t seed = 1;
  double anomaly_rate = 0.0;
  double min_duration_s = 3.0;
  double max_duration_s = 5.0;
  double emotion_prob = 0.6;  // fraction of clips with a non-neutral label
  std::uint64_t oracle_seed = kDefaultOracleSeed;
};

struct ManifestEntry {
  std::string id;
  std::string split;  // train | val | test
  EmotionVector emotion;
  std::uint64_t identity_seed = 0;
  std::size_t frames = 0;
  double duration_s = 0.0;
  FilterFlags flags;
  std::string audio;  // paths relative to the corpus root
  std::string landmarks;
  std::string poses;
  std::string latents;
};

struct Corpus {
  std::filesystem::path root;
  CorpusConfig config;
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split(std::string_view name) const;
};

inline constexpr const char* kManifestFile = "manifest.jsonl";
inline constexpr const char* kCorpusConfigFile = "corpus.json";

// Writes <root>/corpus.json, <root>/manifest.jsonl and one directory per clip
// under <root>/clips/<id>/ holding audio.wav, landmarks.jsonl, poses.jsonl and
// latents.jsonl.
Corpus build_corpus(const std::filesystem::path& root, const CorpusConfig& config);

// Reads corpus.json and the given manifest (default manifest.jsonl).
Corpus load_corpus(const std::filesystem::path& root,
                   const std::string& manifest_name = kManifestFile);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

ClipRecord load_clip(const Corpus& corpus, const ManifestEntry& entry);
void save_clip(const std::filesystem::path& root, const ClipRecord& clip, ManifestEntry& entry);

}  // namespace space
