#pragma once

#include "space/sequence_io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace space {

// Mean absolute errors averaged over frames, landmarks and the x/y
// coordinates after orthographic projection.
struct MouthMetrics {
  double position = 0.0;  // M-P
  double velocity = 0.0;  // M-V
};

struct FaceMetrics {
  double position = 0.0;  // F-P
  double velocity = 0.0;  // F-V
};

// Both sequences are frontalized with their own poses (raw or posed frames)
// or recentered (frontal frames), then placed in the metric frame with the
// mouth corners at (-1, 0) and (1, 0). Mouth landmarks are 48..67.
// Throws DegenerateFace when a frame's mouth corners coincide.
MouthMetrics mouth_metrics(const LandmarkSequence& pred, const LandmarkSequence& gt);

// Same frontalization, then ear-distance normalization; all 68 landmarks.
FaceMetrics face_metrics(const LandmarkSequence& pred, const LandmarkSequence& gt);

// Frontal, recentered, unnormalized copy of a frame of any space.
LandmarkFrame to_frontal(const LandmarkFrame& frame, const HeadPose& pose);

// Mean |a - b| over all keypoint coordinates of two equal-length sequences.
double keypoint_l1(const std::vector<LatentKeypoints>& pred,
                   const std::vector<LatentKeypoints>& gt);

struct ClipEvaluation {
  std::string clip_id;
  double mp = 0.0, mv = 0.0, fp = 0.0, fv = 0.0;
  std::optional<double> kp_l1;  // latent keypoint L1, when latents were predicted
};

struct EvalReport {
  std::vector<ClipEvaluation> clips;
  ClipEvaluation aggregate;  // clip_id "aggregate", means of the rows
  std::size_t clip_count = 0;
  std::size_t skipped = 0;
  std::string config_hash;
  std::string label;

  // Recomputes aggregate and clip_count from the rows.
  void finalize();
};

ClipEvaluation evaluate_sequences(const std::string& clip_id, const LandmarkSequence& pred,
                                  const LandmarkSequence& gt);

// JSON with stable field names: {"label", "config_hash", "clip_count",
// "skipped", "aggregate": {...}, "clips": [{"clip_id", "M-P", "M-V", "F-P",
// "F-V", "KP-L1"?}]}.
void write_eval_report(const std::filesystem::path& path, const EvalReport& report);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& text);

}  // namespace space
