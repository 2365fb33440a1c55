#pragma once

#include "space/evaluation.hpp"
#include "space/training.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace space {

struct Models {
  S2L s2l{nullptr};
  PoseGen posegen{nullptr};  // only needed for generated poses
  L2L l2l{nullptr};
};

// Loads <dir>/s2l.ckpt, <dir>/l2l.ckpt and, when with_posegen, <dir>/posegen.ckpt.
Models load_models(const std::filesystem::path& dir, bool with_posegen);

enum class PoseMode { generated, transfer, fixed };

// "generated", "fixed" or "transfer:<pose file>".
struct PoseModeSpec {
  PoseMode mode = PoseMode::generated;
  std::filesystem::path file;
};
PoseModeSpec parse_pose_mode(const std::string& text);

struct InferenceRequest {
  LandmarkFrame source;  // frontal_normalized reference frame
  HeadPose source_pose;  // pose of the source portrait
  Waveform audio;
  PoseMode pose_mode = PoseMode::generated;
  std::vector<HeadPose> transfer_poses;  // pose_mode transfer, at least one per frame
  EmotionVector emotion;
  std::uint64_t seed = 0;
  std::vector<std::size_t> blink_frames;
  int blink_duration = 7;
  Eigen::Vector2d gaze = Eigen::Vector2d::Zero();  // iris offset in normalized units
  std::uint64_t oracle_seed = kDefaultOracleSeed;
};

struct InferenceResult {
  LandmarkSequence landmarks;        // S2L output after edits, frontal_normalized
  std::vector<HeadPose> poses;
  std::vector<LandmarkFrame> posed;  // landmarks with the poses applied
  LatentKeypoints source_keypoints;
  std::vector<LatentKeypoints> keypoints;
};

// S2L -> landmark edits -> poses -> L2L. Deterministic for a fixed request.
InferenceResult infer(Models& models, const InferenceRequest& request);

// Writes landmarks.jsonl, poses.jsonl, posed.jsonl, keypoints.jsonl and
// manifest.json under out_dir, plus frames/frame_NNNNN.ppm when render_size > 0.
void write_inference(const std::filesystem::path& out_dir, const InferenceResult& result,
                     int render_size);

// Closes and reopens the lids with a triangular profile of the given length
// centered on each event frame. Overlapping events merge (the stronger
// closure wins).
std::vector<LandmarkFrame> blink_inject(std::vector<LandmarkFrame> frames,
                                        const std::vector<std::size_t>& at_frames,
                                        int duration);

// Shifts the iris points of both eyes.
std::vector<LandmarkFrame> apply_gaze(std::vector<LandmarkFrame> frames,
                                      const Eigen::Vector2d& offset);

// Model outputs as geometry types.
std::vector<LandmarkFrame> frames_from_tensor(const torch::Tensor& t);  // (T, 308)
std::vector<LatentKeypoints> keypoints_from_tensor(const torch::Tensor& t);  // (T, 60)

struct ClipPrediction {
  LandmarkSequence landmarks;  // S2L rollout with ground-truth poses attached
  std::vector<LatentKeypoints> keypoints;        // L2L on the predicted posed landmarks
  std::vector<LatentKeypoints> keypoints_gt_in;  // L2L on ground-truth posed landmarks
};

// Rollouts for one clip from its first frame, audio and emotion. Poses are
// transferred from the clip so metrics compare like with like.
ClipPrediction predict_clip(Models& models, const ClipRecord& record, const ClipTensors& clip);

struct EvaluationSummary {
  EvalReport model;     // S2L rollouts; KP-L1 of the full pipeline
  EvalReport baseline;  // training mean face and mean keypoints
  double l2l_kp_l1 = 0.0;       // L2L on ground-truth posed landmarks
  double baseline_kp_l1 = 0.0;  // mean keypoints
  double copy_kp_l1 = 0.0;      // source keypoints repeated for every frame
};

// records[i] and clips[i] describe the same clip.
EvaluationSummary evaluate_models(Models& models, const TrainingSet& train,
                                  const std::vector<ClipRecord>& records,
                                  const std::vector<ClipTensors>& clips);

}  // namespace space
