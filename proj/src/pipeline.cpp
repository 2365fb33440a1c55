#include "space/pipeline.hpp"

#include "space/errors.hpp"
#include "space/random.hpp"
#include "space/render.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace space {

namespace fs = std::filesystem;

Models load_models(const fs::path& dir, bool with_posegen) {
  Models m;
  m.s2l = load_s2l(dir / "s2l.ckpt");
  m.l2l = load_l2l(dir / "l2l.ckpt");
  if (with_posegen) m.posegen = load_posegen(dir / "posegen.ckpt");
  return m;
}

PoseModeSpec parse_pose_mode(const std::string& text) {
  if (text == "generated") return {PoseMode::generated, {}};
  if (text == "fixed") return {PoseMode::fixed, {}};
  const std::string prefix = "transfer:";
  if (text.rfind(prefix, 0) == 0 && text.size() > prefix.size()) {
    return {PoseMode::transfer, text.substr(prefix.size())};
  }
  throw InvalidArgument("pose mode must be generated, fixed or transfer:<file>, got '" + text + "'");
}

std::vector<LandmarkFrame> frames_from_tensor(const torch::Tensor& t) {
  std::vector<LandmarkFrame> out;
  out.reserve(static_cast<std::size_t>(t.size(0)));
  for (int64_t i = 0; i < t.size(0); ++i) {
    out.push_back(tensor_to_frame(t[i], LandmarkSpace::frontal_normalized));
  }
  return out;
}

std::vector<LatentKeypoints> keypoints_from_tensor(const torch::Tensor& t) {
  std::vector<LatentKeypoints> out;
  out.reserve(static_cast<std::size_t>(t.size(0)));
  for (int64_t i = 0; i < t.size(0); ++i) out.push_back(tensor_to_keypoints(t[i]));
  return out;
}

std::vector<LandmarkFrame> blink_inject(std::vector<LandmarkFrame> frames,
                                        const std::vector<std::size_t>& at_frames, int duration) {
  if (duration < 1) throw InvalidArgument("blink duration must be positive");
  const double half = 0.5 * duration;
  std::vector<double> closure(frames.size(), 0.0);
  for (std::size_t c : at_frames) {
    if (c >= frames.size()) {
      throw InvalidArgument("blink at frame " + std::to_string(c) + " is past the sequence end");
    }
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const double d = std::abs(static_cast<double>(t) - static_cast<double>(c));
      if (d < half) closure[t] = std::max(closure[t], 1.0 - d / half);
    }
  }
  for (std::size_t t = 0; t < frames.size(); ++t) close_lids(frames[t], closure[t]);
  return frames;
}

std::vector<LandmarkFrame> apply_gaze(std::vector<LandmarkFrame> frames,
                                      const Eigen::Vector2d& offset) {
  if (!offset.allFinite()) throw InvalidArgument("gaze offset must be finite");
  for (auto& f : frames) {
    for (int e = 0; e < 2; ++e) {
      const int base = e * eye::kPerEye + eye::kIris;
      f.eyes.middleRows(base, eye::kIrisPoints).rowwise() += offset.transpose();
    }
  }
  return frames;
}

namespace {

LandmarkFrame as_normalized(const LandmarkFrame& f, const HeadPose& pose) {
  if (f.space == LandmarkSpace::frontal_normalized) return f;
  if (f.space == LandmarkSpace::metric) throw ContractError("source frame cannot be metric");
  return normalize_scale(frontalize(f, pose)).frame;
}

std::vector<HeadPose> generate_poses(PoseGen& model, const torch::Tensor& mfcc, std::uint64_t seed,
                                     double scale) {
  std::mt19937_64 rng(mix_seed(seed, 0x905E));
  std::normal_distribution<float> n(0.0f, 1.0f);
  torch::Tensor z = torch::empty({1, kPoseLatentDims});
  for (int i = 0; i < kPoseLatentDims; ++i) z[0][i] = n(rng);
  InferenceGuard g(*model);
  const torch::Tensor out = model->decode(mfcc, z)[0];
  std::vector<HeadPose> poses;
  for (int64_t t = 0; t < out.size(0); ++t) poses.push_back(tensor_to_pose(out[t], scale));
  return poses;
}

}  // namespace

InferenceResult infer(Models& models, const InferenceRequest& req) {
  if (!models.s2l || !models.l2l) throw ConfigError("inference needs S2L and L2L checkpoints");
  req.emotion.validate();
  validate(req.source_pose);
  const MfccMatrix features = compute_mfcc(req.audio).mfcc;
  const auto t_len = static_cast<std::size_t>(features.rows());
  const torch::Tensor mfcc = mfcc_to_tensor(features).unsqueeze(0);
  const torch::Tensor emotion = emotion_to_tensor(req.emotion).unsqueeze(0);
  const LandmarkFrame source = as_normalized(req.source, req.source_pose);

  InferenceResult r;
  {
    InferenceGuard g(*models.s2l);
    const torch::Tensor out =
        models.s2l->rollout(frame_to_tensor(source).unsqueeze(0), mfcc, emotion)[0];
    r.landmarks.frames = frames_from_tensor(out);
  }
  if (!req.blink_frames.empty()) {
    r.landmarks.frames = blink_inject(std::move(r.landmarks.frames), req.blink_frames,
                                      req.blink_duration);
  }
  if (!req.gaze.isZero()) r.landmarks.frames = apply_gaze(std::move(r.landmarks.frames), req.gaze);

  switch (req.pose_mode) {
    case PoseMode::fixed:
      r.poses.assign(t_len, req.source_pose);
      break;
    case PoseMode::transfer:
      if (req.transfer_poses.size() < t_len) {
        throw InvalidArgument("pose file has " + std::to_string(req.transfer_poses.size()) +
                              " frames, audio needs " + std::to_string(t_len));
      }
      r.poses.assign(req.transfer_poses.begin(), req.transfer_poses.begin() + static_cast<long>(t_len));
      for (const auto& p : r.poses) validate(p);
      break;
    case PoseMode::generated:
      if (!models.posegen) throw ConfigError("generated poses need a PoseGen checkpoint");
      r.poses = generate_poses(models.posegen, mfcc, req.seed, req.source_pose.scale);
      break;
  }
  r.landmarks.poses = r.poses;

  std::vector<torch::Tensor> posed;
  for (std::size_t t = 0; t < t_len; ++t) {
    r.posed.push_back(apply_pose(r.landmarks.frames[t], r.poses[t]));
    posed.push_back(face_to_tensor(r.posed.back().face));
  }
  const LatentOracle oracle(req.oracle_seed);
  r.source_keypoints = oracle(apply_pose(source, req.source_pose));
  {
    InferenceGuard g(*models.l2l);
    const torch::Tensor out = models.l2l->rollout(
        torch::stack(posed).unsqueeze(0), mfcc, keypoints_to_tensor(r.source_keypoints).unsqueeze(0),
        emotion)[0];
    r.keypoints = keypoints_from_tensor(out);
  }
  return r;
}

void write_inference(const fs::path& out_dir, const InferenceResult& result, int render_size) {
  fs::create_directories(out_dir);
  write_landmark_sequence(out_dir / "landmarks.jsonl", result.landmarks);
  write_pose_sequence(out_dir / "poses.jsonl", result.poses);
  write_landmark_sequence(out_dir / "posed.jsonl", {result.posed, result.poses});
  write_latent_sequence(out_dir / "keypoints.jsonl", result.keypoints);
  write_latent_sequence(out_dir / "source_keypoints.jsonl", {result.source_keypoints});
  nlohmann::json manifest = {{"frames", result.landmarks.size()},
                             {"fps", kVideoFps},
                             {"landmarks", "landmarks.jsonl"},
                             {"poses", "poses.jsonl"},
                             {"posed", "posed.jsonl"},
                             {"keypoints", "keypoints.jsonl"},
                             {"source_keypoints", "source_keypoints.jsonl"}};
  if (render_size > 0) {
    render_sequence(result.posed, result.keypoints, out_dir / "frames", render_size);
    manifest["frames_dir"] = "frames";
    manifest["render_size"] = render_size;
  }
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw IoError("cannot write '" + (out_dir / "manifest.json").string() + "'");
  out << manifest.dump(2) << '\n';
}

ClipPrediction predict_clip(Models& models, const ClipRecord& record, const ClipTensors& clip) {
  ClipPrediction p;
  const torch::Tensor mfcc = clip.mfcc[0].unsqueeze(0);
  const torch::Tensor emotion = clip.emotion.unsqueeze(0);
  {
    InferenceGuard g(*models.s2l);
    const torch::Tensor out = models.s2l->rollout(clip.frames[0].unsqueeze(0), mfcc, emotion)[0];
    p.landmarks.frames = frames_from_tensor(out);
  }
  p.landmarks.poses = record.landmarks.poses;
  std::vector<torch::Tensor> posed;
  for (std::size_t t = 0; t < p.landmarks.size(); ++t) {
    posed.push_back(face_to_tensor(apply_pose(p.landmarks.frames[t], p.landmarks.poses[t]).face));
  }
  const torch::Tensor kp_s = clip.latents[0].unsqueeze(0);
  InferenceGuard g(*models.l2l);
  p.keypoints = keypoints_from_tensor(
      models.l2l->rollout(torch::stack(posed).unsqueeze(0), mfcc, kp_s, emotion)[0]);
  p.keypoints_gt_in = keypoints_from_tensor(
      models.l2l->rollout(clip.posed.unsqueeze(0), mfcc, kp_s, emotion)[0]);
  return p;
}

EvaluationSummary evaluate_models(Models& models, const TrainingSet& train,
                                  const std::vector<ClipRecord>& records,
                                  const std::vector<ClipTensors>& clips) {
  if (records.size() != clips.size()) throw InvalidArgument("records and tensors differ in count");
  EvaluationSummary s;
  s.model.label = "model";
  s.baseline.label = "mean baseline";
  const LandmarkFrame mean_frame =
      tensor_to_frame(train.mean_frame(), LandmarkSpace::frontal_normalized);
  const LatentKeypoints mean_kp = tensor_to_keypoints(train.mean_keypoints());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ClipRecord& rec = records[i];
    const ClipPrediction p = predict_clip(models, rec, clips[i]);
    ClipEvaluation row = evaluate_sequences(rec.clip_id, p.landmarks, rec.landmarks);
    row.kp_l1 = keypoint_l1(p.keypoints, rec.latents);
    s.model.clips.push_back(row);
    s.l2l_kp_l1 += keypoint_l1(p.keypoints_gt_in, rec.latents);

    LandmarkSequence base{std::vector<LandmarkFrame>(rec.frames(), mean_frame), rec.landmarks.poses};
    ClipEvaluation brow = evaluate_sequences(rec.clip_id, base, rec.landmarks);
    brow.kp_l1 = keypoint_l1(std::vector<LatentKeypoints>(rec.frames(), mean_kp), rec.latents);
    s.baseline_kp_l1 += *brow.kp_l1;
    s.copy_kp_l1 += keypoint_l1(std::vector<LatentKeypoints>(rec.frames(), rec.latents.front()),
                                rec.latents);
    s.baseline.clips.push_back(brow);
  }
  const double n = static_cast<double>(std::max<std::size_t>(records.size(), 1));
  s.l2l_kp_l1 /= n;
  s.baseline_kp_l1 /= n;
  s.copy_kp_l1 /= n;
  s.model.finalize();
  s.baseline.finalize();
  return s;
}

}  // namespace space
