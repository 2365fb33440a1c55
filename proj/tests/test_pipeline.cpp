#include "space/pipeline.hpp"

#include "space/errors.hpp"

#include <doctest.h>

#include <filesystem>

using namespace space;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.audio.channels = 8;
  c.lstm_hidden = 8;
  c.encoder_width = 8;
  c.posegen_hidden = 8;
  c.film_hidden = 4;
  return c;
}

Models fresh_models() {
  Models m;
  m.s2l = make_s2l(small_config(), 1);
  m.posegen = make_posegen(small_config(), 2);
  m.l2l = make_l2l(small_config(), 3);
  return m;
}

const ClipRecord& clip() {
  static const ClipRecord c = [] {
    ClipSpec spec;
    spec.duration_s = 1.0;
    return generate_clip(spec, 17, LatentOracle(kDefaultOracleSeed));
  }();
  return c;
}

InferenceRequest request(PoseMode mode) {
  InferenceRequest r;
  r.source = clip().landmarks.frames[0];
  r.source_pose = clip().landmarks.poses[0];
  r.audio = clip().waveform;
  r.pose_mode = mode;
  return r;
}

bool same_frames(const std::vector<LandmarkFrame>& a, const std::vector<LandmarkFrame>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].face != b[i].face || a[i].eyes != b[i].eyes) return false;
  }
  return true;
}

std::vector<LandmarkFrame> open_eyes(std::size_t n) {
  return std::vector<LandmarkFrame>(n, neutral_face(FaceShape{}));
}

}  // namespace

TEST_CASE("pose mode parsing") {
  CHECK(parse_pose_mode("generated").mode == PoseMode::generated);
  CHECK(parse_pose_mode("fixed").mode == PoseMode::fixed);
  const PoseModeSpec t = parse_pose_mode("transfer:a/b.jsonl");
  CHECK(t.mode == PoseMode::transfer);
  CHECK(t.file == fs::path("a/b.jsonl"));
  CHECK_THROWS_AS(parse_pose_mode("transfer:"), InvalidArgument);
  CHECK_THROWS_AS(parse_pose_mode("random"), InvalidArgument);
}

TEST_CASE("blink injection") {
  const auto frames = open_eyes(30);
  const double open = lid_aperture(frames[0]);
  REQUIRE(open > 0.0);
  CHECK(same_frames(blink_inject(frames, {}, 7), frames));

  const auto out = blink_inject(frames, {10}, 7);
  // Only the lids move.
  for (std::size_t t = 0; t < out.size(); ++t) {
    for (int i = 0; i < kNumFaceLandmarks; ++i) {
      if (i >= lmk::kFaceEyeBegin && i < lmk::kFaceEyeEnd) continue;
      CHECK(out[t].face.row(i) == frames[t].face.row(i));
    }
    for (int e = 0; e < 2; ++e) {
      const int iris = e * eye::kPerEye + eye::kIris;
      CHECK(out[t].eyes.middleRows(iris, eye::kIrisPoints) ==
            frames[t].eyes.middleRows(iris, eye::kIrisPoints));
    }
  }
  CHECK(lid_aperture(out[10]) < 1e-9);
  // Triangular profile with half-width 3.5 frames.
  CHECK(lid_aperture(out[9]) == doctest::Approx(open * (1.0 / 3.5)));
  CHECK(lid_aperture(out[12]) == doctest::Approx(open * (2.0 / 3.5)));
  CHECK(lid_aperture(out[6]) == open);
  CHECK(lid_aperture(out[14]) == open);

  // Overlapping events: the stronger closure wins.
  const auto two = blink_inject(frames, {10, 12}, 7);
  CHECK(lid_aperture(two[11]) == doctest::Approx(open * (1.0 / 3.5)));
  CHECK(lid_aperture(two[12]) < 1e-9);

  CHECK_THROWS_AS(blink_inject(frames, {30}, 7), InvalidArgument);
  CHECK_THROWS_AS(blink_inject(frames, {3}, 0), InvalidArgument);
}

TEST_CASE("gaze offset moves only the irises") {
  const auto frames = open_eyes(3);
  const auto out = apply_gaze(frames, Eigen::Vector2d(0.05, -0.02));
  for (int e = 0; e < 2; ++e) {
    const int iris = e * eye::kPerEye + eye::kIris;
    for (int i = 0; i < eye::kIrisPoints; ++i) {
      CHECK(out[1].eyes(iris + i, 0) == doctest::Approx(frames[1].eyes(iris + i, 0) + 0.05));
      CHECK(out[1].eyes(iris + i, 1) == doctest::Approx(frames[1].eyes(iris + i, 1) - 0.02));
    }
    CHECK(out[1].eyes.middleRows(e * eye::kPerEye, eye::kIris) ==
          frames[1].eyes.middleRows(e * eye::kPerEye, eye::kIris));
  }
  CHECK(out[2].face == frames[2].face);
  CHECK_THROWS_AS(apply_gaze(frames, Eigen::Vector2d(NAN, 0.0)), InvalidArgument);
}

TEST_CASE("fixed and transferred poses") {
  Models m = fresh_models();
  const InferenceResult fixed = infer(m, request(PoseMode::fixed));
  const std::size_t t = fixed.landmarks.size();
  CHECK(t == static_cast<std::size_t>(compute_mfcc(clip().waveform).mfcc.rows()));
  CHECK(fixed.keypoints.size() == t);
  CHECK(fixed.posed.size() == t);
  for (const auto& p : fixed.poses) CHECK((p == clip().landmarks.poses[0]));

  InferenceRequest r = request(PoseMode::transfer);
  r.transfer_poses = clip().landmarks.poses;
  r.transfer_poses.push_back(r.transfer_poses.back());
  const InferenceResult moved = infer(m, r);
  REQUIRE(moved.poses.size() == t);
  for (std::size_t i = 0; i < t; ++i) CHECK((moved.poses[i] == r.transfer_poses[i]));
  // Landmarks do not depend on the pose source.
  CHECK(same_frames(moved.landmarks.frames, fixed.landmarks.frames));

  r.transfer_poses.resize(t - 1);
  CHECK_THROWS_AS(infer(m, r), InvalidArgument);
}

TEST_CASE("generated poses depend on the seed, landmarks do not") {
  Models m = fresh_models();
  InferenceRequest r = request(PoseMode::generated);
  r.seed = 1;
  const InferenceResult a = infer(m, r);
  const InferenceResult again = infer(m, r);
  r.seed = 2;
  const InferenceResult b = infer(m, r);
  CHECK(same_frames(a.landmarks.frames, b.landmarks.frames));
  CHECK((a.poses == again.poses));
  CHECK((a.keypoints == again.keypoints));
  bool differs = false;
  for (std::size_t i = 0; i < a.poses.size(); ++i) differs |= !(a.poses[i] == b.poses[i]);
  CHECK(differs);
  for (const auto& p : a.poses) CHECK(p.scale == r.source_pose.scale);

  Models no_pose = fresh_models();
  no_pose.posegen = PoseGen{nullptr};
  CHECK_THROWS_AS(infer(no_pose, r), ConfigError);
}

TEST_CASE("inference edits and outputs") {
  Models m = fresh_models();
  InferenceRequest r = request(PoseMode::fixed);
  r.blink_frames = {5};
  r.gaze = Eigen::Vector2d(0.03, 0.0);
  const InferenceResult res = infer(m, r);
  CHECK(lid_aperture(res.landmarks.frames[5]) < 1e-9);
  CHECK((res.source_keypoints ==
         LatentOracle(r.oracle_seed)(apply_pose(r.source, r.source_pose))));

  r.blink_frames = {100000};
  CHECK_THROWS_AS(infer(m, r), InvalidArgument);

  const fs::path dir = fs::temp_directory_path() / "space_test_pipeline_out";
  fs::remove_all(dir);
  write_inference(dir, res, 64);
  for (const char* f : {"landmarks.jsonl", "poses.jsonl", "posed.jsonl", "keypoints.jsonl",
                        "source_keypoints.jsonl", "manifest.json"}) {
    CHECK(fs::exists(dir / f));
  }
  std::size_t frames = 0;
  for (const auto& e : fs::directory_iterator(dir / "frames")) frames += e.path().extension() == ".ppm";
  CHECK(frames == res.landmarks.size());
  CHECK(read_latent_sequence(dir / "keypoints.jsonl").size() == res.keypoints.size());
  CHECK(read_pose_sequence(dir / "poses.jsonl").size() == res.poses.size());
}
