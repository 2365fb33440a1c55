#include "space/errors.hpp"
#include "space/filtering.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace space;

namespace {

std::vector<LandmarkFrame> static_sequence(std::size_t n) {
  LandmarkFrame f;
  f.space = LandmarkSpace::frontal_normalized;
  for (int i = 0; i < kNumFaceLandmarks; ++i) f.face.row(i) << 0.01 * i, -0.02 * i, 0.0;
  return std::vector<LandmarkFrame>(n, f);
}

std::vector<HeadPose> poses_with(std::size_t n, double yaw) {
  std::vector<HeadPose> p(n);
  for (auto& x : p) x.yaw = yaw;
  return p;
}

}  // namespace

TEST_CASE("temporal jump filter") {
  auto seq = static_sequence(10);
  CHECK(filter_temporal_jump(seq).passed);

  for (std::size_t t = 6; t < seq.size(); ++t) {
    for (int i = 0; i < kNumFaceLandmarks; ++i) seq[t].face(i, 1) += 0.5;
  }
  const FilterResult r = filter_temporal_jump(seq);
  CHECK_FALSE(r.passed);
  REQUIRE(r.offending_frames.size() == 1);
  CHECK(r.offending_frames[0] == 6);
  CHECK(r.statistic == doctest::Approx(0.5));

  // 0.125 is exact in binary, so the mean displacement equals the threshold.
  auto edge = static_sequence(2);
  for (int i = 0; i < kNumFaceLandmarks; ++i) edge[1].face(i, 0) += 0.125;
  CHECK(filter_temporal_jump(edge, 0.125).statistic == 0.125);
  CHECK(filter_temporal_jump(edge, 0.125).passed);
  CHECK_FALSE(filter_temporal_jump(edge, 0.1249).passed);

  CHECK_THROWS_AS(filter_temporal_jump(static_sequence(1)), InvalidArgument);
}

TEST_CASE("rotation filter") {
  CHECK(filter_rotation(poses_with(5, 44.0)).passed);
  CHECK(filter_rotation(poses_with(5, 45.0)).passed);
  CHECK(filter_rotation(poses_with(5, -45.0)).passed);
  auto p = poses_with(5, 10.0);
  p[3].pitch = 46.0;
  const FilterResult r = filter_rotation(p);
  CHECK_FALSE(r.passed);
  CHECK(r.offending_frames == std::vector<std::size_t>{3});
  p[3].pitch = 0.0;
  p[2].roll = -45.000001;
  CHECK_FALSE(filter_rotation(p).passed);
}

TEST_CASE("scale variation filter") {
  std::vector<HeadPose> p(8);
  CHECK(filter_scale_variation(p).passed);
  CHECK(filter_scale_variation(p).statistic == 1.0);
  for (std::size_t t = 0; t < p.size(); ++t) p[t].scale = 1.0 + t / 7.0;
  CHECK_FALSE(filter_scale_variation(p).passed);
  CHECK(filter_scale_variation(p).statistic == doctest::Approx(2.0));

  std::vector<HeadPose> q(2);
  q[0].scale = 1.0;
  q[1].scale = 1.25;
  CHECK(filter_scale_variation(q, 1.25).passed);
  CHECK_FALSE(filter_scale_variation(q, 1.2).passed);
  q[1].scale = 0.0;
  CHECK_THROWS_AS(filter_scale_variation(q), InvalidArgument);
}

TEST_CASE("missing frames filter") {
  auto seq = static_sequence(4);
  CHECK(filter_missing_frames(seq).passed);
  seq[2].face(10, 2) = NAN;
  const FilterResult r = filter_missing_frames(seq);
  CHECK_FALSE(r.passed);
  CHECK(r.offending_frames == std::vector<std::size_t>{2});
  seq[2].face(10, 2) = 0.0;
  seq[1].eyes(3, 0) = INFINITY;
  CHECK_FALSE(filter_missing_frames(seq).passed);
  CHECK_FALSE(filter_missing_frames({}).passed);
}

TEST_CASE("filter_clip verdicts") {
  LandmarkSequence seq;
  seq.frames = static_sequence(5);
  seq.poses = poses_with(5, 0.0);
  FilterFlags flags;
  const FilterReport all = filter_clip("c", seq, flags, FilterConfig{});
  CHECK(all.results.size() == 5);
  CHECK(all.passed());
  flags.hands_detected = true;
  const FilterReport hands = filter_clip("c", seq, flags, FilterConfig{});
  CHECK_FALSE(hands.passed());
  REQUIRE(hands.find("hands") != nullptr);
  CHECK_FALSE(hands.find("hands")->passed);
  CHECK(filter_clip("c", seq, flags, FilterConfig::all_disabled()).results.empty());
}

TEST_CASE("run_filters on a corpus with injected anomalies") {
  const auto root = std::filesystem::temp_directory_path() / "space_test_filter_corpus";
  std::filesystem::remove_all(root);
  CorpusConfig cfg;
  cfg.clips = 100;
  cfg.anomaly_rate = 0.1;
  cfg.min_duration_s = 1.0;
  cfg.max_duration_s = 2.0;
  cfg.seed = 12;
  const Corpus corpus = build_corpus(root, cfg);

  const FilterRun run = run_filters(root, FilterConfig{});
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    const bool anomalous = corpus.entries[i].flags.anomaly != AnomalyKind::none;
    const bool removed = !run.reports[i].passed();
    tp += anomalous && removed;
    fp += !anomalous && removed;
    fn += anomalous && !removed;
  }
  CHECK(tp == 10);
  CHECK(fp == 0);
  CHECK(fn == 0);
  CHECK(run.kept.size() == 90);
  CHECK(run.removed == 10);
  CHECK(std::filesystem::exists(root / kFilterReportFile));

  // Injected anomalies exceed their threshold by at least 2x.
  const FilterConfig def;
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    const auto kind = corpus.entries[i].flags.anomaly;
    const FilterReport& rep = run.reports[i];
    if (kind == AnomalyKind::temporal_jump) {
      CHECK(rep.find("temporal_jump")->statistic >= 2 * def.jump_threshold);
    } else if (kind == AnomalyKind::rotation) {
      CHECK(rep.find("rotation")->statistic >= 2 * def.max_rotation_deg);
    } else if (kind == AnomalyKind::scale_sweep) {
      CHECK(rep.find("scale_variation")->statistic >= 2 * def.max_scale_ratio);
    }
  }

  const FilterRun again = run_filters(root, FilterConfig{}, kFilteredManifestFile, "manifest.again.jsonl");
  CHECK(again.removed == 0);
  CHECK(again.kept.size() == 90);

  const FilterRun none = run_filters(root, FilterConfig::all_disabled(), kManifestFile, "manifest.all.jsonl");
  CHECK(none.kept.size() == 100);

  std::ifstream in(root / kFilterReportFile);
  const auto report = nlohmann::json::parse(in);
  CHECK(report.at("clips_in") == 100);
  std::filesystem::remove_all(root);
}

TEST_CASE("clean synthetic clips pass every filter") {
  const LatentOracle oracle(kDefaultOracleSeed);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    ClipSpec spec;
    spec.duration_s = 10.0;
    spec.identity_seed = seed;
    spec.max_angle_deg = 45.0;
    if (seed % 3 == 0) spec.emotion = EmotionVector::one_hot(static_cast<Emotion>(1 + seed % 7), 1.0);
    const ClipRecord c = generate_clip(spec, seed, oracle);
    const FilterReport r = filter_clip("c", c.landmarks, c.flags, FilterConfig{});
    CHECK(r.passed());
    CHECK(r.find("temporal_jump")->statistic < 0.5 * FilterConfig{}.jump_threshold);
    CHECK(r.find("scale_variation")->statistic < 1.1);
  }
}
