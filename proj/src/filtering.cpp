#include "space/filtering.hpp"

#include "space/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace space {

using nlohmann::json;

bool FilterReport::passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

const FilterResult* FilterReport::find(const std::string& filter) const {
  for (const auto& r : results) {
    if (r.filter == filter) return &r;
  }
  return nullptr;
}

FilterConfig FilterConfig::all_disabled() {
  FilterConfig c;
  c.temporal_jump = c.rotation = c.scale_variation = c.missing_frames = c.hands = false;
  return c;
}

FilterResult filter_temporal_jump(const std::vector<LandmarkFrame>& seq, double threshold) {
  if (seq.size() < 2) throw InvalidArgument("temporal jump filter needs at least 2 frames");
  FilterResult r;
  r.filter = "temporal_jump";
  for (std::size_t t = 1; t < seq.size(); ++t) {
    const double d = (seq[t].face - seq[t - 1].face).rowwise().norm().mean();
    if (d > r.statistic) r.statistic = d;
    if (d > threshold) {
      r.passed = false;
      r.offending_frames.push_back(t);
    }
  }
  return r;
}

FilterResult filter_rotation(const std::vector<HeadPose>& poses, double max_deg) {
  FilterResult r;
  r.filter = "rotation";
  for (std::size_t t = 0; t < poses.size(); ++t) {
    const double a = std::max({std::abs(poses[t].yaw), std::abs(poses[t].pitch),
                               std::abs(poses[t].roll)});
    r.statistic = std::max(r.statistic, a);
    if (a > max_deg) {
      r.passed = false;
      r.offending_frames.push_back(t);
    }
  }
  return r;
}

FilterResult filter_scale_variation(const std::vector<HeadPose>& poses, double max_ratio) {
  FilterResult r;
  r.filter = "scale_variation";
  if (poses.empty()) return r;
  std::size_t lo = 0, hi = 0;
  for (std::size_t t = 0; t < poses.size(); ++t) {
    if (!(poses[t].scale > 0.0)) throw InvalidArgument("scale filter: nonpositive scale");
    if (poses[t].scale < poses[lo].scale) lo = t;
    if (poses[t].scale > poses[hi].scale) hi = t;
  }
  r.statistic = poses[hi].scale / poses[lo].scale;
  if (r.statistic > max_ratio) {
    r.passed = false;
    r.offending_frames = {std::min(lo, hi), std::max(lo, hi)};
  }
  return r;
}

FilterResult filter_missing_frames(const std::vector<LandmarkFrame>& seq) {
  FilterResult r;
  r.filter = "missing_frames";
  if (seq.empty()) {
    r.passed = false;
    return r;
  }
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (!seq[t].all_finite()) {
      r.passed = false;
      r.offending_frames.push_back(t);
    }
  }
  r.statistic = static_cast<double>(r.offending_frames.size());
  return r;
}

FilterReport filter_clip(const std::string& clip_id, const LandmarkSequence& seq,
                         const FilterFlags& flags, const FilterConfig& config) {
  FilterReport report{clip_id, {}};
  if (config.missing_frames) report.results.push_back(filter_missing_frames(seq.frames));
  if (config.temporal_jump) {
    if (seq.size() < 2) {
      report.results.push_back({"temporal_jump", false, {}, 0.0});
    } else {
      report.results.push_back(filter_temporal_jump(seq.frames, config.jump_threshold));
    }
  }
  if (config.rotation) report.results.push_back(filter_rotation(seq.poses, config.max_rotation_deg));
  if (config.scale_variation) {
    report.results.push_back(filter_scale_variation(seq.poses, config.max_scale_ratio));
  }
  if (config.hands) {
    report.results.push_back(
        {"hands", !flags.hands_detected, {}, flags.hands_detected ? 1.0 : 0.0});
  }
  return report;
}

FilterRun run_filters(const std::filesystem::path& root, const FilterConfig& config,
                      const std::string& manifest_name, const std::string& output_name) {
  const auto entries = read_manifest(root / manifest_name);
  FilterRun run;
  json clips = json::array();
  for (const ManifestEntry& entry : entries) {
    LandmarkSequence seq = read_landmark_sequence(root / entry.landmarks);
    seq.poses = read_pose_sequence(root / entry.poses);
    if (seq.poses.size() != seq.frames.size()) {
      throw IoError("clip '" + entry.id + "' has mismatched landmark and pose files");
    }
    FilterReport report = filter_clip(entry.id, seq, entry.flags, config);
    json verdicts = json::object();
    for (const auto& r : report.results) {
      verdicts[r.filter] = {{"verdict", r.passed ? "pass" : "fail"},
                            {"statistic", r.statistic},
                            {"offending_frames", r.offending_frames}};
    }
    clips.push_back({{"id", entry.id}, {"passed", report.passed()}, {"filters", verdicts}});
    if (report.passed()) {
      run.kept.push_back(entry);
    } else {
      ++run.removed;
    }
    run.reports.push_back(std::move(report));
  }
  write_manifest(root / output_name, run.kept);

  json summary = {{"input_manifest", manifest_name},
                  {"output_manifest", output_name},
                  {"clips_in", entries.size()},
                  {"clips_kept", run.kept.size()},
                  {"clips_removed", run.removed},
                  {"config",
                   {{"temporal_jump", config.temporal_jump},
                    {"jump_threshold", config.jump_threshold},
                    {"rotation", config.rotation},
                    {"max_rotation_deg", config.max_rotation_deg},
                    {"scale_variation", config.scale_variation},
                    {"max_scale_ratio", config.max_scale_ratio},
                    {"missing_frames", config.missing_frames},
                    {"hands", config.hands}}},
                  {"clips", clips}};
  std::ofstream out(root / kFilterReportFile, std::ios::trunc);
  if (!out) throw IoError("cannot write filter report");
  out << summary.dump(2) << '\n';
  return run;
}

}  // namespace space
