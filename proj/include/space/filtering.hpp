#pragma once

#include "space/geometry.hpp"
#include "space/sequence_io.hpp"
#include "space/synth.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace space {

// Outcome of one filter on one clip.
struct FilterResult {
  std::string filter;
  bool passed = true;
  std::vector<std::size_t> offending_frames;
  double statistic = 0.0;  // the value compared against the threshold
};

struct FilterReport {
  std::string clip_id;
  std::vector<FilterResult> results;

  bool passed() const;
  const FilterResult* find(const std::string& filter) const;
};

struct FilterConfig {
  bool temporal_jump = true;
  double jump_threshold = 0.15;  // mean landmark displacement, normalized units
  bool rotation = true;
  double max_rotation_deg = 45.0;
  bool scale_variation = true;
  double max_scale_ratio = 1.3;
  bool missing_frames = true;
  bool hands = true;  // consumes the manifest's hands_detected flag

  static FilterConfig all_disabled();
};

// Fails iff the largest mean per-landmark displacement between adjacent
// frames is strictly greater than threshold.
FilterResult filter_temporal_jump(const std::vector<LandmarkFrame>& seq, double threshold = 0.15);
// Fails iff any |yaw|, |pitch| or |roll| is strictly greater than max_deg.
FilterResult filter_rotation(const std::vector<HeadPose>& poses, double max_deg = 45.0);
// Fails iff max scale / min scale is strictly greater than max_ratio.
FilterResult filter_scale_variation(const std::vector<HeadPose>& poses, double max_ratio = 1.3);
// Fails on an empty sequence or any non-finite landmark.
FilterResult filter_missing_frames(const std::vector<LandmarkFrame>& seq);

FilterReport filter_clip(const std::string& clip_id, const LandmarkSequence& seq,
                         const FilterFlags& flags, const FilterConfig& config);

struct FilterRun {
  std::vector<ManifestEntry> kept;
  std::vector<FilterReport> reports;
  std::size_t removed = 0;
};

inline constexpr const char* kFilteredManifestFile = "manifest.filtered.jsonl";
inline constexpr const char* kFilterReportFile = "filter_report.json";

// Filters the clips of <root>/<manifest_name>, writes the kept entries to
// <root>/<output_name> and the per-clip report to <root>/filter_report.json.
FilterRun run_filters(const std::filesystem::path& root, const FilterConfig& config,
                      const std::string& manifest_name = kManifestFile,
                      const std::string& output_name = kFilteredManifestFile);

}  // namespace space
