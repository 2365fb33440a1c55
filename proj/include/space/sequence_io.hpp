#pragma once

#include "space/geometry.hpp"

#include <Eigen/Core>
#include <filesystem>
#include <vector>

namespace space {

inline constexpr int kNumLatentKeypoints = 20;
inline constexpr int kLatentDims = kNumLatentKeypoints * 3;  // 60

using LatentKeypoints = Eigen::Matrix<double, kNumLatentKeypoints, 3, Eigen::RowMajor>;

// Per-frame landmarks with the head pose of that frame.
struct LandmarkSequence {
  std::vector<LandmarkFrame> frames;
  std::vector<HeadPose> poses;

  std::size_t size() const { return frames.size(); }
};

// Landmark-sequence files are JSON Lines, one record per frame:
//
//   {"frame": 0, "space": "frontal_normalized",
//    "face": [[x, y, z], ... 68 rows],
//    "eyes": [[x, y], ... 52 rows],
//    "pose": {"yaw": .., "pitch": .., "roll": .., "tx": .., "ty": .., "tz": .., "scale": ..}}
//
// Angles are degrees. A frame whose detector failed is written with
// "face": null; non-finite coordinates are written as null. Both read back as
// NaN so the missing-frame filter can see them.
void write_landmark_sequence(const std::filesystem::path& path, const LandmarkSequence& seq);
LandmarkSequence read_landmark_sequence(const std::filesystem::path& path);

// Pose files: JSON Lines {"frame": i, "yaw": .., "pitch": .., "roll": .., "tx": .., "ty": ..,
// "tz": .., "scale": ..}.
void write_pose_sequence(const std::filesystem::path& path, const std::vector<HeadPose>& poses);
std::vector<HeadPose> read_pose_sequence(const std::filesystem::path& path);

// Latent keypoint files: JSON Lines {"frame": i, "kp": [[x, y, z], ... 20 rows]}.
void write_latent_sequence(const std::filesystem::path& path,
                           const std::vector<LatentKeypoints>& seq);
std::vector<LatentKeypoints> read_latent_sequence(const std::filesystem::path& path);

}  // namespace space
