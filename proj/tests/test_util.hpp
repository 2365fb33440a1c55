#pragma once

#include "space/geometry.hpp"

#include <random>

namespace space::testing {

inline LandmarkFrame random_frame(std::mt19937_64& rng, LandmarkSpace space) {
  std::normal_distribution<double> n(0.0, 0.5);
  LandmarkFrame f;
  for (int i = 0; i < kNumFaceLandmarks; ++i) f.face.row(i) << n(rng), n(rng), n(rng);
  for (int i = 0; i < kNumEyeLandmarks; ++i) f.eyes.row(i) << n(rng), n(rng);
  f.space = space;
  return f;
}

// Centered, ear-normalized random frame.
inline LandmarkFrame random_normalized_frame(std::mt19937_64& rng) {
  LandmarkFrame f = random_frame(rng, LandmarkSpace::frontal);
  const Eigen::RowVector3d c = face_centroid(f.face);
  f.face.rowwise() -= c;
  f.eyes.rowwise() -= c.head<2>();
  return normalize_scale(f).frame;
}

inline HeadPose random_pose(std::mt19937_64& rng, double max_angle = 60.0) {
  std::uniform_real_distribution<double> a(-max_angle, max_angle), t(-0.5, 0.5), s(0.5, 2.0);
  return HeadPose{a(rng), a(rng), a(rng), t(rng), t(rng), t(rng), s(rng)};
}

}  // namespace space::testing
