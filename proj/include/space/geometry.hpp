#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <string_view>
#include <utility>

namespace space {

inline constexpr int kNumFaceLandmarks = 68;
inline constexpr int kNumEyeLandmarks = 52;
inline constexpr int kFaceDims = kNumFaceLandmarks * 3;  // 204
inline constexpr int kEyeDims = kNumEyeLandmarks * 2;    // 104
inline constexpr int kFrameDims = kFaceDims + kEyeDims;  // 308

// Landmark indices in the 68-point iBUG layout.
//
// The "ear" anchors used for scale normalization are the two ends of the jaw
// contour (0 and 16). After normalization their distance is exactly 2.
// The mouth corners (48, 54) anchor the metric frame used by the lip metrics.
namespace lmk {
inline constexpr int kLeftEar = 0;
inline constexpr int kRightEar = 16;
inline constexpr int kChin = 8;
inline constexpr int kNoseTip = 30;
inline constexpr int kMouthLeft = 48;
inline constexpr int kMouthRight = 54;
inline constexpr int kMouthBegin = 48;  // mouth = [48, 68)
inline constexpr int kMouthEnd = 68;
inline constexpr int kFaceEyeBegin = 36;  // eye contours = [36, 48)
inline constexpr int kFaceEyeEnd = 48;
inline constexpr int kInnerLipTop = 62;
inline constexpr int kInnerLipBottom = 66;
}  // namespace lmk

// Layout of the 52 two-dimensional eye landmarks: two eyes of 26 points each.
// Per eye: 9 upper-lid points (corner to corner), 9 lower-lid points (same
// corner order), then 8 iris-ring points.
namespace eye {
inline constexpr int kPerEye = 26;
inline constexpr int kLidPoints = 9;
inline constexpr int kUpperLid = 0;
inline constexpr int kLowerLid = 9;
inline constexpr int kIris = 18;
inline constexpr int kIrisPoints = 8;
}  // namespace eye

using FaceMatrix = Eigen::Matrix<double, kNumFaceLandmarks, 3, Eigen::RowMajor>;
using EyeMatrix = Eigen::Matrix<double, kNumEyeLandmarks, 2, Eigen::RowMajor>;
using Face2D = Eigen::Matrix<double, kNumFaceLandmarks, 2, Eigen::RowMajor>;
using RotationMatrix = Eigen::Matrix3d;

enum class LandmarkSpace {
  raw,                 // detector/image space, pose applied
  frontal,             // pose removed, recentered, not yet scale-normalized
  frontal_normalized,  // frontal with ear distance 2
  posed,               // normalized landmarks with a head pose re-applied
  metric,              // similarity-normalized with mouth corners at (+-1, 0)
};

std::string_view to_string(LandmarkSpace s);
LandmarkSpace landmark_space_from_string(std::string_view s);

struct LandmarkFrame {
  FaceMatrix face = FaceMatrix::Zero();
  EyeMatrix eyes = EyeMatrix::Zero();
  LandmarkSpace space = LandmarkSpace::raw;

  bool all_finite() const { return face.allFinite() && eyes.allFinite(); }
};

struct HeadPose {
  double yaw = 0.0;  // degrees
  double pitch = 0.0;
  double roll = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double tz = 0.0;
  double scale = 1.0;

  Eigen::Vector3d translation() const { return {tx, ty, tz}; }
  bool operator==(const HeadPose&) const = default;
};

// Throws InvalidArgument if angles are non-finite or exceed 180 degrees, or
// if the scale is not positive.
void validate(const HeadPose& pose);

// R = Rz(roll) * Rx(pitch) * Ry(yaw); angles in degrees.
RotationMatrix rotation_from_angles(double yaw_deg, double pitch_deg, double roll_deg);
RotationMatrix rotation_from_pose(const HeadPose& pose);

// Undo a head pose: face' = R^T (face - T) / scale, recentered on the
// landmark centroid. Accepts raw or posed frames.
//
// The 2D eye landmarks are taken to lie on the plane through the face
// centroid that is parallel to the frontal image plane, so their frontal
// position is recovered by solving the projected 2x2 system.
LandmarkFrame frontalize(const LandmarkFrame& frame, const HeadPose& pose);

struct ScaleNormalized {
  LandmarkFrame frame;
  double factor = 1.0;  // multiplier applied to every coordinate
};

// Scale a frontal frame so the ear landmarks are exactly 2 apart.
ScaleNormalized normalize_scale(const LandmarkFrame& frame);

// posed = R (scale * face) + T for a frontal_normalized frame.
LandmarkFrame apply_pose(const LandmarkFrame& frame, const HeadPose& pose);

Face2D project_orthographic(const LandmarkFrame& frame);

// 2D similarity (rotation about z, uniform scale, translation) placing the
// mouth corners at (-1, 0) and (1, 0). z is scaled with the same factor.
LandmarkFrame metric_normalize(const LandmarkFrame& frame);

Eigen::RowVector3d face_centroid(const FaceMatrix& face);
double ear_distance(const FaceMatrix& face);

}  // namespace space
