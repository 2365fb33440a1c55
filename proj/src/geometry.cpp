#include "space/geometry.hpp"

#include "space/errors.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

namespace space {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void require_space(const LandmarkFrame& frame, std::initializer_list<LandmarkSpace> allowed,
                   std::string_view op) {
  for (auto s : allowed) {
    if (frame.space == s) return;
  }
  throw ContractError(std::string(op) + ": unexpected landmark space '" +
                      std::string(to_string(frame.space)) + "'");
}

}  // namespace

std::string_view to_string(LandmarkSpace s) {
  switch (s) {
    case LandmarkSpace::raw: return "raw";
    case LandmarkSpace::frontal: return "frontal";
    case LandmarkSpace::frontal_normalized: return "frontal_normalized";
    case LandmarkSpace::posed: return "posed";
    case LandmarkSpace::metric: return "metric";
  }
  return "raw";
}

LandmarkSpace landmark_space_from_string(std::string_view s) {
  if (s == "raw") return LandmarkSpace::raw;
  if (s == "frontal") return LandmarkSpace::frontal;
  if (s == "frontal_normalized") return LandmarkSpace::frontal_normalized;
  if (s == "posed") return LandmarkSpace::posed;
  if (s == "metric") return LandmarkSpace::metric;
  throw InvalidArgument("unknown landmark space '" + std::string(s) + "'");
}

void validate(const HeadPose& pose) {
  for (double a : {pose.yaw, pose.pitch, pose.roll}) {
    if (!std::isfinite(a) || std::abs(a) > 180.0) {
      throw InvalidArgument("head pose angle must be finite and within [-180, 180]");
    }
  }
  if (!std::isfinite(pose.tx) || !std::isfinite(pose.ty) || !std::isfinite(pose.tz)) {
    throw InvalidArgument("head pose translation must be finite");
  }
  if (!std::isfinite(pose.scale) || pose.scale <= 0.0) {
    throw InvalidArgument("head pose scale must be positive");
  }
}

RotationMatrix rotation_from_angles(double yaw_deg, double pitch_deg, double roll_deg) {
  if (!std::isfinite(yaw_deg) || !std::isfinite(pitch_deg) || !std::isfinite(roll_deg)) {
    throw InvalidArgument("rotation angles must be finite");
  }
  const Eigen::AngleAxisd roll(roll_deg * kDegToRad, Eigen::Vector3d::UnitZ());
  const Eigen::AngleAxisd pitch(pitch_deg * kDegToRad, Eigen::Vector3d::UnitX());
  const Eigen::AngleAxisd yaw(yaw_deg * kDegToRad, Eigen::Vector3d::UnitY());
  return (roll * pitch * yaw).toRotationMatrix();
}

RotationMatrix rotation_from_pose(const HeadPose& pose) {
  return rotation_from_angles(pose.yaw, pose.pitch, pose.roll);
}

Eigen::RowVector3d face_centroid(const FaceMatrix& face) { return face.colwise().mean(); }

double ear_distance(const FaceMatrix& face) {
  return (face.row(lmk::kRightEar) - face.row(lmk::kLeftEar)).norm();
}

LandmarkFrame frontalize(const LandmarkFrame& frame, const HeadPose& pose) {
  require_space(frame, {LandmarkSpace::raw, LandmarkSpace::posed}, "frontalize");
  validate(pose);
  const RotationMatrix r = rotation_from_pose(pose);
  const Eigen::RowVector3d t = pose.translation().transpose();
  const double inv_scale = 1.0 / pose.scale;

  LandmarkFrame out;
  out.space = LandmarkSpace::frontal;
  // Row-vector form of R^T (p - T): (p - T) R.
  FaceMatrix unposed = ((frame.face.rowwise() - t) * r) * inv_scale;
  const Eigen::RowVector3d c = face_centroid(unposed);
  out.face = unposed.rowwise() - c;

  const Eigen::Matrix2d r2 = r.topLeftCorner<2, 2>();
  const double det = r2.determinant();
  if (std::abs(det) < 1e-9) {
    throw DegenerateFace("frontalize: pose is edge-on, eye landmarks cannot be unprojected");
  }
  const Eigen::Matrix2d r2_inv = r2.inverse();
  const Eigen::Vector2d depth_term = r.block<2, 1>(0, 2) * c(2);
  for (int i = 0; i < kNumEyeLandmarks; ++i) {
    const Eigen::Vector2d p(frame.eyes(i, 0) - pose.tx, frame.eyes(i, 1) - pose.ty);
    const Eigen::Vector2d e = r2_inv * (p * inv_scale - depth_term);
    out.eyes(i, 0) = e(0) - c(0);
    out.eyes(i, 1) = e(1) - c(1);
  }
  return out;
}

ScaleNormalized normalize_scale(const LandmarkFrame& frame) {
  require_space(frame, {LandmarkSpace::frontal, LandmarkSpace::frontal_normalized},
                "normalize_scale");
  const double d = ear_distance(frame.face);
  if (!(d >= 1e-12)) {
    throw DegenerateFace("normalize_scale: ear landmarks coincide");
  }
  ScaleNormalized out;
  out.factor = 2.0 / d;
  out.frame.face = frame.face * out.factor;
  out.frame.eyes = frame.eyes * out.factor;
  out.frame.space = LandmarkSpace::frontal_normalized;
  return out;
}

LandmarkFrame apply_pose(const LandmarkFrame& frame, const HeadPose& pose) {
  require_space(frame, {LandmarkSpace::frontal_normalized}, "apply_pose");
  validate(pose);
  const RotationMatrix r = rotation_from_pose(pose);
  const Eigen::RowVector3d t = pose.translation().transpose();

  LandmarkFrame out;
  out.space = LandmarkSpace::posed;
  // Row-vector form of R (s p) + T.
  out.face = ((frame.face * pose.scale) * r.transpose()).rowwise() + t;
  const Eigen::Matrix2d r2 = r.topLeftCorner<2, 2>();
  for (int i = 0; i < kNumEyeLandmarks; ++i) {
    const Eigen::Vector2d e(frame.eyes(i, 0), frame.eyes(i, 1));
    const Eigen::Vector2d p = r2 * (e * pose.scale);
    out.eyes(i, 0) = p(0) + pose.tx;
    out.eyes(i, 1) = p(1) + pose.ty;
  }
  return out;
}

Face2D project_orthographic(const LandmarkFrame& frame) { return frame.face.leftCols<2>(); }

LandmarkFrame metric_normalize(const LandmarkFrame& frame) {
  const Eigen::Vector2d left = frame.face.row(lmk::kMouthLeft).head<2>().transpose();
  const Eigen::Vector2d right = frame.face.row(lmk::kMouthRight).head<2>().transpose();
  const Eigen::Vector2d v = right - left;
  const double width = v.norm();
  if (!(width >= 1e-12)) {
    throw DegenerateFace("metric_normalize: mouth corners coincide");
  }
  const Eigen::Vector2d mid = 0.5 * (left + right);
  const double factor = 2.0 / width;
  const double cos_t = v(0) / width;
  const double sin_t = v(1) / width;
  // Rotation by -theta, then uniform scale.
  Eigen::Matrix2d m;
  m << cos_t, sin_t, -sin_t, cos_t;
  m *= factor;

  LandmarkFrame out;
  out.space = LandmarkSpace::metric;
  for (int i = 0; i < kNumFaceLandmarks; ++i) {
    const Eigen::Vector2d p = m * (frame.face.row(i).head<2>().transpose() - mid);
    out.face(i, 0) = p(0);
    out.face(i, 1) = p(1);
    out.face(i, 2) = frame.face(i, 2) * factor;
  }
  for (int i = 0; i < kNumEyeLandmarks; ++i) {
    const Eigen::Vector2d p = m * (frame.eyes.row(i).transpose() - mid);
    out.eyes(i, 0) = p(0);
    out.eyes(i, 1) = p(1);
  }
  return out;
}

}  // namespace space
