#include "space/errors.hpp"
#include "space/geometry.hpp"
#include "space/sequence_io.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/LU>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace space;
using space::testing::random_frame;
using space::testing::random_normalized_frame;
using space::testing::random_pose;

namespace {

// Independent construction: explicit elementary matrices multiplied by hand.
Eigen::Matrix3d oracle_rotation(double yaw, double pitch, double roll) {
  const double d = std::numbers::pi / 180.0;
  const double cy = std::cos(yaw * d), sy = std::sin(yaw * d);
  const double cp = std::cos(pitch * d), sp = std::sin(pitch * d);
  const double cr = std::cos(roll * d), sr = std::sin(roll * d);
  Eigen::Matrix3d ry, rx, rz;
  ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  rx << 1, 0, 0, 0, cp, -sp, 0, sp, cp;
  rz << cr, -sr, 0, sr, cr, 0, 0, 0, 1;
  Eigen::Matrix3d out = Eigen::Matrix3d::Zero();
  const Eigen::Matrix3d rzx = rz * rx;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out(i, j) += rzx(i, k) * ry(k, j);
  return out;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("rotation_from_angles") {
  CHECK(max_abs(rotation_from_angles(0, 0, 0) - Eigen::Matrix3d::Identity()) == 0.0);

  const Eigen::Vector3d x = rotation_from_angles(90, 0, 0) * Eigen::Vector3d::UnitX();
  CHECK(std::abs(x(0)) < 1e-12);
  CHECK(std::abs(x.norm() - 1.0) < 1e-12);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> a(-180, 180);
  for (int i = 0; i < 200; ++i) {
    const double y = a(rng), p = a(rng), r = a(rng);
    const RotationMatrix m = rotation_from_angles(y, p, r);
    CHECK(max_abs(m - oracle_rotation(y, p, r)) < 1e-12);
    CHECK(max_abs(m.transpose() * m - Eigen::Matrix3d::Identity()) < 1e-9);
    CHECK(std::abs(m.determinant() - 1.0) < 1e-9);
  }
  CHECK_THROWS_AS(rotation_from_angles(NAN, 0, 0), InvalidArgument);
  CHECK_THROWS_AS(rotation_from_angles(0, INFINITY, 0), InvalidArgument);
}

TEST_CASE("frontalize") {
  std::mt19937_64 rng(11);

  SUBCASE("identity pose recenters") {
    const LandmarkFrame raw = random_frame(rng, LandmarkSpace::raw);
    const LandmarkFrame out = frontalize(raw, HeadPose{});
    const Eigen::RowVector3d c = face_centroid(raw.face);
    CHECK(max_abs(out.face - (raw.face.rowwise() - c)) < 1e-12);
    CHECK(max_abs(out.eyes - (raw.eyes.rowwise() - c.head<2>())) < 1e-12);
    CHECK(out.space == LandmarkSpace::frontal);
  }

  SUBCASE("undoes apply_pose") {
    for (int i = 0; i < 50; ++i) {
      const LandmarkFrame x = random_normalized_frame(rng);
      const HeadPose p = random_pose(rng);
      const LandmarkFrame back = frontalize(apply_pose(x, p), p);
      CHECK(max_abs(back.face - x.face) < 1e-6);
      CHECK(max_abs(back.eyes - x.eyes) < 1e-6);
    }
  }

  SUBCASE("three-point configuration under yaw 30 against a linear solve") {
    LandmarkFrame raw;
    raw.space = LandmarkSpace::raw;
    raw.face.setZero();
    raw.face.row(0) << 1.0, 0.0, 0.0;
    raw.face.row(1) << 0.0, 1.0, 0.0;
    raw.face.row(2) << 0.0, 0.0, 1.0;
    const HeadPose pose{30.0, 0.0, 0.0, 0.2, -0.1, 0.3, 1.5};
    const LandmarkFrame out = frontalize(raw, pose);

    // Solve R x = (p - T) / s per point, then recenter.
    const Eigen::Matrix3d r = oracle_rotation(30.0, 0.0, 0.0);
    Eigen::Matrix<double, 68, 3> solved;
    for (int i = 0; i < 68; ++i) {
      const Eigen::Vector3d rhs = (raw.face.row(i).transpose() - Eigen::Vector3d(0.2, -0.1, 0.3)) / 1.5;
      solved.row(i) = r.fullPivLu().solve(rhs).transpose();
    }
    const Eigen::RowVector3d c = solved.colwise().mean();
    for (int i = 0; i < 3; ++i) {
      CHECK(max_abs(out.face.row(i) - (solved.row(i) - c)) < 1e-12);
    }
  }

  SUBCASE("result is independent of the pose") {
    const LandmarkFrame x = random_normalized_frame(rng);
    const HeadPose p1 = random_pose(rng), p2 = random_pose(rng);
    const LandmarkFrame a = frontalize(apply_pose(x, p1), p1);
    const LandmarkFrame b = frontalize(apply_pose(x, p2), p2);
    CHECK(max_abs(a.face - b.face) < 1e-6);
  }

  SUBCASE("space contract") {
    LandmarkFrame f = random_frame(rng, LandmarkSpace::frontal_normalized);
    CHECK_THROWS_AS(frontalize(f, HeadPose{}), ContractError);
  }
}

TEST_CASE("normalize_scale") {
  std::mt19937_64 rng(3);
  LandmarkFrame f = random_frame(rng, LandmarkSpace::frontal);
  f.face.row(lmk::kLeftEar) << -2.0, 0.0, 0.0;
  f.face.row(lmk::kRightEar) << 2.0, 0.0, 0.0;
  const ScaleNormalized n = normalize_scale(f);
  CHECK(n.factor == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(ear_distance(n.frame.face) - 2.0) < 1e-12);
  CHECK(n.frame.space == LandmarkSpace::frontal_normalized);

  const ScaleNormalized again = normalize_scale(n.frame);
  CHECK(std::abs(again.factor - 1.0) < 1e-9);
  CHECK(max_abs(again.frame.face - n.frame.face) < 1e-9);

  for (int i = 0; i < 100; ++i) {
    const ScaleNormalized r = normalize_scale(random_frame(rng, LandmarkSpace::frontal));
    CHECK(std::abs(ear_distance(r.frame.face) - 2.0) < 1e-9);
    CHECK(std::abs(normalize_scale(r.frame).factor - 1.0) < 1e-9);
  }

  f.face.row(lmk::kRightEar) = f.face.row(lmk::kLeftEar);
  CHECK_THROWS_AS(normalize_scale(f), DegenerateFace);
  CHECK_THROWS_AS(normalize_scale(random_frame(rng, LandmarkSpace::raw)), ContractError);
}

TEST_CASE("apply_pose") {
  std::mt19937_64 rng(5);
  const LandmarkFrame x = random_normalized_frame(rng);

  const LandmarkFrame same = apply_pose(x, HeadPose{});
  CHECK(max_abs(same.face - x.face) == 0.0);
  CHECK(same.space == LandmarkSpace::posed);

  const LandmarkFrame shifted = apply_pose(x, HeadPose{0, 0, 0, 1, 2, 3, 1});
  CHECK(max_abs(shifted.face - (x.face.rowwise() + Eigen::RowVector3d(1, 2, 3))) < 1e-12);
  CHECK(max_abs(shifted.eyes - (x.eyes.rowwise() + Eigen::RowVector2d(1, 2))) < 1e-12);

  // Unit tetrahedron, yaw 45, scale 2: rotation about y written out by hand.
  LandmarkFrame tet;
  tet.space = LandmarkSpace::frontal_normalized;
  tet.face.setZero();
  tet.face.row(1) << 1, 0, 0;
  tet.face.row(2) << 0, 1, 0;
  tet.face.row(3) << 0, 0, 1;
  const LandmarkFrame posed = apply_pose(tet, HeadPose{45, 0, 0, 0, 0, 0, 2});
  const double h = std::sqrt(0.5);
  CHECK(max_abs(posed.face.row(1) - Eigen::RowVector3d(2 * h, 0, -2 * h)) < 1e-12);
  CHECK(max_abs(posed.face.row(2) - Eigen::RowVector3d(0, 2, 0)) < 1e-12);
  CHECK(max_abs(posed.face.row(3) - Eigen::RowVector3d(2 * h, 0, 2 * h)) < 1e-12);

  CHECK_THROWS_AS(apply_pose(x, HeadPose{0, 0, 0, 0, 0, 0, 0.0}), InvalidArgument);
  CHECK_THROWS_AS(apply_pose(x, HeadPose{0, 0, 0, 0, 0, 0, -1.0}), InvalidArgument);
  CHECK_THROWS_AS(apply_pose(random_frame(rng, LandmarkSpace::raw), HeadPose{}), ContractError);
}

TEST_CASE("round trip through normalization") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 100; ++i) {
    const LandmarkFrame x = random_normalized_frame(rng);
    const HeadPose p = random_pose(rng);
    const LandmarkFrame raw = [&] {
      LandmarkFrame r = apply_pose(x, p);
      r.space = LandmarkSpace::raw;
      return r;
    }();
    const ScaleNormalized n = normalize_scale(frontalize(raw, p));
    HeadPose back = p;
    back.scale = p.scale / n.factor;
    const LandmarkFrame again = apply_pose(n.frame, back);
    CHECK(max_abs(again.face - raw.face) < 1e-6);
    CHECK(max_abs(again.eyes - raw.eyes) < 1e-6);
  }
}

TEST_CASE("project_orthographic") {
  std::mt19937_64 rng(19);
  LandmarkFrame f = random_frame(rng, LandmarkSpace::posed);
  LandmarkFrame g = f;
  f.face.col(2).setConstant(5.0);
  g.face.col(2).setZero();
  CHECK(project_orthographic(f) == project_orthographic(g));
  CHECK(project_orthographic(f) == f.face.leftCols<2>());
}

TEST_CASE("metric_normalize") {
  std::mt19937_64 rng(23);
  LandmarkFrame f = random_frame(rng, LandmarkSpace::frontal);
  f.face.row(lmk::kMouthLeft) << 0.0, 0.0, 0.0;
  f.face.row(lmk::kMouthRight) << 2.0, 0.0, 0.0;
  const LandmarkFrame m = metric_normalize(f);
  // Closed form: translate by (-1, 0), unit scale, no rotation.
  for (int i = 0; i < kNumFaceLandmarks; ++i) {
    CHECK(std::abs(m.face(i, 0) - (f.face(i, 0) - 1.0)) < 1e-12);
    CHECK(std::abs(m.face(i, 1) - f.face(i, 1)) < 1e-12);
  }
  CHECK(m.space == LandmarkSpace::metric);

  for (int i = 0; i < 200; ++i) {
    const LandmarkFrame r = metric_normalize(random_frame(rng, LandmarkSpace::posed));
    CHECK(std::abs(r.face(lmk::kMouthLeft, 0) + 1.0) < 1e-9);
    CHECK(std::abs(r.face(lmk::kMouthLeft, 1)) < 1e-9);
    CHECK(std::abs(r.face(lmk::kMouthRight, 0) - 1.0) < 1e-9);
    CHECK(std::abs(r.face(lmk::kMouthRight, 1)) < 1e-9);
    CHECK(max_abs(metric_normalize(r).face - r.face) < 1e-9);
  }

  f.face.row(lmk::kMouthRight) = f.face.row(lmk::kMouthLeft);
  CHECK_THROWS_AS(metric_normalize(f), DegenerateFace);
}

TEST_CASE("landmark sequence file round trip") {
  std::mt19937_64 rng(29);
  LandmarkSequence seq;
  for (int i = 0; i < 3; ++i) {
    seq.frames.push_back(random_normalized_frame(rng));
    seq.poses.push_back(random_pose(rng, 40.0));
  }
  seq.frames[1].face(5, 1) = NAN;
  const auto path = std::filesystem::temp_directory_path() / "space_test_landmarks.jsonl";
  write_landmark_sequence(path, seq);
  const LandmarkSequence back = read_landmark_sequence(path);
  REQUIRE(back.size() == 3);
  CHECK(back.frames[0].face == seq.frames[0].face);
  CHECK(back.frames[2].eyes == seq.frames[2].eyes);
  CHECK(back.poses[2] == seq.poses[2]);
  CHECK(std::isnan(back.frames[1].face(5, 1)));
  CHECK(back.frames[1].space == LandmarkSpace::frontal_normalized);
  std::filesystem::remove(path);
}
