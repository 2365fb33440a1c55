#include "space/sequence_io.hpp"

#include "space/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <string>

namespace space {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double read_number(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

template <typename Matrix>
json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number_or_null(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename Matrix>
void matrix_from_json(const json& j, Matrix& m, const char* what) {
  if (j.is_null()) {
    m.setConstant(kNaN);
    return;
  }
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != m.rows()) {
    throw IoError(std::string("malformed '") + what + "' block in sequence file");
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const json& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m.cols()) {
      throw IoError(std::string("malformed '") + what + "' row in sequence file");
    }
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_number(row[c]);
  }
}

json pose_to_json(const HeadPose& p) {
  return json{{"yaw", p.yaw}, {"pitch", p.pitch}, {"roll", p.roll}, {"tx", p.tx},
              {"ty", p.ty},   {"tz", p.tz},       {"scale", p.scale}};
}

HeadPose pose_from_json(const json& j) {
  HeadPose p;
  p.yaw = j.at("yaw").get<double>();
  p.pitch = j.at("pitch").get<double>();
  p.roll = j.at("roll").get<double>();
  p.tx = j.at("tx").get<double>();
  p.ty = j.at("ty").get<double>();
  p.tz = j.at("tz").get<double>();
  p.scale = j.at("scale").get<double>();
  return p;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

void write_landmark_sequence(const std::filesystem::path& path, const LandmarkSequence& seq) {
  if (seq.poses.size() != seq.frames.size()) {
    throw ContractError("landmark sequence has mismatched frame and pose counts");
  }
  auto out = open_out(path);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const LandmarkFrame& f = seq.frames[i];
    json rec;
    rec["frame"] = i;
    rec["space"] = std::string(to_string(f.space));
    rec["face"] = f.face.hasNaN() && !f.face.array().isFinite().any() ? json(nullptr)
                                                                       : matrix_to_json(f.face);
    rec["eyes"] = matrix_to_json(f.eyes);
    rec["pose"] = pose_to_json(seq.poses[i]);
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

LandmarkSequence read_landmark_sequence(const std::filesystem::path& path) {
  LandmarkSequence seq;
  for_each_record(path, [&](const json& rec) {
    LandmarkFrame f;
    f.space = landmark_space_from_string(rec.at("space").get<std::string>());
    matrix_from_json(rec.at("face"), f.face, "face");
    matrix_from_json(rec.at("eyes"), f.eyes, "eyes");
    seq.frames.push_back(f);
    seq.poses.push_back(rec.contains("pose") ? pose_from_json(rec["pose"]) : HeadPose{});
  });
  return seq;
}

void write_pose_sequence(const std::filesystem::path& path, const std::vector<HeadPose>& poses) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    json rec = pose_to_json(poses[i]);
    rec["frame"] = i;
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<HeadPose> read_pose_sequence(const std::filesystem::path& path) {
  std::vector<HeadPose> poses;
  for_each_record(path, [&](const json& rec) { poses.push_back(pose_from_json(rec)); });
  return poses;
}

void write_latent_sequence(const std::filesystem::path& path,
                           const std::vector<LatentKeypoints>& seq) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    json rec;
    rec["frame"] = i;
    rec["kp"] = matrix_to_json(seq[i]);
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<LatentKeypoints> read_latent_sequence(const std::filesystem::path& path) {
  std::vector<LatentKeypoints> seq;
  for_each_record(path, [&](const json& rec) {
    LatentKeypoints kp;
    matrix_from_json(rec.at("kp"), kp, "kp");
    seq.push_back(kp);
  });
  return seq;
}

}  // namespace space
