#include "space/evaluation.hpp"

#include "space/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace space {

using nlohmann::json;

namespace {

void check_pair(const LandmarkSequence& pred, const LandmarkSequence& gt) {
  if (pred.size() != gt.size()) throw ContractError("metric sequences differ in length");
  if (pred.size() < 2) throw InvalidArgument("metrics need at least 2 frames");
  if (pred.poses.size() != pred.size() || gt.poses.size() != gt.size()) {
    throw ContractError("metric sequences need one pose per frame");
  }
}

// Position and velocity MAE over landmarks [begin, end) of per-frame xy sets.
std::pair<double, double> position_velocity(const std::vector<Face2D>& p,
                                            const std::vector<Face2D>& g, int begin, int end) {
  const std::size_t n = p.size();
  const int count = end - begin;
  double pos = 0.0, vel = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    pos += (p[t].middleRows(begin, count) - g[t].middleRows(begin, count)).cwiseAbs().sum();
    if (t > 0) {
      const auto dp = p[t].middleRows(begin, count) - p[t - 1].middleRows(begin, count);
      const auto dg = g[t].middleRows(begin, count) - g[t - 1].middleRows(begin, count);
      vel += (dp - dg).cwiseAbs().sum();
    }
  }
  pos /= static_cast<double>(n * count * 2);
  vel /= static_cast<double>((n - 1) * count * 2);
  return {pos, vel};
}

}  // namespace

LandmarkFrame to_frontal(const LandmarkFrame& frame, const HeadPose& pose) {
  if (frame.space == LandmarkSpace::raw || frame.space == LandmarkSpace::posed) {
    return frontalize(frame, pose);
  }
  LandmarkFrame out = frame;
  const Eigen::RowVector3d c = face_centroid(frame.face);
  out.face.rowwise() -= c;
  out.eyes.rowwise() -= c.head<2>();
  out.space = LandmarkSpace::frontal;
  return out;
}

MouthMetrics mouth_metrics(const LandmarkSequence& pred, const LandmarkSequence& gt) {
  check_pair(pred, gt);
  std::vector<Face2D> p, g;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    p.push_back(project_orthographic(metric_normalize(to_frontal(pred.frames[t], pred.poses[t]))));
    g.push_back(project_orthographic(metric_normalize(to_frontal(gt.frames[t], gt.poses[t]))));
  }
  const auto [pos, vel] = position_velocity(p, g, lmk::kMouthBegin, lmk::kMouthEnd);
  return {pos, vel};
}

FaceMetrics face_metrics(const LandmarkSequence& pred, const LandmarkSequence& gt) {
  check_pair(pred, gt);
  std::vector<Face2D> p, g;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    p.push_back(
        project_orthographic(normalize_scale(to_frontal(pred.frames[t], pred.poses[t])).frame));
    g.push_back(project_orthographic(normalize_scale(to_frontal(gt.frames[t], gt.poses[t])).frame));
  }
  const auto [pos, vel] = position_velocity(p, g, 0, kNumFaceLandmarks);
  return {pos, vel};
}

double keypoint_l1(const std::vector<LatentKeypoints>& pred,
                   const std::vector<LatentKeypoints>& gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw ContractError("keypoint sequences must be nonempty and equally long");
  }
  double acc = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) acc += (pred[t] - gt[t]).cwiseAbs().sum();
  return acc / static_cast<double>(pred.size() * kLatentDims);
}

ClipEvaluation evaluate_sequences(const std::string& clip_id, const LandmarkSequence& pred,
                                  const LandmarkSequence& gt) {
  const MouthMetrics m = mouth_metrics(pred, gt);
  const FaceMetrics f = face_metrics(pred, gt);
  return {clip_id, m.position, m.velocity, f.position, f.velocity, std::nullopt};
}

void EvalReport::finalize() {
  clip_count = clips.size();
  aggregate = ClipEvaluation{};
  aggregate.clip_id = "aggregate";
  if (clips.empty()) return;
  double kp = 0.0;
  std::size_t kp_count = 0;
  for (const auto& c : clips) {
    aggregate.mp += c.mp;
    aggregate.mv += c.mv;
    aggregate.fp += c.fp;
    aggregate.fv += c.fv;
    if (c.kp_l1) {
      kp += *c.kp_l1;
      ++kp_count;
    }
  }
  const double n = static_cast<double>(clips.size());
  aggregate.mp /= n;
  aggregate.mv /= n;
  aggregate.fp /= n;
  aggregate.fv /= n;
  if (kp_count > 0) aggregate.kp_l1 = kp / static_cast<double>(kp_count);
}

void write_eval_report(const std::filesystem::path& path, const EvalReport& report) {
  auto row = [](const ClipEvaluation& c) {
    json j = {{"clip_id", c.clip_id}, {"M-P", c.mp}, {"M-V", c.mv}, {"F-P", c.fp}, {"F-V", c.fv}};
    if (c.kp_l1) j["KP-L1"] = *c.kp_l1;
    return j;
  };
  json clips = json::array();
  for (const auto& c : report.clips) clips.push_back(row(c));
  const json doc = {{"label", report.label},
                    {"config_hash", report.config_hash},
                    {"clip_count", report.clip_count},
                    {"skipped", report.skipped},
                    {"aggregate", row(report.aggregate)},
                    {"clips", clips}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write report '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace space
