#include "space/render.hpp"

#include "space/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace space {

namespace {

using Rgb = std::array<std::uint8_t, 3>;

constexpr Rgb kBackground = {24, 24, 28};
constexpr Rgb kFaceColor = {220, 220, 220};
constexpr Rgb kEyeColor = {90, 200, 240};
constexpr Rgb kMouthColor = {235, 90, 90};
constexpr Rgb kKeypointColor = {90, 230, 120};

constexpr double kExtent = 1.6;

struct Canvas {
  Image& img;
  int thickness;

  void plot(int x, int y, const Rgb& c) {
    const int r = thickness / 2;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const int px = x + dx, py = y + dy;
        if (px < 0 || py < 0 || px >= img.size || py >= img.size) continue;
        auto* p = &img.rgb[(static_cast<std::size_t>(py) * img.size + px) * 3];
        p[0] = c[0];
        p[1] = c[1];
        p[2] = c[2];
      }
    }
  }

  std::pair<int, int> to_pixel(double x, double y) const {
    const double half = img.size / 2.0;
    const double s = half / kExtent;
    return {static_cast<int>(std::lround(half + x * s)), static_cast<int>(std::lround(half - y * s))};
  }

  void line(double x0, double y0, double x1, double y1, const Rgb& c) {
    if (!std::isfinite(x0) || !std::isfinite(y0) || !std::isfinite(x1) || !std::isfinite(y1)) return;
    auto [ax, ay] = to_pixel(x0, y0);
    auto [bx, by] = to_pixel(x1, y1);
    const int dx = std::abs(bx - ax), dy = -std::abs(by - ay);
    const int sx = ax < bx ? 1 : -1, sy = ay < by ? 1 : -1;
    int err = dx + dy;
    // Clip absurd coordinates to keep the loop bounded.
    if (std::max(dx, -dy) > 8 * img.size) return;
    while (true) {
      plot(ax, ay, c);
      if (ax == bx && ay == by) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        ax += sx;
      }
      if (e2 <= dx) {
        err += dx;
        ay += sy;
      }
    }
  }

  void marker(double x, double y, const Rgb& c) {
    if (!std::isfinite(x) || !std::isfinite(y)) return;
    auto [px, py] = to_pixel(x, y);
    const int r = std::max(2, img.size / 128);
    for (int d = -r; d <= r; ++d) {
      plot(px + d, py, c);
      plot(px, py + d, c);
    }
  }
};

void polyline(Canvas& cv, const FaceMatrix& f, int begin, int end, bool closed, const Rgb& c) {
  for (int i = begin; i + 1 < end; ++i) cv.line(f(i, 0), f(i, 1), f(i + 1, 0), f(i + 1, 1), c);
  if (closed) cv.line(f(end - 1, 0), f(end - 1, 1), f(begin, 0), f(begin, 1), c);
}

void eye_polyline(Canvas& cv, const EyeMatrix& e, int begin, int count, bool closed, const Rgb& c) {
  for (int i = begin; i + 1 < begin + count; ++i) cv.line(e(i, 0), e(i, 1), e(i + 1, 0), e(i + 1, 1), c);
  if (closed) {
    const int last = begin + count - 1;
    cv.line(e(last, 0), e(last, 1), e(begin, 0), e(begin, 1), c);
  }
}

}  // namespace

Image render_frame(const LandmarkFrame* landmarks, const LatentKeypoints* keypoints, int size) {
  if (size < 64) throw InvalidArgument("render size must be at least 64");
  if (!landmarks && !keypoints) throw InvalidArgument("render needs landmarks or keypoints");
  Image img;
  img.size = size;
  img.rgb.resize(static_cast<std::size_t>(size) * size * 3);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) {
    img.rgb[i] = kBackground[0];
    img.rgb[i + 1] = kBackground[1];
    img.rgb[i + 2] = kBackground[2];
  }
  Canvas cv{img, std::max(1, size / 256)};
  if (landmarks) {
    const FaceMatrix& f = landmarks->face;
    polyline(cv, f, 0, 17, false, kFaceColor);
    polyline(cv, f, 17, 22, false, kFaceColor);
    polyline(cv, f, 22, 27, false, kFaceColor);
    polyline(cv, f, 27, 31, false, kFaceColor);
    polyline(cv, f, 31, 36, false, kFaceColor);
    polyline(cv, f, 36, 42, true, kEyeColor);
    polyline(cv, f, 42, 48, true, kEyeColor);
    polyline(cv, f, 48, 60, true, kMouthColor);
    polyline(cv, f, 60, 68, true, kMouthColor);
    for (int e = 0; e < 2; ++e) {
      const int base = e * eye::kPerEye;
      eye_polyline(cv, landmarks->eyes, base + eye::kUpperLid, eye::kLidPoints, false, kEyeColor);
      eye_polyline(cv, landmarks->eyes, base + eye::kLowerLid, eye::kLidPoints, false, kEyeColor);
      eye_polyline(cv, landmarks->eyes, base + eye::kIris, eye::kIrisPoints, true, kEyeColor);
    }
  }
  if (keypoints) {
    for (int k = 0; k < kNumLatentKeypoints; ++k) {
      cv.marker((*keypoints)(k, 0), (*keypoints)(k, 1), kKeypointColor);
    }
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "P6\n" << image.size << ' ' << image.size << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<std::filesystem::path> render_sequence(const std::vector<LandmarkFrame>& landmarks,
                                                   const std::vector<LatentKeypoints>& keypoints,
                                                   const std::filesystem::path& out_dir,
                                                   int size) {
  if (size < 64) throw InvalidArgument("render size must be at least 64");
  if (landmarks.empty() && keypoints.empty()) throw InvalidArgument("nothing to render");
  if (!landmarks.empty() && !keypoints.empty() && landmarks.size() != keypoints.size()) {
    throw ContractError("landmark and keypoint sequences differ in length");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "'");
  const std::size_t n = std::max(landmarks.size(), keypoints.size());
  std::vector<std::filesystem::path> paths;
  paths.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Image img = render_frame(landmarks.empty() ? nullptr : &landmarks[t],
                                   keypoints.empty() ? nullptr : &keypoints[t], size);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05zu.ppm", t);
    paths.push_back(out_dir / name);
    write_ppm(paths.back(), img);
  }
  return paths;
}

}  // namespace space
