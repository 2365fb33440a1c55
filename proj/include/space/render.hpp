#pragma once

#include "space/geometry.hpp"
#include "space/sequence_io.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace space {

inline constexpr int kDefaultRenderSize = 512;

struct Image {
  int size = 0;                    // square
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

// Rasterizes the landmark topology (jaw, brows, nose, eye contours, 2D eye
// lids and irises, lips) and/or latent keypoint markers. Model-space x/y in
// roughly [-1.6, 1.6] maps onto the image with y pointing up. Either pointer
// may be null, not both.
Image render_frame(const LandmarkFrame* landmarks, const LatentKeypoints* keypoints,
                   int size = kDefaultRenderSize);

// Binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const Image& image);

// Renders every frame to <out_dir>/frame_00000.ppm, ... Either sequence may
// be empty, not both; when both are given they must have equal length.
std::vector<std::filesystem::path> render_sequence(const std::vector<LandmarkFrame>& landmarks,
                                                   const std::vector<LatentKeypoints>& keypoints,
                                                   const std::filesystem::path& out_dir,
                                                   int size = kDefaultRenderSize);

}  // namespace space
