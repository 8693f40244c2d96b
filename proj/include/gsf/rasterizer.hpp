#pragma once

#include <span>
#include <vector>

#include "gsf/face3dmm.hpp"
#include "gsf/image.hpp"

namespace gsf::render {

// Pinhole camera looking down +z with the world y axis pointing up.
struct Camera {
  double focal = 1.0;  // pixels
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const;
};

struct ProjectedVertex {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  bool clipped = false;  // z <= 0
};

struct RenderOutput {
  RasterImage color;
  std::vector<double> depth;  // +inf where nothing was drawn
  BinaryMask face_mask;
};

// u = f*x/z + cx, v = cy - f*y/z, depth = z.
std::vector<ProjectedVertex> project_perspective(const face::Vertices& vertices, const Camera& camera);

// Z-buffered fill of camera-space triangles.
//
// A pixel is sampled at its center (x + 0.5, y + 0.5). Coverage uses edge
// functions with the top-left rule, so pixels on a shared edge belong to
// exactly one triangle. Depth is interpolated as 1/z across the screen-space
// triangle; colors are interpolated linearly and clamped to [0, 1]. A
// fragment replaces the stored one only when strictly nearer, which resolves
// exact depth ties in favor of the lower triangle index. Triangles touching a
// clipped vertex, or with zero screen area, are skipped.
RenderOutput rasterize(const face::Vertices& vertices, const face::Vertices& colors,
                       std::span<const face::Triangle> triangles, const Camera& camera);

}  // namespace gsf::render
