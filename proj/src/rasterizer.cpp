#include "gsf/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gsf::render {

void Camera::validate() const {
  if (!(focal > 0.0)) throw std::invalid_argument("Camera: focal length must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("Camera: image size must be positive");
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
    throw std::invalid_argument("Camera: principal point outside the image");
}

std::vector<ProjectedVertex> project_perspective(const face::Vertices& vertices, const Camera& camera) {
  std::vector<ProjectedVertex> out(static_cast<std::size_t>(vertices.rows()));
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    const double x = vertices(i, 0), y = vertices(i, 1), z = vertices(i, 2);
    auto& p = out[static_cast<std::size_t>(i)];
    p.depth = z;
    if (!(z > 0.0)) {
      p.clipped = true;
      continue;
    }
    p.u = camera.focal * x / z + camera.cx;
    p.v = camera.cy - camera.focal * y / z;
  }
  return out;
}

namespace {

struct ScreenPoint {
  double x, y;
};

double edge(const ScreenPoint& a, const ScreenPoint& b, double px, double py) {
  return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

// With positive-area winding in y-down coordinates, the interior lies below a
// rightward horizontal edge (top edge) and right of an upward edge (left edge).
bool is_top_left(const ScreenPoint& a, const ScreenPoint& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  return (dy == 0.0 && dx > 0.0) || dy < 0.0;
}

bool covers(double w, bool top_left) { return w > 0.0 || (w == 0.0 && top_left); }

}  // namespace

RenderOutput rasterize(const face::Vertices& vertices, const face::Vertices& colors,
                       std::span<const face::Triangle> triangles, const Camera& camera) {
  camera.validate();
  if (colors.rows() != vertices.rows())
    throw std::invalid_argument("rasterize: " + std::to_string(colors.rows()) + " colors for " +
                                std::to_string(vertices.rows()) + " vertices");
  const int w = camera.width, h = camera.height;
  RenderOutput out;
  out.color = RasterImage(w, h, 0.0);
  out.depth.assign(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity());
  out.face_mask = BinaryMask(w, h, 0);

  const auto proj = project_perspective(vertices, camera);
  const auto n = static_cast<std::size_t>(vertices.rows());

  for (const auto& tri : triangles) {
    if (tri[0] >= n || tri[1] >= n || tri[2] >= n) throw std::invalid_argument("rasterize: triangle index out of range");
    std::array<std::uint32_t, 3> idx = tri;
    if (proj[idx[0]].clipped || proj[idx[1]].clipped || proj[idx[2]].clipped) continue;
    ScreenPoint p0{proj[idx[0]].u, proj[idx[0]].v};
    ScreenPoint p1{proj[idx[1]].u, proj[idx[1]].v};
    ScreenPoint p2{proj[idx[2]].u, proj[idx[2]].v};
    double area = edge(p0, p1, p2.x, p2.y);
    if (area == 0.0 || !std::isfinite(area)) continue;
    if (area < 0.0) {
      std::swap(p1, p2);
      std::swap(idx[1], idx[2]);
      area = -area;
    }
    const bool tl0 = is_top_left(p1, p2), tl1 = is_top_left(p2, p0), tl2 = is_top_left(p0, p1);

    const double min_x = std::min({p0.x, p1.x, p2.x}), max_x = std::max({p0.x, p1.x, p2.x});
    const double min_y = std::min({p0.y, p1.y, p2.y}), max_y = std::max({p0.y, p1.y, p2.y});
    const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(max_x - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(max_y - 0.5)));

    const double iz0 = 1.0 / proj[idx[0]].depth, iz1 = 1.0 / proj[idx[1]].depth, iz2 = 1.0 / proj[idx[2]].depth;
    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        const double w0 = edge(p1, p2, px, py);
        const double w1 = edge(p2, p0, px, py);
        const double w2 = edge(p0, p1, px, py);
        if (!covers(w0, tl0) || !covers(w1, tl1) || !covers(w2, tl2)) continue;
        const double b0 = w0 / area, b1 = w1 / area, b2 = w2 / area;
        const double z = 1.0 / (b0 * iz0 + b1 * iz1 + b2 * iz2);
        const std::size_t pix = static_cast<std::size_t>(y) * w + x;
        if (!(z < out.depth[pix])) continue;
        out.depth[pix] = z;
        out.face_mask.bits[pix] = 1;
        for (int c = 0; c < 3; ++c) {
          const double v = b0 * colors(idx[0], c) + b1 * colors(idx[1], c) + b2 * colors(idx[2], c);
          out.color.at(x, y, c) = std::clamp(v, 0.0, 1.0);
        }
      }
    }
  }
  return out;
}

}  // namespace gsf::render
