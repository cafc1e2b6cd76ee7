#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include "arena360/core.hpp"

namespace arena360 {

// Head orientation in degrees. Yaw turns the view toward positive
// longitude, pitch toward positive latitude (up), roll spins about the
// view axis.
struct HeadPose {
  double yaw = 0.0;    // [-180, 180)
  double pitch = 0.0;  // [-90, 90]
  double roll = 0.0;   // [-180, 180)

  HeadPose normalized() const {
    HeadPose p;
    p.yaw = wrap_deg(yaw);
    p.pitch = std::clamp(pitch, -90.0, 90.0);
    p.roll = wrap_deg(roll);
    return p;
  }
};

struct TilingConfig {
  int panorama_width = 3840;
  int panorama_height = 1920;
  int tiles_x = 6;
  int tiles_y = 4;
  double fov_h_deg = 90.0;
  double fov_v_deg = 90.0;
  int raster_grid = 256;

  int tile_width() const { return panorama_width / tiles_x; }
  int tile_height() const { return panorama_height / tiles_y; }
  int tile_count() const { return tiles_x * tiles_y; }

  void validate() const {
    if (panorama_width <= 0 || panorama_height <= 0)
      throw std::invalid_argument("tiling: nonpositive panorama size");
    if (panorama_width != 2 * panorama_height)
      throw std::invalid_argument("tiling: panorama must be equirectangular (W = 2H)");
    if (tiles_x <= 0 || tiles_y <= 0)
      throw std::invalid_argument("tiling: nonpositive tile counts");
    if (panorama_width % tiles_x != 0)
      throw std::invalid_argument("tiling: tiles_x must divide panorama_width");
    if (panorama_height % tiles_y != 0)
      throw std::invalid_argument("tiling: tiles_y must divide panorama_height");
    if (!(fov_h_deg > 0.0 && fov_h_deg < 180.0) || !(fov_v_deg > 0.0 && fov_v_deg < 180.0))
      throw std::invalid_argument("tiling: fov must lie in (0, 180)");
    if (raster_grid <= 0) throw std::invalid_argument("tiling: nonpositive raster grid");
  }
};

// Per-tile viewport overlap in raster sample counts.
struct ViewportFootprint {
  TileGrid<std::int64_t> overlap;
  std::int64_t total = 0;
};

// Latitude-dependent tile weights in (0, 1]; identical within a row.
struct SphericalWeights {
  TileGrid<double> w;
};

namespace detail {

struct Vec3 {
  double x, y, z;
};

// Columns of the yaw*pitch*roll rotation applied to the camera frame
// (x right, y up, z forward).
struct PoseRotation {
  Vec3 cx, cy, cz;

  static PoseRotation from(const HeadPose& pose) {
    const double a = deg2rad(pose.yaw);
    const double b = deg2rad(pose.pitch);
    const double g = deg2rad(pose.roll);
    const double ca = std::cos(a), sa = std::sin(a);
    const double cb = std::cos(b), sb = std::sin(b);
    const double cg = std::cos(g), sg = std::sin(g);
    // R = Ry(yaw) * Rx(pitch) * Rz(roll); positive yaw looks east,
    // positive pitch looks up.
    PoseRotation r;
    r.cx = {ca * cg - sa * sb * sg, cb * sg, -sa * cg - ca * sb * sg};
    r.cy = {-ca * sg - sa * sb * cg, cb * cg, sa * sg - ca * sb * cg};
    r.cz = {sa * cb, sb, ca * cb};
    return r;
  }

  Vec3 apply(const Vec3& v) const {
    return {cx.x * v.x + cy.x * v.y + cz.x * v.z,
            cx.y * v.x + cy.y * v.y + cz.y * v.z,
            cx.z * v.x + cy.z * v.y + cz.z * v.z};
  }
};

}  // namespace detail

// Project a forward ray grid on the viewport image plane through the pose
// rotation onto the equirectangular panorama and count hits per tile.
// Handles seam wraparound and polar poses uniformly.
inline ViewportFootprint rasterize_viewport(const HeadPose& pose, const TilingConfig& cfg) {
  cfg.validate();
  const HeadPose p = pose.normalized();
  const auto rot = detail::PoseRotation::from(p);

  const int g = cfg.raster_grid;
  const double half_w = std::tan(0.5 * deg2rad(cfg.fov_h_deg));
  const double half_h = std::tan(0.5 * deg2rad(cfg.fov_v_deg));
  const double w_px = cfg.panorama_width;
  const double h_px = cfg.panorama_height;
  const double tile_w = cfg.tile_width();
  const double tile_h = cfg.tile_height();

  ViewportFootprint fp;
  fp.overlap = TileGrid<std::int64_t>(cfg.tiles_x, cfg.tiles_y, 0);

  for (int j = 0; j < g; ++j) {
    const double v = 1.0 - 2.0 * (j + 0.5) / g;  // +1 top row
    for (int i = 0; i < g; ++i) {
      const double u = 2.0 * (i + 0.5) / g - 1.0;
      detail::Vec3 d{u * half_w, v * half_h, 1.0};
      d = rot.apply(d);
      const double norm = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
      const double lon = std::atan2(d.x, d.z);
      const double lat = std::asin(std::clamp(d.y / norm, -1.0, 1.0));

      double fx = (lon / (2.0 * kPi) + 0.5) * w_px;
      int n = static_cast<int>(std::floor(fx / tile_w));
      if (n >= cfg.tiles_x) n -= cfg.tiles_x;
      if (n < 0) n += cfg.tiles_x;

      const double fy = (0.5 - lat / kPi) * h_px;
      int m = static_cast<int>(std::floor(fy / tile_h));
      m = std::clamp(m, 0, cfg.tiles_y - 1);

      fp.overlap.at(n, m) += 1;
    }
  }
  fp.total = static_cast<std::int64_t>(g) * g;
  return fp;
}

// s_nm = |S_nm| / sum |S_nm|.
inline TileGrid<double> normalize_footprint(const ViewportFootprint& fp) {
  if (fp.total <= 0) throw std::invalid_argument("degenerate viewport");
  TileGrid<double> s(fp.overlap.nx(), fp.overlap.ny(), 0.0);
  const double inv = 1.0 / static_cast<double>(fp.total);
  for (size_t i = 0; i < fp.overlap.size(); ++i) s[i] = fp.overlap[i] * inv;
  return s;
}

// Per-pixel stretching weight cos((j + 0.5 - H/2) * pi / H) averaged over
// each tile row band, following the WS-MSE convention.
inline SphericalWeights spherical_tile_weights(const TilingConfig& cfg) {
  cfg.validate();
  const int h = cfg.panorama_height;
  const int rows_per_tile = cfg.tile_height();
  SphericalWeights sw;
  sw.w = TileGrid<double>(cfg.tiles_x, cfg.tiles_y, 0.0);
  for (int m = 0; m < cfg.tiles_y; ++m) {
    double acc = 0.0;
    for (int j = m * rows_per_tile; j < (m + 1) * rows_per_tile; ++j)
      acc += std::cos((j + 0.5 - h / 2.0) * kPi / h);
    const double w = acc / rows_per_tile;
    for (int n = 0; n < cfg.tiles_x; ++n) sw.w.at(n, m) = w;
  }
  return sw;
}

}  // namespace arena360
