#pragma once

#include <array>

namespace tracklink {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

/// 7-DoF oriented box: center (x, y, z), dimensions (l, w, h) and yaw rz
/// about the vertical axis. Meters and radians. Dimensions must be
/// non-negative; zero-dimension boxes are legal and have zero volume.
/// The constructor normalizes rz into (-pi, pi].
struct OrientedBox3D {
  double x = 0.0, y = 0.0, z = 0.0;
  double l = 0.0, w = 0.0, h = 0.0;
  double rz = 0.0;

  OrientedBox3D() = default;
  OrientedBox3D(double x, double y, double z, double l, double w, double h,
                double rz);

  double volume() const { return l * w * h; }
  bool has_volume() const { return l > 0.0 && w > 0.0 && h > 0.0; }
};

/// The 8 corners of the box. Order: bottom face counter-clockwise viewed
/// from above starting at local (+l/2, +w/2), then the top face in the
/// same order.
std::array<Vec3, 8> box_corners(const OrientedBox3D& box);

/// Area of the intersection of the two yaw-rotated box footprints in the
/// x-y plane. Convex polygon clipping, exact for rectangles.
double bev_intersection_area(const OrientedBox3D& a, const OrientedBox3D& b);

/// Bird's-eye-view IoU of the two box footprints. Degenerate footprints
/// give 0.
double iou_bev(const OrientedBox3D& a, const OrientedBox3D& b);

/// Volumetric IoU for gravity-aligned boxes: BEV intersection area times
/// vertical extent overlap. Two zero-volume boxes give 0.
double iou_3d(const OrientedBox3D& a, const OrientedBox3D& b);

}  // namespace tracklink
