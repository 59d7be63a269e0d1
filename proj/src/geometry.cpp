#include "tracklink/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tracklink {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Footprint areas below this are treated as zero so that union ratios do
// not pick up catastrophic-cancellation noise.
constexpr double kMinArea = 1e-12;

struct Vec2 {
  double x, y;
};

// A convex clip result of two quads has at most 8 vertices.
struct Polygon {
  std::array<Vec2, 16> pts;
  int n = 0;

  void push(Vec2 p) { pts[static_cast<std::size_t>(n++)] = p; }
};

double cross(Vec2 o, Vec2 a, Vec2 b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

std::array<Vec2, 4> footprint(const OrientedBox3D& b) {
  const double c = std::cos(b.rz);
  const double s = std::sin(b.rz);
  const double hl = 0.5 * b.l;
  const double hw = 0.5 * b.w;
  // Counter-clockwise, starting at local (+l/2, +w/2).
  const std::array<Vec2, 4> local = {
      Vec2{hl, hw}, Vec2{-hl, hw}, Vec2{-hl, -hw}, Vec2{hl, -hw}};
  std::array<Vec2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {b.x + c * local[i].x - s * local[i].y,
              b.y + s * local[i].x + c * local[i].y};
  }
  return out;
}

// Sutherland-Hodgman clip of `poly` against the half-plane to the left of
// edge e1->e2. Points exactly on the edge count as inside.
Polygon clip_halfplane(const Polygon& poly, Vec2 e1, Vec2 e2) {
  Polygon out;
  if (poly.n == 0) return out;
  for (int i = 0; i < poly.n; ++i) {
    const Vec2 cur = poly.pts[static_cast<std::size_t>(i)];
    const Vec2 prev = poly.pts[static_cast<std::size_t>((i + poly.n - 1) % poly.n)];
    const double side_cur = cross(e1, e2, cur);
    const double side_prev = cross(e1, e2, prev);
    const bool in_cur = side_cur >= 0.0;
    const bool in_prev = side_prev >= 0.0;
    if (in_cur != in_prev) {
      const double t = side_prev / (side_prev - side_cur);
      out.push({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
    }
    if (in_cur) out.push(cur);
  }
  return out;
}

double shoelace_area(const Polygon& poly) {
  if (poly.n < 3) return 0.0;
  double acc = 0.0;
  for (int i = 0; i < poly.n; ++i) {
    const Vec2 a = poly.pts[static_cast<std::size_t>(i)];
    const Vec2 b = poly.pts[static_cast<std::size_t>((i + 1) % poly.n)];
    acc += a.x * b.y - b.x * a.y;
  }
  return std::max(0.0, 0.5 * acc);
}

}  // namespace

double wrap_angle(double radians) {
  double r = std::remainder(radians, kTwoPi);  // (-pi, pi], except -pi
  if (r <= -std::numbers::pi) r = std::numbers::pi;
  return r;
}

OrientedBox3D::OrientedBox3D(double x_, double y_, double z_, double l_,
                             double w_, double h_, double rz_)
    : x(x_), y(y_), z(z_), l(l_), w(w_), h(h_), rz(wrap_angle(rz_)) {
  if (l < 0.0 || w < 0.0 || h < 0.0 || !std::isfinite(l + w + h))
    throw std::invalid_argument("OrientedBox3D: dimensions must be non-negative");
}

std::array<Vec3, 8> box_corners(const OrientedBox3D& box) {
  const auto quad = footprint(box);
  std::array<Vec3, 8> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = {quad[i].x, quad[i].y, box.z - 0.5 * box.h};
    out[i + 4] = {quad[i].x, quad[i].y, box.z + 0.5 * box.h};
  }
  return out;
}

double bev_intersection_area(const OrientedBox3D& a, const OrientedBox3D& b) {
  if (a.l * a.w <= 0.0 || b.l * b.w <= 0.0) return 0.0;
  const auto qa = footprint(a);
  const auto qb = footprint(b);
  Polygon poly;
  for (const auto& p : qa) poly.push(p);
  for (std::size_t i = 0; i < 4 && poly.n > 0; ++i)
    poly = clip_halfplane(poly, qb[i], qb[(i + 1) % 4]);
  const double area = shoelace_area(poly);
  return area < kMinArea ? 0.0 : area;
}

double iou_bev(const OrientedBox3D& a, const OrientedBox3D& b) {
  const double inter = bev_intersection_area(a, b);
  const double area_a = a.l * a.w;
  const double area_b = b.l * b.w;
  const double uni = area_a + area_b - inter;
  if (uni < kMinArea) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const OrientedBox3D& a, const OrientedBox3D& b) {
  const double z_lo = std::max(a.z - 0.5 * a.h, b.z - 0.5 * b.h);
  const double z_hi = std::min(a.z + 0.5 * a.h, b.z + 0.5 * b.h);
  const double dz = std::max(0.0, z_hi - z_lo);
  const double inter = dz > 0.0 ? bev_intersection_area(a, b) * dz : 0.0;
  const double uni = a.volume() + b.volume() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace tracklink
