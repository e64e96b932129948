// Grasp and camera value types plus the angle algebra shared by every
// module.
//
// Angle convention: a planar grasp angle is the direction of the jaw line
// (the line through both fingertips), canonicalized into [-pi/2, pi/2).
// Antipodal symmetry means phi and phi + pi describe the same grasp, which
// the (sin 2phi, cos 2phi) encoding absorbs. The closing axis is the jaw
// line rotated +90 degrees.
//
// Frames: world z up, table at z = 0. Camera follows the pinhole model
// with +z forward (optical axis) and +y down the image; a nadir camera
// therefore carries roll = pi. Pose6D maps frame-local points into world
// via p_w = R * p_l + t with R = Rz(yaw) * Ry(pitch) * Rx(roll).
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "graspkit/common.hpp"
#include "graspkit/image.hpp"

namespace graspkit {

// ---------------------------------------------------------------------------
// Angle algebra.

/// Wrap into (-pi, pi].
inline double wrap_pi(double a) {
  require(std::isfinite(a), "wrap_pi: non-finite angle");
  double r = std::fmod(a + kPi, 2.0 * kPi);
  if (r <= 0.0) r += 2.0 * kPi;
  return r - kPi;
}

/// Canonical representative of an antipodal angle: [-pi/2, pi/2), period pi.
/// Single-rounding reduction keeps exactly-representable shifts exact.
inline double canonical_angle(double phi) {
  require(std::isfinite(phi), "canonical_angle: non-finite angle");
  double k = std::round(phi / kPi);
  double c = std::fma(-k, kPi, phi);
  if (c >= kPi / 2.0) c -= kPi;
  if (c < -kPi / 2.0) c += kPi;
  return c;
}

/// Shortest signed difference a - b under the antipodal (period-pi)
/// symmetry; result in [-pi/2, pi/2).
inline double angle_diff_antipodal(double a, double b) {
  return canonical_angle(a - b);
}

struct AngleEncoding {
  double sin2;
  double cos2;
  bool operator==(const AngleEncoding&) const = default;
};

/// phi -> (sin 2phi, cos 2phi), computed from the canonical representative
/// so the encoding is identical for phi and phi +- pi.
inline AngleEncoding encode_angle(double phi) {
  double c = canonical_angle(phi);
  double t = 2.0 * c;
  return {std::sin(t), std::cos(t)};
}

/// Inverse of encode_angle up to antipodal symmetry; magnitude of the input
/// vector is ignored. Rejects the all-zero (undefined angle) input.
inline double decode_angle(double sin2, double cos2) {
  require(std::isfinite(sin2) && std::isfinite(cos2), "decode_angle: non-finite input");
  require(sin2 != 0.0 || cos2 != 0.0, "decode_angle: zero vector has no angle");
  double phi = 0.5 * std::atan2(sin2, cos2);
  if (phi >= kPi / 2.0) phi -= kPi;
  return phi;
}

// ---------------------------------------------------------------------------
// Camera model.

struct CameraIntrinsics {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
};

/// Intrinsics after cropping (x0, y0 becomes the new origin) followed by
/// uniform scaling by s.
inline CameraIntrinsics crop_scale_intrinsics(const CameraIntrinsics& k, double x0, double y0,
                                              double s) {
  return {k.fx * s, k.fy * s, (k.cx - x0) * s, (k.cy - y0) * s};
}

// ---------------------------------------------------------------------------
// Poses.

struct Pose6D {
  double x = 0.0, y = 0.0, z = 0.0;
  double roll = 0.0, pitch = 0.0, yaw = 0.0;

  Eigen::Vector3d position() const { return {x, y, z}; }

  /// R = Rz(yaw) * Ry(pitch) * Rx(roll).
  Eigen::Matrix3d rotation() const {
    double cr = std::cos(roll), sr = std::sin(roll);
    double cp = std::cos(pitch), sp = std::sin(pitch);
    double cy = std::cos(yaw), sy = std::sin(yaw);
    Eigen::Matrix3d r;
    r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
         sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
         -sp,     cp * sr,                cp * cr;
    return r;
  }

  Eigen::Vector3d transform(const Eigen::Vector3d& local) const {
    return rotation() * local + position();
  }

  Eigen::Vector3d inverse_transform(const Eigen::Vector3d& world) const {
    return rotation().transpose() * (world - position());
  }

  /// Euler extraction matching rotation(); angles land in (-pi, pi].
  static Pose6D from_rt(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
    Pose6D p;
    p.x = t.x();
    p.y = t.y();
    p.z = t.z();
    double sp = -r(2, 0);
    sp = clamp(sp, -1.0, 1.0);
    p.pitch = std::asin(sp);
    if (std::abs(sp) > 1.0 - 1e-12) {
      // Gimbal lock: split the remaining rotation into yaw only.
      p.roll = 0.0;
      p.yaw = wrap_pi(std::atan2(-r(0, 1), r(1, 1)));
    } else {
      p.roll = wrap_pi(std::atan2(r(2, 1), r(2, 2)));
      p.yaw = wrap_pi(std::atan2(r(1, 0), r(0, 0)));
    }
    return p;
  }

  Pose6D normalized() const {
    Pose6D p = *this;
    p.roll = wrap_pi(roll);
    p.pitch = wrap_pi(pitch);
    p.yaw = wrap_pi(yaw);
    return p;
  }
};

/// Nadir camera pose looking straight down from height z with world yaw psi
/// (camera x-axis heading).
inline Pose6D nadir_camera_pose(double x, double y, double z, double psi = 0.0) {
  Pose6D p;
  p.x = x;
  p.y = y;
  p.z = z;
  p.roll = kPi;
  p.pitch = 0.0;
  p.yaw = psi;
  return p;
}

// ---------------------------------------------------------------------------
// Grasps.

/// Grasp in image space: pixel center, jaw-line angle, opening in pixels.
struct ImageGrasp {
  double u = 0.0, v = 0.0;
  double angle = 0.0;
  double width_px = 0.0;
  double quality = 0.0;
};

/// Grasp in the camera frame: metric center, jaw-line angle in the image
/// plane, metric opening.
struct CameraGrasp {
  Eigen::Vector3d position{0, 0, 0};
  double angle = 0.0;
  double width_m = 0.0;
  double quality = 0.0;
};

/// Grasp in the world frame: metric center, gripper yaw about world z
/// (jaw-line direction, canonical), metric opening.
struct WorldGrasp {
  Eigen::Vector3d position{0, 0, 0};
  double yaw = 0.0;
  double width = 0.0;
  double quality = 0.0;
};

/// Dense per-pixel grasp maps: quality in [0, 1], canonical angle, opening
/// in pixels. All three share dimensions.
struct GraspMap {
  Image<float> q;
  Image<float> phi;
  Image<float> w;

  void validate() const {
    require(q.width() == phi.width() && q.width() == w.width() &&
                q.height() == phi.height() && q.height() == w.height(),
            "GraspMap: mismatched map dimensions");
  }
};

/// Back-project a pixel grasp through the pinhole model at the given depth
/// (camera-frame z, meters). Pixel opening converts by the same similar-
/// triangles ratio, w_m = w_px * d / fx.
inline CameraGrasp image_to_camera(const ImageGrasp& g, double depth, const CameraIntrinsics& k) {
  require(std::isfinite(depth) && depth > 0.0, "image_to_camera: depth must be positive");
  require(k.fx > 0.0 && k.fy > 0.0, "image_to_camera: bad intrinsics");
  CameraGrasp c;
  c.position = {(g.u - k.cx) * depth / k.fx, (g.v - k.cy) * depth / k.fy, depth};
  c.angle = canonical_angle(g.angle);
  c.width_m = g.width_px * depth / k.fx;
  c.quality = g.quality;
  return c;
}

/// Exact inverse of image_to_camera.
inline ImageGrasp camera_to_image(const CameraGrasp& c, const CameraIntrinsics& k) {
  require(c.position.z() > 0.0, "camera_to_image: point behind camera");
  ImageGrasp g;
  g.u = c.position.x() * k.fx / c.position.z() + k.cx;
  g.v = c.position.y() * k.fy / c.position.z() + k.cy;
  g.angle = canonical_angle(c.angle);
  g.width_px = c.width_m * k.fx / c.position.z();
  g.quality = c.quality;
  return g;
}

/// Project a world point through a camera pose; returns pixel coordinates
/// and camera-frame depth.
struct PixelDepth {
  double u, v, depth;
};

inline PixelDepth project_point(const Eigen::Vector3d& world, const Pose6D& cam,
                                const CameraIntrinsics& k) {
  Eigen::Vector3d p = cam.inverse_transform(world);
  require(p.z() > 1e-9, "project_point: point not in front of camera");
  return {p.x() * k.fx / p.z() + k.cx, p.y() * k.fy / p.z() + k.cy, p.z()};
}

/// Map a camera-frame grasp into world through the camera pose. The world
/// yaw composes the camera's horizontal heading (projected x-axis) with the
/// image-plane angle; for the supported near-nadir poses the projection is
/// well conditioned.
inline WorldGrasp camera_to_world(const CameraGrasp& c, const Pose6D& cam_pose) {
  WorldGrasp g;
  g.position = cam_pose.transform(c.position);
  Eigen::Vector3d cam_x = cam_pose.rotation().col(0);
  double heading = std::atan2(cam_x.y(), cam_x.x());
  require(cam_x.head<2>().norm() > 1e-9, "camera_to_world: camera x-axis is vertical");
  g.yaw = canonical_angle(heading - c.angle);
  g.width = c.width_m;
  g.quality = c.quality;
  return g;
}

/// Argmax of the quality map (row-major first occurrence on ties), with the
/// angle and width read at the winning pixel. NaN quality pixels are
/// skipped; an all-NaN map is an error.
inline ImageGrasp select_best_grasp(const GraspMap& m) {
  m.validate();
  require(!m.q.empty(), "select_best_grasp: empty map");
  int bu = -1, bv = -1;
  float best = -std::numeric_limits<float>::infinity();
  for (int v = 0; v < m.q.height(); ++v) {
    for (int u = 0; u < m.q.width(); ++u) {
      float q = m.q.at(u, v);
      if (std::isnan(q)) continue;
      if (q > best) {
        best = q;
        bu = u;
        bv = v;
      }
    }
  }
  require(bu >= 0, "select_best_grasp: quality map is all NaN");
  ImageGrasp g;
  g.u = bu;
  g.v = bv;
  g.angle = m.phi.at(bu, bv);
  g.width_px = m.w.at(bu, bv);
  g.quality = best;
  return g;
}

}  // namespace graspkit
