// Tabletop world model: convex prisms standing on a plane, a pinhole depth
// camera with sensor limits, analytic antipodal grasps, a geometric
// grasp-outcome test, and scripted object motion for moving-target runs.
//
// Conventions: world z is up, the table is the plane z = 0, objects are
// vertical extrusions of convex CCW footprints. Success is geometric (no
// contact dynamics): a grasp succeeds when the jaw line straddles exactly
// one object, the open jaws are collision-free, the object fits in the
// opening, both closing contacts sit on faces aligned with the closing
// axis, and the object is tall enough to catch.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspkit/core.hpp"
#include "graspkit/geometry.hpp"
#include "graspkit/image.hpp"

namespace graspkit {
namespace sim {

inline constexpr int kSceneSchemaVersion = 1;
inline constexpr double kGraspClearance = 0.01;       // jaw opening beyond the object, m
inline constexpr double kSingulatedSeparation = 0.03; // min object gap when not cluttered, m
inline const double kDefaultMaxIncidence = 80.0 * kPi / 180.0;

struct PrismObject {
  ConvexPolygon footprint;  // local frame, CCW, meters
  double height = 0.0;      // extrusion above the table, m
  Vec2 position{0.0, 0.0};  // world xy of the footprint origin
  double yaw = 0.0;
  int id = 0;

  ConvexPolygon world_footprint() const { return footprint.transformed(position, yaw); }
};

struct Scene {
  std::vector<PrismObject> objects;
  Vec2 workspace{0.25, 0.30};  // full xy extents, centred on the origin

  const PrismObject* find(int id) const {
    for (const auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
};

struct SimCamera {
  CameraIntrinsics intrinsics{287.5, 287.5, 149.5, 149.5};
  Pose6D pose;
  int width = 300, height = 300;
  double min_range = 0.15;                      // closer returns are dropped, m
  double max_incidence = kDefaultMaxIncidence;  // grazing angle cutoff, rad
  double depth_sigma = 0.001;                   // additive range noise, m
};

struct GripperSpec {
  double max_width = 0.07;           // jaw opening limit, m
  double min_height = 0.015;         // shorter objects slip under the jaws, m
  double friction_half_angle = 0.52; // contact cone around the closing axis, rad
};

/// Linear motion applied to one object (or every object when object_id is
/// -1) between start and start + duration: the pose interpolates toward
/// translation / rotation, rotating about pivot when given, else about the
/// object's own origin.
struct PerturbationScript {
  int object_id = -1;
  double start = 0.0;
  double duration = 1.0;
  Vec2 translation{0.0, 0.0};
  double rotation = 0.0;  // radians
  std::optional<Vec2> pivot;
};

namespace detail {

/// Standard normal deviate from exactly two generator draws, so the stream
/// position after a render depends only on the pixel count, never on scene
/// content or sigma.
inline double gauss(Rng& rng) {
  double u1 = 1.0 - std::ldexp(double(rng() >> 11), -53);  // (0, 1]
  double u2 = std::ldexp(double(rng() >> 11), -53);        // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

struct RayHit {
  double t;                // ray parameter; equals camera-frame depth when
                           // the direction has unit z in the camera frame
  Eigen::Vector3d normal;  // outward surface normal at the hit
};

/// Clip the ray o + t*d against the extrusion of a world-space footprint
/// over z in [0, h]. Tracks which constraint produced the entry so the
/// entry normal is exact. Returns nullopt when the ray misses or the entry
/// lies behind the origin.
inline std::optional<RayHit> intersect_prism(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                                             const ConvexPolygon& wf, double h) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  Eigen::Vector3d n_entry = Eigen::Vector3d::Zero();
  bool miss = false;
  auto apply = [&](double num, double den, const Eigen::Vector3d& n) {
    // Constraint den * t <= num.
    if (std::abs(den) < 1e-15) {
      if (num < -1e-12) miss = true;  // parallel and outside the halfspace
      return;
    }
    double t = num / den;
    if (den > 0.0) {
      t1 = std::min(t1, t);
    } else if (t > t0) {
      t0 = t;
      n_entry = n;
    }
  };
  apply(h - o.z(), d.z(), Eigen::Vector3d(0, 0, 1));   // below the top cap
  apply(o.z(), -d.z(), Eigen::Vector3d(0, 0, -1));     // above the base
  Vec2 o2(o.x(), o.y()), d2(d.x(), d.y());
  for (int i = 0; i < wf.size(); ++i) {
    Vec2 n = wf.normal(i);
    apply(n.dot(wf.at(i) - o2), n.dot(d2), Eigen::Vector3d(n.x(), n.y(), 0.0));
  }
  if (miss || t0 > t1 + 1e-15 || t0 <= 1e-9) return std::nullopt;
  return detail::RayHit{t0, n_entry};
}

}  // namespace detail

/// Ray-cast depth image of the scene: per pixel, the camera-frame z of the
/// nearest surface (table plane or prism). Pixels closer than min_range or
/// hit at grazing incidence are invalid; Gaussian range noise of
/// depth_sigma is added to valid pixels. One noise deviate is consumed per
/// pixel regardless of validity, so the image is a pure function of
/// (scene, camera, seed).
inline DepthImage render_depth(const Scene& scene, const SimCamera& cam, Rng& rng) {
  require(cam.pose.z > 0.0, "render_depth: camera below table");
  require(cam.width > 0 && cam.height > 0, "render_depth: empty image");
  const Eigen::Vector3d origin = cam.pose.position();
  const Eigen::Matrix3d R = cam.pose.rotation();

  // Pixel bounding box per object from its projected corners (the
  // silhouette of a convex solid lies in their convex hull). Falls back to
  // the full image when a corner is not in front of the camera.
  struct Clipped {
    ConvexPolygon wf;
    double h;
    int u0, u1, v0, v1;
  };
  std::vector<Clipped> objs;
  objs.reserve(scene.objects.size());
  for (const auto& obj : scene.objects) {
    Clipped c{obj.world_footprint(), obj.height, 0, cam.width - 1, 0, cam.height - 1};
    double ulo = std::numeric_limits<double>::infinity(), uhi = -ulo;
    double vlo = ulo, vhi = -ulo;
    bool ok = true;
    for (int i = 0; i < c.wf.size() && ok; ++i) {
      for (double z : {0.0, obj.height}) {
        Eigen::Vector3d p = cam.pose.inverse_transform(
            Eigen::Vector3d(c.wf.at(i).x(), c.wf.at(i).y(), z));
        if (p.z() <= 1e-6) {
          ok = false;
          break;
        }
        double u = p.x() * cam.intrinsics.fx / p.z() + cam.intrinsics.cx;
        double v = p.y() * cam.intrinsics.fy / p.z() + cam.intrinsics.cy;
        ulo = std::min(ulo, u), uhi = std::max(uhi, u);
        vlo = std::min(vlo, v), vhi = std::max(vhi, v);
      }
    }
    if (ok) {
      c.u0 = std::max(0, int(std::floor(ulo)) - 1);
      c.u1 = std::min(cam.width - 1, int(std::ceil(uhi)) + 1);
      c.v0 = std::max(0, int(std::floor(vlo)) - 1);
      c.v1 = std::min(cam.height - 1, int(std::ceil(vhi)) + 1);
    }
    objs.push_back(c);
  }

  DepthImage img(cam.width, cam.height, depth_invalid());
  const double cos_cut = std::cos(cam.max_incidence);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      double g = detail::gauss(rng);
      Eigen::Vector3d dir_cam((u - cam.intrinsics.cx) / cam.intrinsics.fx,
                              (v - cam.intrinsics.cy) / cam.intrinsics.fy, 1.0);
      Eigen::Vector3d d = R * dir_cam;
      // Nearest hit: table plane, then prisms that can cover this pixel.
      double best_t = std::numeric_limits<double>::infinity();
      Eigen::Vector3d n(0, 0, 1);
      if (d.z() < -1e-15) best_t = -origin.z() / d.z();
      for (const auto& c : objs) {
        if (u < c.u0 || u > c.u1 || v < c.v0 || v > c.v1) continue;
        auto hit = detail::intersect_prism(origin, d, c.wf, c.h);
        if (hit && hit->t < best_t) {
          best_t = hit->t;
          n = hit->normal;
        }
      }
      if (!std::isfinite(best_t)) continue;
      double cos_inc = std::abs(d.normalized().dot(n));
      if (cos_inc < cos_cut) continue;  // grazing: sensor returns nothing
      double depth = best_t + cam.depth_sigma * g;  // t is camera-frame z (dir_cam.z = 1)
      if (depth < cam.min_range) continue;
      img.at(u, v) = float(depth);
    }
  }
  return img;
}

/// Smallest angle between u and any face normal of the footprint. Flat
/// jaws settle onto the nearest face, so this is the contact-normal
/// misalignment of the jaw closing along -u.
inline double face_alignment_angle(const ConvexPolygon& poly, const Vec2& u) {
  double best = kPi;
  for (int i = 0; i < poly.size(); ++i) {
    double c = clamp(poly.normal(i).dot(u), -1.0, 1.0);
    best = std::min(best, std::acos(c));
  }
  return best;
}

/// Both jaws (closing along -u and +u) land on faces within the friction
/// half-angle of the closing axis.
inline bool friction_holds(const ConvexPolygon& poly, const Vec2& u, double half_angle) {
  return face_alignment_angle(poly, u) <= half_angle &&
         face_alignment_angle(poly, -u) <= half_angle;
}

/// Ground-truth grasps for one object: closing directions sampled over
/// [-pi/2, pi/2), centred on the footprint centroid, jaw opening = support
/// width + clearance. A direction is emitted only when the opening fits
/// the gripper and both contacts satisfy the friction test. May be empty.
inline std::vector<WorldGrasp> analytic_grasps(const PrismObject& obj,
                                               const GripperSpec& gripper = {},
                                               int n_angles = 36) {
  require(n_angles > 0, "analytic_grasps: n_angles must be positive");
  ConvexPolygon wf = obj.world_footprint();
  require(wf.is_ccw_convex(), "analytic_grasps: degenerate footprint");
  Vec2 c = wf.centroid();
  std::vector<WorldGrasp> out;
  for (int j = 0; j < n_angles; ++j) {
    double theta = -kPi / 2.0 + j * (kPi / n_angles);
    Vec2 u(std::cos(theta), std::sin(theta));
    double width = wf.extent(u) + kGraspClearance;
    if (width > gripper.max_width) continue;
    if (!friction_holds(wf, u, gripper.friction_half_angle)) continue;
    WorldGrasp g;
    g.position = Eigen::Vector3d(c.x(), c.y(), obj.height);
    g.yaw = theta;
    g.width = width;
    g.quality = 1.0;
    out.push_back(g);
  }
  return out;
}

struct GraspResult {
  bool success = false;
  std::string reason;  // names the first violated clause; empty on success
};

/// Geometric grasp outcome. The jaws open to the commanded width (clamped
/// to the gripper limit) at p +/- (w/2)u and close along u. Clauses, in
/// order:
///   (a) the jaw-to-jaw segment crosses exactly one candidate footprint;
///       an object that contains an open jaw point but not the grasp
///       centre is a collision, judged by (b), not a candidate target
///   (b) neither open jaw starts inside any footprint
///   (c) the target's chord through p along u fits in the opening
///   (d) both closing contacts land on faces within the friction
///       half-angle of the closing axis
///   (e) the target is at least the gripper's minimum height
inline GraspResult grasp_success(const Scene& scene, const WorldGrasp& grasp,
                                 const GripperSpec& gripper = {}) {
  require(std::isfinite(grasp.position.x()) && std::isfinite(grasp.position.y()) &&
              std::isfinite(grasp.yaw) && std::isfinite(grasp.width),
          "grasp_success: non-finite grasp");
  const double w = std::min(grasp.width, gripper.max_width);
  const Vec2 p(grasp.position.x(), grasp.position.y());
  const Vec2 u(std::cos(grasp.yaw), std::sin(grasp.yaw));
  const Vec2 jaw_a = p + (w / 2.0) * u;
  const Vec2 jaw_b = p - (w / 2.0) * u;

  auto fail = [](const std::string& r) { return GraspResult{false, r}; };

  // Clause (a): identify the target.
  const PrismObject* target = nullptr;
  ConvexPolygon target_wf;
  int n_crossed = 0;
  for (const auto& obj : scene.objects) {
    ConvexPolygon wf = obj.world_footprint();
    if (!wf.contains(p) && (wf.contains(jaw_a) || wf.contains(jaw_b)))
      continue;  // clause (b) territory
    auto span = clip_line(wf, p, u);
    if (!span) continue;
    if (span->first <= w / 2.0 + 1e-9 && span->second >= -w / 2.0 - 1e-9) {
      ++n_crossed;
      target = &obj;
      target_wf = std::move(wf);
    }
  }
  if (n_crossed != 1)
    return fail("clause (a): closing segment crosses " + std::to_string(n_crossed) +
                " footprints, need exactly 1");

  // Clause (b): open jaws must start in free space.
  for (const auto& obj : scene.objects) {
    ConvexPolygon wf = obj.world_footprint();
    if (wf.contains(jaw_a) || wf.contains(jaw_b))
      return fail("clause (b): open jaw inside footprint of object " + std::to_string(obj.id));
  }

  // Clause (c): the object section between the jaws fits the opening.
  auto span = clip_line(target_wf, p, u);
  double chord = span->second - span->first;
  if (chord > w + 1e-9)
    return fail("clause (c): object section " + std::to_string(chord) +
                " m exceeds jaw opening " + std::to_string(w) + " m");

  // Clause (d): contact faces aligned with the closing axis.
  for (double s : {1.0, -1.0}) {
    double ang = face_alignment_angle(target_wf, s * u);
    if (ang > gripper.friction_half_angle)
      return fail("clause (d): contact normal " + std::to_string(ang * 180.0 / kPi) +
                  " deg off the closing axis");
  }

  // Clause (e): tall enough to catch between the fingertips.
  if (target->height < gripper.min_height - 1e-12)
    return fail("clause (e): object height " + std::to_string(target->height) +
                " m below gripper minimum");

  return GraspResult{true, ""};
}

/// Place copies of the prototypes at uniform random poses inside the
/// workspace (footprints fully inside). Singulated scenes keep pairwise
/// separation >= kSingulatedSeparation; clutter only forbids overlap.
/// Rejection-sampled; throws when an object cannot be placed. Ids are
/// reassigned sequentially so repeated prototypes stay unique.
inline Scene spawn_scene(const std::vector<PrismObject>& prototypes, Rng& rng, bool clutter,
                         int max_tries = 500) {
  Scene scene;
  const double hx = scene.workspace.x() / 2.0, hy = scene.workspace.y() / 2.0;
  const double min_sep = clutter ? 0.0 : kSingulatedSeparation;
  std::uniform_real_distribution<double> ux(-hx, hx), uy(-hy, hy), uyaw(0.0, 2.0 * kPi);
  for (const auto& proto : prototypes) {
    bool placed = false;
    for (int attempt = 0; attempt < max_tries && !placed; ++attempt) {
      PrismObject obj = proto;
      obj.position = Vec2(ux(rng), uy(rng));
      obj.yaw = uyaw(rng);
      obj.id = int(scene.objects.size());
      ConvexPolygon wf = obj.world_footprint();
      bool ok = true;
      for (int i = 0; i < wf.size() && ok; ++i)
        ok = std::abs(wf.at(i).x()) <= hx && std::abs(wf.at(i).y()) <= hy;
      for (const auto& other : scene.objects) {
        if (!ok) break;
        ok = polygon_separation(wf, other.world_footprint()) >= min_sep;
      }
      if (ok) {
        scene.objects.push_back(std::move(obj));
        placed = true;
      }
    }
    if (!placed)
      throw std::runtime_error("spawn_scene: cannot place object " +
                               std::to_string(scene.objects.size()) + " after " +
                               std::to_string(max_tries) + " tries");
  }
  return scene;
}

/// Scene pose at absolute time t, from the scripts' reference scene.
/// Each script contributes clamp((t - start) / duration, 0, 1) of its
/// translation and rotation; scripts are applied in order, so several
/// scripts on one object compose sequentially.
inline Scene scene_at(const Scene& initial, const std::vector<PerturbationScript>& scripts,
                      double t) {
  Scene out = initial;
  for (const auto& s : scripts) {
    double a = s.duration > 0.0 ? clamp((t - s.start) / s.duration, 0.0, 1.0)
                                : (t >= s.start ? 1.0 : 0.0);
    if (a <= 0.0) continue;
    Eigen::Rotation2Dd rot(a * s.rotation);
    for (auto& obj : out.objects) {
      if (s.object_id != -1 && obj.id != s.object_id) continue;
      if (s.pivot)
        obj.position = *s.pivot + rot * (obj.position - *s.pivot) + a * s.translation;
      else
        obj.position += a * s.translation;
      obj.yaw += a * s.rotation;
    }
  }
  return out;
}

/// Scene after advancing from absolute time t by dt. The first argument is
/// the scripts' reference scene (the configuration at t = 0), so stepping
/// is stateless and free of accumulation drift.
inline Scene step(const Scene& initial, const std::vector<PerturbationScript>& scripts, double t,
                  double dt) {
  require(dt > 0.0, "step: dt must be positive");
  return scene_at(initial, scripts, t + dt);
}

/// Moving-target scripts must displace by >= 100 mm and rotate by >= 25
/// degrees; throws otherwise.
inline void require_dynamic_minimums(const PerturbationScript& s) {
  require(s.translation.norm() >= 0.1 - 1e-9,
          "dynamic script: translation below the 0.1 m minimum");
  require(std::abs(s.rotation) >= 25.0 * kPi / 180.0 - 1e-9,
          "dynamic script: rotation below the 25 degree minimum");
}

/// Structural validation: script targets exist, durations are positive,
/// and at every script boundary all footprints stay inside the workspace
/// inflated by `margin` on each side (motion is piecewise linear between
/// boundaries).
inline void validate_scripts(const Scene& scene, const std::vector<PerturbationScript>& scripts,
                             double margin = 0.1) {
  std::vector<double> times{0.0};
  for (const auto& s : scripts) {
    require(s.duration > 0.0, "script: duration must be positive");
    require(s.start >= 0.0, "script: start must be non-negative");
    require(s.object_id == -1 || scene.find(s.object_id) != nullptr,
            "script: unknown object id " + std::to_string(s.object_id));
    times.push_back(s.start);
    times.push_back(s.start + s.duration);
  }
  const double bx = scene.workspace.x() / 2.0 + margin;
  const double by = scene.workspace.y() / 2.0 + margin;
  for (double t : times) {
    Scene at = scene_at(scene, scripts, t);
    for (const auto& obj : at.objects) {
      ConvexPolygon wf = obj.world_footprint();
      for (int i = 0; i < wf.size(); ++i)
        require(std::abs(wf.at(i).x()) <= bx && std::abs(wf.at(i).y()) <= by,
                "script: object " + std::to_string(obj.id) + " leaves the extended workspace");
    }
  }
}

/// Ten-object evaluation set: rectangles, regular polygons, and a
/// trapezoid, all graspable under the default gripper, heights above the
/// 15 mm minimum. Poses are zeroed; spawn_scene assigns them.
inline std::vector<PrismObject> standard_object_set() {
  auto prism = [](ConvexPolygon fp, double h, int id) {
    PrismObject o;
    o.footprint = std::move(fp);
    o.height = h;
    o.id = id;
    return o;
  };
  const double af_hex = 0.038 / 2.0 / std::cos(kPi / 6.0);  // across-flats to circumradius
  const double af_oct = 0.045 / 2.0 / std::cos(kPi / 8.0);
  ConvexPolygon trapezoid;
  trapezoid.v = {Vec2(-0.0225, -0.015), Vec2(0.0225, -0.015), Vec2(0.015, 0.015),
                 Vec2(-0.015, 0.015)};
  return {
      prism(make_rectangle(0.040, 0.040), 0.025, 0),
      prism(make_rectangle(0.030, 0.030), 0.035, 1),
      prism(make_rectangle(0.030, 0.055), 0.020, 2),
      prism(make_rectangle(0.025, 0.045), 0.018, 3),
      prism(make_regular_polygon(6, af_hex), 0.030, 4),
      prism(make_regular_polygon(8, af_oct), 0.022, 5),
      prism(make_regular_polygon(32, 0.025), 0.020, 6),
      prism(make_regular_polygon(32, 0.016), 0.040, 7),
      prism(std::move(trapezoid), 0.025, 8),
      prism(make_regular_polygon(5, 0.023), 0.028, 9),
  };
}

// ---- JSON scene specs -----------------------------------------------------

inline nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : scene.objects) {
    nlohmann::json fp = nlohmann::json::array();
    for (int i = 0; i < o.footprint.size(); ++i)
      fp.push_back({o.footprint.at(i).x(), o.footprint.at(i).y()});
    objs.push_back({{"id", o.id},
                    {"height", o.height},
                    {"position", {o.position.x(), o.position.y()}},
                    {"yaw", o.yaw},
                    {"footprint", fp}});
  }
  return {{"workspace", {scene.workspace.x(), scene.workspace.y()}}, {"objects", objs}};
}

inline Scene scene_from_json(const nlohmann::json& j) {
  Scene scene;
  if (j.contains("workspace"))
    scene.workspace = Vec2(j["workspace"][0].get<double>(), j["workspace"][1].get<double>());
  for (const auto& jo : j.at("objects")) {
    PrismObject o;
    o.id = jo.at("id").get<int>();
    o.height = jo.at("height").get<double>();
    o.position = Vec2(jo.at("position")[0].get<double>(), jo.at("position")[1].get<double>());
    o.yaw = jo.at("yaw").get<double>();
    for (const auto& v : jo.at("footprint"))
      o.footprint.v.push_back(Vec2(v[0].get<double>(), v[1].get<double>()));
    require(o.footprint.is_ccw_convex(), "scene_from_json: footprint not CCW convex");
    require(o.height > 0.0, "scene_from_json: height must be positive");
    require(scene.find(o.id) == nullptr, "scene_from_json: duplicate object id");
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

inline nlohmann::json camera_to_json(const SimCamera& c) {
  return {{"pose", {c.pose.x, c.pose.y, c.pose.z, c.pose.roll, c.pose.pitch, c.pose.yaw}},
          {"intrinsics", {c.intrinsics.fx, c.intrinsics.fy, c.intrinsics.cx, c.intrinsics.cy}},
          {"width", c.width},
          {"height", c.height},
          {"min_range", c.min_range},
          {"max_incidence", c.max_incidence},
          {"depth_sigma", c.depth_sigma}};
}

inline SimCamera camera_from_json(const nlohmann::json& j) {
  SimCamera c;
  auto p = j.at("pose");
  c.pose = {p[0].get<double>(), p[1].get<double>(), p[2].get<double>(),
            p[3].get<double>(), p[4].get<double>(), p[5].get<double>()};
  auto k = j.at("intrinsics");
  c.intrinsics = {k[0].get<double>(), k[1].get<double>(), k[2].get<double>(),
                  k[3].get<double>()};
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.min_range = j.value("min_range", c.min_range);
  c.max_incidence = j.value("max_incidence", c.max_incidence);
  c.depth_sigma = j.value("depth_sigma", c.depth_sigma);
  require(c.min_range > 0.0, "camera_from_json: min_range must be positive");
  return c;
}

inline nlohmann::json gripper_to_json(const GripperSpec& g) {
  return {{"max_width", g.max_width},
          {"min_height", g.min_height},
          {"friction_half_angle", g.friction_half_angle}};
}

inline GripperSpec gripper_from_json(const nlohmann::json& j) {
  GripperSpec g;
  g.max_width = j.value("max_width", g.max_width);
  g.min_height = j.value("min_height", g.min_height);
  g.friction_half_angle = j.value("friction_half_angle", g.friction_half_angle);
  require(g.max_width > 0.0 && g.min_height > 0.0 && g.friction_half_angle > 0.0,
          "gripper_from_json: fields must be positive");
  return g;
}

inline nlohmann::json script_to_json(const PerturbationScript& s) {
  nlohmann::json j = {{"object_id", s.object_id},
                      {"start", s.start},
                      {"duration", s.duration},
                      {"translation", {s.translation.x(), s.translation.y()}},
                      {"rotation", s.rotation}};
  if (s.pivot) j["pivot"] = {s.pivot->x(), s.pivot->y()};
  return j;
}

inline PerturbationScript script_from_json(const nlohmann::json& j) {
  PerturbationScript s;
  s.object_id = j.value("object_id", -1);
  s.start = j.at("start").get<double>();
  s.duration = j.at("duration").get<double>();
  s.translation = Vec2(j.at("translation")[0].get<double>(), j.at("translation")[1].get<double>());
  s.rotation = j.at("rotation").get<double>();
  if (j.contains("pivot")) s.pivot = Vec2(j["pivot"][0].get<double>(), j["pivot"][1].get<double>());
  return s;
}

/// Complete simulation setup as stored in a scene spec file.
struct SimSpec {
  Scene scene;
  SimCamera camera;
  GripperSpec gripper;
  std::vector<PerturbationScript> scripts;
};

inline nlohmann::json sim_spec_to_json(const SimSpec& s) {
  nlohmann::json scripts = nlohmann::json::array();
  for (const auto& sc : s.scripts) scripts.push_back(script_to_json(sc));
  return {{"schema_version", kSceneSchemaVersion},
          {"scene", scene_to_json(s.scene)},
          {"camera", camera_to_json(s.camera)},
          {"gripper", gripper_to_json(s.gripper)},
          {"scripts", scripts}};
}

inline SimSpec sim_spec_from_json(const nlohmann::json& j) {
  require(j.value("schema_version", -1) == kSceneSchemaVersion,
          "sim spec: unsupported schema_version");
  SimSpec s;
  s.scene = scene_from_json(j.at("scene"));
  if (j.contains("camera")) s.camera = camera_from_json(j["camera"]);
  if (j.contains("gripper")) s.gripper = gripper_from_json(j["gripper"]);
  if (j.contains("scripts"))
    for (const auto& js : j["scripts"]) s.scripts.push_back(script_from_json(js));
  return s;
}

}  // namespace sim
}  // namespace graspkit
