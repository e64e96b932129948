// Simulation: depth rendering against closed-form ray oracles, analytic
// grasp enumeration against a support-function oracle, the five-clause
// grasp outcome test, spawning, and scripted motion.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>

#include "graspkit/sim.hpp"

using namespace graspkit;
using namespace graspkit::sim;

namespace {

// Rotation built entry-by-entry, independent of Pose6D internals.
Eigen::Matrix3d rot_zyx(double roll, double pitch, double yaw) {
  double cr = std::cos(roll), sr = std::sin(roll);
  double cp = std::cos(pitch), sp = std::sin(pitch);
  double cy = std::cos(yaw), sy = std::sin(yaw);
  Eigen::Matrix3d rx, ry, rz;
  rx << 1, 0, 0, 0, cr, -sr, 0, sr, cr;
  ry << cp, 0, sp, 0, 1, 0, -sp, 0, cp;
  rz << cy, -sy, 0, sy, cy, 0, 0, 0, 1;
  return rz * ry * rx;
}

PrismObject square_prism(double side, double height, Vec2 pos = Vec2(0, 0), double yaw = 0,
                         int id = 0) {
  PrismObject o;
  o.footprint = make_rectangle(side, side);
  o.height = height;
  o.position = pos;
  o.yaw = yaw;
  o.id = id;
  return o;
}

SimCamera nadir_cam(double z, int res = 300) {
  SimCamera c;
  c.pose = nadir_camera_pose(0.0, 0.0, z);
  c.width = c.height = res;
  c.intrinsics = {287.5 * res / 300.0, 287.5 * res / 300.0, (res - 1) / 2.0, (res - 1) / 2.0};
  c.depth_sigma = 0.0;
  return c;
}

// Support width by direct vertex enumeration.
double support_width(const ConvexPolygon& poly, double theta) {
  Vec2 u(std::cos(theta), std::sin(theta));
  double lo = poly.at(0).dot(u), hi = lo;
  for (int i = 1; i < poly.size(); ++i) {
    double d = poly.at(i).dot(u);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return hi - lo;
}

// True when p lies on the table plane or on some prism surface.
bool on_scene_surface(const Scene& scene, const Eigen::Vector3d& p, double tol = 1e-6) {
  if (std::abs(p.z()) <= tol) return true;
  Vec2 xy(p.x(), p.y());
  for (const auto& obj : scene.objects) {
    ConvexPolygon wf = obj.world_footprint();
    if (wf.contains(xy, tol) && std::abs(p.z() - obj.height) <= tol) return true;
    if (p.z() >= -tol && p.z() <= obj.height + tol) {
      for (int i = 0; i < wf.size(); ++i)
        if (point_segment_distance(xy, wf.at(i), wf.at((i + 1) % wf.size())) <= tol) return true;
    }
  }
  return false;
}

}  // namespace

TEST_CASE("noise-free nadir render of an empty table is the exact camera height", "[sim]") {
  Scene scene;
  SimCamera cam = nadir_cam(0.4);
  Rng rng(1);
  DepthImage img = render_depth(scene, cam, rng);
  REQUIRE(count_invalid(img) == 0);
  for (float v : img.raw()) REQUIRE(v == 0.4f);
}

TEST_CASE("prism pixels read camera height minus object height", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.04, 0.05));
  SimCamera cam = nadir_cam(0.4);
  Rng rng(1);
  DepthImage img = render_depth(scene, cam, rng);

  int prism_px = 0;
  for (float v : img.raw()) {
    REQUIRE((v == 0.35f || v == 0.4f));
    if (v == 0.35f) ++prism_px;
  }
  // 40 mm at 0.35 m with f = 287.5 px projects to ~32.9 px per side.
  CHECK(prism_px > 900);
  CHECK(prism_px < 1200);
  // The optical axis points at the prism centre.
  CHECK(img.at(149, 149) == 0.35f);
  CHECK(img.at(5, 5) == 0.4f);
}

TEST_CASE("everything nearer than min_range is invalid", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.04, 0.05));
  SimCamera cam = nadir_cam(0.14);
  Rng rng(1);
  DepthImage img = render_depth(scene, cam, rng);
  REQUIRE(count_invalid(img) == int(img.size()));
}

TEST_CASE("camera below the table is rejected", "[sim]") {
  Scene scene;
  SimCamera cam = nadir_cam(0.4);
  cam.pose.z = -0.1;
  Rng rng(1);
  REQUIRE_THROWS(render_depth(scene, cam, rng));
}

TEST_CASE("tilted-camera depths match a closed-form plane intersection", "[sim]") {
  Scene scene;
  SimCamera cam = nadir_cam(0.4, 150);
  cam.pose = {0.0, -0.1, 0.4, kPi, 14.0 * kPi / 180.0, 0.0};
  Rng rng(7);
  DepthImage img = render_depth(scene, cam, rng);
  REQUIRE(count_invalid(img) == 0);

  Eigen::Matrix3d R = rot_zyx(cam.pose.roll, cam.pose.pitch, cam.pose.yaw);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      Eigen::Vector3d dir_cam((u - cam.intrinsics.cx) / cam.intrinsics.fx,
                              (v - cam.intrinsics.cy) / cam.intrinsics.fy, 1.0);
      Eigen::Vector3d d = R * dir_cam;
      REQUIRE(d.z() < 0.0);
      double expected = -cam.pose.z / d.z();
      REQUIRE(double(img.at(u, v)) == Catch::Approx(expected).margin(1e-9 + 6e-8 * expected));
    }
  }
}

TEST_CASE("valid pixels reproject onto a scene surface", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.05, 0.03, Vec2(0.02, -0.04), 0.4, 0));
  scene.objects.push_back(square_prism(0.03, 0.06, Vec2(-0.06, 0.05), 1.1, 1));
  PrismObject hex;
  hex.footprint = make_regular_polygon(6, 0.025);
  hex.height = 0.02;
  hex.position = Vec2(0.06, 0.08);
  hex.id = 2;
  scene.objects.push_back(hex);

  SimCamera cam = nadir_cam(0.4, 150);
  cam.pose = {0.0, -0.05, 0.45, kPi, 10.0 * kPi / 180.0, 0.3};
  Rng rng(3);
  DepthImage img = render_depth(scene, cam, rng);
  REQUIRE(count_invalid(img) < int(img.size()) / 4);

  int checked = 0;
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      if (!depth_valid(img.at(u, v))) continue;
      double d = img.at(u, v);
      Eigen::Vector3d p_cam((u - cam.intrinsics.cx) / cam.intrinsics.fx * d,
                            (v - cam.intrinsics.cy) / cam.intrinsics.fy * d, d);
      Eigen::Vector3d world = cam.pose.transform(p_cam);
      REQUIRE(on_scene_surface(scene, world));
      ++checked;
    }
  }
  REQUIRE(checked > 10000);
}

TEST_CASE("render is a pure function of scene, camera, and seed", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.04, 0.05));
  SimCamera cam = nadir_cam(0.4, 120);
  cam.depth_sigma = 0.001;

  Rng r1(42), r2(42), r3(43);
  DepthImage a = render_depth(scene, cam, r1);
  DepthImage b = render_depth(scene, cam, r2);
  DepthImage c = render_depth(scene, cam, r3);
  bool same = true, diff = false;
  for (size_t i = 0; i < a.size(); ++i) {
    float va = a.raw()[i], vb = b.raw()[i], vc = c.raw()[i];
    same = same && ((va == vb) || (!depth_valid(va) && !depth_valid(vb)));
    diff = diff || va != vc;
  }
  CHECK(same);
  CHECK(diff);

  // The noise field depends on the pixel index only: away from the prism,
  // an empty scene and the prism scene agree bitwise under one seed.
  Scene empty;
  Rng r4(42);
  DepthImage e = render_depth(empty, cam, r4);
  CHECK(a.at(5, 5) == e.at(5, 5));
  CHECK(a.at(110, 7) == e.at(110, 7));
}

TEST_CASE("additive range noise has the configured scale", "[sim]") {
  Scene scene;
  SimCamera cam = nadir_cam(0.4);
  cam.depth_sigma = 0.001;
  Rng rng(9);
  DepthImage img = render_depth(scene, cam, rng);
  REQUIRE(count_invalid(img) == 0);
  double sum = 0.0, sum2 = 0.0;
  for (float v : img.raw()) {
    double e = double(v) - 0.4;
    sum += e;
    sum2 += e * e;
  }
  double n = double(img.size());
  double mean = sum / n;
  double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(std::abs(mean) < 5e-5);
  CHECK(sd > 0.00093);
  CHECK(sd < 0.00107);
}

TEST_CASE("grazing incidence invalidates side-wall pixels", "[sim]") {
  // A tall prism viewed from straight above: its vertical side walls are
  // at 90 degrees incidence wherever the ray catches them.
  Scene scene;
  scene.objects.push_back(square_prism(0.06, 0.12, Vec2(0.08, 0.0)));
  SimCamera cam = nadir_cam(0.4);
  Rng rng(1);
  DepthImage img = render_depth(scene, cam, rng);
  int invalid = count_invalid(img);
  CHECK(invalid > 0);
  // All invalids sit inside the prism's pixel neighbourhood.
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u)
      if (!depth_valid(img.at(u, v))) REQUIRE(u > 150);
}

TEST_CASE("analytic grasps of a square match the support-function oracle", "[sim]") {
  PrismObject sq = square_prism(0.04, 0.025, Vec2(0.03, -0.02), 0.0);
  GripperSpec grip;
  auto grasps = analytic_grasps(sq, grip, 36);

  // Oracle: directions whose nearest face normal (0/90/180/270 deg for an
  // axis-aligned square) is within the friction half-angle, on both sides.
  std::set<int> expect;
  for (int j = 0; j < 36; ++j) {
    double theta = -kPi / 2 + j * kPi / 36;
    double deg = theta * 180.0 / kPi;
    double m = std::fmod(std::fmod(deg, 90.0) + 90.0, 90.0);
    double off = std::min(m, 90.0 - m) * kPi / 180.0;
    if (off <= grip.friction_half_angle) expect.insert(j);
  }
  REQUIRE(grasps.size() == expect.size());
  ConvexPolygon wf = sq.world_footprint();
  for (const auto& g : grasps) {
    int j = int(std::lround((g.yaw + kPi / 2) / (kPi / 36)));
    REQUIRE(expect.count(j) == 1);
    REQUIRE(g.width == Catch::Approx(support_width(wf, g.yaw) + 0.01).epsilon(1e-12));
    REQUIRE(g.width <= grip.max_width);
    CHECK(g.position.x() == Catch::Approx(0.03).margin(1e-12));
    CHECK(g.position.y() == Catch::Approx(-0.02).margin(1e-12));
    CHECK(g.position.z() == 0.025);
    CHECK(g.quality == 1.0);
  }
  // Bands exist around both the 0 and +-90 degree faces.
  bool near_zero = false, near_ninety = false;
  for (const auto& g : grasps) {
    if (std::abs(g.yaw) < 0.1) near_zero = true;
    if (std::abs(std::abs(g.yaw) - kPi / 2) < 0.1) near_ninety = true;
  }
  CHECK(near_zero);
  CHECK(near_ninety);
}

TEST_CASE("a 90 mm square exceeds the 70 mm gripper everywhere", "[sim]") {
  PrismObject sq = square_prism(0.09, 0.03);
  REQUIRE(analytic_grasps(sq).empty());
}

TEST_CASE("a near-circular polygon is graspable at every sampled direction", "[sim]") {
  PrismObject disc;
  disc.footprint = make_regular_polygon(32, 0.025);
  disc.height = 0.02;
  disc.yaw = 0.37;  // arbitrary orientation must not matter
  auto grasps = analytic_grasps(disc, {}, 36);
  REQUIRE(grasps.size() == 36);
  ConvexPolygon wf = disc.world_footprint();
  for (const auto& g : grasps)
    REQUIRE(g.width == Catch::Approx(support_width(wf, g.yaw) + 0.01).epsilon(1e-12));
}

TEST_CASE("centred grasp across a square succeeds", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.04, 0.025, Vec2(0.05, 0.02), 0.0));
  WorldGrasp g;
  g.position = Eigen::Vector3d(0.05, 0.02, 0.025);
  g.yaw = 0.0;
  g.width = 0.06;
  auto r = grasp_success(scene, g);
  CHECK(r.success);
  CHECK(r.reason.empty());
}

TEST_CASE("corner pinch on a square fails the contact-alignment clause", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.04, 0.025));
  WorldGrasp g;
  g.position = Eigen::Vector3d(0, 0, 0.025);
  g.yaw = kPi / 4;
  g.width = 0.06;
  auto r = grasp_success(scene, g);
  REQUIRE_FALSE(r.success);
  CHECK(r.reason.find("clause (d)") == 0);
}

TEST_CASE("jaw landing inside a neighbour fails as a collision", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.04, 0.025, Vec2(0, 0), 0.0, 0));
  scene.objects.push_back(square_prism(0.04, 0.025, Vec2(0.05, 0), 0.0, 1));
  WorldGrasp g;
  g.position = Eigen::Vector3d(0, 0, 0.025);
  g.yaw = 0.0;
  g.width = 0.08;  // clamped to 0.07: jaws at +-0.035, the right one inside object 1
  auto r = grasp_success(scene, g);
  REQUIRE_FALSE(r.success);
  CHECK(r.reason.find("clause (b)") == 0);
  CHECK(r.reason.find("object 1") != std::string::npos);
}

TEST_CASE("no object or two objects on the closing segment fail target identification",
          "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.02, 0.025, Vec2(-0.0175, 0), 0.0, 0));
  scene.objects.push_back(square_prism(0.02, 0.025, Vec2(0.0175, 0), 0.0, 1));

  WorldGrasp empty_space;
  empty_space.position = Eigen::Vector3d(0.0, 0.1, 0.02);
  empty_space.yaw = 0.0;
  empty_space.width = 0.05;
  auto r0 = grasp_success(scene, empty_space);
  REQUIRE_FALSE(r0.success);
  CHECK(r0.reason.find("clause (a)") == 0);
  CHECK(r0.reason.find("crosses 0") != std::string::npos);

  WorldGrasp both;
  both.position = Eigen::Vector3d(0, 0, 0.02);
  both.yaw = 0.0;
  both.width = 0.07;  // jaws at +-0.035, outside both squares
  auto r2 = grasp_success(scene, both);
  REQUIRE_FALSE(r2.success);
  CHECK(r2.reason.find("clause (a)") == 0);
  CHECK(r2.reason.find("crosses 2") != std::string::npos);
}

TEST_CASE("an oversized object swallows a jaw and fails as a collision", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.09, 0.03));
  WorldGrasp g;
  g.position = Eigen::Vector3d(0, 0, 0.03);
  g.yaw = 0.0;
  g.width = 0.07;
  auto r = grasp_success(scene, g);
  REQUIRE_FALSE(r.success);
  CHECK(r.reason.find("clause (b)") == 0);
}

TEST_CASE("too-short objects fail the height clause", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.04, 0.010));
  WorldGrasp g;
  g.position = Eigen::Vector3d(0, 0, 0.010);
  g.yaw = 0.0;
  g.width = 0.06;
  auto r = grasp_success(scene, g);
  REQUIRE_FALSE(r.success);
  CHECK(r.reason.find("clause (e)") == 0);
}

TEST_CASE("non-finite grasps are rejected", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.04, 0.025));
  WorldGrasp g;
  g.position = Eigen::Vector3d(std::nan(""), 0, 0);
  REQUIRE_THROWS(grasp_success(scene, g));
}

TEST_CASE("every analytic grasp executed in a singulated scene succeeds", "[sim]") {
  // Ten objects with 30 mm gaps saturate the workspace, so singulated
  // scenes hold half the set each.
  auto all = standard_object_set();
  int total = 0;
  for (int half = 0; half < 2; ++half) {
    std::vector<PrismObject> subset(all.begin() + 5 * half, all.begin() + 5 * (half + 1));
    Rng rng(11 + half);
    Scene scene = spawn_scene(subset, rng, false, 2000);
    REQUIRE(scene.objects.size() == 5);
    for (const auto& obj : scene.objects) {
      auto grasps = analytic_grasps(obj);
      REQUIRE_FALSE(grasps.empty());
      for (const auto& g : grasps) {
        auto r = grasp_success(scene, g);
        INFO("object " << obj.id << " yaw " << g.yaw << ": " << r.reason);
        REQUIRE(r.success);
        ++total;
      }
    }
  }
  CHECK(total > 100);
}

TEST_CASE("grasp outcome is invariant under a rigid transform of scene and grasp", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.04, 0.025, Vec2(0.01, -0.02), 0.3, 0));
  PrismObject hex;
  hex.footprint = make_regular_polygon(6, 0.022);
  hex.height = 0.03;
  hex.position = Vec2(-0.06, 0.05);
  hex.yaw = 1.0;
  hex.id = 1;
  scene.objects.push_back(hex);

  const double phi = 0.7;
  const Vec2 shift(0.05, -0.03);
  Eigen::Rotation2Dd rot(phi);
  Scene moved = scene;
  for (auto& o : moved.objects) {
    o.position = rot * o.position + shift;
    o.yaw += phi;
  }

  int compared = 0;
  for (double px : {-0.06, 0.01, 0.03}) {
    for (double py : {-0.02, 0.02, 0.05}) {
      for (int j = 0; j < 12; ++j) {
        WorldGrasp g;
        g.position = Eigen::Vector3d(px, py, 0.03);
        g.yaw = -kPi / 2 + j * kPi / 12;
        g.width = 0.055;
        auto r0 = grasp_success(scene, g);

        WorldGrasp gt = g;
        Vec2 q = rot * Vec2(px, py) + shift;
        gt.position = Eigen::Vector3d(q.x(), q.y(), 0.03);
        gt.yaw += phi;
        auto r1 = grasp_success(moved, gt);
        INFO("p=(" << px << "," << py << ") yaw=" << g.yaw << " : " << r0.reason << " vs "
                   << r1.reason);
        REQUIRE(r0.success == r1.success);
        REQUIRE(r0.reason.substr(0, 10) == r1.reason.substr(0, 10));
        ++compared;
      }
    }
  }
  REQUIRE(compared == 108);
}

TEST_CASE("spawning is seeded and respects separation rules", "[sim]") {
  auto all = standard_object_set();
  std::vector<PrismObject> five(all.begin(), all.begin() + 5);
  Rng r1(5), r2(5), r3(6);
  Scene a = spawn_scene(five, r1, false, 2000);
  Scene b = spawn_scene(five, r2, false, 2000);
  Scene c = spawn_scene(five, r3, false, 2000);

  REQUIRE(a.objects.size() == b.objects.size());
  bool identical = true, differs = false;
  for (size_t i = 0; i < a.objects.size(); ++i) {
    identical = identical && a.objects[i].position == b.objects[i].position &&
                a.objects[i].yaw == b.objects[i].yaw;
    differs = differs || a.objects[i].position != c.objects[i].position;
  }
  CHECK(identical);
  CHECK(differs);

  const double hx = a.workspace.x() / 2, hy = a.workspace.y() / 2;
  std::set<int> ids;
  for (const auto& o : a.objects) {
    ids.insert(o.id);
    ConvexPolygon wf = o.world_footprint();
    for (int i = 0; i < wf.size(); ++i) {
      REQUIRE(std::abs(wf.at(i).x()) <= hx);
      REQUIRE(std::abs(wf.at(i).y()) <= hy);
    }
  }
  REQUIRE(ids.size() == 5);
  for (size_t i = 0; i < a.objects.size(); ++i)
    for (size_t j = i + 1; j < a.objects.size(); ++j)
      REQUIRE(polygon_separation(a.objects[i].world_footprint(),
                                 a.objects[j].world_footprint()) >= kSingulatedSeparation - 1e-12);

  Rng r4(7);
  Scene clutter = spawn_scene(standard_object_set(), r4, true);
  REQUIRE(clutter.objects.size() == 10);
  for (size_t i = 0; i < clutter.objects.size(); ++i)
    for (size_t j = i + 1; j < clutter.objects.size(); ++j)
      REQUIRE(polygon_separation(clutter.objects[i].world_footprint(),
                                 clutter.objects[j].world_footprint()) >= -1e-12);
}

TEST_CASE("impossible packing reports a spawn failure", "[sim]") {
  std::vector<PrismObject> big(12, square_prism(0.09, 0.02));
  Rng rng(1);
  REQUIRE_THROWS_WITH(spawn_scene(big, rng, false, 60),
                      Catch::Matchers::ContainsSubstring("cannot place"));
}

TEST_CASE("scripted motion interpolates linearly and clamps at the ends", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.03, 0.02, Vec2(0.02, -0.03), 0.1, 0));
  PerturbationScript s;
  s.object_id = 0;
  s.start = 1.0;
  s.duration = 2.0;
  s.translation = Vec2(0.12, 0.0);
  s.rotation = 30.0 * kPi / 180.0;
  require_dynamic_minimums(s);
  validate_scripts(scene, {s});

  Scene before = scene_at(scene, {s}, 0.5);
  CHECK(before.objects[0].position == scene.objects[0].position);
  CHECK(before.objects[0].yaw == scene.objects[0].yaw);

  Scene mid = scene_at(scene, {s}, 2.0);
  CHECK(mid.objects[0].position.x() == Catch::Approx(0.02 + 0.06).margin(1e-15));
  CHECK(mid.objects[0].position.y() == Catch::Approx(-0.03).margin(1e-15));
  CHECK(mid.objects[0].yaw == Catch::Approx(0.1 + 15.0 * kPi / 180.0).margin(1e-15));

  Scene done = scene_at(scene, {s}, 3.0);
  Scene later = scene_at(scene, {s}, 50.0);
  CHECK(done.objects[0].position.x() == Catch::Approx(0.14).margin(1e-15));
  CHECK(later.objects[0].position == done.objects[0].position);
  CHECK(later.objects[0].yaw == done.objects[0].yaw);
  CHECK((done.objects[0].position - scene.objects[0].position).norm() >= 0.1);

  Scene stepped = step(scene, {s}, 1.5, 0.5);
  CHECK(stepped.objects[0].position == mid.objects[0].position);
  REQUIRE_THROWS(step(scene, {s}, 0.0, 0.0));
}

TEST_CASE("pivoted rotation swings the object about the pivot", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.03, 0.02, Vec2(0.1, 0.0), 0.0, 0));
  PerturbationScript s;
  s.object_id = 0;
  s.start = 0.0;
  s.duration = 1.0;
  s.rotation = kPi / 2;
  s.pivot = Vec2(0.0, 0.0);

  Scene half = scene_at(scene, {s}, 0.5);
  CHECK(half.objects[0].position.x() == Catch::Approx(0.1 * std::cos(kPi / 4)).margin(1e-12));
  CHECK(half.objects[0].position.y() == Catch::Approx(0.1 * std::sin(kPi / 4)).margin(1e-12));

  Scene full = scene_at(scene, {s}, 1.0);
  CHECK(full.objects[0].position.x() == Catch::Approx(0.0).margin(1e-12));
  CHECK(full.objects[0].position.y() == Catch::Approx(0.1).margin(1e-12));
  CHECK(full.objects[0].yaw == Catch::Approx(kPi / 2).margin(1e-15));
}

TEST_CASE("dynamic minimums and script validation reject bad scripts", "[sim]") {
  PerturbationScript s;
  s.translation = Vec2(0.05, 0.0);
  s.rotation = 30.0 * kPi / 180.0;
  REQUIRE_THROWS(require_dynamic_minimums(s));
  s.translation = Vec2(0.0, 0.11);
  s.rotation = 0.1;
  REQUIRE_THROWS(require_dynamic_minimums(s));
  s.rotation = 0.5;
  require_dynamic_minimums(s);

  Scene scene;
  scene.objects.push_back(square_prism(0.03, 0.02));
  PerturbationScript bad = s;
  bad.object_id = 9;
  REQUIRE_THROWS(validate_scripts(scene, {bad}));
  bad.object_id = 0;
  bad.duration = 0.0;
  REQUIRE_THROWS(validate_scripts(scene, {bad}));
  bad.duration = 1.0;
  bad.translation = Vec2(0.5, 0.0);  // leaves even the inflated workspace
  REQUIRE_THROWS(validate_scripts(scene, {bad}));
}

TEST_CASE("the standard object set is graspable and well formed", "[sim]") {
  auto set = standard_object_set();
  REQUIRE(set.size() == 10);
  std::set<int> ids;
  for (const auto& o : set) {
    ids.insert(o.id);
    REQUIRE(o.footprint.is_ccw_convex());
    REQUIRE(o.height >= 0.015);
    auto grasps = analytic_grasps(o);
    INFO("object " << o.id);
    REQUIRE_FALSE(grasps.empty());
    for (const auto& g : grasps) REQUIRE(g.width <= 0.07);
  }
  REQUIRE(ids.size() == 10);
}

TEST_CASE("sim specs round-trip through JSON", "[sim]") {
  SimSpec spec;
  spec.scene.objects.push_back(square_prism(0.04, 0.025, Vec2(0.01, -0.02), 0.3, 0));
  PrismObject hex;
  hex.footprint = make_regular_polygon(6, 0.022);
  hex.height = 0.03;
  hex.position = Vec2(-0.06, 0.05);
  hex.yaw = 1.0;
  hex.id = 1;
  spec.scene.objects.push_back(hex);
  spec.camera = nadir_cam(0.35);
  spec.camera.depth_sigma = 0.002;
  spec.gripper.max_width = 0.065;
  PerturbationScript s;
  s.object_id = 1;
  s.start = 0.5;
  s.duration = 2.0;
  s.translation = Vec2(0.1, 0.02);
  s.rotation = 0.6;
  s.pivot = Vec2(0.01, 0.01);
  spec.scripts.push_back(s);

  nlohmann::json j = sim_spec_to_json(spec);
  REQUIRE(j["schema_version"] == kSceneSchemaVersion);
  SimSpec back = sim_spec_from_json(j);

  REQUIRE(back.scene.objects.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(back.scene.objects[i].position == spec.scene.objects[i].position);
    CHECK(back.scene.objects[i].yaw == spec.scene.objects[i].yaw);
    CHECK(back.scene.objects[i].height == spec.scene.objects[i].height);
    CHECK(back.scene.objects[i].id == spec.scene.objects[i].id);
    REQUIRE(back.scene.objects[i].footprint.size() == spec.scene.objects[i].footprint.size());
    for (int k = 0; k < spec.scene.objects[i].footprint.size(); ++k)
      CHECK(back.scene.objects[i].footprint.at(k) == spec.scene.objects[i].footprint.at(k));
  }
  CHECK(back.camera.pose.z == spec.camera.pose.z);
  CHECK(back.camera.intrinsics.fx == spec.camera.intrinsics.fx);
  CHECK(back.camera.depth_sigma == 0.002);
  CHECK(back.gripper.max_width == 0.065);
  REQUIRE(back.scripts.size() == 1);
  CHECK(back.scripts[0].translation == s.translation);
  CHECK(back.scripts[0].rotation == s.rotation);
  REQUIRE(back.scripts[0].pivot.has_value());
  CHECK(*back.scripts[0].pivot == *s.pivot);

  nlohmann::json old = j;
  old["schema_version"] = 99;
  REQUIRE_THROWS(sim_spec_from_json(old));

  nlohmann::json dup = j;
  dup["scene"]["objects"][1]["id"] = 0;
  REQUIRE_THROWS(sim_spec_from_json(dup));
}

TEST_CASE("rendered frames survive the 16-bit PGM format", "[sim]") {
  Scene scene;
  scene.objects.push_back(square_prism(0.03, 0.26));  // top closer than min_range
  SimCamera cam = nadir_cam(0.4, 80);
  cam.depth_sigma = 0.001;
  Rng rng(2);
  DepthImage img = render_depth(scene, cam, rng);
  REQUIRE(count_invalid(img) > 0);
  REQUIRE(count_invalid(img) < int(img.size()));

  auto dir = std::filesystem::temp_directory_path() / "graspkit_sim_pgm";
  std::filesystem::create_directories(dir);
  std::string path = (dir / "frame.pgm").string();
  write_depth_pgm(path, img);
  DepthImage back = read_depth_pgm(path);
  REQUIRE(back.width() == img.width());
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      if (!depth_valid(img.at(u, v))) {
        REQUIRE_FALSE(depth_valid(back.at(u, v)));
      } else {
        REQUIRE(std::abs(back.at(u, v) - img.at(u, v)) <= 5.1e-5f);
      }
    }
  }
}
