// Synthetic training data: rendered depth frames paired with grasp
// rectangles projected from the simulator's analytic ground truth.
//
// The grasp rectangle convention matches the annotation format: the
// v0->v1 edge runs along the jaw plates, the width across it is the
// jaw-to-jaw opening. A world grasp's yaw is its closing axis, so the
// plate direction is yaw + pi/2 and rectangles are built 2:1
// (plate length = opening / 2) around the grasp centre on the object's
// top face.
#pragma once

#include <string>
#include <vector>

#include "graspkit/dataset.hpp"
#include "graspkit/sim.hpp"

namespace graspkit {
namespace data {

/// Project a world grasp into an image-space grasp rectangle through the
/// camera. All four corners are placed on the grasp's z plane and
/// projected individually, so the rectangle is exact under nadir views
/// and a faithful perspective image otherwise.
inline GraspRectangle project_grasp_rect(const WorldGrasp& g, const Pose6D& cam_pose,
                                         const CameraIntrinsics& k) {
  const double plate_len = g.width / 2.0;
  const Vec2 u(std::cos(g.yaw), std::sin(g.yaw));      // closing axis
  const Vec2 p(-std::sin(g.yaw), std::cos(g.yaw));     // plate direction
  const Vec2 c(g.position.x(), g.position.y());
  const Vec2 corners[4] = {
      c - (plate_len / 2.0) * p - (g.width / 2.0) * u,
      c + (plate_len / 2.0) * p - (g.width / 2.0) * u,
      c + (plate_len / 2.0) * p + (g.width / 2.0) * u,
      c - (plate_len / 2.0) * p + (g.width / 2.0) * u,
  };
  GraspRectangle r;
  r.positive = true;
  for (int i = 0; i < 4; ++i) {
    PixelDepth px = project_point(Eigen::Vector3d(corners[i].x(), corners[i].y(), g.position.z()),
                                  cam_pose, k);
    r.v[size_t(i)] = Vec2(px.u, px.v);
  }
  return r;
}

/// Every analytic grasp of every scene object, projected to pixel
/// rectangles. Throws when the scene offers no grasp at all.
inline std::vector<GraspRectangle> scene_grasp_rects(const sim::Scene& scene,
                                                     const sim::SimCamera& cam,
                                                     const sim::GripperSpec& gripper) {
  std::vector<GraspRectangle> rects;
  for (const auto& obj : scene.objects)
    for (const auto& g : sim::analytic_grasps(obj, gripper))
      rects.push_back(project_grasp_rect(g, cam.pose, cam.intrinsics));
  require(!rects.empty(), "scene_grasp_rects: no graspable object in scene");
  return rects;
}

/// Rendered frame plus projected ground-truth rectangles, in the on-disk
/// sample layout.
inline StoredSample synth_sample(const sim::Scene& scene, const sim::SimCamera& cam,
                                 const sim::GripperSpec& gripper, Rng& rng, int source_id = 0) {
  StoredSample s;
  s.rects = scene_grasp_rects(scene, cam, gripper);  // fail before rendering
  s.depth = sim::render_depth(scene, cam, rng);
  s.targets = render_targets(s.rects, s.depth.width(), s.depth.height());
  s.source_id = source_id;
  return s;
}

/// Ready-to-train sample: inpainted zero-mean depth and rasterized
/// target maps.
inline TrainingSample generate_synthetic(const sim::Scene& scene, const sim::SimCamera& cam,
                                         const sim::GripperSpec& gripper, Rng& rng) {
  StoredSample s = synth_sample(scene, cam, gripper, rng);
  return prepare_sample(s.depth, s.rects);
}

struct SynthConfig {
  int scenes = 2500;
  int min_objects = 1;
  int max_objects = 3;
  double camera_height = 0.35;  // nadir view, m
  double depth_sigma = 0.001;
  double train_fraction = 0.8;
  uint64_t seed = 1;
};

/// One singulated scene drawn from the standard object set: object count
/// uniform in [min_objects, max_objects], distinct prototypes, uniform
/// poses with the singulated separation rule.
inline sim::Scene sample_synth_scene(const SynthConfig& cfg, Rng& rng) {
  require(cfg.min_objects >= 1 && cfg.max_objects >= cfg.min_objects,
          "sample_synth_scene: bad object count range");
  auto set = sim::standard_object_set();
  require(cfg.max_objects <= int(set.size()), "sample_synth_scene: object count exceeds set");
  int k = cfg.min_objects + int(rng() % uint64_t(cfg.max_objects - cfg.min_objects + 1));
  // Partial shuffle picks k distinct prototypes.
  for (int i = 0; i < k; ++i) {
    size_t j = size_t(i) + size_t(rng() % uint64_t(set.size() - size_t(i)));
    std::swap(set[size_t(i)], set[j]);
  }
  set.resize(size_t(k));
  return sim::spawn_scene(set, rng, false, 2000);
}

inline sim::SimCamera synth_camera(const SynthConfig& cfg) {
  sim::SimCamera cam;
  cam.pose = nadir_camera_pose(0.0, 0.0, cfg.camera_height);
  cam.depth_sigma = cfg.depth_sigma;
  return cam;
}

/// Generate the full on-disk dataset: one sample per scene, scene index
/// as source id, sources split train/eval at train_fraction. Returns the
/// manifest. Every randomness source derives from cfg.seed.
inline json generate_synthetic_dataset(const std::string& root, const SynthConfig& cfg,
                                       const sim::GripperSpec& gripper = {}) {
  require(cfg.scenes > 0, "generate_synthetic_dataset: scenes must be positive");
  SplitIds split = split_sources(cfg.scenes, cfg.train_fraction, cfg.seed);
  std::vector<bool> in_train(size_t(cfg.scenes), false);
  for (int id : split.train) in_train[size_t(id)] = true;

  sim::SimCamera cam = synth_camera(cfg);
  Rng master(cfg.seed);
  DatasetWriter writer(root);
  for (int i = 0; i < cfg.scenes; ++i) {
    Rng scene_rng(master());
    sim::Scene scene = sample_synth_scene(cfg, scene_rng);
    StoredSample s = synth_sample(scene, cam, gripper, scene_rng, i);
    writer.add(in_train[size_t(i)] ? "train" : "eval", s);
  }
  json params = {{"scenes", cfg.scenes},
                 {"min_objects", cfg.min_objects},
                 {"max_objects", cfg.max_objects},
                 {"camera_height", cfg.camera_height},
                 {"depth_sigma", cfg.depth_sigma},
                 {"train_fraction", cfg.train_fraction}};
  writer.finalize(cfg.seed, params);
  return read_manifest(root);
}

}  // namespace data
}  // namespace graspkit
