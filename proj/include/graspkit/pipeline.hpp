// Real-time detection path: preprocess a raw depth frame, run the network,
// postprocess the four heads into a grasp map, pick and track a grasp, and
// map it into world coordinates.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "graspkit/core.hpp"
#include "graspkit/dataset.hpp"
#include "graspkit/image.hpp"
#include "graspkit/network.hpp"

namespace graspkit {
namespace pipeline {

struct PipelineConfig {
  int input_size = 300;
  int gauss_size = 11;        // quality-map smoothing kernel, odd
  double gauss_sigma = 2.0;   // px
  int maxima_radius = 10;     // strict-maximum neighbourhood, Chebyshev px
  int max_candidates = 3;
  double width_scale = data::kWidthCapPx;  // map widths decode to [0, this] px
};

// ---------------------------------------------------------------------------
// Preprocessing: centered square crop, rescale, inpaint, mean-subtract.

/// Geometry of the crop+rescale step. Pixel-center convention throughout:
/// output pixel u covers raw coordinate x0 + (u + 0.5) * scale - 0.5.
struct CropInfo {
  int x0 = 0, y0 = 0;  // top-left of the centered square crop, raw px
  int crop = 0;        // square side, raw px
  int out = 0;         // network input side

  double scale() const { return double(crop) / out; }

  Vec2 to_raw(double u, double v) const {
    double s = scale();
    return Vec2(x0 + (u + 0.5) * s - 0.5, y0 + (v + 0.5) * s - 0.5);
  }

  Vec2 to_out(double x, double y) const {
    double s = scale();
    return Vec2((x - x0 + 0.5) / s - 0.5, (y - y0 + 0.5) / s - 0.5);
  }

  /// Intrinsics of the cropped+rescaled image, exact under to_out.
  CameraIntrinsics effective(const CameraIntrinsics& k) const {
    double s = scale();
    return crop_scale_intrinsics(k, x0 - 0.5 + 0.5 * s, y0 - 0.5 + 0.5 * s, 1.0 / s);
  }
};

struct Preprocessed {
  Tensor4<float> input;  // [1, 1, size, size], zero-mean
  DepthImage metric;     // inpainted depth before mean subtraction, meters
  CropInfo crop;
};

inline Preprocessed preprocess(const DepthImage& raw, const PipelineConfig& cfg = {}) {
  require(!raw.empty(), "preprocess: empty frame");
  const int side = std::min(raw.width(), raw.height());
  Preprocessed p;
  p.crop.x0 = (raw.width() - side) / 2;
  p.crop.y0 = (raw.height() - side) / 2;
  p.crop.crop = side;
  p.crop.out = cfg.input_size;

  DepthImage sq = crop(raw, p.crop.x0, p.crop.y0, side, side);
  DepthImage small =
      side == cfg.input_size ? std::move(sq) : resize_bilinear(sq, cfg.input_size, cfg.input_size);
  inpaint(small);  // rejects a crop with no valid pixels
  p.metric = small;
  normalize_depth(small);
  p.input = Tensor4<float>(1, 1, cfg.input_size, cfg.input_size);
  std::copy(small.raw().begin(), small.raw().end(), p.input.v.begin());
  return p;
}

// ---------------------------------------------------------------------------
// Postprocessing: raw heads -> grasp map.

/// Q is clamped to [0,1] then Gaussian-smoothed; the angle channels decode
/// to a canonical angle (0 where both are exactly zero); W rescales to
/// pixels. Never throws on map contents.
inline GraspMap postprocess(const Tensor4<float>& heads, const PipelineConfig& cfg = {}) {
  require(heads.n == 1 && heads.c == 4, "postprocess: expected [1, 4, H, W] heads");
  const int h = heads.h, w = heads.w;
  GraspMap m;
  Image<float> qc(w, h);
  m.phi = Image<float>(w, h);
  m.w = Image<float>(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      qc.at(x, y) = clamp(heads.at(0, 0, y, x), 0.0f, 1.0f);
      float c2 = heads.at(0, 1, y, x), s2 = heads.at(0, 2, y, x);
      m.phi.at(x, y) =
          (s2 == 0.0f && c2 == 0.0f) ? 0.0f : float(decode_angle(double(s2), double(c2)));
      m.w.at(x, y) = float(clamp(double(heads.at(0, 3, y, x)), 0.0, 1.0) * cfg.width_scale);
    }
  }
  m.q = gaussian_blur(qc, cfg.gauss_size, cfg.gauss_sigma);
  return m;
}

// ---------------------------------------------------------------------------
// Candidate extraction and tracking.

struct QPixel {
  int u = 0, v = 0;
  float q = 0.0f;
};

/// Pixels that are strict maxima of q over a (2r+1)^2 Chebyshev window,
/// sorted by descending q (ties row-major), truncated to k. A plateau has
/// no strict maximum, so a constant map returns nothing.
inline std::vector<QPixel> local_maxima(const Image<float>& q, int k = 3, int radius = 10) {
  require(radius >= 1, "local_maxima: radius must be >= 1");
  const int w = q.width(), h = q.height();
  if (k <= 0 || w == 0 || h == 0) return {};

  // Separable sliding window max; radius is small enough for brute taps.
  Image<float> rowmax(w, h), winmax(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float m = -std::numeric_limits<float>::infinity();
      for (int i = std::max(0, x - radius); i <= std::min(w - 1, x + radius); ++i)
        m = std::max(m, q.at(i, y));
      rowmax.at(x, y) = m;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float m = -std::numeric_limits<float>::infinity();
      for (int j = std::max(0, y - radius); j <= std::min(h - 1, y + radius); ++j)
        m = std::max(m, rowmax.at(x, j));
      winmax.at(x, y) = m;
    }
  }

  std::vector<QPixel> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float qv = q.at(x, y);
      if (qv < winmax.at(x, y)) continue;
      // qv equals the window max; strictness fails iff any other pixel ties.
      bool strict = true;
      for (int j = std::max(0, y - radius); strict && j <= std::min(h - 1, y + radius); ++j)
        for (int i = std::max(0, x - radius); i <= std::min(w - 1, x + radius); ++i)
          if ((i != x || j != y) && q.at(i, j) == qv) {
            strict = false;
            break;
          }
      if (strict) out.push_back({x, y, qv});
    }
  }
  std::sort(out.begin(), out.end(), [](const QPixel& a, const QPixel& b) {
    if (a.q != b.q) return a.q > b.q;
    return a.v != b.v ? a.v < b.v : a.u < b.u;
  });
  if (int(out.size()) > k) out.resize(size_t(k));
  return out;
}

/// Reads a full image grasp off the map at one pixel.
inline ImageGrasp grasp_at(const GraspMap& m, int u, int v) {
  m.validate();
  require(u >= 0 && u < m.q.width() && v >= 0 && v < m.q.height(), "grasp_at: pixel out of bounds");
  ImageGrasp g;
  g.u = u;
  g.v = v;
  g.angle = m.phi.at(u, v);
  g.width_px = m.w.at(u, v);
  g.quality = m.q.at(u, v);
  return g;
}

/// Cross-frame selection state. The frozen flag and target are set by the
/// executive layer's range rule; detect only honours them.
struct PipelineState {
  std::optional<ImageGrasp> previous;  // tracking anchor, image space
  bool frozen = false;
  std::optional<WorldGrasp> frozen_target;
  std::optional<CropInfo> last_crop;

  void freeze(const WorldGrasp& target) {
    frozen = true;
    frozen_target = target;
  }
  void unfreeze() {
    frozen = false;
    frozen_target.reset();
  }
};

/// First call picks the highest-quality candidate; later calls pick the
/// candidate nearest (pixel Euclidean) to the previous selection so the
/// target does not hop between rival maxima. Equidistant ties go to the
/// higher quality. With no candidates the previous selection is kept.
inline ImageGrasp track(const std::vector<ImageGrasp>& candidates, PipelineState& state) {
  if (candidates.empty()) {
    require(state.previous.has_value(), "track: no candidates and no previous grasp");
    return *state.previous;
  }
  const ImageGrasp* pick = nullptr;
  if (!state.previous.has_value()) {
    for (const ImageGrasp& c : candidates)
      if (pick == nullptr || c.quality > pick->quality) pick = &c;
  } else {
    double best_d = std::numeric_limits<double>::infinity();
    for (const ImageGrasp& c : candidates) {
      double du = c.u - state.previous->u, dv = c.v - state.previous->v;
      double d = du * du + dv * dv;
      if (pick == nullptr || d < best_d || (d == best_d && c.quality > pick->quality)) {
        pick = &c;
        best_d = d;
      }
    }
  }
  state.previous = *pick;
  return *pick;
}

// ---------------------------------------------------------------------------
// End-to-end detection.

/// Trained network plus its reusable forward workspace.
class Detector {
 public:
  Detector(const net::NetworkConfig& cfg, std::vector<float> params)
      : cfg_(cfg), layout_(net::compute_layout(cfg)), params_(std::move(params)) {
    require(params_.size() == layout_.total_params, "Detector: parameter count mismatch");
  }

  static Detector from_checkpoint(const std::string& path) {
    net::NetworkConfig cfg = net::reference_network_config();
    return Detector(cfg, net::load_checkpoint(path, cfg));
  }

  const Tensor4<float>& run(const Tensor4<float>& x) {
    return net::forward(cfg_, layout_, params_, x, ws_);
  }

  const net::NetworkConfig& config() const { return cfg_; }
  const std::vector<float>& params() const { return params_; }

 private:
  net::NetworkConfig cfg_;
  net::NetLayout layout_;
  std::vector<float> params_;
  net::Workspace<float> ws_;
};

struct StageTimings {
  double preprocess_ms = 0.0;
  double inference_ms = 0.0;
  double postprocess_ms = 0.0;

  double total_ms() const { return preprocess_ms + inference_ms + postprocess_ms; }
};

struct DetectionResult {
  GraspMap map;
  ImageGrasp selected_image;
  WorldGrasp selected_world;
  StageTimings timing;
};

/// Full chain on one frame. A frozen state short-circuits to the stored
/// target so the output no longer moves with the camera. The map's angle
/// channel is the annotation edge direction (the jaw plate line); the
/// gripper closes perpendicular to it, so the world grasp's yaw is the
/// image angle rotated a quarter turn before leaving image space.
inline DetectionResult detect(Detector& det, const DepthImage& raw, const CameraIntrinsics& k,
                              const Pose6D& cam_pose, PipelineState& state,
                              const PipelineConfig& cfg = {}) {
  DetectionResult r;
  if (state.frozen) {
    require(state.frozen_target.has_value(), "detect: frozen state without a target");
    r.selected_world = *state.frozen_target;
    if (state.previous.has_value()) r.selected_image = *state.previous;
    return r;
  }

  using clock = std::chrono::steady_clock;
  auto ms = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  };

  auto t0 = clock::now();
  Preprocessed pre = preprocess(raw, cfg);
  auto t1 = clock::now();
  const Tensor4<float>& heads = det.run(pre.input);
  auto t2 = clock::now();

  r.map = postprocess(heads, cfg);
  std::vector<QPixel> peaks = local_maxima(r.map.q, cfg.max_candidates, cfg.maxima_radius);
  std::vector<ImageGrasp> candidates;
  candidates.reserve(peaks.size());
  for (const QPixel& p : peaks) candidates.push_back(grasp_at(r.map, p.u, p.v));
  r.selected_image = track(candidates, state);

  ImageGrasp exec = r.selected_image;
  exec.angle = canonical_angle(exec.angle + kPi / 2.0);  // plate line -> closing axis
  double depth = pre.metric.at(int(exec.u), int(exec.v));
  CameraGrasp cam_g = image_to_camera(exec, depth, pre.crop.effective(k));
  r.selected_world = camera_to_world(cam_g, cam_pose);
  auto t3 = clock::now();

  r.timing.preprocess_ms = ms(t0, t1);
  r.timing.inference_ms = ms(t1, t2);
  r.timing.postprocess_ms = ms(t2, t3);
  state.last_crop = pre.crop;
  return r;
}

// ---------------------------------------------------------------------------
// Detection metric: rectangle agreement on the pixel lattice.

/// Rectangle a predicted grasp claims: its opening along the closing axis
/// and a fixed 2:1 opening:plate aspect, matching annotation geometry.
inline ConvexPolygon prediction_outline(const ImageGrasp& g) {
  Vec2 c(g.u, g.v);
  Vec2 p(std::cos(g.angle), std::sin(g.angle));  // jaw plate line
  Vec2 n(-p.y(), p.x());                         // closing axis
  double hw = g.width_px / 2.0, hl = g.width_px / 4.0;
  ConvexPolygon poly;
  poly.v = {c - hl * p - hw * n, c + hl * p - hw * n, c + hl * p + hw * n, c - hl * p + hw * n};
  return poly;
}

namespace detail {

/// Integer lattice points inside a polygon, counted over the given bbox.
inline long long raster_count(const ConvexPolygon& poly, int x0, int x1, int y0, int y1) {
  long long n = 0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (poly.contains(Vec2(x, y))) ++n;
  return n;
}

}  // namespace detail

/// Rasterized intersection-over-union of two convex quads on the integer
/// pixel lattice (no clipping to any image frame).
inline double raster_iou(const ConvexPolygon& a, const ConvexPolygon& b) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const ConvexPolygon* p : {&a, &b}) {
    for (const Vec2& q : p->v) {
      xlo = std::min(xlo, q.x());
      xhi = std::max(xhi, q.x());
      ylo = std::min(ylo, q.y());
      yhi = std::max(yhi, q.y());
    }
  }
  const int x0 = int(std::floor(xlo)), x1 = int(std::ceil(xhi));
  const int y0 = int(std::floor(ylo)), y1 = int(std::ceil(yhi));
  long long inter = 0, uni = 0;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      bool ia = a.contains(Vec2(x, y)), ib = b.contains(Vec2(x, y));
      inter += ia && ib;
      uni += ia || ib;
    }
  }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

/// A prediction counts as a detection when some positive annotation agrees
/// with it: rasterized IoU at or above the threshold and plate-line angle
/// within the tolerance (modulo the antipodal symmetry).
inline bool detection_metric(const ImageGrasp& pred,
                             const std::vector<data::GraspRectangle>& truth,
                             double min_iou = 0.25, double max_angle = 30.0 * kPi / 180.0) {
  require(!truth.empty(), "detection_metric: no ground-truth rectangles");
  ConvexPolygon pp = prediction_outline(pred);
  for (const data::GraspRectangle& r : truth) {
    if (!r.positive) continue;
    double da = std::abs(canonical_angle(pred.angle) - canonical_angle(r.angle()));
    da = std::min(da, kPi - da);
    if (da > max_angle) continue;
    if (raster_iou(pp, r.outline()) >= min_iou) return true;
  }
  return false;
}

}  // namespace pipeline
}  // namespace graspkit
