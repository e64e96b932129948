// Pixelwise grasp training data: rectangle annotations, target-map
// rasterization, augmentation, and the on-disk sample format.
//
// A grasp rectangle is four ordered pixel vertices; the edge v0->v1 runs
// along a jaw plate (its direction is the grasp angle), and the distance
// between the v0v1 and v3v2 edges is the jaw-to-jaw opening width.
// Targets are four planes: quality in {0,1}, cos/sin of the doubled
// angle, and width in pixels scaled by 1/150.
#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspkit/core.hpp"
#include "graspkit/geometry.hpp"
#include "graspkit/image.hpp"
#include "graspkit/tensor.hpp"

namespace graspkit {
namespace data {

using nlohmann::json;

constexpr double kWidthCapPx = 150.0;  // opening widths clamp here before 1/150 scaling

struct GraspRectangle {
  std::array<Vec2, 4> v{};
  bool positive = true;

  Vec2 center() const { return (v[0] + v[1] + v[2] + v[3]) / 4.0; }

  /// Unit direction of the jaw-line edge v0->v1; zero-length edges keep x.
  Vec2 jaw_dir() const {
    Vec2 d = v[1] - v[0];
    double n = d.norm();
    return n > 0 ? Vec2(d / n) : Vec2(1, 0);
  }

  double angle() const {
    Vec2 d = v[1] - v[0];
    return canonical_angle(std::atan2(d.y(), d.x()));
  }

  double jaw_len() const { return (v[1] - v[0]).norm(); }

  /// Jaw-to-jaw opening: extent of the quad along the closing axis.
  double width() const {
    Vec2 u = jaw_dir();
    Vec2 n(-u.y(), u.x());
    double lo = v[0].dot(n), hi = lo;
    for (int i = 1; i < 4; ++i) {
      double d = v[i].dot(n);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
    return hi - lo;
  }

  /// Rectangle with the same center/axes, keeping the full jaw-line extent
  /// but only the middle `frac` of the opening (the closing axis).
  ConvexPolygon band(double frac = 1.0 / 3.0) const {
    Vec2 c = center(), u = jaw_dir();
    Vec2 n(-u.y(), u.x());
    double hl = jaw_len() / 2.0;
    double hw = width() * frac / 2.0;
    ConvexPolygon p;
    p.v = {c - hl * u - hw * n, c + hl * u - hw * n, c + hl * u + hw * n, c - hl * u + hw * n};
    return p;
  }

  ConvexPolygon outline() const { return band(1.0); }

  GraspRectangle transformed(const Vec2& t, double theta, double scale = 1.0) const {
    double cs = std::cos(theta), sn = std::sin(theta);
    GraspRectangle out = *this;
    for (Vec2& p : out.v)
      p = Vec2(scale * (cs * p.x() - sn * p.y()), scale * (sn * p.x() + cs * p.y())) + t;
    return out;
  }
};

// ---------------------------------------------------------------------------
// Annotation parsing: text files of "x y" vertex lines, four per rectangle.

struct ParsedRects {
  std::vector<GraspRectangle> rects;
  int dropped = 0;  // rectangles discarded for non-finite vertices
};

inline ParsedRects parse_rectangles(std::istream& in, bool positive = true) {
  ParsedRects out;
  std::vector<Vec2> verts;
  std::string line;
  int line_no = 0, last_vertex_line = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const char* s = line.c_str();
    char* end = nullptr;
    double x = std::strtod(s, &end);
    if (end == s)
      throw std::invalid_argument("parse_rectangles: malformed line " + std::to_string(line_no) +
                                  ": '" + line + "'");
    const char* s2 = end;
    double y = std::strtod(s2, &end);
    if (end == s2)
      throw std::invalid_argument("parse_rectangles: malformed line " + std::to_string(line_no) +
                                  ": '" + line + "'");
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    if (*end != '\0')
      throw std::invalid_argument("parse_rectangles: malformed line " + std::to_string(line_no) +
                                  ": '" + line + "'");
    verts.emplace_back(x, y);
    last_vertex_line = line_no;
  }
  if (verts.size() % 4 != 0)
    throw std::invalid_argument("parse_rectangles: vertex count " + std::to_string(verts.size()) +
                                " not divisible by 4 at line " + std::to_string(last_vertex_line));
  for (size_t i = 0; i < verts.size(); i += 4) {
    GraspRectangle r;
    r.positive = positive;
    bool finite = true;
    for (int k = 0; k < 4; ++k) {
      r.v[size_t(k)] = verts[i + size_t(k)];
      finite = finite && std::isfinite(r.v[size_t(k)].x()) && std::isfinite(r.v[size_t(k)].y());
    }
    if (!finite) {
      ++out.dropped;
      continue;
    }
    out.rects.push_back(r);
  }
  return out;
}

inline ParsedRects load_rect_file(const std::filesystem::path& path, bool positive) {
  std::ifstream in(path);
  require(in.good(), "load_rect_file: cannot open " + path.string());
  return parse_rectangles(in, positive);
}

// ---------------------------------------------------------------------------
// ASCII point-cloud to depth conversion. Each data row carries (x y z rgb
// index); the index maps back to a pixel as (row, col) = (index / width,
// index % width) and the stored value is z. Pixels without a point stay
// invalid.

inline DepthImage pcd_to_depth(std::istream& in, int width = 640, int height = 480) {
  DepthImage img(width, height);
  img.fill(depth_invalid());
  std::string line;
  int z_col = -1, idx_col = -1, cols = 0;
  bool in_data = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!in_data) {
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "FIELDS") {
        std::string f;
        for (int i = 0; ls >> f; ++i) {
          if (f == "z") z_col = i;
          if (f == "index") idx_col = i;
          cols = i + 1;
        }
      } else if (tag == "DATA") {
        std::string mode;
        ls >> mode;
        require(mode == "ascii", "pcd_to_depth: only ascii DATA supported");
        require(z_col >= 0 && idx_col >= 0,
                "pcd_to_depth: FIELDS must declare z and index columns");
        in_data = true;
      }
      continue;
    }
    std::istringstream ls(line);
    double val = 0.0, z = 0.0;
    long index = -1;
    for (int i = 0; i < cols; ++i) {
      if (!(ls >> val))
        throw std::invalid_argument("pcd_to_depth: malformed data line " +
                                    std::to_string(line_no));
      if (i == z_col) z = val;
      if (i == idx_col) index = long(val);
    }
    if (index < 0 || index >= long(width) * height)
      throw std::invalid_argument("pcd_to_depth: point index " + std::to_string(index) +
                                  " outside image at line " + std::to_string(line_no));
    if (std::isfinite(z) && z > 0) img.at(int(index % width), int(index / width)) = float(z);
  }
  require(in_data, "pcd_to_depth: no DATA section found");
  return img;
}

// ---------------------------------------------------------------------------
// Target rasterization.

struct TargetMaps {
  Image<float> q, cos2, sin2, w;

  TargetMaps() = default;
  TargetMaps(int width, int height) : q(width, height), cos2(width, height),
                                      sin2(width, height), w(width, height) {}
  int width() const { return q.width(); }
  int height() const { return q.height(); }
};

/// Paints each positive rectangle's centre-third band into the four target
/// planes. Later rectangles overwrite earlier ones where bands overlap;
/// untouched pixels stay zero. Rectangles outside the image contribute
/// nothing.
inline TargetMaps render_targets(const std::vector<GraspRectangle>& rects, int width = 300,
                                 int height = 300) {
  TargetMaps t(width, height);
  t.q.fill(0);
  t.cos2.fill(0);
  t.sin2.fill(0);
  t.w.fill(0);
  for (const GraspRectangle& r : rects) {
    if (!r.positive) continue;
    if (!(r.jaw_len() > 0) || !(r.width() > 0)) continue;
    ConvexPolygon band = r.band();
    AngleEncoding enc = encode_angle(r.angle());
    float wv = float(std::min(r.width(), kWidthCapPx) / kWidthCapPx);
    double ulo = width, uhi = -1, vlo = height, vhi = -1;
    for (const Vec2& p : band.v) {
      ulo = std::min(ulo, p.x());
      uhi = std::max(uhi, p.x());
      vlo = std::min(vlo, p.y());
      vhi = std::max(vhi, p.y());
    }
    int u0 = std::max(0, int(std::ceil(ulo)));
    int u1 = std::min(width - 1, int(std::floor(uhi)));
    int v0 = std::max(0, int(std::ceil(vlo)));
    int v1 = std::min(height - 1, int(std::floor(vhi)));
    for (int pv = v0; pv <= v1; ++pv) {
      for (int pu = u0; pu <= u1; ++pu) {
        if (!band.contains(Vec2(pu, pv))) continue;
        t.q.at(pu, pv) = 1.0f;
        t.cos2.at(pu, pv) = float(enc.cos2);
        t.sin2.at(pu, pv) = float(enc.sin2);
        t.w.at(pu, pv) = wv;
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Samples.

/// Network-facing view: zero-mean fully valid depth plus target planes.
struct TrainingSample {
  DepthImage input;
  TargetMaps targets;
};

/// What gets written to disk: depth with its invalid pixels intact,
/// pre-rendered targets, and the annotation rectangles.
struct StoredSample {
  DepthImage depth;
  TargetMaps targets;
  std::vector<GraspRectangle> rects;
  int source_id = 0;
};

inline TrainingSample prepare_sample(const DepthImage& depth,
                                     const std::vector<GraspRectangle>& rects) {
  TrainingSample s;
  s.input = depth;
  inpaint(s.input);
  normalize_depth(s.input);
  s.targets = render_targets(rects, depth.width(), depth.height());
  return s;
}

/// Ready-to-train view of a stored sample: inpainted zero-mean input plus
/// the target planes exactly as stored (no re-rasterization).
inline TrainingSample prepare_stored(StoredSample s) {
  TrainingSample t;
  t.input = std::move(s.depth);
  inpaint(t.input);
  normalize_depth(t.input);
  t.targets = std::move(s.targets);
  return t;
}

/// Training tensors: x = [1,1,H,W] normalized depth, y = [1,4,H,W] targets.
inline void to_tensors(const TrainingSample& s, Tensor4<float>& x, Tensor4<float>& y) {
  const int h = s.input.height(), w = s.input.width();
  require(s.targets.width() == w && s.targets.height() == h, "to_tensors: size mismatch");
  x = Tensor4<float>(1, 1, h, w);
  y = Tensor4<float>(1, 4, h, w);
  std::copy(s.input.raw().begin(), s.input.raw().end(), x.v.begin());
  const Image<float>* planes[4] = {&s.targets.q, &s.targets.cos2, &s.targets.sin2, &s.targets.w};
  for (int c = 0; c < 4; ++c)
    std::copy(planes[c]->raw().begin(), planes[c]->raw().end(),
              y.v.begin() + size_t(c) * h * w);
}

// ---------------------------------------------------------------------------
// Augmentation: rotate/zoom/crop with the same transform applied to depth
// pixels and rectangle vertices.

struct AugmentParams {
  double rotation = 0.0;   // radians, about the crop centre
  double zoom = 1.0;       // scale factor applied source -> output
  Vec2 crop_center{0, 0};  // source-pixel coordinates of the output centre
};

/// Half-extents of the output frame mapped back into source pixels.
inline Vec2 crop_half_extent(int out, double rotation, double zoom) {
  double h = (out - 1) / 2.0 / zoom;
  double c = std::abs(std::cos(rotation)), s = std::abs(std::sin(rotation));
  return Vec2(h * (c + s), h * (s + c));
}

/// Draws rotation/zoom/centre uniformly, rejecting combinations whose
/// back-mapped output frame leaves the source. Returns nullopt when no
/// feasible draw is found within max_tries.
inline std::optional<AugmentParams> sample_augment_params(int src_w, int src_h, int out, Rng& rng,
                                                          int max_tries = 20,
                                                          double zoom_lo = 0.8,
                                                          double zoom_hi = 1.1) {
  std::uniform_real_distribution<double> rot(0.0, 2.0 * kPi);
  std::uniform_real_distribution<double> zoom(zoom_lo, zoom_hi);
  for (int t = 0; t < max_tries; ++t) {
    AugmentParams p;
    p.rotation = rot(rng);
    p.zoom = zoom(rng);
    Vec2 he = crop_half_extent(out, p.rotation, p.zoom);
    double x0 = he.x(), x1 = double(src_w - 1) - he.x();
    double y0 = he.y(), y1 = double(src_h - 1) - he.y();
    if (x0 > x1 || y0 > y1) continue;
    std::uniform_real_distribution<double> cx(x0, x1), cy(y0, y1);
    p.crop_center = Vec2(cx(rng), cy(rng));
    return p;
  }
  return std::nullopt;
}

/// Resamples the source through the inverse transform (output pixel ->
/// source pixel) and pushes rectangle vertices through the forward one.
/// Invalid source pixels stay invalid in the output.
inline StoredSample warp_sample(const DepthImage& src, const std::vector<GraspRectangle>& rects,
                                const AugmentParams& p, int out = 300, int source_id = 0) {
  require(p.zoom > 0, "warp_sample: non-positive zoom");
  StoredSample s;
  s.source_id = source_id;
  s.depth = DepthImage(out, out);
  const Vec2 c_out((out - 1) / 2.0, (out - 1) / 2.0);
  // Snap near-axis rotations so quarter turns permute pixels exactly.
  auto snap = [](double x) {
    if (std::abs(x) < 1e-12) return 0.0;
    if (std::abs(std::abs(x) - 1.0) < 1e-12) return std::copysign(1.0, x);
    return x;
  };
  const double cs = snap(std::cos(p.rotation)), sn = snap(std::sin(p.rotation));
  for (int v = 0; v < out; ++v) {
    for (int u = 0; u < out; ++u) {
      Vec2 d = (Vec2(u, v) - c_out) / p.zoom;
      // R(-rotation) applied to d, then offset by the crop centre.
      Vec2 srcp = p.crop_center + Vec2(cs * d.x() + sn * d.y(), -sn * d.x() + cs * d.y());
      if (srcp.x() < -0.5 || srcp.x() > src.width() - 0.5 || srcp.y() < -0.5 ||
          srcp.y() > src.height() - 0.5) {
        s.depth.at(u, v) = depth_invalid();
        continue;
      }
      s.depth.at(u, v) = bilinear_sample(src, srcp.x(), srcp.y());
    }
  }
  for (const GraspRectangle& r : rects) {
    GraspRectangle tr = r;
    for (Vec2& q : tr.v) {
      Vec2 d = q - p.crop_center;
      q = c_out + p.zoom * Vec2(cs * d.x() - sn * d.y(), sn * d.x() + cs * d.y());
    }
    s.rects.push_back(tr);
  }
  s.targets = render_targets(s.rects, out, out);
  return s;
}

inline TrainingSample augment(const DepthImage& src, const std::vector<GraspRectangle>& rects,
                              const AugmentParams& p, int out = 300) {
  StoredSample warped = warp_sample(src, rects, p, out);
  return prepare_sample(warped.depth, warped.rects);
}

// ---------------------------------------------------------------------------
// Source-level split.

struct SplitIds {
  std::vector<int> train, eval;
};

/// Shuffles source indices with the given seed and cuts at
/// floor(fraction * n). Augments share their source's index, so a source
/// never straddles the split.
inline SplitIds split_sources(int n_sources, double fraction, std::uint64_t seed) {
  require(n_sources >= 1, "split_sources: need at least one source");
  require(fraction >= 0.0 && fraction <= 1.0, "split_sources: fraction outside [0,1]");
  auto ids = std::vector<int>(size_t(n_sources));
  for (int i = 0; i < n_sources; ++i) ids[size_t(i)] = i;
  Rng rng(seed);
  for (size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[size_t(rng() % i)]);
  size_t cut = size_t(std::floor(fraction * double(n_sources)));
  SplitIds s;
  s.train.assign(ids.begin(), ids.begin() + long(cut));
  s.eval.assign(ids.begin() + long(cut), ids.end());
  return s;
}

// ---------------------------------------------------------------------------
// On-disk format. Each sample is a directory holding five 16-bit PGMs plus
// rects.json; the dataset root holds one directory per split and a
// manifest.json. Signed planes (cos/sin) store round((v+1)/2*65535);
// unsigned planes (q/w) store round(v*65535); input.pgm uses the shared
// depth codec (0.1 mm units, 0 = invalid).

inline std::uint16_t encode_snorm16(float v) {
  double c = clamp(double(v), -1.0, 1.0);
  return std::uint16_t(std::lround((c + 1.0) / 2.0 * 65535.0));
}
inline float decode_snorm16(std::uint16_t u) { return float(u / 65535.0 * 2.0 - 1.0); }
inline std::uint16_t encode_unorm16(float v) {
  return std::uint16_t(std::lround(clamp(double(v), 0.0, 1.0) * 65535.0));
}
inline float decode_unorm16(std::uint16_t u) { return float(u / 65535.0); }

namespace detail {

inline void write_plane(const std::filesystem::path& path, const Image<float>& img, bool snorm) {
  Image<std::uint16_t> enc(img.width(), img.height());
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u)
      enc.at(u, v) = snorm ? encode_snorm16(img.at(u, v)) : encode_unorm16(img.at(u, v));
  write_pgm16(path.string(), enc);
}

inline Image<float> read_plane(const std::filesystem::path& path, bool snorm) {
  Image<std::uint16_t> enc = read_pgm16(path.string());
  Image<float> img(enc.width(), enc.height());
  for (int v = 0; v < enc.height(); ++v)
    for (int u = 0; u < enc.width(); ++u)
      img.at(u, v) = snorm ? decode_snorm16(enc.at(u, v)) : decode_unorm16(enc.at(u, v));
  return img;
}

}  // namespace detail

inline json rects_to_json(const std::vector<GraspRectangle>& rects) {
  json arr = json::array();
  for (const GraspRectangle& r : rects) {
    json jr;
    jr["positive"] = r.positive;
    jr["v"] = json::array();
    for (const Vec2& p : r.v) jr["v"].push_back({p.x(), p.y()});
    arr.push_back(jr);
  }
  return arr;
}

inline std::vector<GraspRectangle> rects_from_json(const json& arr) {
  std::vector<GraspRectangle> rects;
  for (const json& jr : arr) {
    GraspRectangle r;
    r.positive = jr.at("positive").get<bool>();
    const json& vs = jr.at("v");
    require(vs.size() == 4, "rects_from_json: rectangle needs 4 vertices");
    for (size_t k = 0; k < 4; ++k)
      r.v[k] = Vec2(vs[k][0].get<double>(), vs[k][1].get<double>());
    rects.push_back(r);
  }
  return rects;
}

inline void write_sample(const std::filesystem::path& dir, const StoredSample& s) {
  std::filesystem::create_directories(dir);
  write_depth_pgm((dir / "input.pgm").string(), s.depth);
  detail::write_plane(dir / "q.pgm", s.targets.q, false);
  detail::write_plane(dir / "cos.pgm", s.targets.cos2, true);
  detail::write_plane(dir / "sin.pgm", s.targets.sin2, true);
  detail::write_plane(dir / "w.pgm", s.targets.w, false);
  json meta;
  meta["source_id"] = s.source_id;
  meta["rects"] = rects_to_json(s.rects);
  std::ofstream out(dir / "rects.json");
  require(out.good(), "write_sample: cannot write " + (dir / "rects.json").string());
  out << meta.dump(2) << "\n";
}

inline StoredSample read_sample(const std::filesystem::path& dir) {
  StoredSample s;
  s.depth = read_depth_pgm((dir / "input.pgm").string());
  s.targets.q = detail::read_plane(dir / "q.pgm", false);
  s.targets.cos2 = detail::read_plane(dir / "cos.pgm", true);
  s.targets.sin2 = detail::read_plane(dir / "sin.pgm", true);
  s.targets.w = detail::read_plane(dir / "w.pgm", false);
  std::ifstream in(dir / "rects.json");
  require(in.good(), "read_sample: cannot open " + (dir / "rects.json").string());
  json meta = json::parse(in);
  s.source_id = meta.at("source_id").get<int>();
  s.rects = rects_from_json(meta.at("rects"));
  return s;
}

inline std::string sample_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%06d", index);
  return buf;
}

/// Writes samples incrementally under root/<split>/sample_NNNNNN and a
/// manifest recording counts, seed, and build parameters on finalize.
class DatasetWriter {
 public:
  explicit DatasetWriter(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  std::filesystem::path add(const std::string& split, const StoredSample& s) {
    int idx = counts_[split]++;
    std::filesystem::path dir = root_ / split / sample_dir_name(idx);
    write_sample(dir, s);
    return dir;
  }

  void finalize(std::uint64_t seed, const json& params) {
    json m;
    m["format_version"] = 1;
    m["seed"] = seed;
    m["params"] = params;
    json splits = json::object();
    for (const auto& [name, count] : counts_) splits[name] = count;
    m["splits"] = splits;
    std::ofstream out(root_ / "manifest.json");
    require(out.good(), "DatasetWriter: cannot write manifest");
    out << m.dump(2) << "\n";
  }

 private:
  std::filesystem::path root_;
  std::map<std::string, int> counts_;
};

inline json read_manifest(const std::filesystem::path& root) {
  std::ifstream in(root / "manifest.json");
  require(in.good(), "read_manifest: cannot open " + (root / "manifest.json").string());
  return json::parse(in);
}

inline std::vector<std::filesystem::path> list_samples(const std::filesystem::path& root,
                                                       const std::string& split) {
  json m = read_manifest(root);
  int count = m.at("splits").value(split, 0);
  std::vector<std::filesystem::path> dirs;
  for (int i = 0; i < count; ++i) {
    std::filesystem::path dir = root / split / sample_dir_name(i);
    require(std::filesystem::exists(dir / "input.pgm"),
            "list_samples: missing sample " + dir.string());
    dirs.push_back(dir);
  }
  return dirs;
}

// ---------------------------------------------------------------------------
// Validation: every stored sample must load and satisfy the training-sample
// invariants after preparation.

struct ValidationReport {
  int samples = 0;
  int rects = 0;
};

inline ValidationReport validate_dataset(const std::filesystem::path& root) {
  json m = read_manifest(root);
  ValidationReport rep;
  for (const auto& [split, count] : m.at("splits").items()) {
    for (const std::filesystem::path& dir : list_samples(root, split)) {
      StoredSample s = read_sample(dir);
      const int w = s.depth.width(), h = s.depth.height();
      require(s.targets.width() == w && s.targets.height() == h,
              "validate_dataset: plane size mismatch in " + dir.string());
      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          float q = s.targets.q.at(u, v);
          require(q == 0.0f || q == 1.0f, "validate_dataset: Q not binary in " + dir.string());
          float c2 = s.targets.cos2.at(u, v), s2 = s.targets.sin2.at(u, v);
          require(c2 >= -1.0f && c2 <= 1.0f && s2 >= -1.0f && s2 <= 1.0f,
                  "validate_dataset: angle channel outside [-1,1] in " + dir.string());
          if (q == 1.0f) {
            double norm = double(c2) * c2 + double(s2) * s2;
            require(std::abs(norm - 1.0) < 1e-3,
                    "validate_dataset: angle channels off the unit circle in " + dir.string());
          }
          float wv = s.targets.w.at(u, v);
          require(wv >= 0.0f && wv <= 1.0f, "validate_dataset: W outside [0,1] in " + dir.string());
        }
      }
      TrainingSample t = prepare_sample(s.depth, s.rects);
      require(std::abs(image_mean(t.input)) < 1e-6,
              "validate_dataset: normalized input mean exceeds 1e-6 in " + dir.string());
      require(count_invalid(t.input) == 0,
              "validate_dataset: invalid pixels survived preparation in " + dir.string());
      rep.rects += int(s.rects.size());
      ++rep.samples;
    }
    (void)count;
  }
  return rep;
}

}  // namespace data
}  // namespace graspkit
