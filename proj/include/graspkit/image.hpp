// Row-major raster images, invalid-aware resampling, separable Gaussian
// filtering, and the 16-bit PGM depth interchange format.
//
// Conventions: pixel (u, v) = (column, row), origin top-left, row-major
// storage. Depth images are float meters with NaN marking invalid pixels.
// On disk depth is P5 PGM, maxval 65535, value = depth in 0.1 mm units,
// 0 = invalid.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "graspkit/common.hpp"

namespace graspkit {

template <typename T>
class Image {
 public:
  Image() : w_(0), h_(0) {}
  Image(int w, int h, T fill = T{}) : w_(w), h_(h), data_(size_t(w) * h, fill) {
    require(w >= 0 && h >= 0, "Image: negative dimensions");
  }

  int width() const { return w_; }
  int height() const { return h_; }
  bool empty() const { return data_.empty(); }
  size_t size() const { return data_.size(); }

  T& at(int u, int v) { return data_[size_t(v) * w_ + u]; }
  const T& at(int u, int v) const { return data_[size_t(v) * w_ + u]; }
  bool in_bounds(int u, int v) const { return u >= 0 && u < w_ && v >= 0 && v < h_; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  int w_, h_;
  std::vector<T> data_;
};

using DepthImage = Image<float>;

inline bool depth_valid(float d) { return std::isfinite(d); }
inline float depth_invalid() { return std::numeric_limits<float>::quiet_NaN(); }

inline int count_invalid(const DepthImage& img) {
  int n = 0;
  for (float v : img.raw())
    if (!depth_valid(v)) ++n;
  return n;
}

/// Mean over all pixels, accumulated in double. Invalid pixels are not
/// skipped; callers inpaint first.
template <typename T>
double image_mean(const Image<T>& img) {
  double s = 0.0;
  for (T v : img.raw()) s += double(v);
  return img.size() ? s / double(img.size()) : 0.0;
}

/// Bilinear sample at continuous pixel coordinates (x, y), where integer
/// coordinates hit pixel centers. NaN taps are dropped and the remaining
/// weights renormalized; all-invalid support yields NaN. Coordinates are
/// clamped to the image rectangle.
inline float bilinear_sample(const Image<float>& img, double x, double y) {
  x = clamp(x, 0.0, double(img.width() - 1));
  y = clamp(y, 0.0, double(img.height() - 1));
  int x0 = int(std::floor(x)), y0 = int(std::floor(y));
  int x1 = std::min(x0 + 1, img.width() - 1);
  int y1 = std::min(y0 + 1, img.height() - 1);
  double fx = x - x0, fy = y - y0;
  const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  const float t[4] = {img.at(x0, y0), img.at(x1, y0), img.at(x0, y1), img.at(x1, y1)};
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (depth_valid(t[i])) {
      num += w[i] * t[i];
      den += w[i];
    }
  }
  if (den < 1e-12) return depth_invalid();
  return float(num / den);
}

inline Image<float> crop(const Image<float>& src, int x0, int y0, int w, int h) {
  require(x0 >= 0 && y0 >= 0 && x0 + w <= src.width() && y0 + h <= src.height(),
          "crop: window outside image");
  Image<float> out(w, h);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) out.at(u, v) = src.at(x0 + u, y0 + v);
  return out;
}

/// Bilinear resize with pixel-center alignment; invalid pixels propagate
/// through the renormalizing sampler.
inline Image<float> resize_bilinear(const Image<float>& src, int w, int h) {
  require(w > 0 && h > 0, "resize_bilinear: bad target size");
  Image<float> out(w, h);
  double sx = double(src.width()) / w, sy = double(src.height()) / h;
  for (int v = 0; v < h; ++v) {
    double y = (v + 0.5) * sy - 0.5;
    for (int u = 0; u < w; ++u) {
      double x = (u + 0.5) * sx - 0.5;
      out.at(u, v) = bilinear_sample(src, x, y);
    }
  }
  return out;
}

/// Truncated Gaussian taps, normalized to sum 1.
inline std::vector<double> gaussian_kernel(int size, double sigma) {
  require(size >= 1 && size % 2 == 1, "gaussian_kernel: size must be odd");
  require(sigma > 0.0, "gaussian_kernel: sigma must be positive");
  std::vector<double> k(size);
  int r = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    double d = i - r;
    k[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur. Border taps falling outside the image are
/// dropped and the kernel renormalized, so total mass is preserved for
/// interior content.
inline Image<float> gaussian_blur(const Image<float>& src, int size, double sigma) {
  const std::vector<double> k = gaussian_kernel(size, sigma);
  const int r = size / 2;
  Image<float> tmp(src.width(), src.height()), out(src.width(), src.height());
  for (int v = 0; v < src.height(); ++v) {
    for (int u = 0; u < src.width(); ++u) {
      double num = 0.0, den = 0.0;
      for (int i = -r; i <= r; ++i) {
        int x = u + i;
        if (x < 0 || x >= src.width()) continue;
        num += k[i + r] * src.at(x, v);
        den += k[i + r];
      }
      tmp.at(u, v) = float(num / den);
    }
  }
  for (int v = 0; v < src.height(); ++v) {
    for (int u = 0; u < src.width(); ++u) {
      double num = 0.0, den = 0.0;
      for (int i = -r; i <= r; ++i) {
        int y = v + i;
        if (y < 0 || y >= src.height()) continue;
        num += k[i + r] * tmp.at(u, y);
        den += k[i + r];
      }
      out.at(u, v) = float(num / den);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// 16-bit PGM (P5, maxval 65535, big-endian samples).

inline void write_pgm16(const std::string& path, const Image<std::uint16_t>& img) {
  std::ofstream f(path, std::ios::binary);
  require(bool(f), "write_pgm16: cannot open " + path);
  f << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
  std::vector<unsigned char> buf(img.size() * 2);
  for (size_t i = 0; i < img.size(); ++i) {
    buf[2 * i] = static_cast<unsigned char>(img.raw()[i] >> 8);
    buf[2 * i + 1] = static_cast<unsigned char>(img.raw()[i] & 0xff);
  }
  f.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
  require(bool(f), "write_pgm16: short write to " + path);
}

inline Image<std::uint16_t> read_pgm16(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), "read_pgm16: cannot open " + path);
  std::string magic;
  f >> magic;
  require(magic == "P5", "read_pgm16: not a P5 PGM: " + path);
  auto next_token = [&f, &path]() {
    std::string tok;
    while (true) {
      f >> tok;
      require(bool(f), "read_pgm16: truncated header in " + path);
      if (tok[0] == '#') {
        std::string rest;
        std::getline(f, rest);
        continue;
      }
      return tok;
    }
  };
  int w = std::stoi(next_token());
  int h = std::stoi(next_token());
  int maxval = std::stoi(next_token());
  require(w > 0 && h > 0, "read_pgm16: bad dimensions in " + path);
  require(maxval == 65535, "read_pgm16: expected 16-bit maxval in " + path);
  f.get();  // single whitespace after maxval
  Image<std::uint16_t> img(w, h);
  std::vector<unsigned char> buf(img.size() * 2);
  f.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
  require(f.gcount() == std::streamsize(buf.size()), "read_pgm16: truncated data in " + path);
  for (size_t i = 0; i < img.size(); ++i)
    img.raw()[i] = std::uint16_t((unsigned(buf[2 * i]) << 8) | buf[2 * i + 1]);
  return img;
}

/// Depth (meters, NaN invalid) -> 0.1 mm integer units, 0 = invalid.
inline Image<std::uint16_t> depth_to_u16(const DepthImage& d) {
  Image<std::uint16_t> out(d.width(), d.height());
  for (size_t i = 0; i < d.size(); ++i) {
    float v = d.raw()[i];
    if (!depth_valid(v) || v <= 0.0f) {
      out.raw()[i] = 0;
    } else {
      long q = std::lround(double(v) * 10000.0);
      out.raw()[i] = std::uint16_t(clamp(q, 1L, 65535L));
    }
  }
  return out;
}

inline DepthImage u16_to_depth(const Image<std::uint16_t>& d) {
  DepthImage out(d.width(), d.height());
  for (size_t i = 0; i < d.size(); ++i) {
    std::uint16_t v = d.raw()[i];
    out.raw()[i] = v == 0 ? depth_invalid() : float(v) * 1e-4f;
  }
  return out;
}

inline void write_depth_pgm(const std::string& path, const DepthImage& d) {
  write_pgm16(path, depth_to_u16(d));
}

inline DepthImage read_depth_pgm(const std::string& path) {
  return u16_to_depth(read_pgm16(path));
}

/// Fills invalid pixels by iterative 4-neighbour diffusion. Holes are
/// seeded with their nearest valid value (breadth-first), then relaxed
/// by Gauss-Seidel sweeps until the largest per-sweep change drops below
/// tol or the sweep cap is reached. Valid pixels are never modified.
/// Returns the number of sweeps run (0 when there was nothing to fill).
inline int inpaint(DepthImage& img, double tol = 1e-7, int max_sweeps = 200) {
  const int w = img.width(), h = img.height();
  std::vector<int> holes;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (!depth_valid(img.at(u, v))) holes.push_back(v * w + u);
  if (holes.empty()) return 0;
  require(holes.size() < size_t(w) * h, "inpaint: image has no valid pixels");

  std::vector<double> val(size_t(w) * h);
  for (size_t i = 0; i < val.size(); ++i) val[i] = double(img.raw()[i]);

  // Multi-source BFS from the valid region; each hole inherits the value
  // of the pixel that reached it first.
  std::vector<std::uint8_t> seeded(size_t(w) * h, 0);
  std::deque<int> queue;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      if (depth_valid(img.at(u, v))) {
        seeded[size_t(v) * w + u] = 1;
        queue.push_back(v * w + u);
      }
  const int du[4] = {1, -1, 0, 0};
  const int dv[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    int idx = queue.front();
    queue.pop_front();
    int u = idx % w, v = idx / w;
    for (int k = 0; k < 4; ++k) {
      int nu = u + du[k], nv = v + dv[k];
      if (nu < 0 || nu >= w || nv < 0 || nv >= h) continue;
      int nidx = nv * w + nu;
      if (seeded[size_t(nidx)]) continue;
      seeded[size_t(nidx)] = 1;
      val[size_t(nidx)] = val[size_t(idx)];
      queue.push_back(nidx);
    }
  }

  int sweep = 0;
  while (sweep < max_sweeps) {
    ++sweep;
    double max_delta = 0.0;
    for (int idx : holes) {
      int u = idx % w, v = idx / w;
      double sum = 0.0;
      int n = 0;
      for (int k = 0; k < 4; ++k) {
        int nu = u + du[k], nv = v + dv[k];
        if (nu < 0 || nu >= w || nv < 0 || nv >= h) continue;
        sum += val[size_t(nv) * w + nu];
        ++n;
      }
      double next = sum / double(n);
      max_delta = std::max(max_delta, std::abs(next - val[size_t(idx)]));
      val[size_t(idx)] = next;
    }
    if (max_delta < tol) break;
  }
  for (int idx : holes) img.raw()[size_t(idx)] = float(val[size_t(idx)]);
  return sweep;
}

/// Subtracts the image mean so absolute camera distance drops out.
/// Requires a fully valid image; inpaint first.
inline void normalize_depth(DepthImage& img) {
  require(count_invalid(img) == 0, "normalize_depth: image has invalid pixels");
  const float mean = float(image_mean(img));
  for (float& v : img.raw()) v -= mean;
}

}  // namespace graspkit
