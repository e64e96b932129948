// Fixed-chain fully-convolutional network: config, parameter layout,
// forward/backward, the four-map regression loss, and checkpoint I/O.
//
// The reference topology regresses four 300x300 maps (quality, the two
// angle-encoding channels, and opening width) from one 300x300 depth
// channel through a 3-stage conv encoder and mirrored transposed-conv
// decoder, with a final 2x2 four-channel conv acting as the output heads.
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "graspkit/layers.hpp"

namespace graspkit {
namespace net {

enum class LayerKind { kConv, kTConv, kRelu };

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  int out_ch = 0;
  int k = 1;
  int stride = 1;
  int pad = 0;        // conv: leading pad; tconv: symmetric pad
  int pad_after = 0;  // conv only; trailing pad
  int out_pad = 0;    // tconv only
};

inline LayerSpec conv_layer(int out_ch, int k, int stride, int pad, int pad_after = -1) {
  return {LayerKind::kConv, out_ch, k, stride, pad, pad_after < 0 ? pad : pad_after, 0};
}
inline LayerSpec tconv_layer(int out_ch, int k, int stride, int pad, int out_pad) {
  return {LayerKind::kTConv, out_ch, k, stride, pad, 0, out_pad};
}
inline LayerSpec relu_layer() { return {LayerKind::kRelu, 0, 1, 1, 0, 0, 0}; }

struct NetworkConfig {
  int in_ch = 1;
  int in_h = 300;
  int in_w = 300;
  std::vector<LayerSpec> layers;
  std::array<double, 4> loss_weights{1.0, 1.0, 1.0, 1.0};
};

/// The pinned production topology; 62,420 parameters.
inline NetworkConfig reference_network_config() {
  NetworkConfig c;
  c.layers = {
      conv_layer(32, 9, 3, 3), relu_layer(),
      conv_layer(16, 5, 2, 2), relu_layer(),
      conv_layer(8, 3, 2, 1),  relu_layer(),
      tconv_layer(8, 3, 2, 1, 1),  relu_layer(),
      tconv_layer(16, 5, 2, 2, 1), relu_layer(),
      tconv_layer(32, 9, 3, 3, 0), relu_layer(),
      conv_layer(4, 2, 1, 0, 1),
  };
  return c;
}

struct LayerIO {
  int in_ch = 0, in_h = 0, in_w = 0;
  int out_ch = 0, out_h = 0, out_w = 0;
  size_t w_off = 0, w_count = 0, b_off = 0, b_count = 0;
};

struct NetLayout {
  std::vector<LayerIO> io;
  size_t total_params = 0;
};

inline NetLayout compute_layout(const NetworkConfig& cfg) {
  NetLayout l;
  int c = cfg.in_ch, h = cfg.in_h, w = cfg.in_w;
  size_t off = 0;
  for (const LayerSpec& ls : cfg.layers) {
    LayerIO io;
    io.in_ch = c;
    io.in_h = h;
    io.in_w = w;
    switch (ls.kind) {
      case LayerKind::kConv: {
        ConvGeom g{c, ls.out_ch, ls.k, ls.stride, ls.pad, ls.pad_after};
        io.out_ch = ls.out_ch;
        io.out_h = g.out_dim(h);
        io.out_w = g.out_dim(w);
        io.w_off = off;
        io.w_count = g.weight_count();
        io.b_off = off + io.w_count;
        io.b_count = size_t(ls.out_ch);
        off += g.param_count();
        break;
      }
      case LayerKind::kTConv: {
        TConvGeom g{c, ls.out_ch, ls.k, ls.stride, ls.pad, ls.out_pad};
        io.out_ch = ls.out_ch;
        io.out_h = g.out_dim(h);
        io.out_w = g.out_dim(w);
        io.w_off = off;
        io.w_count = g.weight_count();
        io.b_off = off + io.w_count;
        io.b_count = size_t(ls.out_ch);
        off += g.param_count();
        break;
      }
      case LayerKind::kRelu:
        io.out_ch = c;
        io.out_h = h;
        io.out_w = w;
        break;
    }
    c = io.out_ch;
    h = io.out_h;
    w = io.out_w;
    l.io.push_back(io);
  }
  l.total_params = off;
  return l;
}

inline size_t param_count(const NetworkConfig& cfg) { return compute_layout(cfg).total_params; }

/// Uniform fan-in initialization: W, b ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename S>
std::vector<S> init_params(const NetworkConfig& cfg, std::uint64_t seed) {
  NetLayout l = compute_layout(cfg);
  std::vector<S> p(l.total_params);
  Rng rng(seed);
  for (size_t i = 0; i < cfg.layers.size(); ++i) {
    const LayerSpec& ls = cfg.layers[i];
    if (ls.kind == LayerKind::kRelu) continue;
    const LayerIO& io = l.io[i];
    double fan_in = double(io.in_ch) * ls.k * ls.k;
    double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (size_t j = 0; j < io.w_count + io.b_count; ++j) p[io.w_off + j] = S(u(rng));
  }
  return p;
}

template <typename S>
struct Workspace {
  std::vector<Tensor4<S>> act;   // act[i] = output of layer i
  std::vector<Tensor4<S>> grad;  // gradient buffers, same shapes
  ColScratch<S> scratch;
};

/// Runs the chain; returns the final activation. With check_finite set,
/// any non-finite activation raises (debug aid for diverging training).
template <typename S>
const Tensor4<S>& forward(const NetworkConfig& cfg, const NetLayout& l, const std::vector<S>& params,
                          const Tensor4<S>& input, Workspace<S>& ws, bool check_finite = false) {
  require(input.c == cfg.in_ch && input.h == cfg.in_h && input.w == cfg.in_w,
          "forward: input shape does not match config");
  ws.act.resize(cfg.layers.size());
  const Tensor4<S>* x = &input;
  for (size_t i = 0; i < cfg.layers.size(); ++i) {
    const LayerSpec& ls = cfg.layers[i];
    const LayerIO& io = l.io[i];
    switch (ls.kind) {
      case LayerKind::kConv: {
        ConvGeom g{io.in_ch, ls.out_ch, ls.k, ls.stride, ls.pad, ls.pad_after};
        conv_forward(*x, params.data() + io.w_off, params.data() + io.b_off, g, ws.act[i],
                     ws.scratch);
        break;
      }
      case LayerKind::kTConv: {
        TConvGeom g{io.in_ch, ls.out_ch, ls.k, ls.stride, ls.pad, ls.out_pad};
        tconv_forward(*x, params.data() + io.w_off, params.data() + io.b_off, g, ws.act[i],
                      ws.scratch);
        break;
      }
      case LayerKind::kRelu:
        relu_forward(*x, ws.act[i]);
        break;
    }
    if (check_finite && !all_finite(ws.act[i]))
      throw std::runtime_error("forward: non-finite activation at layer " + std::to_string(i));
    x = &ws.act[i];
  }
  return *x;
}

/// Reverse pass. grad_out is dL/d(output); gradients are accumulated into
/// grads (caller zeroes). The input gradient is not produced.
template <typename S>
void backward(const NetworkConfig& cfg, const NetLayout& l, const std::vector<S>& params,
              const Tensor4<S>& input, Workspace<S>& ws, const Tensor4<S>& grad_out,
              std::vector<S>& grads) {
  require(grads.size() == l.total_params, "backward: bad gradient buffer size");
  const size_t nl = cfg.layers.size();
  ws.grad.resize(nl);
  const Tensor4<S>* g = &grad_out;
  for (size_t ri = nl; ri-- > 0;) {
    const LayerSpec& ls = cfg.layers[ri];
    const LayerIO& io = l.io[ri];
    const Tensor4<S>& layer_in = ri == 0 ? input : ws.act[ri - 1];
    bool want_input_grad = ri != 0;
    Tensor4<S>* gin = nullptr;
    if (want_input_grad) {
      if (!ws.grad[ri].same_shape(layer_in)) ws.grad[ri] = Tensor4<S>(layer_in.n, layer_in.c, layer_in.h, layer_in.w);
      gin = &ws.grad[ri];
    }
    switch (ls.kind) {
      case LayerKind::kConv: {
        ConvGeom geom{io.in_ch, ls.out_ch, ls.k, ls.stride, ls.pad, ls.pad_after};
        conv_backward(layer_in, params.data() + io.w_off, geom, *g, grads.data() + io.w_off,
                      grads.data() + io.b_off, gin, ws.scratch);
        break;
      }
      case LayerKind::kTConv: {
        TConvGeom geom{io.in_ch, ls.out_ch, ls.k, ls.stride, ls.pad, ls.out_pad};
        tconv_backward(layer_in, params.data() + io.w_off, geom, *g, grads.data() + io.w_off,
                       grads.data() + io.b_off, gin, ws.scratch);
        break;
      }
      case LayerKind::kRelu:
        if (gin) relu_backward(ws.act[ri], *g, *gin);
        break;
    }
    if (!want_input_grad) break;
    g = &ws.grad[ri];
  }
}

// ---------------------------------------------------------------------------
// Loss: weighted sum over heads of the per-pixel mean squared error.

template <typename S>
double loss_forward(const Tensor4<S>& pred, const Tensor4<S>& target,
                    const std::array<double, 4>& w) {
  require(pred.same_shape(target), "loss: shape mismatch");
  require(pred.c == 4, "loss: expected 4 heads");
  const size_t plane = size_t(pred.plane());
  double total = 0.0;
  for (int s = 0; s < pred.n; ++s) {
    for (int hch = 0; hch < 4; ++hch) {
      const S* p = pred.sample(s) + size_t(hch) * plane;
      const S* t = target.sample(s) + size_t(hch) * plane;
      double acc = 0.0;
      for (size_t i = 0; i < plane; ++i) {
        double d = double(p[i]) - double(t[i]);
        acc += d * d;
      }
      total += w[size_t(hch)] * acc / double(plane);
    }
  }
  return total / double(pred.n);
}

template <typename S>
void loss_backward(const Tensor4<S>& pred, const Tensor4<S>& target, const std::array<double, 4>& w,
                   Tensor4<S>& grad) {
  if (!grad.same_shape(pred)) grad = Tensor4<S>(pred.n, pred.c, pred.h, pred.w);
  const size_t plane = size_t(pred.plane());
  for (int s = 0; s < pred.n; ++s) {
    for (int hch = 0; hch < 4; ++hch) {
      const S* p = pred.sample(s) + size_t(hch) * plane;
      const S* t = target.sample(s) + size_t(hch) * plane;
      S* g = grad.sample(s) + size_t(hch) * plane;
      double scale = 2.0 * w[size_t(hch)] / (double(plane) * double(pred.n));
      for (size_t i = 0; i < plane; ++i) g[i] = S(scale * (double(p[i]) - double(t[i])));
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, version, config digest, then f32 parameters.

inline std::string config_signature(const NetworkConfig& cfg) {
  std::ostringstream s;
  s << "gknet1|in:" << cfg.in_ch << "x" << cfg.in_h << "x" << cfg.in_w;
  for (const LayerSpec& l : cfg.layers) {
    switch (l.kind) {
      case LayerKind::kConv:
        s << "|conv:" << l.out_ch << "," << l.k << "," << l.stride << "," << l.pad << ","
          << l.pad_after;
        break;
      case LayerKind::kTConv:
        s << "|tconv:" << l.out_ch << "," << l.k << "," << l.stride << "," << l.pad << ","
          << l.out_pad;
        break;
      case LayerKind::kRelu:
        s << "|relu";
        break;
    }
  }
  s << "|lw:";
  for (double w : cfg.loss_weights) s << w << ",";
  return s.str();
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t config_digest(const NetworkConfig& cfg) {
  return fnv1a64(config_signature(cfg));
}

inline constexpr char kCheckpointMagic[8] = {'G', 'K', 'C', 'K', 'P', 'T', '0', '1'};

inline void save_checkpoint(const std::string& path, const NetworkConfig& cfg,
                            const std::vector<float>& params) {
  static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");
  require(params.size() == param_count(cfg), "save_checkpoint: wrong parameter count");
  std::ofstream f(path, std::ios::binary);
  require(bool(f), "save_checkpoint: cannot open " + path);
  f.write(kCheckpointMagic, 8);
  std::uint32_t version = 1;
  std::uint64_t digest = config_digest(cfg);
  std::uint64_t count = params.size();
  f.write(reinterpret_cast<const char*>(&version), 4);
  f.write(reinterpret_cast<const char*>(&digest), 8);
  f.write(reinterpret_cast<const char*>(&count), 8);
  f.write(reinterpret_cast<const char*>(params.data()), std::streamsize(params.size() * 4));
  require(bool(f), "save_checkpoint: short write to " + path);
}

inline std::vector<float> load_checkpoint(const std::string& path, const NetworkConfig& cfg) {
  static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");
  std::ifstream f(path, std::ios::binary);
  require(bool(f), "load_checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  require(f.gcount() == 8 && std::memcmp(magic, kCheckpointMagic, 8) == 0,
          "load_checkpoint: bad magic in " + path);
  std::uint32_t version = 0;
  std::uint64_t digest = 0, count = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&digest), 8);
  f.read(reinterpret_cast<char*>(&count), 8);
  require(bool(f), "load_checkpoint: truncated header in " + path);
  require(version == 1, "load_checkpoint: unsupported version");
  require(digest == config_digest(cfg), "load_checkpoint: config digest mismatch");
  require(count == param_count(cfg), "load_checkpoint: parameter count mismatch");
  std::vector<float> params(count);
  f.read(reinterpret_cast<char*>(params.data()), std::streamsize(count * 4));
  require(f.gcount() == std::streamsize(count * 4), "load_checkpoint: truncated data");
  return params;
}

}  // namespace net
}  // namespace graspkit
