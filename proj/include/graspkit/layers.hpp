// Convolution engine: im2col/col2im with GEMM inner loops, plus the
// transposed convolution expressed through the same two primitives (its
// forward is the adjoint of convolution's input gradient and vice versa).
// A phase-decomposed fast path serves strided transposed-conv forwards,
// where the naive column route would materialize a k^2-times larger
// intermediate.
//
// Layouts: activations NCHW (Tensor4). Conv weights [out_ch][in_ch][k][k],
// transposed-conv weights [in_ch][out_ch][k][k], both flat row-major.
// Column matrices are row-major [K x N] with K the patch size and N the
// number of grid positions.
#pragma once

#include <Eigen/Core>
#include <cstring>
#include <vector>

#include "graspkit/tensor.hpp"

namespace graspkit {
namespace net {

template <typename S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

struct ConvGeom {
  int in_ch = 0, out_ch = 0, k = 1, stride = 1;
  int pad_before = 0, pad_after = 0;

  int out_dim(int in) const {
    int span = in + pad_before + pad_after - k;
    require(span >= 0, "conv: kernel larger than padded input");
    return span / stride + 1;
  }
  size_t weight_count() const { return size_t(out_ch) * in_ch * k * k; }
  size_t param_count() const { return weight_count() + size_t(out_ch); }
};

struct TConvGeom {
  int in_ch = 0, out_ch = 0, k = 1, stride = 1;
  int pad = 0, out_pad = 0;

  int out_dim(int in) const {
    require(out_pad >= 0 && out_pad < stride, "tconv: out_pad must be < stride");
    int d = (in - 1) * stride - 2 * pad + k + out_pad;
    require(d >= 1, "tconv: non-positive output size");
    return d;
  }
  size_t weight_count() const { return size_t(in_ch) * out_ch * k * k; }
  size_t param_count() const { return weight_count() + size_t(out_ch); }
};

/// col[(c,ky,kx), (gy,gx)] = im[c, gy*s - pb + ky, gx*s - pb + kx], zero
/// outside the frame. col is row-major [c*k*k, gh*gw].
template <typename S>
void im2col(const S* im, int c, int im_h, int im_w, int k, int stride, int pad_before, int gh,
            int gw, S* col) {
  const size_t n = size_t(gh) * gw;
  for (int ci = 0; ci < c; ++ci) {
    const S* plane = im + size_t(ci) * im_h * im_w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        S* row = col + (size_t(ci) * k * k + size_t(ky) * k + kx) * n;
        // In-frame gx range: 0 <= gx*stride - pad_before + kx < im_w.
        int shift = kx - pad_before;
        int gx0 = shift < 0 ? std::min(gw, (-shift + stride - 1) / stride) : 0;
        int hi = im_w - 1 - shift;
        int gx1 = hi < 0 ? 0 : std::min(gw, hi / stride + 1);
        if (gx1 < gx0) gx1 = gx0;
        for (int gy = 0; gy < gh; ++gy) {
          int iy = gy * stride - pad_before + ky;
          S* dst = row + size_t(gy) * gw;
          if (iy < 0 || iy >= im_h) {
            std::memset(dst, 0, sizeof(S) * size_t(gw));
            continue;
          }
          const S* src = plane + size_t(iy) * im_w + shift;
          if (gx0 > 0) std::memset(dst, 0, sizeof(S) * size_t(gx0));
          if (stride == 1) {
            std::memcpy(dst + gx0, src + gx0, sizeof(S) * size_t(gx1 - gx0));
          } else {
            for (int gx = gx0; gx < gx1; ++gx) dst[gx] = src[size_t(gx) * stride];
          }
          if (gx1 < gw) std::memset(dst + gx1, 0, sizeof(S) * size_t(gw - gx1));
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-adds the column matrix back into the frame.
template <typename S>
void col2im_add(const S* col, int c, int im_h, int im_w, int k, int stride, int pad_before, int gh,
                int gw, S* im) {
  const size_t n = size_t(gh) * gw;
  for (int ci = 0; ci < c; ++ci) {
    S* plane = im + size_t(ci) * im_h * im_w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const S* row = col + (size_t(ci) * k * k + size_t(ky) * k + kx) * n;
        int shift = kx - pad_before;
        int gx0 = shift < 0 ? std::min(gw, (-shift + stride - 1) / stride) : 0;
        int hi = im_w - 1 - shift;
        int gx1 = hi < 0 ? 0 : std::min(gw, hi / stride + 1);
        if (gx1 < gx0) gx1 = gx0;
        for (int gy = 0; gy < gh; ++gy) {
          int iy = gy * stride - pad_before + ky;
          if (iy < 0 || iy >= im_h) continue;
          S* dst = plane + size_t(iy) * im_w + shift;
          const S* src = row + size_t(gy) * gw;
          if (stride == 1) {
            for (int gx = gx0; gx < gx1; ++gx) dst[gx] += src[gx];
          } else {
            for (int gx = gx0; gx < gx1; ++gx) dst[size_t(gx) * stride] += src[gx];
          }
        }
      }
    }
  }
}

/// Scratch column buffer shared across layers; sized on demand.
template <typename S>
struct ColScratch {
  std::vector<S> buf;
  S* get(size_t elems) {
    if (buf.size() < elems) buf.resize(elems);
    return buf.data();
  }
};

// ---------------------------------------------------------------------------
// Convolution.

template <typename S>
void conv_forward(const Tensor4<S>& in, const S* w, const S* b, const ConvGeom& g, Tensor4<S>& out,
                  ColScratch<S>& scratch) {
  require(in.c == g.in_ch, "conv_forward: channel mismatch");
  const int oh = g.out_dim(in.h), ow = g.out_dim(in.w);
  if (!(out.n == in.n && out.c == g.out_ch && out.h == oh && out.w == ow))
    out = Tensor4<S>(in.n, g.out_ch, oh, ow);

  // Stride-1 shift-add path: one GEMM against the unshifted input followed
  // by per-tap shifted accumulation. Skips the k^2-wide column buffer,
  // which dominates the cost of small-kernel stride-1 layers.
  if (g.stride == 1 && size_t(g.out_ch) * g.k * g.k <= 128) {
    const size_t rows = size_t(g.out_ch) * g.k * g.k;
    const size_t nin = size_t(in.h) * in.w;
    S* prod = scratch.get(rows * nin);
    // Weight rows reordered as (co, ky, kx) x (ci).
    std::vector<S> wr(rows * size_t(g.in_ch));
    for (int co = 0; co < g.out_ch; ++co)
      for (int ky = 0; ky < g.k; ++ky)
        for (int kx = 0; kx < g.k; ++kx)
          for (int ci = 0; ci < g.in_ch; ++ci)
            wr[((size_t(co) * g.k + ky) * g.k + kx) * g.in_ch + ci] =
                w[(((size_t(co) * g.in_ch) + ci) * g.k + ky) * g.k + kx];
    for (int s = 0; s < in.n; ++s) {
      MatMap<S> pm(prod, Eigen::Index(rows), Eigen::Index(nin));
      pm.noalias() = ConstMatMap<S>(wr.data(), Eigen::Index(rows), g.in_ch) *
                     ConstMatMap<S>(in.sample(s), g.in_ch, Eigen::Index(nin));
      S* os = out.sample(s);
      for (int co = 0; co < g.out_ch; ++co) {
        S* plane = os + size_t(co) * oh * ow;
        for (int i = 0; i < oh * ow; ++i) plane[i] = b[co];
        for (int ky = 0; ky < g.k; ++ky) {
          for (int kx = 0; kx < g.k; ++kx) {
            const S* src = prod + ((size_t(co) * g.k + ky) * g.k + kx) * nin;
            for (int oy = 0; oy < oh; ++oy) {
              int iy = oy - g.pad_before + ky;
              if (iy < 0 || iy >= in.h) continue;
              int x0 = std::max(0, g.pad_before - kx);
              int x1 = std::min(ow, in.w + g.pad_before - kx);
              S* dst = plane + size_t(oy) * ow;
              const S* sp = src + size_t(iy) * in.w - g.pad_before + kx;
              for (int ox = x0; ox < x1; ++ox) dst[ox] += sp[ox];
            }
          }
        }
      }
    }
    return;
  }

  const size_t kk = size_t(g.in_ch) * g.k * g.k;
  const size_t n = size_t(oh) * ow;
  S* col = scratch.get(kk * n);
  ConstMatMap<S> wm(w, g.out_ch, Eigen::Index(kk));
  for (int s = 0; s < in.n; ++s) {
    im2col(in.sample(s), g.in_ch, in.h, in.w, g.k, g.stride, g.pad_before, oh, ow, col);
    MatMap<S> om(out.sample(s), g.out_ch, Eigen::Index(n));
    om.noalias() = wm * ConstMatMap<S>(col, Eigen::Index(kk), Eigen::Index(n));
    for (int co = 0; co < g.out_ch; ++co) om.row(co).array() += b[co];
  }
}

/// Accumulates weight/bias gradients; writes the input gradient when
/// grad_in is non-null (skipped for the first layer of a network).
template <typename S>
void conv_backward(const Tensor4<S>& in, const S* w, const ConvGeom& g, const Tensor4<S>& gout,
                   S* gw, S* gb, Tensor4<S>* grad_in, ColScratch<S>& scratch) {
  const int oh = gout.h, ow = gout.w;
  const size_t kk = size_t(g.in_ch) * g.k * g.k;
  const size_t n = size_t(oh) * ow;
  S* col = scratch.get(kk * n);
  MatMap<S> gwm(gw, g.out_ch, Eigen::Index(kk));
  ConstMatMap<S> wm(w, g.out_ch, Eigen::Index(kk));
  if (grad_in) grad_in->zero();
  for (int s = 0; s < in.n; ++s) {
    ConstMatMap<S> gom(gout.sample(s), g.out_ch, Eigen::Index(n));
    im2col(in.sample(s), g.in_ch, in.h, in.w, g.k, g.stride, g.pad_before, oh, ow, col);
    gwm.noalias() += gom * ConstMatMap<S>(col, Eigen::Index(kk), Eigen::Index(n)).transpose();
    // Serial bias reduction: vectorized sums peel by pointer alignment, which
    // would make gradients depend on where the heap placed this tensor.
    const S* gp = gout.sample(s);
    for (int co = 0; co < g.out_ch; ++co) {
      S acc(0);
      const S* row = gp + size_t(co) * n;
      for (size_t i = 0; i < n; ++i) acc += row[i];
      gb[co] += acc;
    }
    if (grad_in) {
      MatMap<S> cg(col, Eigen::Index(kk), Eigen::Index(n));  // reuse after the gW product
      cg.noalias() = wm.transpose() * gom;
      col2im_add(col, g.in_ch, in.h, in.w, g.k, g.stride, g.pad_before, oh, ow,
                 grad_in->sample(s));
    }
  }
}

// ---------------------------------------------------------------------------
// Transposed convolution.

/// Reference forward via the column adjoint; kept as the ground truth the
/// fast path is checked against.
template <typename S>
void tconv_forward_ref(const Tensor4<S>& in, const S* w, const S* b, const TConvGeom& g,
                       Tensor4<S>& out, ColScratch<S>& scratch) {
  require(in.c == g.in_ch, "tconv_forward: channel mismatch");
  const int oh = g.out_dim(in.h), ow = g.out_dim(in.w);
  if (!(out.n == in.n && out.c == g.out_ch && out.h == oh && out.w == ow))
    out = Tensor4<S>(in.n, g.out_ch, oh, ow);
  const size_t kk = size_t(g.out_ch) * g.k * g.k;
  const size_t n = size_t(in.h) * in.w;
  S* col = scratch.get(kk * n);
  ConstMatMap<S> wm(w, g.in_ch, Eigen::Index(kk));
  for (int s = 0; s < in.n; ++s) {
    ConstMatMap<S> im(in.sample(s), g.in_ch, Eigen::Index(n));
    MatMap<S> cg(col, Eigen::Index(kk), Eigen::Index(n));
    cg.noalias() = wm.transpose() * im;
    S* os = out.sample(s);
    std::memset(os, 0, sizeof(S) * size_t(g.out_ch) * oh * ow);
    col2im_add(col, g.out_ch, oh, ow, g.k, g.stride, g.pad, in.h, in.w, os);
    for (int co = 0; co < g.out_ch; ++co) {
      S* plane = os + size_t(co) * oh * ow;
      for (size_t i = 0; i < size_t(oh) * ow; ++i) plane[i] += b[co];
    }
  }
}

/// Phase-decomposed forward: output pixels with equal residues mod stride
/// share a small tap set, so each phase is one dense GEMM over a gathered
/// sub-grid instead of a k^2-wide scatter.
template <typename S>
void tconv_forward(const Tensor4<S>& in, const S* w, const S* b, const TConvGeom& g,
                   Tensor4<S>& out, ColScratch<S>& scratch) {
  require(in.c == g.in_ch, "tconv_forward: channel mismatch");
  const int oh = g.out_dim(in.h), ow = g.out_dim(in.w);
  if (!(out.n == in.n && out.c == g.out_ch && out.h == oh && out.w == ow))
    out = Tensor4<S>(in.n, g.out_ch, oh, ow);
  const int st = g.stride;

  struct Phase {
    int first = 0, count = 0;        // output grid positions first, first+st, ...
    std::vector<int> taps;           // kernel taps feeding this phase
    std::vector<int> offsets;        // input index offset per tap: i = offset + t
  };
  auto build = [&](int out_dim, int in_dim) {
    auto ph = std::vector<Phase>(size_t(st));
    for (int a = 0; a < st; ++a) {
      Phase& p = ph[size_t(a)];
      p.first = -1;
      for (int y = 0; y < st && y < out_dim; ++y)
        if ((y + g.pad) % st == a) p.first = y;
      if (p.first < 0) continue;
      p.count = (out_dim - 1 - p.first) / st + 1;
      for (int ky = 0; ky < g.k; ++ky) {
        if ((p.first + g.pad - ky) % st != 0) continue;
        p.taps.push_back(ky);
        p.offsets.push_back((p.first + g.pad - ky) / st);
      }
      (void)in_dim;
    }
    return ph;
  };
  const std::vector<Phase> py = build(oh, in.h);
  const std::vector<Phase> px = build(ow, in.w);

  std::vector<S> wp, outp;
  for (int s = 0; s < in.n; ++s) {
    const S* ins = in.sample(s);
    S* os = out.sample(s);
    for (const Phase& a : py) {
      if (a.first < 0) continue;
      for (const Phase& bph : px) {
        if (bph.first < 0) continue;
        const int ka = int(a.taps.size()), kb = int(bph.taps.size());
        const size_t kk = size_t(g.in_ch) * ka * kb;
        const size_t n = size_t(a.count) * bph.count;
        S* col = scratch.get(kk * n);
        // Gather: each column row is a shifted window of one input plane.
        for (int ci = 0; ci < g.in_ch; ++ci) {
          const S* plane = ins + size_t(ci) * in.h * in.w;
          for (int ta = 0; ta < ka; ++ta) {
            for (int tb = 0; tb < kb; ++tb) {
              S* row = col + (size_t(ci) * ka * kb + size_t(ta) * kb + tb) * n;
              const int ix0 = bph.offsets[size_t(tb)];
              const int tx0 = std::min(bph.count, std::max(0, -ix0));
              const int tx1 = std::max(tx0, std::min(bph.count, in.w - ix0));
              for (int ty = 0; ty < a.count; ++ty) {
                int iy = a.offsets[size_t(ta)] + ty;
                S* dst = row + size_t(ty) * bph.count;
                if (iy < 0 || iy >= in.h) {
                  std::memset(dst, 0, sizeof(S) * size_t(bph.count));
                  continue;
                }
                const S* src = plane + size_t(iy) * in.w;
                if (tx0 > 0) std::memset(dst, 0, sizeof(S) * size_t(tx0));
                std::memcpy(dst + tx0, src + ix0 + tx0, sizeof(S) * size_t(tx1 - tx0));
                if (tx1 < bph.count)
                  std::memset(dst + tx1, 0, sizeof(S) * size_t(bph.count - tx1));
              }
            }
          }
        }
        // Per-phase weight slice in the same row order as the columns.
        wp.assign(size_t(g.out_ch) * kk, S(0));
        for (int co = 0; co < g.out_ch; ++co)
          for (int ci = 0; ci < g.in_ch; ++ci)
            for (int ta = 0; ta < ka; ++ta)
              for (int tb = 0; tb < kb; ++tb)
                wp[size_t(co) * kk + size_t(ci) * ka * kb + size_t(ta) * kb + tb] =
                    w[((size_t(ci) * g.out_ch + co) * g.k + a.taps[size_t(ta)]) * g.k +
                      bph.taps[size_t(tb)]];
        outp.resize(size_t(g.out_ch) * n);
        MatMap<S> om(outp.data(), g.out_ch, Eigen::Index(n));
        om.noalias() = ConstMatMap<S>(wp.data(), g.out_ch, Eigen::Index(kk)) *
                       ConstMatMap<S>(col, Eigen::Index(kk), Eigen::Index(n));
        for (int co = 0; co < g.out_ch; ++co) {
          const S* srow = outp.data() + size_t(co) * n;
          S* oplane = os + size_t(co) * oh * ow;
          for (int ty = 0; ty < a.count; ++ty) {
            S* drow = oplane + size_t(a.first + ty * st) * ow + bph.first;
            const S* sp = srow + size_t(ty) * bph.count;
            for (int tx = 0; tx < bph.count; ++tx) drow[size_t(tx) * st] = sp[tx] + b[co];
          }
        }
      }
    }
  }
}

template <typename S>
void tconv_backward(const Tensor4<S>& in, const S* w, const TConvGeom& g, const Tensor4<S>& gout,
                    S* gw, S* gb, Tensor4<S>* grad_in, ColScratch<S>& scratch) {
  const size_t kk = size_t(g.out_ch) * g.k * g.k;
  const size_t n = size_t(in.h) * in.w;
  S* col = scratch.get(kk * n);
  ConstMatMap<S> wm(w, g.in_ch, Eigen::Index(kk));
  MatMap<S> gwm(gw, g.in_ch, Eigen::Index(kk));
  for (int s = 0; s < in.n; ++s) {
    // Columns of the output gradient under conv geometry: the tconv input
    // grid is exactly the conv output grid of its adjoint.
    im2col(gout.sample(s), g.out_ch, gout.h, gout.w, g.k, g.stride, g.pad, in.h, in.w, col);
    ConstMatMap<S> im(in.sample(s), g.in_ch, Eigen::Index(n));
    gwm.noalias() += im * ConstMatMap<S>(col, Eigen::Index(kk), Eigen::Index(n)).transpose();
    const S* go = gout.sample(s);
    for (int co = 0; co < g.out_ch; ++co) {
      const S* plane = go + size_t(co) * gout.h * gout.w;
      S acc = S(0);
      for (size_t i = 0; i < size_t(gout.h) * gout.w; ++i) acc += plane[i];
      gb[co] += acc;
    }
    if (grad_in) {
      MatMap<S> gim(grad_in->sample(s), g.in_ch, Eigen::Index(n));
      gim.noalias() = wm * ConstMatMap<S>(col, Eigen::Index(kk), Eigen::Index(n));
    }
  }
}

// ---------------------------------------------------------------------------
// ReLU.

template <typename S>
void relu_forward(const Tensor4<S>& in, Tensor4<S>& out) {
  if (!out.same_shape(in)) out = in;
  for (size_t i = 0; i < in.size(); ++i) out.v[i] = in.v[i] > S(0) ? in.v[i] : S(0);
}

template <typename S>
void relu_backward(const Tensor4<S>& out, const Tensor4<S>& gout, Tensor4<S>& grad_in) {
  if (!grad_in.same_shape(out)) grad_in = out;
  for (size_t i = 0; i < out.size(); ++i) grad_in.v[i] = out.v[i] > S(0) ? gout.v[i] : S(0);
}

template <typename S>
bool all_finite(const Tensor4<S>& t) {
  for (S v : t.v)
    if (!std::isfinite(double(v))) return false;
  return true;
}

}  // namespace net
}  // namespace graspkit
