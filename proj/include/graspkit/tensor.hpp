// Minimal NCHW tensor used by the network layers.
#pragma once

#include <cstddef>
#include <vector>

#include "graspkit/common.hpp"

namespace graspkit {

template <typename S>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<S> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_, S fill = S(0))
      : n(n_), c(c_), h(h_), w(w_), v(size_t(n_) * c_ * h_ * w_, fill) {
    require(n_ >= 0 && c_ >= 0 && h_ >= 0 && w_ >= 0, "Tensor4: negative dims");
  }

  size_t size() const { return v.size(); }
  int plane() const { return h * w; }

  S& at(int in, int ic, int iy, int ix) {
    return v[((size_t(in) * c + ic) * h + iy) * w + ix];
  }
  S at(int in, int ic, int iy, int ix) const {
    return v[((size_t(in) * c + ic) * h + iy) * w + ix];
  }

  S* sample(int in) { return v.data() + size_t(in) * c * plane(); }
  const S* sample(int in) const { return v.data() + size_t(in) * c * plane(); }

  void zero() { std::fill(v.begin(), v.end(), S(0)); }

  bool same_shape(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

}  // namespace graspkit
