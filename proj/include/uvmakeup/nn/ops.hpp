#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

#include "uvmakeup/nn/autograd.hpp"

namespace uvmakeup::nn {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

inline void require_same(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b)) {
    fail(ErrorCategory::shape_mismatch, std::string(op) + ": " + a.str() + " vs " + b.str());
  }
}

/// Per-thread reusable buffer; contents are unspecified on return.
template <class T>
T* scratch(int slot, std::size_t n) {
  thread_local std::vector<T> buffers[2];
  std::vector<T>& b = buffers[slot];
  if (b.size() < n) b.resize(n);
  return b.data();
}

/// Output columns [lo, hi) whose input column ox*stride - pad + kx is in [0, w).
inline std::pair<int, int> valid_columns(int w, int ow, int stride, int pad, int kx) {
  const int off = kx - pad;
  int lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
  int hi = (w - 1 - off) < 0 ? 0 : (w - 1 - off) / stride + 1;
  lo = std::min(lo, ow);
  hi = std::clamp(hi, lo, ow);
  return {lo, hi};
}

template <class T>
void im2col(const T* x, int channels, int h, int w, int k, int stride, int pad, int oh, int ow,
            T* col) {
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < channels; ++c) {
    const T* src = x + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * out_plane;
        const auto [lo, hi] = valid_columns(w, ow, stride, pad, kx);
        const int off = kx - pad;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* row = dst + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + ow, T{0});
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(iy) * w + off;
          for (int ox = 0; ox < lo; ++ox) row[ox] = T{0};
          if (stride == 1) {
            for (int ox = lo; ox < hi; ++ox) row[ox] = srow[ox];
          } else {
            for (int ox = lo; ox < hi; ++ox) row[ox] = srow[ox * stride];
          }
          for (int ox = hi; ox < ow; ++ox) row[ox] = T{0};
        }
      }
    }
  }
}

template <class T>
void col2im(const T* col, int channels, int h, int w, int k, int stride, int pad, int oh, int ow,
            T* x) {
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < channels; ++c) {
    T* dst = x + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * out_plane;
        const auto [lo, hi] = valid_columns(w, ow, stride, pad, kx);
        const int off = kx - pad;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const T* row = src + static_cast<std::size_t>(oy) * ow;
          T* drow = dst + static_cast<std::size_t>(iy) * w + off;
          if (stride == 1) {
            for (int ox = lo; ox < hi; ++ox) drow[ox] += row[ox];
          } else {
            for (int ox = lo; ox < hi; ++ox) drow[ox * stride] += row[ox];
          }
        }
      }
    }
  }
}

/// Half-pixel bilinear resampling weights along one axis.
struct Lerp {
  int i0;
  int i1;
  double w1;
};

inline std::vector<Lerp> lerp_table(int in, int out) {
  std::vector<Lerp> t(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = i0 + 1 < in ? i0 + 1 : in - 1;
    t[o] = {i0, i1, src - i0};
  }
  return t;
}

}  // namespace detail

/// 2-D convolution, square kernel, zero padding. `w` is [Cout, Cin, k, k],
/// `b` is [1, Cout, 1, 1] or undefined.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  using namespace detail;
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  require(ws.c == xs.c && ws.h == ws.w, ErrorCategory::shape_mismatch,
          "conv2d: weight " + ws.str() + " incompatible with input " + xs.str());
  const int k = ws.h;
  const int cout = ws.n;
  const int oh = (xs.h + 2 * pad - k) / stride + 1;
  const int ow = (xs.w + 2 * pad - k) / stride + 1;
  const int kdim = xs.c * k * k;
  const int p = oh * ow;
  const bool direct = (k == 1 && stride == 1 && pad == 0);

  Tensor<T> out(Shape{xs.n, cout, oh, ow});
  T* col = direct ? nullptr : scratch<T>(0, static_cast<std::size_t>(kdim) * p);
  ConstMapMat<T> wm(w.value().data(), cout, kdim);
  for (int n = 0; n < xs.n; ++n) {
    const T* xin = x.value().sample(n);
    if (!direct) im2col(xin, xs.c, xs.h, xs.w, k, stride, pad, oh, ow, col);
    ConstMapMat<T> cm(direct ? xin : col, kdim, p);
    MapMat<T> om(out.sample(n), cout, p);
    om.noalias() = wm * cm;
    if (b.defined()) {
      for (int o = 0; o < cout; ++o) om.row(o).array() += b.value()[o];
    }
  }

  return Var<T>::from_op(std::move(out), {x, w, b}, [=](Node<T>& node) {
    Tensor<T>* gx = parent_grad(node, 0);
    Tensor<T>* gw = parent_grad(node, 1);
    Tensor<T>* gb = node.parents[2] ? parent_grad(node, 2) : nullptr;
    const Tensor<T>& xv = node.parents[0]->value;
    const Tensor<T>& wv = node.parents[1]->value;
    T* colb = direct ? nullptr : scratch<T>(0, static_cast<std::size_t>(kdim) * p);
    T* dcol = direct ? nullptr : scratch<T>(1, static_cast<std::size_t>(kdim) * p);
    ConstMapMat<T> wmb(wv.data(), cout, kdim);
    for (int n = 0; n < xs.n; ++n) {
      ConstMapMat<T> gm(node.grad.sample(n), cout, p);
      if (gw != nullptr) {
        const T* xin = xv.sample(n);
        if (!direct) im2col(xin, xs.c, xs.h, xs.w, k, stride, pad, oh, ow, colb);
        ConstMapMat<T> cm(direct ? xin : colb, kdim, p);
        MapMat<T> gwm(gw->data(), cout, kdim);
        gwm.noalias() += gm * cm.transpose();
      }
      if (gb != nullptr) {
        // Sequential sum: Eigen's vectorized reduction peels by address, which
        // would make results depend on allocation alignment.
        for (int o = 0; o < cout; ++o) {
          const T* row = node.grad.sample(n) + static_cast<std::size_t>(o) * p;
          T acc = 0;
          for (int i = 0; i < p; ++i) acc += row[i];
          (*gb)[o] += acc;
        }
      }
      if (gx != nullptr) {
        if (direct) {
          MapMat<T> gxm(gx->sample(n), kdim, p);
          gxm.noalias() += wmb.transpose() * gm;
        } else {
          MapMat<T> dm(dcol, kdim, p);
          dm.noalias() = wmb.transpose() * gm;
          col2im(dcol, xs.c, xs.h, xs.w, k, stride, pad, oh, ow, gx->sample(n));
        }
      }
    }
  });
}

template <class T>
Var<T> upsample_nearest2x(const Var<T>& x) {
  const Shape s = x.shape();
  Tensor<T> out(Shape{s.n, s.c, s.h * 2, s.w * 2});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h * 2; ++y)
        for (int xx = 0; xx < s.w * 2; ++xx) out.at(n, c, y, xx) = x.value().at(n, c, y / 2, xx / 2);
  return Var<T>::from_op(std::move(out), {x}, [s](Node<T>& node) {
    Tensor<T>* gx = parent_grad(node, 0);
    if (gx == nullptr) return;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < s.h * 2; ++y)
          for (int xx = 0; xx < s.w * 2; ++xx)
            gx->at(n, c, y / 2, xx / 2) += node.grad.at(n, c, y, xx);
  });
}

/// Half-pixel bilinear resize to (h, w).
template <class T>
Var<T> resize_bilinear(const Var<T>& x, int h, int w) {
  const Shape s = x.shape();
  const auto ty = detail::lerp_table(s.h, h);
  const auto tx = detail::lerp_table(s.w, w);
  Tensor<T> out(Shape{s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* in = x.value().plane(n, c);
      T* o = out.plane(n, c);
      for (int y = 0; y < h; ++y) {
        const auto& ly = ty[y];
        for (int xx = 0; xx < w; ++xx) {
          const auto& lx = tx[xx];
          const T a = in[ly.i0 * s.w + lx.i0] * T(1 - lx.w1) + in[ly.i0 * s.w + lx.i1] * T(lx.w1);
          const T bb = in[ly.i1 * s.w + lx.i0] * T(1 - lx.w1) + in[ly.i1 * s.w + lx.i1] * T(lx.w1);
          o[y * w + xx] = a * T(1 - ly.w1) + bb * T(ly.w1);
        }
      }
    }
  return Var<T>::from_op(std::move(out), {x}, [s, h, w, ty, tx](Node<T>& node) {
    Tensor<T>* gx = parent_grad(node, 0);
    if (gx == nullptr) return;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        T* g = gx->plane(n, c);
        const T* go = node.grad.plane(n, c);
        for (int y = 0; y < h; ++y) {
          const auto& ly = ty[y];
          for (int xx = 0; xx < w; ++xx) {
            const auto& lx = tx[xx];
            const T v = go[y * w + xx];
            g[ly.i0 * s.w + lx.i0] += v * T((1 - ly.w1) * (1 - lx.w1));
            g[ly.i0 * s.w + lx.i1] += v * T((1 - ly.w1) * lx.w1);
            g[ly.i1 * s.w + lx.i0] += v * T(ly.w1 * (1 - lx.w1));
            g[ly.i1 * s.w + lx.i1] += v * T(ly.w1 * lx.w1);
          }
        }
      }
  });
}

template <class T>
Var<T> maxpool2x(const Var<T>& x) {
  const Shape s = x.shape();
  const int oh = s.h / 2;
  const int ow = s.w / 2;
  Tensor<T> out(Shape{s.n, s.c, oh, ow});
  std::vector<std::size_t> argmax(out.size());
  std::size_t i = 0;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* in = x.value().plane(n, c);
      const std::size_t base = static_cast<std::size_t>(x.value().plane(n, c) - x.value().data());
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx, ++i) {
          std::size_t best = static_cast<std::size_t>(2 * y) * s.w + 2 * xx;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              const std::size_t j = static_cast<std::size_t>(2 * y + dy) * s.w + 2 * xx + dx;
              if (in[j] > in[best]) best = j;
            }
          out[i] = in[best];
          argmax[i] = base + best;
        }
    }
  return Var<T>::from_op(std::move(out), {x}, [argmax = std::move(argmax)](Node<T>& node) {
    Tensor<T>* gx = parent_grad(node, 0);
    if (gx == nullptr) return;
    for (std::size_t j = 0; j < argmax.size(); ++j) (*gx)[argmax[j]] += node.grad[j];
  });
}

/// Per-sample, per-channel normalization with affine [1,C,1,1] gamma/beta.
template <class T>
Var<T> instance_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
  const Shape s = x.shape();
  const std::size_t hw = s.plane();
  Tensor<T> out(s);
  Tensor<T> xhat(s);
  std::vector<T> inv_std(static_cast<std::size_t>(s.n) * s.c);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* in = x.value().plane(n, c);
      double mean = 0.0;
      for (std::size_t i = 0; i < hw; ++i) mean += in[i];
      mean /= static_cast<double>(hw);
      double var = 0.0;
      for (std::size_t i = 0; i < hw; ++i) var += (in[i] - mean) * (in[i] - mean);
      var /= static_cast<double>(hw);
      const T is = T(1.0 / std::sqrt(var + eps));
      inv_std[static_cast<std::size_t>(n) * s.c + c] = is;
      T* xh = xhat.plane(n, c);
      T* o = out.plane(n, c);
      const T g = gamma.value()[c];
      const T bt = beta.value()[c];
      for (std::size_t i = 0; i < hw; ++i) {
        xh[i] = T(in[i] - mean) * is;
        o[i] = xh[i] * g + bt;
      }
    }
  return Var<T>::from_op(std::move(out), {x, gamma, beta},
                         [s, hw, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<T>& node) {
    Tensor<T>* gx = parent_grad(node, 0);
    Tensor<T>* gg = parent_grad(node, 1);
    Tensor<T>* gb = parent_grad(node, 2);
    const Tensor<T>& gamma_v = node.parents[1]->value;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const T* go = node.grad.plane(n, c);
        const T* xh = xhat.plane(n, c);
        double sum_g = 0.0;
        double sum_gx = 0.0;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_g += go[i];
          sum_gx += static_cast<double>(go[i]) * xh[i];
        }
        if (gg != nullptr) (*gg)[c] += T(sum_gx);
        if (gb != nullptr) (*gb)[c] += T(sum_g);
        if (gx != nullptr) {
          const T scale = gamma_v[c] * inv_std[static_cast<std::size_t>(n) * s.c + c];
          const double mg = sum_g / static_cast<double>(hw);
          const double mgx = sum_gx / static_cast<double>(hw);
          T* g = gx->plane(n, c);
          for (std::size_t i = 0; i < hw; ++i) {
            g[i] += scale * T(go[i] - mg - xh[i] * mgx);
          }
        }
      }
  });
}

namespace detail {

/// Elementwise unary op whose derivative is a function of (input, output).
template <class T, class F, class D>
Var<T> unary(const Var<T>& x, F f, D df) {
  Tensor<T> out(x.shape());
  const auto in = x.value().values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return Var<T>::from_op(std::move(out), {x}, [df](Node<T>& node) {
    Tensor<T>* gx = parent_grad(node, 0);
    if (gx == nullptr) return;
    const Tensor<T>& in = node.parents[0]->value;
    for (std::size_t i = 0; i < in.size(); ++i) (*gx)[i] += node.grad[i] * df(in[i], node.value[i]);
  });
}

}  // namespace detail

template <class T>
Var<T> relu(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return v > T{0} ? v : T{0}; },
      [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(0.2)) {
  return detail::unary(
      x, [slope](T v) { return v > T{0} ? v : v * slope; },
      [slope](T v, T) { return v > T{0} ? T{1} : slope; });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); }, [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> tanh(const Var<T>& x) {
  return detail::unary(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

/// Clamp with pass-through gradient strictly inside (lo, hi).
template <class T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  return detail::unary(
      x, [lo, hi](T v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](T v, T) { return (v > lo && v < hi) ? T{1} : T{0}; });
}

template <class T>
Var<T> scale(const Var<T>& x, T s) {
  return detail::unary(
      x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return Var<T>::from_op(std::move(out), {a, b}, [](Node<T>& node) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (Tensor<T>* g = parent_grad(node, p)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += node.grad[i];
      }
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a.shape(), b.shape(), "sub");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return Var<T>::from_op(std::move(out), {a, b}, [](Node<T>& node) {
    if (Tensor<T>* g = parent_grad(node, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += node.grad[i];
    if (Tensor<T>* g = parent_grad(node, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= node.grad[i];
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return Var<T>::from_op(std::move(out), {a, b}, [](Node<T>& node) {
    const Tensor<T>& av = node.parents[0]->value;
    const Tensor<T>& bv = node.parents[1]->value;
    if (Tensor<T>* g = parent_grad(node, 0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += node.grad[i] * bv[i];
    if (Tensor<T>* g = parent_grad(node, 1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += node.grad[i] * av[i];
  });
}

/// Multiplies by a constant [N,1,H,W] plane broadcast over channels.
template <class T>
Var<T> mul_plane(const Var<T>& x, const Tensor<T>& plane) {
  const Shape s = x.shape();
  require(plane.shape().n == s.n && plane.shape().c == 1 && plane.shape().h == s.h &&
              plane.shape().w == s.w,
          ErrorCategory::shape_mismatch, "mul_plane: " + plane.shape().str() + " vs " + s.str());
  Tensor<T> out(s);
  const std::size_t hw = s.plane();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* in = x.value().plane(n, c);
      const T* m = plane.plane(n, 0);
      T* o = out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) o[i] = in[i] * m[i];
    }
  return Var<T>::from_op(std::move(out), {x}, [s, hw, plane](Node<T>& node) {
    Tensor<T>* gx = parent_grad(node, 0);
    if (gx == nullptr) return;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const T* go = node.grad.plane(n, c);
        const T* m = plane.plane(n, 0);
        T* g = gx->plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) g[i] += go[i] * m[i];
      }
  });
}

/// y[:,c] = x[:,c] * a[c] + b[c] with constant per-channel coefficients.
template <class T>
Var<T> affine_channels(const Var<T>& x, std::vector<T> a, std::vector<T> b) {
  const Shape s = x.shape();
  require(static_cast<int>(a.size()) == s.c && static_cast<int>(b.size()) == s.c,
          ErrorCategory::shape_mismatch, "affine_channels: coefficient count");
  Tensor<T> out(s);
  const std::size_t hw = s.plane();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* in = x.value().plane(n, c);
      T* o = out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) o[i] = in[i] * a[c] + b[c];
    }
  return Var<T>::from_op(std::move(out), {x}, [s, hw, a](Node<T>& node) {
    Tensor<T>* gx = parent_grad(node, 0);
    if (gx == nullptr) return;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const T* go = node.grad.plane(n, c);
        T* g = gx->plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) g[i] += go[i] * a[c];
      }
  });
}

template <class T>
Var<T> concat_channels(const Var<T>& a, const Var<T>& b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  require(sa.n == sb.n && sa.h == sb.h && sa.w == sb.w, ErrorCategory::shape_mismatch,
          "concat_channels: " + sa.str() + " vs " + sb.str());
  Tensor<T> out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
  const std::size_t na = static_cast<std::size_t>(sa.c) * sa.plane();
  const std::size_t nb = static_cast<std::size_t>(sb.c) * sb.plane();
  for (int n = 0; n < sa.n; ++n) {
    std::copy_n(a.value().sample(n), na, out.sample(n));
    std::copy_n(b.value().sample(n), nb, out.sample(n) + na);
  }
  return Var<T>::from_op(std::move(out), {a, b}, [sa, na, nb](Node<T>& node) {
    Tensor<T>* ga = parent_grad(node, 0);
    Tensor<T>* gb = parent_grad(node, 1);
    for (int n = 0; n < sa.n; ++n) {
      const T* go = node.grad.sample(n);
      if (ga != nullptr) {
        T* g = ga->sample(n);
        for (std::size_t i = 0; i < na; ++i) g[i] += go[i];
      }
      if (gb != nullptr) {
        T* g = gb->sample(n);
        for (std::size_t i = 0; i < nb; ++i) g[i] += go[na + i];
      }
    }
  });
}

template <class T>
Var<T> sum(const Var<T>& x) {
  double acc = 0.0;
  for (T v : x.value().values()) acc += v;
  return Var<T>::from_op(Tensor<T>::scalar(T(acc)), {x}, [](Node<T>& node) {
    Tensor<T>* gx = parent_grad(node, 0);
    if (gx == nullptr) return;
    const T g = node.grad[0];
    for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += g;
  });
}

template <class T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.value().size()));
}

/// Mean absolute difference against a constant target.
template <class T>
Var<T> l1_loss(const Var<T>& x, const Tensor<T>& target) {
  detail::require_same(x.shape(), target.shape(), "l1_loss");
  const std::size_t n = x.value().size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(x.value()[i] - target[i]);
  return Var<T>::from_op(Tensor<T>::scalar(T(acc / n)), {x}, [n, target](Node<T>& node) {
    Tensor<T>* gx = parent_grad(node, 0);
    if (gx == nullptr) return;
    const Tensor<T>& xv = node.parents[0]->value;
    const T g = node.grad[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = xv[i] - target[i];
      (*gx)[i] += d > T{0} ? g : (d < T{0} ? -g : T{0});
    }
  });
}

template <class T>
Var<T> l1_loss(const Var<T>& a, const Var<T>& b) {
  return mean(detail::unary(
      sub(a, b), [](T v) { return std::abs(v); },
      [](T v, T) { return v > T{0} ? T{1} : (v < T{0} ? T{-1} : T{0}); }));
}

/// Mean squared difference against a constant target.
template <class T>
Var<T> mse_loss(const Var<T>& x, const Tensor<T>& target) {
  detail::require_same(x.shape(), target.shape(), "mse_loss");
  const std::size_t n = x.value().size();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x.value()[i] - target[i];
    acc += d * d;
  }
  return Var<T>::from_op(Tensor<T>::scalar(T(acc / n)), {x}, [n, target](Node<T>& node) {
    Tensor<T>* gx = parent_grad(node, 0);
    if (gx == nullptr) return;
    const Tensor<T>& xv = node.parents[0]->value;
    const T g = T(2) * node.grad[0] / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) (*gx)[i] += g * (xv[i] - target[i]);
  });
}

template <class T>
Var<T> mse_loss(const Var<T>& a, const Var<T>& b) {
  const Var<T> d = sub(a, b);
  return mean(mul(d, d));
}

/// Mean of (x - c)^2 for a constant c, the least-squares GAN building block.
template <class T>
Var<T> mse_to_constant(const Var<T>& x, T c) {
  return mse_loss(x, Tensor<T>(x.shape(), c));
}

}  // namespace uvmakeup::nn
