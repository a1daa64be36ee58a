#pragma once

#include <vector>

#include "uvmakeup/core/raster.hpp"
#include "uvmakeup/nn/tensor.hpp"

namespace uvmakeup::nn {

/// HWC raster -> [1,C,H,W] tensor.
template <class T, int C>
Tensor<T> to_tensor(const Raster<C>& r) {
  Tensor<T> out(Shape{1, C, r.height(), r.width()});
  const std::size_t hw = r.pixel_count();
  const auto src = r.values();
  for (int c = 0; c < C; ++c) {
    T* dst = out.plane(0, c);
    for (std::size_t i = 0; i < hw; ++i) dst[i] = static_cast<T>(src[i * C + c]);
  }
  return out;
}

/// Equal-size HWC rasters -> [N,C,H,W] tensor, in the given order.
template <class T, int C>
Tensor<T> to_batch(const std::vector<const Raster<C>*>& items) {
  require(!items.empty(), ErrorCategory::invalid_argument, "to_batch: empty batch");
  const int h = items.front()->height();
  const int w = items.front()->width();
  Tensor<T> out(Shape{static_cast<int>(items.size()), C, h, w});
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (std::size_t n = 0; n < items.size(); ++n) {
    require(items[n]->height() == h && items[n]->width() == w, ErrorCategory::shape_mismatch,
            "to_batch: raster sizes differ");
    const auto src = items[n]->values();
    for (int c = 0; c < C; ++c) {
      T* dst = out.plane(static_cast<int>(n), c);
      for (std::size_t i = 0; i < hw; ++i) dst[i] = static_cast<T>(src[i * C + c]);
    }
  }
  return out;
}

/// Sample `n` of a [N,C,H,W] tensor -> HWC raster.
template <int C, class T>
Raster<C> to_raster(const Tensor<T>& t, int n = 0) {
  require(t.shape().c == C, ErrorCategory::shape_mismatch,
          "to_raster: channel count " + std::to_string(t.shape().c));
  Raster<C> out(t.shape().h, t.shape().w);
  const std::size_t hw = t.shape().plane();
  auto dst = out.values();
  for (int c = 0; c < C; ++c) {
    const T* src = t.plane(n, c);
    for (std::size_t i = 0; i < hw; ++i) dst[i * C + c] = static_cast<float>(src[i]);
  }
  return out;
}

}  // namespace uvmakeup::nn
