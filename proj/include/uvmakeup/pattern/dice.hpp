#pragma once

#include "uvmakeup/core/raster.hpp"
#include <vector>

#include "uvmakeup/nn/ops.hpp"

namespace uvmakeup::pattern {

/// Smoothing in summed-mask units.
inline constexpr double kDiceEpsilon = 1.0;
inline constexpr float kBinarizeThreshold = 0.5f;

/// Soft dice: (2 sum(gt*pr) + eps) / (sum(gt) + sum(pr) + eps). Symmetric in
/// its arguments; accumulates in double.
double dice_coefficient(const PatternMask& gt, const PatternMask& pr, double eps = kDiceEpsilon);

/// 1 where mask > threshold, else 0.
PatternMask binarize(const PatternMask& mask, float threshold = kBinarizeThreshold);

/// Mean over the batch of 1 - soft dice between each sample of `pr`
/// ([N,1,H,W]) and the matching sample of `gt`.
template <class T>
nn::Var<T> dice_loss(const nn::Var<T>& pr, const nn::Tensor<T>& gt, double eps = kDiceEpsilon) {
  nn::detail::require_same(pr.shape(), gt.shape(), "dice_loss");
  const int n = pr.shape().n;
  const std::size_t per = pr.shape().numel() / static_cast<std::size_t>(n);
  const nn::Tensor<T>& p = pr.value();
  std::vector<double> num(n);
  std::vector<double> den(n);
  double loss = 0.0;
  for (int s = 0; s < n; ++s) {
    const T* ps = p.sample(s);
    const T* gs = gt.sample(s);
    double inter = 0.0;
    double sg = 0.0;
    double sp = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      inter += static_cast<double>(gs[i]) * ps[i];
      sg += gs[i];
      sp += ps[i];
    }
    num[s] = 2.0 * inter + eps;
    den[s] = sg + sp + eps;
    loss += 1.0 - num[s] / den[s];
  }
  return nn::Var<T>::from_op(
      nn::Tensor<T>::scalar(static_cast<T>(loss / n)), {pr},
      [gt, num, den, n, per](nn::Node<T>& node) {
        nn::Tensor<T>* g = nn::parent_grad(node, 0);
        if (g == nullptr) return;
        const double up = static_cast<double>(node.grad[0]) / n;
        for (int s = 0; s < n; ++s) {
          const T* gs = gt.sample(s);
          T* out = g->sample(s);
          const double d2 = den[s] * den[s];
          for (std::size_t i = 0; i < per; ++i) {
            out[i] += static_cast<T>(-up * (2.0 * gs[i] * den[s] - num[s]) / d2);
          }
        }
      });
}

}  // namespace uvmakeup::pattern
