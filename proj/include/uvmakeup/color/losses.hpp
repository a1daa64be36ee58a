#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvmakeup/color/histogram.hpp"
#include "uvmakeup/nn/convert.hpp"
#include "uvmakeup/nn/ops.hpp"
#include "uvmakeup/uvgeom/uv_layout.hpp"

namespace uvmakeup::color {

struct LossWeights {
  double lambda_adv = 1.0;
  double lambda_cyc = 10.0;
  double lambda_per = 0.005;
  double lambda_hist = 1.0;
  double lambda_eyes = 1.0;
  double lambda_lips = 1.0;
  double lambda_skin = 0.1;

  double region(uvgeom::Region r) const;
  /// Throws invalid_argument unless every weight is finite and >= 0.
  void validate() const;
  bool all_zero() const;
};

nlohmann::json to_json(const LossWeights& w);
/// Reads any `lambda_*` keys present; others keep their defaults.
LossWeights loss_weights_from_json(const nlohmann::json& j, LossWeights base = {});

inline constexpr std::array<uvgeom::Region, 3> kRegions{uvgeom::Region::eyes, uvgeom::Region::lips,
                                                        uvgeom::Region::skin};

/// Constant matching target for one region: HM output and the soft mask.
template <class T>
struct RegionTarget {
  uvgeom::Region region;
  double weight = 0.0;
  bool empty_region = false;
  nn::Tensor<T> target;  // [1,3,H,W]
  nn::Tensor<T> mask;    // [1,1,H,W]
};

/// HM(source, reference, Γ^i) for every region, weighted by λ^i.
template <class T>
std::vector<RegionTarget<T>> hist_targets(const TextureMap& source, const TextureMap& reference,
                                          const uvgeom::RegionMaskSet& regions,
                                          const LossWeights& w) {
  std::vector<RegionTarget<T>> out;
  for (uvgeom::Region r : kRegions) {
    const SoftMask& m = regions.get(r);
    HistogramMatch hm = histogram_match(source, reference, m);
    out.push_back({r, w.region(r), hm.empty_region, nn::to_tensor<T>(hm.texture),
                   nn::to_tensor<T>(m)});
  }
  return out;
}

/// Σ m·|x − target| / (C·Σ m): mean absolute difference over masked texels.
template <class T>
nn::Var<T> masked_l1(const nn::Var<T>& x, const nn::Tensor<T>& target, const nn::Tensor<T>& mask) {
  using namespace nn;
  const Shape s = x.shape();
  require(target.shape() == s, ErrorCategory::shape_mismatch, "masked_l1: target " + target.shape().str());
  require(mask.shape() == (Shape{s.n, 1, s.h, s.w}), ErrorCategory::shape_mismatch,
          "masked_l1: mask " + mask.shape().str());
  double msum = 0.0;
  for (T v : mask.values()) msum += v;
  const double denom = msum * s.c;
  double acc = 0.0;
  const std::size_t hw = s.plane();
  if (denom > 0.0) {
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const T* xv = x.value().plane(n, c);
        const T* tv = target.plane(n, c);
        const T* mv = mask.plane(n, 0);
        for (std::size_t i = 0; i < hw; ++i) acc += mv[i] * std::abs(double(xv[i]) - tv[i]);
      }
    acc /= denom;
  }
  return Var<T>::from_op(Tensor<T>::scalar(T(acc)), {x}, [s, hw, denom, target, mask](Node<T>& node) {
    Tensor<T>* gx = parent_grad(node, 0);
    if (gx == nullptr || denom <= 0.0) return;
    const T g = T(node.grad[0] / denom);
    const Tensor<T>& xv = node.parents[0]->value;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c) {
        const T* xp = xv.plane(n, c);
        const T* tp = target.plane(n, c);
        const T* mp = mask.plane(n, 0);
        T* gp = gx->plane(n, c);
        for (std::size_t i = 0; i < hw; ++i) {
          const T d = xp[i] - tp[i];
          gp[i] += d > T{0} ? g * mp[i] : (d < T{0} ? -g * mp[i] : T{0});
        }
      }
  });
}

/// Σ_i λ^i · masked_l1(output, HM target_i, Γ^i). The targets are constants.
template <class T>
nn::Var<T> hist_loss(const nn::Var<T>& output, const std::vector<RegionTarget<T>>& targets) {
  nn::Var<T> total;
  for (const auto& t : targets) {
    if (t.empty_region) continue;
    nn::Var<T> term = nn::scale(masked_l1(output, t.target, t.mask), T(t.weight));
    total = total.defined() ? nn::add(total, term) : term;
  }
  if (!total.defined()) total = nn::scale(masked_l1(output, output.value(), targets.front().mask), T(0));
  return total;
}

/// Evaluation form on plain textures.
double hist_loss(const TextureMap& output, const TextureMap& source, const TextureMap& reference,
                 const uvgeom::RegionMaskSet& regions, const LossWeights& w);

/// Mean absolute error between a reconstruction and the original texture.
template <class T>
nn::Var<T> cyc_loss(const nn::Var<T>& reconstructed, const nn::Tensor<T>& original) {
  return nn::l1_loss(reconstructed, original);
}

/// Least-squares GAN terms. Labels: real 1, fake 0.
template <class T>
nn::Var<T> lsgan_real_loss(const nn::Var<T>& d_out) {
  return nn::mse_to_constant(d_out, T(1));
}
template <class T>
nn::Var<T> lsgan_fake_loss(const nn::Var<T>& d_out) {
  return nn::mse_to_constant(d_out, T(0));
}
/// Generator side: push D(fake) to the real label.
template <class T>
nn::Var<T> lsgan_generator_loss(const nn::Var<T>& d_fake) {
  return nn::mse_to_constant(d_fake, T(1));
}

}  // namespace uvmakeup::color
