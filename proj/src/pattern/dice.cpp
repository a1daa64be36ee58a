#include "uvmakeup/pattern/dice.hpp"

namespace uvmakeup::pattern {

double dice_coefficient(const PatternMask& gt, const PatternMask& pr, double eps) {
  require_same_size(gt, pr, "dice_coefficient");
  const auto g = gt.values();
  const auto p = pr.values();
  double inter = 0.0;
  double sg = 0.0;
  double sp = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    inter += static_cast<double>(g[i]) * static_cast<double>(p[i]);
    sg += g[i];
    sp += p[i];
  }
  return (2.0 * inter + eps) / (sg + sp + eps);
}

PatternMask binarize(const PatternMask& mask, float threshold) {
  PatternMask out(mask.height(), mask.width());
  const auto src = mask.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > threshold ? 1.0f : 0.0f;
  return out;
}

}  // namespace uvmakeup::pattern
