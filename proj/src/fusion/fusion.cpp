#include "uvmakeup/fusion/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace uvmakeup::fusion {

namespace {

// std::lerp is exact at both endpoints and returns a when a == b, which the
// blend identities rely on.
template <class MaskAt>
TextureMap blend(const TextureMap& lo, const TextureMap& hi, MaskAt mask_at) {
  TextureMap out(lo.height(), lo.width());
  auto o = out.values();
  const auto a = lo.values();
  const auto b = hi.values();
  for (std::size_t i = 0; i < lo.pixel_count(); ++i) {
    const float m = mask_at(i);
    for (int c = 0; c < 3; ++c) o[i * 3 + c] = std::lerp(a[i * 3 + c], b[i * 3 + c], m);
  }
  return out;
}

void require_unit_mask(const Plane& mask, const char* what) {
  for (float v : mask.values())
    if (!(v >= 0.0f && v <= 1.0f)) fail(ErrorCategory::invalid_argument, std::string(what) + ": mask outside [0,1]");
}

}  // namespace

void TransferRequest::validate(bool has_second_reference) const {
  require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0, ErrorCategory::invalid_argument,
          "alpha must lie in [0,1]");
  if (partial) require(!regions.empty(), ErrorCategory::invalid_argument, "partial transfer needs at least one region");
  std::set<Region> seen(regions.begin(), regions.end());
  require(seen.size() == regions.size(), ErrorCategory::invalid_argument, "duplicate region in selection");
  require(pattern_source == PatternSource::first || has_second_reference, ErrorCategory::invalid_argument,
          "pattern_source=second requires a second reference");
}

void to_json(nlohmann::json& j, const TransferRequest& r) {
  std::vector<std::string> regions;
  for (Region g : r.regions) regions.push_back(uvgeom::region_name(g));
  j = {{"use_color", r.use_color},
       {"use_pattern", r.use_pattern},
       {"alpha", r.alpha},
       {"partial", r.partial},
       {"regions", regions},
       {"pattern_source", r.pattern_source == PatternSource::first ? "first" : "second"},
       {"seed", r.seed}};
}

void from_json(const nlohmann::json& j, TransferRequest& r) {
  r = TransferRequest{};
  r.use_color = j.value("use_color", r.use_color);
  r.use_pattern = j.value("use_pattern", r.use_pattern);
  r.alpha = j.value("alpha", r.alpha);
  r.partial = j.value("partial", r.partial);
  if (j.contains("regions"))
    for (const auto& name : j.at("regions")) r.regions.push_back(uvgeom::parse_region(name.get<std::string>()));
  const std::string src = j.value("pattern_source", std::string("first"));
  require(src == "first" || src == "second", ErrorCategory::invalid_argument, "pattern_source must be first or second");
  r.pattern_source = src == "first" ? PatternSource::first : PatternSource::second;
  r.seed = j.value("seed", r.seed);
}

TextureMap fuse(const TextureMap& t_ref, const TextureMap& t_color, const PatternMask& mask) {
  require_same_size(t_ref, t_color, "fuse");
  require_same_size(t_ref, mask, "fuse mask");
  require_unit_mask(mask, "fuse");
  const auto m = mask.values();
  return blend(t_color, t_ref, [&](std::size_t i) { return m[i]; });
}

TextureMap interpolate(const TextureMap& t_a, const TextureMap& t_b, double alpha) {
  require(std::isfinite(alpha) && alpha >= 0.0 && alpha <= 1.0, ErrorCategory::invalid_argument,
          "interpolate: alpha must lie in [0,1]");
  require_same_size(t_a, t_b, "interpolate");
  const float a = static_cast<float>(alpha);
  return blend(t_b, t_a, [a](std::size_t) { return a; });
}

SoftMask selection_mask(const uvgeom::RegionMaskSet& masks, const RegionSelection& sel, const Plane* valid) {
  require(!sel.regions.empty() || sel.full_face, ErrorCategory::invalid_argument, "empty region selection");
  SoftMask m(masks.skin.height(), masks.skin.width());
  auto out = m.values();
  for (Region r : sel.regions) {
    const auto v = masks.get(r).values();
    require(v.size() == out.size(), ErrorCategory::shape_mismatch, "region masks differ in size");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], v[i]);
  }
  if (sel.full_face) {
    require(valid != nullptr, ErrorCategory::invalid_argument, "full-face selection needs the valid region");
    require_same_size(m, *valid, "selection_mask valid");
    const auto v = valid->values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], v[i]);
  }
  return m;
}

TextureMap partial_apply(const TextureMap& t_src, const TextureMap& t_full, const uvgeom::RegionMaskSet& masks,
                         const RegionSelection& sel, const Plane* valid) {
  require_same_size(t_src, t_full, "partial_apply");
  const SoftMask m = selection_mask(masks, sel, valid);
  require_same_size(t_src, m, "partial_apply mask");
  const auto mv = m.values();
  return blend(t_src, t_full, [&](std::size_t i) { return mv[i]; });
}

}  // namespace uvmakeup::fusion
