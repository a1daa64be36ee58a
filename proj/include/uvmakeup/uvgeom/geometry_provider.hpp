#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "uvmakeup/core/raster.hpp"
#include "uvmakeup/uvgeom/face_model.hpp"
#include "uvmakeup/uvgeom/position_map.hpp"

namespace uvmakeup::uvgeom {

/// Image -> PositionMap. Implementations are deterministic and share one UV
/// layout; failures throw Error{geometry_failure}.
class GeometryProvider {
 public:
  virtual ~GeometryProvider() = default;
  virtual int uv_size() const = 0;
  virtual PositionMap estimate(const Image& image) const = 0;
  virtual std::string name() const = 0;
};

/// Returns one fixed synthetic pose for every image.
class FixedPoseProvider final : public GeometryProvider {
 public:
  explicit FixedPoseProvider(HeadPose pose, int uv_size = UvLayout::kDefaultSize);
  int uv_size() const override { return face_.uv_size(); }
  PositionMap estimate(const Image& image) const override;
  std::string name() const override { return "fixed-pose"; }

 private:
  ParametricFace face_;
  HeadPose pose_;
};

struct SilhouetteFitOptions {
  /// Max per-channel distance from the border color to count as foreground.
  double foreground_threshold = 0.06;
  /// Minimum / maximum foreground fraction of the image for a detection.
  double min_area_fraction = 0.03;
  double max_area_fraction = 0.85;
  double max_yaw_deg = 36.0;
};

/// Fits the parametric face to the foreground silhouette of an image shot
/// against a near-uniform backdrop: moments give translation, scale and roll;
/// yaw is chosen by silhouette IoU over a coarse-to-fine grid.
class SilhouetteFitProvider final : public GeometryProvider {
 public:
  explicit SilhouetteFitProvider(SilhouetteFitOptions options = {},
                                 int uv_size = UvLayout::kDefaultSize);
  int uv_size() const override { return face_.uv_size(); }
  PositionMap estimate(const Image& image) const override;
  std::string name() const override { return "silhouette-fit"; }

  HeadPose fit_pose(const Image& image) const;
  Plane foreground(const Image& image) const;

 private:
  ParametricFace face_;
  SilhouetteFitOptions options_;
};

/// Externally produced position maps keyed by image content, with an
/// optional fallback provider. Thread-safe.
class PositionMapStore final : public GeometryProvider {
 public:
  explicit PositionMapStore(std::shared_ptr<const GeometryProvider> fallback = nullptr,
                            int uv_size = UvLayout::kDefaultSize);

  int uv_size() const override { return uv_size_; }
  PositionMap estimate(const Image& image) const override;
  std::string name() const override { return "position-map-store"; }

  void add(const Image& image, PositionMap pos);
  /// Registers `<image_path without extension>.uvpm` for the given image if it exists.
  bool add_sidecar(const Image& image, const std::filesystem::path& image_path);
  std::size_t size() const;

 private:
  std::shared_ptr<const GeometryProvider> fallback_;
  int uv_size_;
  mutable std::mutex mutex_;
  std::map<std::string, PositionMap> maps_;
};

std::filesystem::path sidecar_path(const std::filesystem::path& image_path);

/// Content digest used to key position maps.
std::string image_digest(const Image& image);

}  // namespace uvmakeup::uvgeom
