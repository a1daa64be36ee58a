#include "uvmakeup/uvgeom/geometry_provider.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "uvmakeup/core/checksum.hpp"
#include "uvmakeup/uvgeom/render.hpp"

namespace uvmakeup::uvgeom {
namespace {

struct Moments {
  double area = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double orientation = 0.0;  // major-axis angle from +x, radians
};

Moments moments_of(const std::vector<std::uint8_t>& mask, int height, int width) {
  Moments m;
  double sx = 0.0, sy = 0.0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (mask[static_cast<std::size_t>(y) * width + x]) {
        m.area += 1.0;
        sx += x;
        sy += y;
      }
  if (m.area == 0.0) return m;
  m.cx = sx / m.area;
  m.cy = sy / m.area;
  double mxx = 0.0, myy = 0.0, mxy = 0.0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (mask[static_cast<std::size_t>(y) * width + x]) {
        const double dx = x - m.cx;
        const double dy = y - m.cy;
        mxx += dx * dx;
        myy += dy * dy;
        mxy += dx * dy;
      }
  m.orientation = 0.5 * std::atan2(2.0 * mxy, mxx - myy);
  return m;
}

double wrap_half_pi(double a) {
  while (a > std::numbers::pi / 2) a -= std::numbers::pi;
  while (a < -std::numbers::pi / 2) a += std::numbers::pi;
  return a;
}

double iou(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]);
    uni += (a[i] || b[i]);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

FixedPoseProvider::FixedPoseProvider(HeadPose pose, int uv_size) : face_(uv_size), pose_(pose) {}

PositionMap FixedPoseProvider::estimate(const Image& image) const {
  PositionMap pos = face_.pose(pose_);
  try {
    check_fits_image(pos, image.height(), image.width());
  } catch (const Error& e) {
    fail(ErrorCategory::geometry_failure, "fixed pose does not fit the image", e.what());
  }
  return pos;
}

SilhouetteFitProvider::SilhouetteFitProvider(SilhouetteFitOptions options, int uv_size)
    : face_(uv_size), options_(options) {}

Plane SilhouetteFitProvider::foreground(const Image& image) const {
  const int h = image.height();
  const int w = image.width();
  std::array<std::vector<float>, 3> border;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (y > 1 && y < h - 2 && x > 1 && x < w - 2) continue;
      for (int c = 0; c < 3; ++c) border[c].push_back(image.at(y, x, c));
    }
  std::array<float, 3> bg{};
  for (int c = 0; c < 3; ++c) {
    auto& b = border[c];
    std::nth_element(b.begin(), b.begin() + b.size() / 2, b.end());
    bg[c] = b[b.size() / 2];
  }
  Plane fg(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double d = 0.0;
      for (int c = 0; c < 3; ++c) d = std::max(d, static_cast<double>(std::abs(image.at(y, x, c) - bg[c])));
      fg.at(y, x) = d > options_.foreground_threshold ? 1.0f : 0.0f;
    }
  return fg;
}

HeadPose SilhouetteFitProvider::fit_pose(const Image& image) const {
  const int h = image.height();
  const int w = image.width();
  const Plane fg = foreground(image);
  std::vector<std::uint8_t> observed(fg.pixel_count());
  for (std::size_t i = 0; i < observed.size(); ++i) observed[i] = fg.values()[i] > 0.5f;
  const Moments obs = moments_of(observed, h, w);
  const double fraction = obs.area / (static_cast<double>(h) * w);
  if (fraction < options_.min_area_fraction) {
    fail(ErrorCategory::geometry_failure, "no face detected",
         "foreground covers " + std::to_string(fraction * 100.0) + "% of the image");
  }
  if (fraction > options_.max_area_fraction) {
    fail(ErrorCategory::geometry_failure, "no face detected",
         "no uniform backdrop: foreground covers " + std::to_string(fraction * 100.0) + "%");
  }

  // Candidate pose aligned to the observed moments for a given yaw.
  const int canvas = 2 * face_.uv_size();
  const double ref_scale = face_.uv_size() * 0.3;
  auto aligned = [&](double yaw) {
    HeadPose probe{yaw, 0.0, ref_scale, canvas / 2.0, canvas / 2.0};
    const RasterResult r = rasterize(face_.pose(probe), canvas, canvas);
    const Moments model = moments_of(r.covered, canvas, canvas);
    HeadPose pose = probe;
    pose.roll_deg = wrap_half_pi(obs.orientation - model.orientation) * 180.0 / std::numbers::pi;
    pose.scale = ref_scale * std::sqrt(obs.area / std::max(model.area, 1.0));
    const double k = pose.scale / ref_scale;
    const double dx = (model.cx - probe.center_x) * k;
    const double dy = (model.cy - probe.center_y) * k;
    const double rr = pose.roll_deg * std::numbers::pi / 180.0;
    pose.center_x = obs.cx - (dx * std::cos(rr) - dy * std::sin(rr));
    pose.center_y = obs.cy - (dx * std::sin(rr) + dy * std::cos(rr));
    return pose;
  };
  auto score = [&](const HeadPose& pose) {
    return iou(rasterize(face_.pose(pose), h, w).covered, observed);
  };

  HeadPose best = aligned(0.0);
  double best_score = score(best);
  const double coarse = 4.0;
  for (double yaw = -options_.max_yaw_deg; yaw <= options_.max_yaw_deg + 1e-9; yaw += coarse) {
    const HeadPose p = aligned(yaw);
    const double s = score(p);
    if (s > best_score) {
      best_score = s;
      best = p;
    }
  }
  const double centre = best.yaw_deg;
  for (double yaw = centre - coarse; yaw <= centre + coarse + 1e-9; yaw += 0.5) {
    const HeadPose p = aligned(yaw);
    const double s = score(p);
    if (s > best_score) {
      best_score = s;
      best = p;
    }
  }
  return best;
}

PositionMap SilhouetteFitProvider::estimate(const Image& image) const {
  const HeadPose pose = fit_pose(image);
  PositionMap pos = face_.pose(pose);
  try {
    check_fits_image(pos, image.height(), image.width());
  } catch (const Error& e) {
    fail(ErrorCategory::geometry_failure, "fitted face extends beyond the image", e.what());
  }
  return pos;
}

std::string image_digest(const Image& image) {
  const auto values = image.values();
  std::vector<std::uint8_t> bytes(8 + values.size() * sizeof(float));
  const std::uint32_t dims[2] = {static_cast<std::uint32_t>(image.height()),
                                 static_cast<std::uint32_t>(image.width())};
  std::memcpy(bytes.data(), dims, 8);
  std::memcpy(bytes.data() + 8, values.data(), values.size() * sizeof(float));
  return sha256_hex(bytes);
}

std::filesystem::path sidecar_path(const std::filesystem::path& image_path) {
  std::filesystem::path p = image_path;
  p.replace_extension(".uvpm");
  return p;
}

PositionMapStore::PositionMapStore(std::shared_ptr<const GeometryProvider> fallback, int uv_size)
    : fallback_(std::move(fallback)), uv_size_(uv_size) {}

PositionMap PositionMapStore::estimate(const Image& image) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = maps_.find(image_digest(image)); it != maps_.end()) return it->second;
  }
  if (fallback_) return fallback_->estimate(image);
  fail(ErrorCategory::geometry_failure, "no position map registered for this image");
}

void PositionMapStore::add(const Image& image, PositionMap pos) {
  require(pos.height() == uv_size_ && pos.width() == uv_size_, ErrorCategory::geometry_mismatch,
          "position map UV size does not match the store layout");
  check_fits_image(pos, image.height(), image.width());
  std::lock_guard lock(mutex_);
  maps_.insert_or_assign(image_digest(image), std::move(pos));
}

bool PositionMapStore::add_sidecar(const Image& image, const std::filesystem::path& image_path) {
  const auto path = sidecar_path(image_path);
  if (!std::filesystem::exists(path)) return false;
  add(image, read_uvpm(path));
  return true;
}

std::size_t PositionMapStore::size() const {
  std::lock_guard lock(mutex_);
  return maps_.size();
}

}  // namespace uvmakeup::uvgeom
