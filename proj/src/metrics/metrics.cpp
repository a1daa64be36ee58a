#include "uvmakeup/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "uvmakeup/color/histogram.hpp"
#include "uvmakeup/core/image_io.hpp"
#include "uvmakeup/core/rng.hpp"

namespace uvmakeup::metrics {

IouStats iou_stats(const PatternMask& gt, const PatternMask& pr, float threshold) {
  require_same_size(gt, pr, "miou");
  std::size_t fg_inter = 0, fg_union = 0, bg_inter = 0, bg_union = 0;
  const auto g = gt.values();
  const auto p = pr.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const bool a = g[i] > threshold;
    const bool b = p[i] > threshold;
    fg_inter += a && b;
    fg_union += a || b;
    bg_inter += !a && !b;
    bg_union += !a || !b;
  }
  IouStats s;
  s.vacuous_foreground = fg_union == 0;
  s.vacuous_background = bg_union == 0;
  s.foreground = fg_union == 0 ? 1.0 : static_cast<double>(fg_inter) / static_cast<double>(fg_union);
  s.background = bg_union == 0 ? 1.0 : static_cast<double>(bg_inter) / static_cast<double>(bg_union);
  s.miou = 0.5 * (s.foreground + s.background);
  return s;
}

double miou(const PatternMask& gt, const PatternMask& pr, float threshold) {
  return iou_stats(gt, pr, threshold).miou;
}

namespace {

using Grid = std::vector<double>;

struct Channel {
  int h;
  int w;
  Grid v;
};

Channel take_channel(const RgbRaster& r, int c) {
  Channel out{r.height(), r.width(), Grid(r.pixel_count())};
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x) out.v[static_cast<std::size_t>(y) * r.width() + x] = r.at(y, x, c);
  return out;
}

Channel pool2(const Channel& in) {
  Channel out{in.h / 2, in.w / 2, {}};
  out.v.resize(static_cast<std::size_t>(out.h) * out.w);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x) {
      const auto at = [&](int yy, int xx) { return in.v[static_cast<std::size_t>(yy) * in.w + xx]; };
      out.v[static_cast<std::size_t>(y) * out.w + x] =
          0.25 * (at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) + at(2 * y + 1, 2 * x) + at(2 * y + 1, 2 * x + 1));
    }
  return out;
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(size);
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - (size - 1) / 2.0;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable 'valid' filtering.
Grid filter(const Grid& in, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  Grid tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * in[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  Grid out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

// Mean SSIM and mean contrast-structure term at one scale.
std::pair<double, double> ssim_terms(const Channel& a, const Channel& b, const std::vector<double>& k,
                                     const MsSsimOptions& opt) {
  const double c1 = opt.k1 * opt.k1;
  const double c2 = opt.k2 * opt.k2;
  Grid aa(a.v.size()), bb(a.v.size()), ab(a.v.size());
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    aa[i] = a.v[i] * a.v[i];
    bb[i] = b.v[i] * b.v[i];
    ab[i] = a.v[i] * b.v[i];
  }
  const Grid mu_a = filter(a.v, a.h, a.w, k);
  const Grid mu_b = filter(b.v, a.h, a.w, k);
  const Grid s_aa = filter(aa, a.h, a.w, k);
  const Grid s_bb = filter(bb, a.h, a.w, k);
  const Grid s_ab = filter(ab, a.h, a.w, k);
  double ssim = 0.0;
  double cs = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i];
    const double mb = mu_b[i];
    const double va = s_aa[i] - ma * ma;
    const double vb = s_bb[i] - mb * mb;
    const double cov = s_ab[i] - ma * mb;
    const double l = (2.0 * (ma * mb) + c1) / (ma * ma + mb * mb + c1);
    const double s = (2.0 * cov + c2) / (va + vb + c2);
    ssim += l * s;
    cs += s;
  }
  const double n = static_cast<double>(mu_a.size());
  return {ssim / n, cs / n};
}

}  // namespace

MsSsimResult ms_ssim_detail(const RgbRaster& a, const RgbRaster& b, const MsSsimOptions& opt) {
  require_same_size(a, b, "ms_ssim");
  require(opt.scales >= 1 && opt.scales <= static_cast<int>(kMsSsimWeights.size()), ErrorCategory::invalid_argument,
          "ms_ssim: scales must be 1..5");
  const int smallest = std::min(a.height(), a.width());
  require(smallest >= opt.window, ErrorCategory::invalid_argument,
          "ms_ssim: image smaller than the " + std::to_string(opt.window) + "px window");
  int scales = 1;
  while (scales < opt.scales && (smallest >> scales) >= opt.window) ++scales;
  if (scales < opt.scales)
    spdlog::warn("ms_ssim: {}x{} image supports only {} of {} scales", a.height(), a.width(), scales, opt.scales);

  // The canonical weights sum to 1.0001; they are used verbatim at full depth.
  double wsum = 1.0;
  if (scales < static_cast<int>(kMsSsimWeights.size())) {
    wsum = 0.0;
    for (int s = 0; s < scales; ++s) wsum += kMsSsimWeights[s];
  }
  const auto kernel = gaussian_kernel(opt.window, opt.sigma);

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    Channel ca = take_channel(a, c);
    Channel cb = take_channel(b, c);
    double value = 1.0;
    for (int s = 0; s < scales; ++s) {
      const auto [ssim, cs] = ssim_terms(ca, cb, kernel, opt);
      const double w = kMsSsimWeights[s] / wsum;
      value *= std::pow(std::clamp(s == scales - 1 ? ssim : cs, opt.floor, 1.0), w);
      if (s + 1 < scales) {
        ca = pool2(ca);
        cb = pool2(cb);
      }
    }
    total += value;
  }
  return {total / 3.0, scales};
}

double ms_ssim(const RgbRaster& a, const RgbRaster& b) { return ms_ssim_detail(a, b).value; }

ProjectionEmbedder::ProjectionEmbedder(int grid, int dims, std::uint64_t seed) : grid_(grid), dims_(dims) {
  require(grid >= 2 && dims >= 1, ErrorCategory::invalid_argument, "ProjectionEmbedder: bad dimensions");
  Rng rng = make_rng(seed, 0x1d);
  projection_.resize(static_cast<std::size_t>(dims) * grid * grid);
  for (double& v : projection_) v = normal(rng);
}

std::vector<double> ProjectionEmbedder::embed(const Image& image) const {
  require(image.height() >= grid_ && image.width() >= grid_, ErrorCategory::invalid_argument,
          "ProjectionEmbedder: image smaller than the grid");
  std::vector<double> cells(static_cast<std::size_t>(grid_) * grid_, 0.0);
  std::vector<double> counts(cells.size(), 0.0);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const std::size_t cell =
          static_cast<std::size_t>(y * grid_ / image.height()) * grid_ + x * grid_ / image.width();
      const float* p = image.pixel(y, x);
      cells[cell] += 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
      counts[cell] += 1.0;
    }
  double mean = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    cells[i] /= counts[i];
    mean += cells[i] / static_cast<double>(cells.size());
  }
  double energy = 0.0;
  for (double& v : cells) {
    v -= mean;
    energy += v * v;
  }
  if (energy < 1e-12) fail(ErrorCategory::geometry_failure, "ProjectionEmbedder: featureless image, no face found");
  std::vector<double> out(dims_, 0.0);
  for (int d = 0; d < dims_; ++d) {
    const double* row = projection_.data() + static_cast<std::size_t>(d) * cells.size();
    for (std::size_t i = 0; i < cells.size(); ++i) out[d] += row[i] * cells[i];
  }
  return out;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && !a.empty(), ErrorCategory::shape_mismatch, "cosine_similarity: size mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  require(aa > 0.0 && bb > 0.0, ErrorCategory::numeric, "cosine_similarity: zero embedding");
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

double identity_similarity(const Image& a, const Image& b, const FaceEmbedder& embedder) {
  return cosine_similarity(embedder.embed(a), embedder.embed(b));
}

double regional_histogram_distance(const TextureMap& a, const TextureMap& b, const SoftMask& mask) {
  const auto ha = color::masked_histogram(a, mask);
  const auto hb = color::masked_histogram(b, mask);
  double total = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < color::kHistogramBins; ++k) total += std::abs(ha[c][k] - hb[c][k]);
  return total / 6.0;
}

void EvalReport::add(EvalSample sample) {
  for (const auto& [name, v] : sample.values)
    require(std::isfinite(v), ErrorCategory::numeric, "EvalReport: non-finite " + name + " for " + sample.id);
  samples_.push_back(std::move(sample));
}

std::map<std::string, MetricSummary> EvalReport::summary() const {
  std::map<std::string, MetricSummary> out;
  for (const auto& s : samples_) {
    for (const auto& [name, v] : s.values) {
      auto& m = out[name];
      m.mean += v;
      ++m.count;
    }
    for (const auto& [name, err] : s.errors) ++out[name].excluded;
  }
  for (auto& [name, m] : out)
    if (m.count > 0) m.mean /= static_cast<double>(m.count);
  return out;
}

nlohmann::json EvalReport::summary_json() const {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, m] : summary())
    metrics[name] = {{"mean", m.mean}, {"count", m.count}, {"excluded", m.excluded}};
  std::map<std::string, std::size_t> flags;
  for (const auto& s : samples_)
    for (const auto& f : s.flags) ++flags[f];
  return {{"task", task},          {"dataset", dataset}, {"model", model}, {"config_hash", config_hash},
          {"samples", samples_.size()}, {"metrics", metrics}, {"flags", flags}};
}

std::filesystem::path EvalReport::records_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  return p.replace_extension(".jsonl");
}

void EvalReport::write(const std::filesystem::path& path) const {
  require(records_path(path) != path, ErrorCategory::invalid_argument, "report path must not end in .jsonl");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::string lines;
  for (const auto& s : samples_) lines += nlohmann::json(s).dump() + "\n";
  io::write_text(records_path(path), lines);
  io::write_text(path, summary_json().dump(2) + "\n");
}

EvalReport EvalReport::read(const std::filesystem::path& path) {
  const auto head = nlohmann::json::parse(io::read_text(path));
  EvalReport r;
  r.task = head.value("task", "");
  r.dataset = head.value("dataset", "");
  r.model = head.value("model", "");
  r.config_hash = head.value("config_hash", "");
  std::ifstream in(records_path(path));
  require(static_cast<bool>(in), ErrorCategory::io, "cannot open " + records_path(path).string());
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) r.samples_.push_back(nlohmann::json::parse(line).get<EvalSample>());
  return r;
}

void to_json(nlohmann::json& j, const EvalSample& s) {
  j = {{"id", s.id}, {"values", s.values}};
  if (!s.errors.empty()) j["errors"] = s.errors;
  if (!s.flags.empty()) j["flags"] = s.flags;
}

void from_json(const nlohmann::json& j, EvalSample& s) {
  s.id = j.at("id").get<std::string>();
  s.values = j.at("values").get<std::map<std::string, double>>();
  s.errors = j.value("errors", std::map<std::string, std::string>{});
  s.flags = j.value("flags", std::vector<std::string>{});
}

}  // namespace uvmakeup::metrics
