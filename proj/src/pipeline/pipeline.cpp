#include "uvmakeup/pipeline/pipeline.hpp"

#include <chrono>
#include <future>

#include <spdlog/spdlog.h>

#include "uvmakeup/core/checksum.hpp"
#include "uvmakeup/core/image_io.hpp"
#include "uvmakeup/synth/datasets.hpp"
#include "uvmakeup/uvgeom/render.hpp"
#include "uvmakeup/uvgeom/texture.hpp"

namespace fs = std::filesystem;

namespace uvmakeup::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

uvgeom::PositionMap locate(const uvgeom::GeometryProvider& geo, const Image& image, const char* which) {
  try {
    return geo.estimate(image);
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::geometry_failure) throw;
    fail(ErrorCategory::geometry_failure, std::string(which) + ": " + e.what(), which);
  }
}

}  // namespace

void Models::require_for(const fusion::TransferRequest& req, bool mask_supplied) const {
  require(geometry != nullptr, ErrorCategory::model_missing, "no geometry provider configured");
  if (req.use_color)
    require(color && color->initialized(), ErrorCategory::model_missing, "color branch enabled but no color model loaded");
  if (req.use_pattern && !mask_supplied)
    require(pattern && pattern->initialized(), ErrorCategory::model_missing,
            "pattern branch enabled but no segmentation model loaded");
}

void save_models(const Models& models, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json index = {{"format", kModelsFormat}};
  if (models.color) {
    nn::save_checkpoint(dir / "color.uvmc", models.color->to_checkpoint(0));
    index["color"] = "color.uvmc";
  }
  if (models.pattern) {
    nn::save_checkpoint(dir / "pattern.uvmc", models.pattern->to_checkpoint(0));
    index["pattern"] = "pattern.uvmc";
  }
  if (models.geometry) index["geometry"] = models.geometry->name();
  io::write_text(dir / "models.json", index.dump(2) + "\n");
}

Models load_models(const fs::path& dir, std::shared_ptr<const uvgeom::GeometryProvider> geometry) {
  const fs::path index_path = dir / "models.json";
  require(fs::exists(index_path), ErrorCategory::not_found, "no models.json in " + dir.string());
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(io::read_text(index_path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::checkpoint, "models.json is not valid JSON", e.what());
  }
  require(index.value("format", 0) == kModelsFormat, ErrorCategory::checkpoint,
          "models.json format " + std::to_string(index.value("format", 0)) + " is not supported (expected " +
              std::to_string(kModelsFormat) + ")");
  Models m;
  if (index.contains("color")) {
    const auto ck = nn::load_checkpoint(dir / index.at("color").get<std::string>(), color::ColorNet::kCheckpointKind);
    m.color = std::make_shared<const color::ColorNet>(color::ColorNet::from_checkpoint(ck));
  }
  if (index.contains("pattern")) {
    const auto ck = nn::load_checkpoint(dir / index.at("pattern").get<std::string>(), pattern::SegNet::kCheckpointKind);
    m.pattern = std::make_shared<const pattern::SegNet>(pattern::SegNet::from_checkpoint(ck));
  }
  m.geometry = geometry ? std::move(geometry) : std::make_shared<const uvgeom::SilhouetteFitProvider>();
  const int uv = m.geometry->uv_size();
  if (m.color)
    require(m.color->config().uv_size == uv, ErrorCategory::checkpoint, "color model UV size differs from geometry");
  if (m.pattern)
    require(m.pattern->config().uv_size == uv, ErrorCategory::checkpoint,
            "segmentation model UV size differs from geometry");
  return m;
}

std::map<std::string, std::string> model_checksums(const Models& models) {
  std::map<std::string, std::string> out;
  if (models.color) out["color"] = nn::parameter_checksum(models.color->state());
  if (models.pattern) out["pattern"] = nn::parameter_checksum(models.pattern->state());
  return out;
}

PreparedReference prepare_reference(const Image& reference, const Models& models, bool with_mask,
                                    const char* which) {
  require(models.geometry != nullptr, ErrorCategory::model_missing, "no geometry provider configured");
  PreparedReference p;
  p.position = locate(*models.geometry, reference, which);
  p.texture = uvgeom::extract_texture(reference, p.position).texture;
  if (with_mask && models.pattern && models.pattern->initialized())
    p.mask = pattern::predict_mask(*models.pattern, p.texture);
  return p;
}

TransferResult transfer(const TransferInputs& in, const fusion::TransferRequest& req, const Models& models) {
  require(in.source && in.reference, ErrorCategory::invalid_argument, "transfer needs a source and a reference");
  const bool two_styles = in.reference2 != nullptr;
  req.validate(two_styles);
  models.require_for(req, in.mask_override != nullptr);
  const auto t0 = Clock::now();
  // Segmentation runs inside transfer_prepared's pattern branch.
  const PreparedReference ref = prepare_reference(*in.reference, models, false, "reference");
  std::optional<PreparedReference> ref2;
  if (two_styles) ref2 = prepare_reference(*in.reference2, models, false, "reference2");
  const double prep_ms = ms_since(t0);
  TransferResult r = transfer_prepared(*in.source, ref, ref2 ? &*ref2 : nullptr, in.mask_override, req, models,
                                       in.keep_intermediates);
  r.timings_ms["reference"] = prep_ms;
  r.timings_ms["total"] += prep_ms;
  return r;
}

TransferResult transfer_prepared(const Image& source, const PreparedReference& reference,
                                 const PreparedReference* reference2, const PatternMask* mask_override,
                                 const fusion::TransferRequest& req, const Models& models, bool keep_intermediates) {
  const bool two_styles = reference2 != nullptr;
  req.validate(two_styles);
  const PreparedReference& pattern_ref = req.pattern_source == fusion::PatternSource::second ? *reference2 : reference;
  const PatternMask* prepared_mask = mask_override ? mask_override : (pattern_ref.mask.empty() ? nullptr : &pattern_ref.mask);
  models.require_for(req, prepared_mask != nullptr);

  TransferResult result;
  const auto t_all = Clock::now();

  auto t0 = Clock::now();
  const uvgeom::PositionMap s_pos = locate(*models.geometry, source, "source");
  result.timings_ms["geometry"] = ms_since(t0);

  t0 = Clock::now();
  const TextureMap t_src = uvgeom::extract_texture(source, s_pos).texture;
  result.timings_ms["extract"] = ms_since(t0);
  const TextureMap& t_ref = reference.texture;
  const TextureMap& t_pattern = pattern_ref.texture;
  require_same_size(t_src, t_ref, "reference texture");
  if (two_styles) require_same_size(t_src, reference2->texture, "second reference texture");
  if (prepared_mask) require_same_size(t_src, *prepared_mask, "pattern mask");

  // The branches share only immutable inputs, so their order cannot matter.
  auto color_branch = std::async(std::launch::async, [&] {
    const auto start = Clock::now();
    std::pair<TextureMap, std::optional<TextureMap>> out{t_src, std::nullopt};
    if (req.use_color) {
      out.first = color::swap(*models.color, t_src, t_ref).first;
      if (two_styles) out.second = color::swap(*models.color, t_src, reference2->texture).first;
    }
    return std::make_pair(std::move(out), ms_since(start));
  });
  auto pattern_branch = std::async(std::launch::async, [&] {
    const auto start = Clock::now();
    PatternMask mask(t_src.height(), t_src.width());
    if (req.use_pattern) mask = prepared_mask ? *prepared_mask : pattern::predict_mask(*models.pattern, t_pattern);
    return std::make_pair(std::move(mask), ms_since(start));
  });
  auto [colors, color_ms] = color_branch.get();
  auto [mask, pattern_ms] = pattern_branch.get();
  result.timings_ms["color"] = color_ms;
  result.timings_ms["pattern"] = pattern_ms;

  t0 = Clock::now();
  TextureMap color_tex = two_styles ? fusion::interpolate(colors.first, colors.second.value_or(t_src), req.alpha)
                                    : fusion::interpolate(colors.first, t_src, req.alpha);
  if (req.partial) {
    const uvgeom::UvLayout layout(t_src.height());
    color_tex = fusion::partial_apply(t_src, color_tex, layout.region_masks(),
                                      fusion::RegionSelection{req.regions, false});
  }
  TextureMap fused = req.use_pattern ? fusion::fuse(t_pattern, color_tex, mask) : color_tex;
  result.timings_ms["fusion"] = ms_since(t0);

  t0 = Clock::now();
  result.output = uvgeom::render(s_pos, fused, source).image;
  result.timings_ms["render"] = ms_since(t0);
  result.timings_ms["total"] = ms_since(t_all);

  if (req.use_pattern) {
    for (float v : mask.values()) result.pattern_detected |= v > 0.5f;
    if (!result.pattern_detected) result.metadata["pattern"] = "no pattern detected in the reference; zero-mask path";
  }
  result.metadata["request"] = req;
  result.metadata["mask_override"] = mask_override != nullptr;

  if (keep_intermediates) {
    result.intermediates = Intermediates{s_pos,
                                         reference.position,
                                         t_src,
                                         t_ref,
                                         two_styles ? std::optional<TextureMap>(reference2->texture) : std::nullopt,
                                         color_tex,
                                         t_pattern,
                                         std::move(mask),
                                         std::move(fused)};
  }
  return result;
}

TransferResult transfer(const Image& source, const Image& reference, const fusion::TransferRequest& req,
                        const Models& models, bool keep_intermediates) {
  TransferInputs in;
  in.source = &source;
  in.reference = &reference;
  in.keep_intermediates = keep_intermediates;
  return transfer(in, req, models);
}

void dump_intermediates(const Intermediates& im, const fs::path& dir) {
  fs::create_directories(dir);
  uvgeom::write_uvpm(dir / "source_position.uvpm", im.source_position);
  uvgeom::write_uvpm(dir / "reference_position.uvpm", im.reference_position);
  io::write_png(dir / "source_texture.png", im.source_texture);
  io::write_png(dir / "reference_texture.png", im.reference_texture);
  if (im.reference2_texture) io::write_png(dir / "reference2_texture.png", *im.reference2_texture);
  io::write_png(dir / "color_texture.png", im.color_texture);
  io::write_png(dir / "pattern_texture.png", im.pattern_texture);
  io::write_png(dir / "mask.png", im.mask);
  io::write_png(dir / "fused_texture.png", im.fused);
}

metrics::EvalReport evaluate_segmentation(const pattern::SegNet& net, const fs::path& dataset,
                                          const std::string& split) {
  const auto records = synth::read_manifest(dataset);
  metrics::EvalReport report;
  report.task = "seg";
  report.dataset = dataset.string();
  report.model = nn::parameter_checksum(net.state());
  report.config_hash = sha256_hex(pattern::to_json(net.config()).dump());
  for (const auto& r : records) {
    if (r.value("split", "") != split) continue;
    const auto& files = r.at("files");
    const TextureMap tex(io::read_png(dataset / files.at("texture").get<std::string>()));
    const PatternMask gt = io::read_png_gray(dataset / files.at("mask").get<std::string>());
    const metrics::IouStats s = metrics::iou_stats(gt, pattern::predict_mask(net, tex));
    metrics::EvalSample sample{r.at("id").get<std::string>(), {{"miou", s.miou}, {"fg_iou", s.foreground}}, {}, {}};
    if (s.vacuous_foreground) sample.flags.push_back("vacuous_foreground");
    if (s.vacuous_background) sample.flags.push_back("vacuous_background");
    report.add(std::move(sample));
  }
  require(!report.samples().empty(), ErrorCategory::empty_dataset, "no '" + split + "' samples in " + dataset.string());
  return report;
}

metrics::EvalReport evaluate_transfer(const Models& models, const fs::path& dataset,
                                      const TransferEvalOptions& options) {
  const auto records = synth::read_manifest(dataset);
  metrics::EvalReport report;
  report.task = "transfer";
  report.dataset = dataset.string();
  for (const auto& [name, sum] : model_checksums(models))
    report.model += (report.model.empty() ? "" : " ") + name + ":" + sum.substr(0, 16);
  report.config_hash = sha256_hex(nlohmann::json{{"ground_truth_mask", options.ground_truth_mask},
                                                 {"use_color", options.use_color},
                                                 {"embedder", options.embedder ? options.embedder->name() : ""}}
                                      .dump());
  fusion::TransferRequest req;
  req.use_color = options.use_color;
  int done = 0;
  for (const auto& r : records) {
    if (options.limit > 0 && done >= options.limit) break;
    ++done;
    const auto& files = r.at("files");
    const auto path = [&](const char* key) { return dataset / files.at(key).get<std::string>(); };
    const Image source = io::read_png(path("source"));
    const Image reference = io::read_png(path("reference"));
    const Image truth = io::read_png(path("ground_truth"));
    uvgeom::PositionMap s_pos = uvgeom::read_uvpm(path("source_position"));
    auto store = std::make_shared<uvgeom::PositionMapStore>(models.geometry, s_pos.height());
    store->add(source, std::move(s_pos));
    store->add(reference, uvgeom::read_uvpm(path("reference_position")));
    Models local = models;
    local.geometry = store;

    PatternMask gt_mask;
    TransferInputs in;
    in.source = &source;
    in.reference = &reference;
    if (options.ground_truth_mask) {
      gt_mask = io::read_png_gray(path("mask"));
      in.mask_override = &gt_mask;
    }
    metrics::EvalSample sample;
    sample.id = r.at("id").get<std::string>();
    const TransferResult out = transfer(in, req, local);
    sample.values["ms_ssim"] = metrics::ms_ssim(out.output, truth);
    if (options.embedder) {
      try {
        sample.values["identity"] = metrics::identity_similarity(source, out.output, *options.embedder);
      } catch (const Error& e) {
        sample.errors["identity"] = e.what();
      }
    }
    if (!out.pattern_detected) sample.flags.push_back("no_pattern_detected");
    report.add(std::move(sample));
  }
  require(!report.samples().empty(), ErrorCategory::empty_dataset, "no triplets in " + dataset.string());
  return report;
}

}  // namespace uvmakeup::pipeline
