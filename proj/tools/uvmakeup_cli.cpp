#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "uvmakeup/color/train.hpp"
#include "uvmakeup/core/error.hpp"
#include "uvmakeup/core/image_io.hpp"
#include "uvmakeup/metrics/metrics.hpp"
#include "uvmakeup/nn/checkpoint.hpp"
#include "uvmakeup/pattern/train.hpp"
#include "uvmakeup/pipeline/pipeline.hpp"
#include "uvmakeup/service/service.hpp"
#include "uvmakeup/synth/datasets.hpp"
#include "uvmakeup/synth/face_synth.hpp"
#include "uvmakeup/synth/sticker.hpp"
#include "uvmakeup/uvgeom/geometry_provider.hpp"
#include "uvmakeup/uvgeom/uv_layout.hpp"

#include "CLI11.hpp"

namespace fs = std::filesystem;
using namespace uvmakeup;

namespace {

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::invalid_argument, "config is not valid JSON: " + path.string(), e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string::npos ? s.size() : comma;
    if (end > start) out.push_back(s.substr(start, end - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Replaces one network in a models directory, keeping the other.
void install_model(const fs::path& dir, std::shared_ptr<const color::ColorNet> color,
                   std::shared_ptr<const pattern::SegNet> seg) {
  pipeline::Models m;
  if (fs::exists(dir / "models.json")) m = pipeline::load_models(dir);
  if (color) m.color = std::move(color);
  if (seg) m.pattern = std::move(seg);
  if (!m.geometry) m.geometry = std::make_shared<const uvgeom::SilhouetteFitProvider>();
  pipeline::save_models(m, dir);
}

std::vector<synth::Sticker> load_stickers(const fs::path& dir) {
  auto lib = synth::StickerLibrary::load(dir);
  for (const auto& r : lib.rejected) spdlog::warn("sticker rejected: {}", r);
  require(!lib.stickers.empty(), ErrorCategory::empty_dataset, "no usable stickers in " + dir.string());
  return std::move(lib.stickers);
}

synth::FaceSet load_faces(const fs::path& dir) {
  const uvgeom::SilhouetteFitProvider provider;
  auto set = synth::FaceSet::load(dir, provider);
  for (const auto& s : set.skipped) spdlog::warn("face skipped: {}", s);
  require(!set.faces.empty(), ErrorCategory::empty_dataset, "no usable faces in " + dir.string());
  return set;
}

Image load_registered(const fs::path& path, uvgeom::PositionMapStore& store) {
  Image img = io::read_png(path);
  store.add_sidecar(img, path);
  return img;
}

struct TransferArgs {
  std::string source, reference, reference2, out, models = "models", dump, regions, pattern_source = "first";
  bool no_color = false, no_pattern = false;
  double alpha = 1.0;
  std::uint64_t seed = 0;
};

int run_transfer(const TransferArgs& a) {
  auto store = std::make_shared<uvgeom::PositionMapStore>(std::make_shared<const uvgeom::SilhouetteFitProvider>());
  const auto models = pipeline::load_models(a.models, store);
  const Image source = load_registered(a.source, *store);
  const Image reference = load_registered(a.reference, *store);
  Image reference2;
  fusion::TransferRequest req;
  req.use_color = !a.no_color;
  req.use_pattern = !a.no_pattern;
  req.alpha = a.alpha;
  req.seed = a.seed;
  if (!a.regions.empty()) {
    req.partial = true;
    for (const auto& r : split_list(a.regions)) req.regions.push_back(uvgeom::parse_region(r));
  }
  pipeline::TransferInputs in;
  in.source = &source;
  in.reference = &reference;
  if (!a.reference2.empty()) {
    reference2 = load_registered(a.reference2, *store);
    in.reference2 = &reference2;
    req.pattern_source = a.pattern_source == "second" ? fusion::PatternSource::second : fusion::PatternSource::first;
  }
  in.keep_intermediates = !a.dump.empty();
  const auto res = pipeline::transfer(in, req, models);
  io::write_png(a.out, res.output);
  if (res.intermediates) pipeline::dump_intermediates(*res.intermediates, a.dump);
  print_json({{"output", a.out},
              {"pattern_detected", res.pattern_detected},
              {"timings_ms", res.timings_ms},
              {"metadata", res.metadata}});
  return 0;
}

int run_train_color(const fs::path& config_path, const std::string& dataset, const std::string& models_dir) {
  auto cfg = color::ColorTrainConfig::from_json(read_json(config_path));
  if (!dataset.empty()) cfg.dataset = dataset;
  if (cfg.dataset.empty()) fail(ErrorCategory::invalid_argument, "no dataset given", "dataset");
  const auto data = color::ColorDataset::load(cfg.dataset);
  spdlog::info("color training on {} makeup / {} bare textures", data.makeup.size(), data.bare.size());
  auto res = color::train_color(data, cfg, [](const color::ColorLogEntry& e) {
    if (e.iteration % 20 == 0)
      spdlog::info("iter {} G {:.4f} D {:.4f}", e.iteration, e.generator.total, e.discriminator);
  });
  nlohmann::json out = {{"iterations", res.log.size()}};
  if (!res.log.empty()) {
    out["first_loss"] = res.log.front().generator.total;
    out["last_loss"] = res.log.back().generator.total;
  }
  std::vector<std::string> cks;
  for (const auto& p : res.checkpoints) cks.push_back(p.string());
  out["checkpoints"] = cks;
  out["checksum"] = nn::parameter_checksum(res.net.state());
  if (!models_dir.empty()) {
    install_model(models_dir, std::make_shared<const color::ColorNet>(std::move(res.net)), nullptr);
    out["models"] = models_dir;
  }
  print_json(out);
  return 0;
}

int run_train_pattern(const fs::path& config_path, const std::string& dataset, const std::string& models_dir) {
  auto cfg = pattern::PatternTrainConfig::from_json(read_json(config_path));
  if (!dataset.empty()) cfg.dataset = dataset;
  if (cfg.dataset.empty()) fail(ErrorCategory::invalid_argument, "no dataset given", "dataset");
  const auto data = synth::load_synt1(cfg.dataset, "train");
  spdlog::info("pattern training on {} samples", data.size());
  auto res = pattern::train_pattern(data, cfg, [](const pattern::PatternLogEntry& e) {
    spdlog::info("epoch {} loss {:.4f}", e.epoch, e.loss);
  });
  nlohmann::json out = {{"epochs", res.log.size()}};
  if (!res.log.empty()) {
    out["first_loss"] = res.log.front().loss;
    out["last_loss"] = res.log.back().loss;
  }
  std::vector<std::string> cks;
  for (const auto& p : res.checkpoints) cks.push_back(p.string());
  out["checkpoints"] = cks;
  out["checksum"] = nn::parameter_checksum(res.net.state());
  if (!models_dir.empty()) {
    install_model(models_dir, nullptr, std::make_shared<const pattern::SegNet>(std::move(res.net)));
    out["models"] = models_dir;
  }
  print_json(out);
  return 0;
}

int run_make_color_data(const fs::path& out, int n, std::uint64_t seed) {
  if (n <= 0) fail(ErrorCategory::invalid_argument, "n must be positive", "n");
  const uvgeom::UvLayout layout;
  fs::create_directories(out / "bare");
  fs::create_directories(out / "makeup");
  // Bare and makeup subjects are distinct, so the data stays unpaired.
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%04d.png", i);
    const auto bare = synth::face_texture(synth::random_subject(2 * i, seed), layout);
    io::write_png(out / "bare" / name, bare);
    const auto other = synth::face_texture(synth::random_subject(2 * i + 1, seed), layout);
    io::write_png(out / "makeup" / name, synth::apply_makeup(other, synth::random_style(i, seed), layout));
  }
  print_json({{"out", out.string()}, {"bare", n}, {"makeup", n}});
  return 0;
}

std::sig_atomic_t volatile g_stop = 0;

int run_serve(const std::string& config_path, int port_override) {
  service::ServiceConfig cfg;
  if (!config_path.empty()) cfg = service::ServiceConfig::load(config_path);
  cfg.apply_env();
  if (port_override >= 0) cfg.port = port_override;
  cfg.validate();
  service::Server server(cfg);
  std::thread loader([&] {
    try {
      server.load_models();
      spdlog::info("models loaded from {}", cfg.models_dir.string());
    } catch (const Error& e) {
      spdlog::error("model load failed: {} ({})", e.what(), category_name(e.category()));
    }
  });
  const int port = server.start();
  spdlog::info("listening on {}:{}", cfg.host, port);
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  loader.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::default_logger());
  spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");

  CLI::App app{"UV-space makeup transfer"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  TransferArgs ta;
  auto* transfer = app.add_subcommand("transfer", "Transfer makeup from a reference onto a source image");
  transfer->add_option("--source", ta.source, "Bare source face")->required()->check(CLI::ExistingFile);
  transfer->add_option("--reference", ta.reference, "Reference face wearing makeup")->required()->check(CLI::ExistingFile);
  transfer->add_option("--out", ta.out, "Output PNG")->required();
  transfer->add_option("--models", ta.models, "Models directory");
  transfer->add_flag("--no-color", ta.no_color, "Skip the color branch");
  transfer->add_flag("--no-pattern", ta.no_pattern, "Skip the pattern branch");
  transfer->add_option("--alpha", ta.alpha, "Interpolation weight of the first reference")->check(CLI::Range(0.0, 1.0));
  transfer->add_option("--regions", ta.regions, "Comma-separated regions (lips,eyes,skin)");
  transfer->add_option("--reference2", ta.reference2, "Second reference for interpolation")->check(CLI::ExistingFile);
  transfer->add_option("--pattern-source", ta.pattern_source, "Reference supplying the pattern")
      ->check(CLI::IsMember({"first", "second"}));
  transfer->add_option("--dump-intermediates", ta.dump, "Directory for intermediate textures");
  transfer->add_option("--seed", ta.seed, "Request seed");

  std::string config, dataset, models_out;
  auto* train_color = app.add_subcommand("train-color", "Train the color network");
  train_color->add_option("--config", config, "Training config JSON")->required()->check(CLI::ExistingFile);
  train_color->add_option("--dataset", dataset, "Overrides the config dataset");
  train_color->add_option("--models", models_out, "Install the result into this models directory");

  auto* train_pattern = app.add_subcommand("train-pattern", "Train the pattern segmentation network");
  train_pattern->add_option("--config", config, "Training config JSON")->required()->check(CLI::ExistingFile);
  train_pattern->add_option("--dataset", dataset, "Overrides the config dataset");
  train_pattern->add_option("--models", models_out, "Install the result into this models directory");

  std::string faces, styles, stickers, out, models = "models";
  int n = 10, threads = 0;
  std::uint64_t seed = 0;
  double test_fraction = 0.25;
  auto* synth1 = app.add_subcommand("synth1", "Generate a pattern segmentation dataset");
  synth1->add_option("--faces", faces, "Face image directory")->required()->check(CLI::ExistingDirectory);
  synth1->add_option("--stickers", stickers, "Sticker directory")->required()->check(CLI::ExistingDirectory);
  synth1->add_option("--n", n, "Samples to append")->check(CLI::PositiveNumber);
  synth1->add_option("--seed", seed, "Dataset seed");
  synth1->add_option("--out", out, "Dataset root")->required();
  synth1->add_option("--test-fraction", test_fraction, "Held-out share")->check(CLI::Range(0.0, 1.0));
  synth1->add_option("--threads", threads, "Worker threads (0 = serial)");

  auto* synth2 = app.add_subcommand("synth2", "Generate transfer evaluation triplets");
  synth2->add_option("--faces", faces, "Face image directory")->required()->check(CLI::ExistingDirectory);
  synth2->add_option("--styles", styles, "Makeup style face directory")->required()->check(CLI::ExistingDirectory);
  synth2->add_option("--stickers", stickers, "Sticker directory")->required()->check(CLI::ExistingDirectory);
  synth2->add_option("--models", models, "Models directory holding the color network");
  synth2->add_option("--n", n, "Triplets to append")->check(CLI::PositiveNumber);
  synth2->add_option("--seed", seed, "Dataset seed");
  synth2->add_option("--out", out, "Dataset root")->required();
  synth2->add_option("--threads", threads, "Worker threads (0 = serial)");

  std::string task, report, split = "test";
  bool gt_mask = false, no_color_eval = false, identity = false;
  int limit = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a model on a synthetic dataset");
  eval->add_option("--task", task, "seg or transfer")->required()->check(CLI::IsMember({"seg", "transfer"}));
  eval->add_option("--dataset", dataset, "Dataset root")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--models", models, "Models directory");
  eval->add_option("--report", report, "Report path (summary JSON; records go next to it)")->required();
  eval->add_option("--split", split, "Split for seg");
  eval->add_flag("--gt-mask", gt_mask, "Use the ground-truth pattern mask (transfer)");
  eval->add_flag("--no-color", no_color_eval, "Disable the color branch (transfer)");
  eval->add_flag("--identity", identity, "Add identity similarity (transfer)");
  eval->add_option("--limit", limit, "Evaluate at most this many triplets");

  bool makeup = false;
  auto* make_faces = app.add_subcommand("make-faces", "Render synthetic face photos with position maps");
  make_faces->add_option("--out", out, "Output directory")->required();
  make_faces->add_option("--n", n, "Number of faces")->check(CLI::PositiveNumber);
  make_faces->add_option("--seed", seed, "Seed");
  make_faces->add_flag("--makeup", makeup, "Apply a random color style to each face");

  int sticker_size = 128;
  auto* make_stickers = app.add_subcommand("make-stickers", "Write procedural RGBA stickers");
  make_stickers->add_option("--out", out, "Output directory")->required();
  make_stickers->add_option("--n", n, "Number of stickers")->check(CLI::PositiveNumber);
  make_stickers->add_option("--seed", seed, "Seed");
  make_stickers->add_option("--size", sticker_size, "Edge length in pixels")->check(CLI::Range(8, 1024));

  auto* make_color = app.add_subcommand("make-color-data", "Write unpaired bare/makeup UV textures");
  make_color->add_option("--out", out, "Output directory")->required();
  make_color->add_option("--n", n, "Textures per domain")->check(CLI::PositiveNumber);
  make_color->add_option("--seed", seed, "Seed");

  int port = -1;
  auto* serve = app.add_subcommand("serve", "Run the REST service");
  serve->add_option("--config", config, "Service config JSON")->check(CLI::ExistingFile);
  serve->add_option("--port", port, "Overrides the configured port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"category", "invalid_argument"}, {"message", e.what()}, {"detail", e.get_name()}}.dump()
              << "\n";
    return 2;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  try {
    if (*transfer) return run_transfer(ta);
    if (*train_color) return run_train_color(config, dataset, models_out);
    if (*train_pattern) return run_train_pattern(config, dataset, models_out);
    if (*synth1) {
      const auto face_set = load_faces(faces);
      synth::Synt1Options o;
      o.n = n;
      o.seed = seed;
      o.test_fraction = test_fraction;
      o.threads = threads;
      const auto records = synth::generate_synt1(face_set, load_stickers(stickers), o, out);
      print_json({{"out", out}, {"appended", records.size()}, {"total", synth::read_manifest(out).size()}});
      return 0;
    }
    if (*synth2) {
      const auto m = pipeline::load_models(models);
      if (!m.color) fail(ErrorCategory::model_missing, "synth2 needs a color model", "color");
      synth::Synt2Options o;
      o.n = n;
      o.seed = seed;
      o.threads = threads;
      const auto records = synth::generate_synt2(load_faces(faces), load_faces(styles), load_stickers(stickers),
                                                 synth::color_net_transfer(*m.color), o, out);
      print_json({{"out", out}, {"appended", records.size()}, {"total", synth::read_manifest(out).size()}});
      return 0;
    }
    if (*eval) {
      const auto m = pipeline::load_models(models);
      metrics::EvalReport rep;
      if (task == "seg") {
        if (!m.pattern) fail(ErrorCategory::model_missing, "seg evaluation needs a pattern model", "pattern");
        rep = pipeline::evaluate_segmentation(*m.pattern, dataset, split);
      } else {
        const metrics::ProjectionEmbedder embedder;
        pipeline::TransferEvalOptions o;
        o.ground_truth_mask = gt_mask;
        o.use_color = !no_color_eval;
        o.embedder = identity ? &embedder : nullptr;
        o.limit = limit;
        rep = pipeline::evaluate_transfer(m, dataset, o);
      }
      rep.write(report);
      print_json(rep.summary_json());
      return 0;
    }
    if (*make_faces) {
      const auto set = synth::make_faces(out, n, seed, makeup);
      print_json({{"out", out}, {"faces", set.faces.size()}});
      return 0;
    }
    if (*make_stickers) {
      synth::StickerLibrary::save(out, synth::make_sticker_set(n, seed, sticker_size));
      print_json({{"out", out}, {"stickers", n}});
      return 0;
    }
    if (*make_color) return run_make_color_data(out, n, seed);
    if (*serve) return run_serve(config, port);
  } catch (const Error& e) {
    std::cerr << nlohmann::json{{"category", category_name(e.category())}, {"message", e.what()}, {"detail", e.detail()}}
                     .dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"category", "io"}, {"message", e.what()}, {"detail", ""}}.dump() << "\n";
    return 1;
  }
  return 0;
}
