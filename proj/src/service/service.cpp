#include "uvmakeup/service/service.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <deque>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "uvmakeup/core/checksum.hpp"
#include "uvmakeup/core/image_io.hpp"
#include "uvmakeup/core/image_ops.hpp"
#include "uvmakeup/nn/checkpoint.hpp"
#include "uvmakeup/nn/convert.hpp"

namespace fs = std::filesystem;

namespace uvmakeup::service {

void ServiceConfig::validate() const {
  require(!host.empty(), ErrorCategory::invalid_argument, "service host must not be empty");
  require(port >= 0 && port <= 65535, ErrorCategory::invalid_argument, "service port out of range");
  require(max_upload_bytes >= 1024, ErrorCategory::invalid_argument, "max_upload_bytes must be at least 1024");
  require(max_results >= 1, ErrorCategory::invalid_argument, "max_results must be positive");
  require(threads >= 1, ErrorCategory::invalid_argument, "threads must be positive");
}

ServiceConfig ServiceConfig::from_json(const nlohmann::json& j) {
  ServiceConfig c;
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  c.models_dir = j.value("models_dir", c.models_dir.string());
  c.styles_dir = j.value("styles_dir", c.styles_dir.string());
  c.max_upload_bytes = j.value("max_upload_bytes", c.max_upload_bytes);
  c.max_results = j.value("max_results", c.max_results);
  c.threads = j.value("threads", c.threads);
  return c;
}

nlohmann::json ServiceConfig::to_json() const {
  return {{"host", host},
          {"port", port},
          {"models_dir", models_dir.string()},
          {"styles_dir", styles_dir.string()},
          {"max_upload_bytes", max_upload_bytes},
          {"max_results", max_results},
          {"threads", threads}};
}

ServiceConfig ServiceConfig::load(const fs::path& path) {
  ServiceConfig c;
  if (!path.empty()) {
    try {
      c = from_json(nlohmann::json::parse(io::read_text(path)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCategory::invalid_argument, "bad service config " + path.string(), e.what());
    }
  }
  c.apply_env();
  c.validate();
  return c;
}

void ServiceConfig::apply_env() {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  auto number = [](const std::string& name, const std::string& v) {
    try {
      std::size_t used = 0;
      const long long n = std::stoll(v, &used);
      if (used == v.size() && n >= 0) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
    fail(ErrorCategory::invalid_argument, name + " must be a non-negative integer, got '" + v + "'");
  };
  if (auto v = env("UVMAKEUP_HOST")) host = *v;
  if (auto v = env("UVMAKEUP_PORT")) port = static_cast<int>(number("UVMAKEUP_PORT", *v));
  if (auto v = env("UVMAKEUP_MODELS")) models_dir = *v;
  if (auto v = env("UVMAKEUP_STYLES")) styles_dir = *v;
  if (auto v = env("UVMAKEUP_MAX_UPLOAD_BYTES")) max_upload_bytes = number("UVMAKEUP_MAX_UPLOAD_BYTES", *v);
  if (auto v = env("UVMAKEUP_MAX_RESULTS")) max_results = number("UVMAKEUP_MAX_RESULTS", *v);
}

nlohmann::json StyleEntry::summary() const {
  return {{"id", id},
          {"name", name},
          {"created", created},
          {"has_mask", !prepared.mask.empty()},
          {"thumbnail", "/api/styles/" + id + "/thumbnail"}};
}

namespace {

constexpr int kStyleFormat = 1;
constexpr const char* kStyleKind = "style";

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::uint8_t> make_thumbnail(const Image& image) {
  return io::encode_png_rgb(ops::resize_bilinear(image, 64, 64));
}

nn::Checkpoint prepared_checkpoint(const pipeline::PreparedReference& p) {
  nn::Checkpoint ck;
  ck.kind = kStyleKind;
  ck.tensors["texture"] = nn::to_tensor<float>(p.texture);
  if (!p.mask.empty()) ck.tensors["mask"] = nn::to_tensor<float>(p.mask);
  return ck;
}

bool valid_style_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!std::isxdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

std::shared_ptr<StyleEntry> load_style(const fs::path& dir) {
  auto e = std::make_shared<StyleEntry>();
  const auto meta = nlohmann::json::parse(io::read_text(dir / "meta.json"));
  require(meta.value("format", 0) == kStyleFormat, ErrorCategory::checkpoint, "unsupported style format");
  e->id = meta.at("id").get<std::string>();
  e->name = meta.value("name", "");
  e->created = meta.value("created", "");
  e->reference = io::read_png(dir / "reference.png");
  e->prepared.position = uvgeom::read_uvpm(dir / "position.uvpm");
  const auto ck = nn::load_checkpoint(dir / "prepared.uvmc", kStyleKind);
  e->prepared.texture = TextureMap(nn::to_raster<3>(ck.tensors.at("texture")));
  if (auto it = ck.tensors.find("mask"); it != ck.tensors.end()) e->prepared.mask = nn::to_raster<1>(it->second);
  e->thumbnail_png = io::read_file(dir / "thumbnail.png");
  return e;
}

}  // namespace

StyleLibrary::StyleLibrary(fs::path dir) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  reload();
}

void StyleLibrary::reload() {
  std::map<std::string, std::shared_ptr<const StyleEntry>> fresh;
  for (const auto& d : fs::directory_iterator(dir_)) {
    if (!d.is_directory()) continue;
    try {
      auto e = load_style(d.path());
      fresh[e->id] = std::move(e);
    } catch (const std::exception& ex) {
      spdlog::warn("style {} skipped: {}", d.path().string(), ex.what());
    }
  }
  std::unique_lock lock(mutex_);
  entries_ = std::move(fresh);
}

std::shared_ptr<const StyleEntry> StyleLibrary::add(const Image& reference, const std::string& name,
                                                    const pipeline::Models& models) {
  const auto png = io::encode_png_rgb(reference);
  const std::string id = sha256_hex(png).substr(0, 16);
  if (auto existing = get(id)) return existing;

  auto e = std::make_shared<StyleEntry>();
  e->id = id;
  e->name = name;
  e->created = utc_now();
  e->reference = io::decode_png_rgb(png);
  e->prepared = pipeline::prepare_reference(e->reference, models, true, "reference");
  e->thumbnail_png = make_thumbnail(e->reference);

  std::unique_lock lock(mutex_);
  if (auto it = entries_.find(id); it != entries_.end()) return it->second;
  const fs::path tmp = dir_ / ("." + id + ".tmp");
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  io::write_file(tmp / "reference.png", png);
  uvgeom::write_uvpm(tmp / "position.uvpm", e->prepared.position);
  nn::save_checkpoint(tmp / "prepared.uvmc", prepared_checkpoint(e->prepared));
  io::write_file(tmp / "thumbnail.png", e->thumbnail_png);
  io::write_text(tmp / "meta.json",
                 nlohmann::json{{"format", kStyleFormat}, {"id", id}, {"name", name}, {"created", e->created}}.dump(2));
  fs::remove_all(dir_ / id);
  fs::rename(tmp, dir_ / id);
  entries_[id] = e;
  return e;
}

std::shared_ptr<const StyleEntry> StyleLibrary::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : it->second;
}

bool StyleLibrary::remove(const std::string& id) {
  std::unique_lock lock(mutex_);
  if (entries_.erase(id) == 0) return false;
  if (valid_style_id(id)) fs::remove_all(dir_ / id);
  return true;
}

std::vector<std::shared_ptr<const StyleEntry>> StyleLibrary::list() const {
  std::shared_lock lock(mutex_);
  std::vector<std::shared_ptr<const StyleEntry>> out;
  for (const auto& [id, e] : entries_) out.push_back(e);
  return out;
}

std::size_t StyleLibrary::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

bool StyleLibrary::verify(const StyleEntry& entry, const pipeline::Models& models) {
  const auto fresh = pipeline::prepare_reference(entry.reference, models, !entry.prepared.mask.empty());
  return fresh.position == entry.prepared.position && fresh.texture == entry.prepared.texture &&
         fresh.mask == entry.prepared.mask;
}

std::string StyleLibrary::checksum(const StyleEntry& entry) {
  std::string acc = entry.id + "|" + entry.name + "|" + entry.created + "|";
  acc += sha256_hex(io::encode_png_rgb(entry.reference)) + "|";
  acc += sha256_hex(uvgeom::encode_uvpm(entry.prepared.position)) + "|";
  acc += nn::parameter_checksum(prepared_checkpoint(entry.prepared).tensors) + "|";
  acc += sha256_hex(entry.thumbnail_png);
  return sha256_hex(acc);
}

int http_status(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::invalid_argument:
    case ErrorCategory::shape_mismatch: return 400;
    case ErrorCategory::not_found: return 404;
    case ErrorCategory::geometry_failure:
    case ErrorCategory::geometry_mismatch: return 422;
    case ErrorCategory::model_missing: return 503;
    case ErrorCategory::io:
    case ErrorCategory::checkpoint:
    case ErrorCategory::numeric:
    case ErrorCategory::empty_dataset: return 500;
  }
  return 500;
}

nlohmann::json error_document(ErrorCategory category, const std::string& message, const std::string& detail) {
  return {{"category", std::string(category_name(category))}, {"message", message}, {"detail", detail}};
}

namespace {

struct StoredResult {
  nlohmann::json info;
  std::map<std::string, std::vector<std::uint8_t>> artifacts;
};

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& category, const std::string& message,
                const std::string& detail = {}) {
  send_json(res, status, {{"category", category}, {"message", message}, {"detail", detail}});
}

std::optional<std::string> field(const httplib::Request& req, const std::string& key) {
  if (req.has_file(key)) return req.get_file_value(key).content;
  if (req.has_param(key)) return req.get_param_value(key);
  return std::nullopt;
}

Image decode_upload(const httplib::Request& req, const std::string& key) {
  const auto f = field(req, key);
  require(f.has_value(), ErrorCategory::invalid_argument, "missing image field '" + key + "'");
  try {
    return io::decode_png_rgb(std::vector<std::uint8_t>(f->begin(), f->end()));
  } catch (const Error& e) {
    fail(ErrorCategory::invalid_argument, "field '" + key + "' is not a valid PNG image", e.what());
  }
}

bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  fail(ErrorCategory::invalid_argument, "field '" + key + "' must be a boolean, got '" + v + "'");
}

fusion::TransferRequest parse_request(const httplib::Request& req) {
  fusion::TransferRequest r;
  try {
    if (auto v = field(req, "alpha")) {
      std::size_t used = 0;
      r.alpha = std::stod(*v, &used);
      require(used == v->size(), ErrorCategory::invalid_argument, "alpha is not a number");
    }
    if (auto v = field(req, "seed")) r.seed = std::stoull(*v);
  } catch (const std::logic_error&) {
    fail(ErrorCategory::invalid_argument, "alpha/seed must be numeric");
  }
  if (auto v = field(req, "use_color")) r.use_color = parse_flag("use_color", *v);
  if (auto v = field(req, "use_pattern")) r.use_pattern = parse_flag("use_pattern", *v);
  if (auto v = field(req, "regions"); v && !v->empty() && *v != "full") {
    r.partial = true;
    std::size_t start = 0;
    while (start <= v->size()) {
      const std::size_t comma = v->find(',', start);
      const std::string item = v->substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (!item.empty()) r.regions.push_back(uvgeom::parse_region(item));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  if (auto v = field(req, "pattern_source")) {
    require(*v == "first" || *v == "second", ErrorCategory::invalid_argument, "pattern_source must be first or second");
    r.pattern_source = *v == "first" ? fusion::PatternSource::first : fusion::PatternSource::second;
  }
  return r;
}

}  // namespace

struct Server::Impl {
  ServiceConfig config;
  StyleLibrary styles;
  httplib::Server http;
  std::thread thread;
  int bound_port = -1;

  mutable std::shared_mutex models_mutex;
  std::shared_ptr<const pipeline::Models> models;

  std::mutex results_mutex;
  std::map<std::string, std::shared_ptr<const StoredResult>> results;
  std::deque<std::string> result_order;

  explicit Impl(ServiceConfig c) : config(std::move(c)), styles(config.styles_dir) {}

  std::shared_ptr<const pipeline::Models> current_models() const {
    std::shared_lock lock(models_mutex);
    return models;
  }

  std::shared_ptr<const pipeline::Models> require_models() const {
    auto m = current_models();
    require(m != nullptr, ErrorCategory::model_missing, "models are not loaded yet");
    return m;
  }

  void keep_result(const std::string& id, std::shared_ptr<const StoredResult> r) {
    std::lock_guard lock(results_mutex);
    if (results.count(id) == 0) result_order.push_back(id);
    results[id] = std::move(r);
    while (result_order.size() > config.max_results) {
      results.erase(result_order.front());
      result_order.pop_front();
    }
  }

  std::shared_ptr<const StoredResult> find_result(const std::string& id) {
    std::lock_guard lock(results_mutex);
    auto it = results.find(id);
    return it == results.end() ? nullptr : it->second;
  }

  template <class Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_json(res, http_status(e.category()), error_document(e.category(), e.what(), e.detail()));
      } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_error(res, 500, "internal", "unexpected server error", e.what());
      }
    };
  }

  void health(const httplib::Request&, httplib::Response& res) {
    const auto m = current_models();
    send_json(res, 200,
              {{"ready", m != nullptr},
               {"models", {{"color", m && m->color != nullptr}, {"pattern", m && m->pattern != nullptr}}},
               {"geometry", m && m->geometry ? m->geometry->name() : ""},
               {"styles", styles.size()}});
  }

  void list_styles(const httplib::Request&, httplib::Response& res) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : styles.list()) arr.push_back(e->summary());
    send_json(res, 200, {{"styles", arr}});
  }

  void add_style(const httplib::Request& req, httplib::Response& res) {
    const Image image = decode_upload(req, "image");
    const auto m = require_models();
    const auto e = styles.add(image, field(req, "name").value_or(""), *m);
    send_json(res, 201, e->summary());
  }

  std::shared_ptr<const StyleEntry> style_or_404(const std::string& id) {
    auto e = styles.get(id);
    if (!e) fail(ErrorCategory::not_found, "unknown style id '" + id + "'", id);
    return e;
  }

  void do_transfer(const httplib::Request& req, httplib::Response& res) {
    const auto m = require_models();
    const Image source = decode_upload(req, "source");
    fusion::TransferRequest treq = parse_request(req);

    std::string key = sha256_hex(io::encode_png_rgb(source)) + "|";
    auto resolve = [&](const char* style_key, const char* image_key, const char* which)
        -> std::optional<pipeline::PreparedReference> {
      if (auto id = field(req, style_key)) {
        const auto e = style_or_404(*id);
        key += std::string("style:") + e->id + "|";
        return e->prepared;
      }
      if (field(req, image_key)) {
        const Image ref = decode_upload(req, image_key);
        key += "image:" + sha256_hex(io::encode_png_rgb(ref)) + "|";
        return pipeline::prepare_reference(ref, *m, true, which);
      }
      return std::nullopt;
    };
    const auto ref = resolve("style_id", "reference", "reference");
    require(ref.has_value(), ErrorCategory::invalid_argument, "transfer needs style_id or a reference image");
    const auto ref2 = resolve("style_id2", "reference2", "reference2");
    treq.validate(ref2.has_value());
    key += nlohmann::json(treq).dump();
    const std::string request_id = sha256_hex(key).substr(0, 24);

    const auto result =
        pipeline::transfer_prepared(source, *ref, ref2 ? &*ref2 : nullptr, nullptr, treq, *m, true);
    auto stored = std::make_shared<StoredResult>();
    stored->artifacts["output"] = io::encode_png_rgb(result.output);
    const auto& im = *result.intermediates;
    stored->artifacts["source_texture"] = io::encode_png_rgb(im.source_texture);
    stored->artifacts["reference_texture"] = io::encode_png_rgb(im.reference_texture);
    stored->artifacts["color_texture"] = io::encode_png_rgb(im.color_texture);
    stored->artifacts["mask"] = io::encode_png_gray(im.mask);
    stored->artifacts["fused_texture"] = io::encode_png_rgb(im.fused);
    nlohmann::json names = nlohmann::json::array();
    for (const auto& [name, bytes] : stored->artifacts) names.push_back(name);
    stored->info = {{"request_id", request_id},
                    {"request", treq},
                    {"timings_ms", result.timings_ms},
                    {"pattern_detected", result.pattern_detected},
                    {"metadata", result.metadata},
                    {"artifacts", names}};
    const auto& png = stored->artifacts.at("output");
    res.status = 200;
    res.set_content(reinterpret_cast<const char*>(png.data()), png.size(), "image/png");
    res.set_header("X-Request-Id", request_id);
    res.set_header("X-Pattern-Detected", result.pattern_detected ? "true" : "false");
    keep_result(request_id, std::move(stored));
  }

  void install_routes() {
    http.set_payload_max_length(config.max_upload_bytes);
    const int threads = config.threads;
    http.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
    http.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      if (res.status == 413)
        send_error(res, 413, "payload_too_large", "request body exceeds the configured upload limit");
      else if (res.status == 404)
        send_error(res, 404, "not_found", "no route for " + req.method + " " + req.path);
      else
        send_error(res, res.status, "invalid_argument", "request rejected", httplib::status_message(res.status));
      return httplib::Server::HandlerResponse::Handled;
    });
    http.Get("/api/health", guarded([this](const auto& q, auto& s) { health(q, s); }));
    http.Get("/api/styles", guarded([this](const auto& q, auto& s) { list_styles(q, s); }));
    http.Post("/api/styles", guarded([this](const auto& q, auto& s) { add_style(q, s); }));
    http.Get(R"(/api/styles/([^/]+))", guarded([this](const auto& q, auto& s) {
               send_json(s, 200, style_or_404(q.matches[1])->summary());
             }));
    http.Delete(R"(/api/styles/([^/]+))", guarded([this](const auto& q, auto& s) {
                  if (!styles.remove(q.matches[1])) fail(ErrorCategory::not_found, "unknown style id", q.matches[1]);
                  s.status = 204;
                }));
    http.Get(R"(/api/styles/([^/]+)/thumbnail)", guarded([this](const auto& q, auto& s) {
               const auto e = style_or_404(q.matches[1]);
               s.set_content(reinterpret_cast<const char*>(e->thumbnail_png.data()), e->thumbnail_png.size(),
                             "image/png");
             }));
    http.Post("/api/transfer", guarded([this](const auto& q, auto& s) { do_transfer(q, s); }));
    http.Get(R"(/api/result/([^/]+))", guarded([this](const auto& q, auto& s) {
               const auto r = find_result(q.matches[1]);
               if (!r) fail(ErrorCategory::not_found, "unknown request id", q.matches[1]);
               send_json(s, 200, r->info);
             }));
    http.Get(R"(/api/result/([^/]+)/([a-z_]+))", guarded([this](const auto& q, auto& s) {
               const auto r = find_result(q.matches[1]);
               if (!r) fail(ErrorCategory::not_found, "unknown request id", q.matches[1]);
               auto it = r->artifacts.find(q.matches[2]);
               if (it == r->artifacts.end()) fail(ErrorCategory::not_found, "unknown artifact", q.matches[2]);
               s.set_content(reinterpret_cast<const char*>(it->second.data()), it->second.size(), "image/png");
             }));
  }

  void bind() {
    if (config.port == 0) {
      bound_port = http.bind_to_any_port(config.host);
    } else {
      bound_port = http.bind_to_port(config.host, config.port) ? config.port : -1;
    }
    require(bound_port > 0, ErrorCategory::io, "cannot bind " + config.host + ":" + std::to_string(config.port));
  }
};

Server::Server(ServiceConfig config) {
  config.validate();
  impl_ = std::make_unique<Impl>(std::move(config));
  impl_->install_routes();
}

Server::~Server() { stop(); }

void Server::set_models(pipeline::Models models) {
  auto m = std::make_shared<const pipeline::Models>(std::move(models));
  std::unique_lock lock(impl_->models_mutex);
  impl_->models = std::move(m);
}

void Server::load_models() { set_models(pipeline::load_models(impl_->config.models_dir)); }

bool Server::ready() const { return impl_->current_models() != nullptr; }

StyleLibrary& Server::styles() { return impl_->styles; }

int Server::start() {
  impl_->bind();
  impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  spdlog::info("serving on {}:{}", impl_->config.host, impl_->bound_port);
  return impl_->bound_port;
}

void Server::run() {
  impl_->bind();
  spdlog::info("serving on {}:{}", impl_->config.host, impl_->bound_port);
  impl_->http.listen_after_bind();
}

void Server::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int Server::port() const { return impl_->bound_port; }

}  // namespace uvmakeup::service
