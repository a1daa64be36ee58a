#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uvmakeup/pipeline/pipeline.hpp"

namespace uvmakeup::service {

/// Loaded from a JSON file, then overridden by UVMAKEUP_HOST, UVMAKEUP_PORT,
/// UVMAKEUP_MODELS, UVMAKEUP_STYLES, UVMAKEUP_MAX_UPLOAD_BYTES and
/// UVMAKEUP_MAX_RESULTS when set.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path models_dir = "models";
  std::filesystem::path styles_dir = "styles";
  std::size_t max_upload_bytes = 8u << 20;
  std::size_t max_results = 64;
  int threads = 4;

  void validate() const;
  static ServiceConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// `path` may be empty (defaults only).
  static ServiceConfig load(const std::filesystem::path& path);
  void apply_env();
};

struct StyleEntry {
  std::string id;
  std::string name;
  std::string created;  // ISO-8601 UTC
  Image reference;
  pipeline::PreparedReference prepared;
  std::vector<std::uint8_t> thumbnail_png;

  nlohmann::json summary() const;
};

/// Styles persisted as `<dir>/<id>/` with reference.png, position.uvpm,
/// prepared.uvmc (texture and mask tensors), thumbnail.png and meta.json.
/// Reads are concurrent; writes are serialized.
class StyleLibrary {
 public:
  explicit StyleLibrary(std::filesystem::path dir);

  /// Reloads everything under the directory; entries that fail to load are
  /// logged and skipped.
  void reload();

  /// Precomputes geometry, texture and pattern mask. The id is derived from
  /// the image content, so re-adding the same image returns the existing entry.
  std::shared_ptr<const StyleEntry> add(const Image& reference, const std::string& name,
                                        const pipeline::Models& models);
  std::shared_ptr<const StyleEntry> get(const std::string& id) const;
  bool remove(const std::string& id);
  std::vector<std::shared_ptr<const StyleEntry>> list() const;
  std::size_t size() const;

  /// Recomputes the precomputed artifacts and compares them exactly.
  static bool verify(const StyleEntry& entry, const pipeline::Models& models);

  /// SHA-256 over the stored artifacts of one entry.
  static std::string checksum(const StyleEntry& entry);

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const StyleEntry>> entries_;
};

/// HTTP status for an error category.
int http_status(ErrorCategory category);
nlohmann::json error_document(ErrorCategory category, const std::string& message, const std::string& detail = {});

/// The REST facade. Routes:
///   GET    /api/health
///   GET    /api/styles               POST /api/styles (multipart: image, name)
///   GET    /api/styles/{id}          DELETE /api/styles/{id}
///   GET    /api/styles/{id}/thumbnail
///   POST   /api/transfer             (multipart: source, style_id | reference,
///                                     style_id2 | reference2, alpha, regions,
///                                     use_color, use_pattern, pattern_source, seed)
///   GET    /api/result/{id}          GET /api/result/{id}/{artifact}
class Server {
 public:
  explicit Server(ServiceConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Installs models; until then health reports ready:false and transfers return 503.
  void set_models(pipeline::Models models);
  /// Loads models from config.models_dir.
  void load_models();
  bool ready() const;

  StyleLibrary& styles();

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace uvmakeup::service
