#include <doctest.h>

#include <cstdlib>
#include <thread>

#include "test_support.hpp"
#include "uvmakeup/core/image_io.hpp"
#include "uvmakeup/service/service.hpp"
#include "uvmakeup/synth/datasets.hpp"

// After the Eigen-using headers: <resolv.h> defines an `_res` macro.
#include <httplib.h>

using namespace uvmakeup;
using namespace uvmakeup::service;

namespace {

struct World {
  synth::FaceSet faces;
  pipeline::Models models;

  World() : faces(synth::make_faces(3, 91, true)) {
    models.geometry = std::make_shared<uvgeom::SilhouetteFitProvider>();
    color::ColorNetConfig cc;
    cc.seed = 1;
    models.color = std::make_shared<const color::ColorNet>(cc);
    pattern::SegNetConfig sc;
    sc.seed = 2;
    models.pattern = std::make_shared<const pattern::SegNet>(sc);
  }

  std::string png(int i) const {
    const auto bytes = io::encode_png_rgb(faces.faces[i].image);
    return std::string(bytes.begin(), bytes.end());
  }
};

const World& world() {
  static const World w;
  return w;
}

ServiceConfig test_config(const std::string& name) {
  ServiceConfig c;
  c.port = 0;
  c.styles_dir = uvtest::temp_dir(name);
  c.threads = 2;
  return c;
}

nlohmann::json body_json(const httplib::Result& r) { return nlohmann::json::parse(r->body); }

void check_error(const httplib::Result& r, int status, const std::string& category) {
  REQUIRE(r);
  CHECK(r->status == status);
  const auto j = body_json(r);
  CHECK(j.at("category") == category);
  CHECK(j.contains("message"));
  CHECK(j.contains("detail"));
}

httplib::MultipartFormDataItems transfer_form(const std::string& source, const std::string& style_id,
                                              const std::string& alpha = "", const std::string& regions = "") {
  httplib::MultipartFormDataItems items{{"source", source, "source.png", "image/png"},
                                        {"style_id", style_id, "", ""},
                                        {"seed", "3", "", ""}};
  if (!alpha.empty()) items.push_back({"alpha", alpha, "", ""});
  if (!regions.empty()) items.push_back({"regions", regions, "", ""});
  return items;
}

}  // namespace

TEST_CASE("configuration reads a file and environment overrides") {
  const auto dir = uvtest::temp_dir("svc_cfg");
  io::write_text(dir / "c.json", R"({"port": 9000, "max_upload_bytes": 4096, "models_dir": "m"})");
  ::setenv("UVMAKEUP_PORT", "9100", 1);
  ::setenv("UVMAKEUP_STYLES", "/tmp/s", 1);
  const ServiceConfig c = ServiceConfig::load(dir / "c.json");
  ::unsetenv("UVMAKEUP_PORT");
  ::unsetenv("UVMAKEUP_STYLES");
  CHECK(c.port == 9100);
  CHECK(c.max_upload_bytes == 4096);
  CHECK(c.models_dir == "m");
  CHECK(c.styles_dir == "/tmp/s");
  ::setenv("UVMAKEUP_MAX_UPLOAD_BYTES", "lots", 1);
  CHECK_THROWS_AS(ServiceConfig::load({}), Error);
  ::unsetenv("UVMAKEUP_MAX_UPLOAD_BYTES");
  io::write_text(dir / "bad.json", "{");
  CHECK_THROWS_AS(ServiceConfig::load(dir / "bad.json"), Error);
}

TEST_CASE("error categories map to HTTP statuses") {
  CHECK(http_status(ErrorCategory::invalid_argument) == 400);
  CHECK(http_status(ErrorCategory::not_found) == 404);
  CHECK(http_status(ErrorCategory::geometry_failure) == 422);
  CHECK(http_status(ErrorCategory::model_missing) == 503);
  CHECK(error_document(ErrorCategory::io, "m", "d") ==
        nlohmann::json{{"category", "io"}, {"message", "m"}, {"detail", "d"}});
}

TEST_CASE("health reports readiness and transfers wait for models") {
  const auto& w = world();
  Server server(test_config("svc_health"));
  httplib::Client cli("127.0.0.1", server.start());
  auto h = cli.Get("/api/health");
  REQUIRE(h);
  CHECK(h->status == 200);
  CHECK(body_json(h).at("ready") == false);
  check_error(cli.Post("/api/transfer", transfer_form(w.png(0), "00")), 503, "model_missing");
  server.set_models(w.models);
  CHECK(body_json(cli.Get("/api/health")).at("ready") == true);
  check_error(cli.Get("/api/nothing"), 404, "not_found");
  server.stop();
}

TEST_CASE("styles, transfers and results over HTTP") {
  const auto& w = world();
  auto cfg = test_config("svc_main");
  cfg.max_upload_bytes = 400 * 1024;
  Server server(cfg);
  server.set_models(w.models);
  httplib::Client cli("127.0.0.1", server.start());

  auto created = cli.Post("/api/styles", httplib::MultipartFormDataItems{{"image", w.png(1), "ref.png", "image/png"},
                                                                          {"name", "look one", "", ""}});
  REQUIRE(created);
  REQUIRE(created->status == 201);
  const std::string id = body_json(created).at("id");
  CHECK(body_json(created).at("has_mask") == true);

  auto listed = body_json(cli.Get("/api/styles"));
  REQUIRE(listed.at("styles").size() == 1);
  CHECK(listed.at("styles")[0].at("name") == "look one");
  auto thumb = cli.Get("/api/styles/" + id + "/thumbnail");
  REQUIRE(thumb);
  CHECK(thumb->get_header_value("Content-Type") == "image/png");

  SUBCASE("style precomputation matches on-the-fly preparation") {
    const auto e = server.styles().get(id);
    REQUIRE(e);
    CHECK(StyleLibrary::verify(*e, w.models));
    const auto fresh = pipeline::prepare_reference(io::decode_png_rgb(io::encode_png_rgb(w.faces.faces[1].image)), w.models);
    CHECK(fresh.mask == e->prepared.mask);
  }

  SUBCASE("transfer is reproducible and results can be fetched") {
    auto a = cli.Post("/api/transfer", transfer_form(w.png(0), id));
    auto b = cli.Post("/api/transfer", transfer_form(w.png(0), id));
    REQUIRE(a);
    REQUIRE(a->status == 200);
    CHECK(a->get_header_value("Content-Type") == "image/png");
    CHECK(a->body == b->body);
    const std::string rid = a->get_header_value("X-Request-Id");
    CHECK(rid == b->get_header_value("X-Request-Id"));
    auto info = cli.Get("/api/result/" + rid);
    REQUIRE(info);
    CHECK(body_json(info).at("request").at("alpha") == 1.0);
    auto out = cli.Get("/api/result/" + rid + "/output");
    REQUIRE(out);
    CHECK(out->body == a->body);
    CHECK(cli.Get("/api/result/" + rid + "/mask")->status == 200);
    check_error(cli.Get("/api/result/" + rid + "/nope"), 404, "not_found");
    check_error(cli.Get("/api/result/ffff"), 404, "not_found");

    auto half = cli.Post("/api/transfer", transfer_form(w.png(0), id, "0.5"));
    auto lips = cli.Post("/api/transfer", transfer_form(w.png(0), id, "1", "lips"));
    CHECK(half->get_header_value("X-Request-Id") != rid);
    CHECK(lips->get_header_value("X-Request-Id") != half->get_header_value("X-Request-Id"));
    CHECK(half->body != a->body);
  }

  SUBCASE("a reference image can be sent inline") {
    httplib::MultipartFormDataItems items{{"source", w.png(0), "s.png", "image/png"},
                                          {"reference", w.png(1), "r.png", "image/png"},
                                          {"seed", "3", "", ""}};
    auto inline_ref = cli.Post("/api/transfer", items);
    REQUIRE(inline_ref);
    CHECK(inline_ref->status == 200);
    CHECK(inline_ref->body == cli.Post("/api/transfer", transfer_form(w.png(0), id))->body);
  }

  SUBCASE("invalid requests are rejected with structured errors") {
    check_error(cli.Post("/api/transfer", transfer_form(w.png(0), "0123abcd")), 404, "not_found");
    check_error(cli.Post("/api/transfer", transfer_form(w.png(0), id, "1.5")), 400, "invalid_argument");
    check_error(cli.Post("/api/transfer", transfer_form(w.png(0), id, "abc")), 400, "invalid_argument");
    check_error(cli.Post("/api/transfer", transfer_form(w.png(0), id, "1", "nose")), 400, "invalid_argument");
    check_error(cli.Post("/api/transfer", transfer_form("not a png", id)), 400, "invalid_argument");
    check_error(cli.Post("/api/transfer", httplib::MultipartFormDataItems{{"source", w.png(0), "s.png", "image/png"}}),
                400, "invalid_argument");
    const auto blank = io::encode_png_rgb(Image(256, 256, 0.5f));
    auto r = cli.Post("/api/styles", httplib::MultipartFormDataItems{
                                         {"image", std::string(blank.begin(), blank.end()), "b.png", "image/png"}});
    check_error(r, 422, "geometry_failure");
    CHECK(body_json(r).at("detail") == "reference");
    check_error(cli.Post("/api/styles", std::string(500 * 1024, 'x'), "application/octet-stream"), 413,
                "payload_too_large");
    check_error(cli.Get("/api/styles/0000"), 404, "not_found");
  }

  SUBCASE("styles persist across restarts and can be deleted") {
    const std::string before = StyleLibrary::checksum(*server.styles().get(id));
    StyleLibrary reloaded(cfg.styles_dir);
    REQUIRE(reloaded.size() == 1);
    CHECK(StyleLibrary::checksum(*reloaded.get(id)) == before);
    CHECK(cli.Delete("/api/styles/" + id)->status == 204);
    CHECK(StyleLibrary(cfg.styles_dir).size() == 0);
    check_error(cli.Delete("/api/styles/" + id), 404, "not_found");
  }
  server.stop();
}

TEST_CASE("concurrent transfers against one style are independent") {
  const auto& w = world();
  Server server(test_config("svc_conc"));
  server.set_models(w.models);
  const int port = server.start();
  const auto style = server.styles().add(w.faces.faces[1].image, "s", w.models);
  std::vector<std::string> bodies(4);
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i)
    threads.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", port);
      c.set_read_timeout(60);
      auto r = c.Post("/api/transfer", transfer_form(w.png(i % 2 == 0 ? 0 : 2), style->id));
      if (r && r->status == 200) bodies[i] = r->body;
    });
  for (auto& t : threads) t.join();
  httplib::Client c("127.0.0.1", port);
  CHECK_FALSE(bodies[0].empty());
  CHECK(bodies[0] == bodies[2]);
  CHECK(bodies[1] == bodies[3]);
  CHECK(bodies[0] != bodies[1]);
  CHECK(bodies[0] == c.Post("/api/transfer", transfer_form(w.png(0), style->id))->body);
  server.stop();
}
