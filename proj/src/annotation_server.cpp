// Eigen must be seen before <resolv.h> (pulled in by httplib), which defines _res.
#include "urbanmap/annotation.hpp"
#include "urbanmap/image_io.hpp"

#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace urbanmap {

namespace fs = std::filesystem;
using nlohmann::json;

struct AnnotationServer::Impl {
  explicit Impl(ServerConfig c) : config(std::move(c)), journal(config.journal) {}

  ServerConfig config;
  AnnotationJournal journal;
  httplib::Server server;
  std::jthread thread;
};

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, {{"error", message}}, status);
}

std::string bytes_to_string(const Bytes& b) { return std::string(b.begin(), b.end()); }

void install_routes(AnnotationServer::Impl& impl) {
  auto& server = impl.server;
  const ServerConfig& cfg = impl.config;

  server.Get("/api/typology", [&cfg](const httplib::Request&, httplib::Response& res) {
    send_json(res, typology_to_json(cfg.palette));
  });

  server.Get("/api/grid", [&cfg](const httplib::Request&, httplib::Response& res) {
    send_json(res, cfg.grid.to_json());
  });

  server.Get(R"(/api/cell/(-?\d+)/(-?\d+))", [&impl, &cfg](const httplib::Request& req, httplib::Response& res) {
    const Index i = std::stol(req.matches[1]);
    const Index j = std::stol(req.matches[2]);
    if (!cfg.grid.contains(i, j)) return send_error(res, 404, "cell outside the grid");
    if (auto a = impl.journal.get(i, j)) return send_json(res, annotation_to_json(*a, cfg.palette));
    send_json(res, {{"i", i}, {"j", j}, {"code", nullptr}});
  });

  server.Put(R"(/api/cell/(-?\d+)/(-?\d+))", [&impl, &cfg](const httplib::Request& req, httplib::Response& res) {
    const Index i = std::stol(req.matches[1]);
    const Index j = std::stol(req.matches[2]);
    if (!cfg.grid.contains(i, j)) return send_error(res, 404, "cell outside the grid");
    CellAnnotation event{i, j, {}, 0, {}};
    try {
      const json body = json::parse(req.body);
      const json& diversity = body.at("diversity");
      const std::string pattern = body.at("pattern").get<std::string>();
      if (!diversity.is_number_integer()) throw ParseError("diversity must be an integer 1..4");
      if (pattern.size() != 1) throw ParseError("pattern must be one letter A..D");
      event.code = make_code(diversity.get<int>(), pattern[0]);
      event.timestamp_ms = body.value("timestamp", std::int64_t{0});
      event.annotator = body.value("annotator", std::string());
    } catch (const json::exception& e) {
      return send_error(res, 400, std::string("bad request body: ") + e.what());
    } catch (const ParseError& e) {
      return send_error(res, 400, e.what());
    }
    send_json(res, annotation_to_json(impl.journal.record(event), cfg.palette));
  });

  server.Get("/api/export/labelraster", [&impl, &cfg](const httplib::Request& req, httplib::Response& res) {
    const LabelRaster labels = rasterize(cfg.grid, impl.journal.snapshot(), cfg.palette);
    const bool rgb = req.has_param("format") && req.get_param_value("format") == "rgb";
    const GeoRaster image = rgb ? decode_labels(labels) : GeoRaster(GeoRaster::Storage(labels.classes()), 1);
    res.set_header("Content-Disposition", "attachment; filename=\"labels.png\"");
    res.set_content(bytes_to_string(encode_png(image)), "image/png");
  });

  server.Get("/api/export/meta", [&cfg](const httplib::Request&, httplib::Response& res) {
    send_json(res, meta_to_json({cfg.grid.transform, cfg.palette}));
  });

  server.Get(R"(/tiles/(\d+)/(\d+)/(\d+)\.png)", [&cfg](const httplib::Request& req, httplib::Response& res) {
    if (!cfg.tile_cache) return send_error(res, 404, "no tile cache configured");
    TileCoord t{std::stoll(req.matches[2]), std::stoll(req.matches[3]), std::stoi(req.matches[1])};
    try {
      validate(t);
    } catch (const RangeError& e) {
      return send_error(res, 404, e.what());
    }
    const auto bytes = cfg.tile_cache->get(cfg.tile_source_id, t, cfg.tile_extension);
    if (!bytes) return send_error(res, 404, "tile not cached");
    const bool jpeg = sniff_format(*bytes) == ImageFormat::Jpeg;
    res.set_content(bytes_to_string(*bytes), jpeg ? "image/jpeg" : "image/png");
  });

  if (cfg.imagery) {
    server.Get("/imagery.png", [&cfg](const httplib::Request&, httplib::Response& res) {
      try {
        res.set_content(bytes_to_string(read_file(*cfg.imagery)), "image/png");
      } catch (const IoError& e) {
        send_error(res, 404, e.what());
      }
    });
  }

  if (cfg.static_dir) server.set_mount_point("/", cfg.static_dir->string());

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    } catch (...) {
      send_error(res, 500, "unknown error");
    }
  });
}

}  // namespace

AnnotationServer::AnnotationServer(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  install_routes(*impl_);
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void AnnotationServer::listen() { impl_->server.listen_after_bind(); }

int AnnotationServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  impl_->thread = std::jthread([this] { listen(); });
  impl_->server.wait_until_ready();
  return bound;
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

AnnotationJournal& AnnotationServer::journal() { return impl_->journal; }

const ServerConfig& AnnotationServer::config() const noexcept { return impl_->config; }

}  // namespace urbanmap
