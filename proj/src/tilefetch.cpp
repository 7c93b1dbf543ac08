#include "urbanmap/tilefetch.hpp"

#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace urbanmap {

namespace fs = std::filesystem;

namespace {

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

bool contains(const std::string& s, std::string_view token) { return s.find(token) != std::string::npos; }

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("tile URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string describe(const TileCoord& t) {
  return std::to_string(t.zoom) + "/" + std::to_string(t.x) + "/" + std::to_string(t.y);
}

}  // namespace

void TileSource::validate() const {
  const bool xyz = contains(url_template, "{x}") && contains(url_template, "{y}") &&
                   contains(url_template, "{z}");
  if (!xyz && !contains(url_template, "{quadkey}")) {
    throw ConfigError("tile URL template needs {x}/{y}/{z} or {quadkey} placeholders");
  }
  if (contains(url_template, "{s}") && subdomains.empty()) {
    throw ConfigError("tile URL template uses {s} but no subdomains are configured");
  }
  if (id.empty() || id.find('/') != std::string::npos || id == "." || id == "..") {
    throw ConfigError("tile source id must be a plain directory name");
  }
  if (max_parallel < 1) throw ConfigError("max_parallel must be positive");
  if (retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be positive");
  if (retry.backoff_base_ms < 0 || min_delay_ms < 0 || timeout_ms <= 0) {
    throw ConfigError("tile source delays must be non-negative and timeout positive");
  }
}

std::string TileSource::url_for(const TileCoord& t) const {
  std::string url = url_template;
  replace_all(url, "{x}", std::to_string(t.x));
  replace_all(url, "{y}", std::to_string(t.y));
  replace_all(url, "{z}", std::to_string(t.zoom));
  if (contains(url, "{quadkey}")) replace_all(url, "{quadkey}", tile_to_quadkey(t));
  if (!subdomains.empty()) {
    replace_all(url, "{s}", subdomains[static_cast<std::size_t>((t.x + t.y) % static_cast<std::int64_t>(subdomains.size()))]);
  }
  return url;
}

TileSource tile_source_from_json(const nlohmann::json& doc) {
  try {
    TileSource s;
    s.url_template = doc.at("url_template").get<std::string>();
    s.id = doc.value("id", s.id);
    s.subdomains = doc.value("subdomains", s.subdomains);
    if (doc.contains("headers")) {
      for (const auto& [key, value] : doc.at("headers").items()) s.headers.emplace_back(key, value.get<std::string>());
    }
    s.max_parallel = doc.value("max_parallel", s.max_parallel);
    if (doc.contains("retry")) {
      s.retry.max_attempts = doc.at("retry").value("max_attempts", s.retry.max_attempts);
      s.retry.backoff_base_ms = doc.at("retry").value("backoff_base_ms", s.retry.backoff_base_ms);
    }
    s.min_delay_ms = doc.value("min_delay_ms", s.min_delay_ms);
    s.timeout_ms = doc.value("timeout_ms", s.timeout_ms);
    s.extension = doc.value("extension", s.extension);
    s.min_zoom = doc.value("min_zoom", s.min_zoom);
    s.max_zoom = doc.value("max_zoom", s.max_zoom);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("tile source: ") + e.what());
  }
}

TileSource load_tile_source(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open tile source '" + path.string() + "'");
  try {
    return tile_source_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("tile source '" + path.string() + "': " + e.what());
  }
}

fs::path TileCache::path_for(const std::string& source_id, const TileCoord& t,
                             const std::string& extension) const {
  return root_ / source_id / std::to_string(t.zoom) / std::to_string(t.x) /
         (std::to_string(t.y) + "." + extension);
}

std::optional<Bytes> TileCache::get(const std::string& source_id, const TileCoord& t,
                                    const std::string& extension) const {
  const fs::path p = path_for(source_id, t, extension);
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) return std::nullopt;
  return read_file(p);
}

void TileCache::put(const std::string& source_id, const TileCoord& t, const std::string& extension,
                    std::span<const std::uint8_t> bytes) const {
  write_file_atomic(path_for(source_id, t, extension), bytes);
}

std::optional<fs::file_time_type> TileCache::fetched_at(const std::string& source_id, const TileCoord& t,
                                                        const std::string& extension) const {
  std::error_code ec;
  const auto time = fs::last_write_time(path_for(source_id, t, extension), ec);
  if (ec) return std::nullopt;
  return time;
}

TileFetcher::TileFetcher(TileSource source, TileCache cache)
    : source_(std::move(source)), cache_(std::move(cache)), slots_(source_.max_parallel) {
  source_.validate();
}

void TileFetcher::pace() {
  if (source_.min_delay_ms <= 0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(pace_mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_request_);
    next_request_ = slot + std::chrono::milliseconds(source_.min_delay_ms);
  }
  std::this_thread::sleep_until(slot);
}

FetchResult TileFetcher::fetch(const TileCoord& t) {
  validate(t);
  if (t.zoom < source_.min_zoom || t.zoom > source_.max_zoom) {
    throw FetchError(FetchErrorKind::Permanent, "zoom " + std::to_string(t.zoom) + " outside the source's range",
                     t, 0, 0);
  }
  if (auto hit = cache_.get(source_.id, t, source_.extension)) {
    return {std::move(*hit), 0, true};
  }

  const SplitUrl url = split_url(source_.url_for(t));
  httplib::Headers headers;
  for (const auto& [k, v] : source_.headers) headers.emplace(k, v);

  int status = 0;
  std::string last_error;
  for (int attempt = 1; attempt <= source_.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(
          static_cast<std::int64_t>(source_.retry.backoff_base_ms) << (attempt - 2)));
    }
    httplib::Result res;
    {
      pace();
      slots_.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{slots_};
      ++requests_;
      httplib::Client client(url.origin);
      const auto timeout = std::chrono::milliseconds(source_.timeout_ms);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_follow_location(true);
      res = client.Get(url.path, headers);
    }
    if (!res) {
      status = 0;
      last_error = httplib::to_string(res.error());
      continue;
    }
    status = res->status;
    if (status >= 400 && status < 500) {
      throw FetchError(FetchErrorKind::Permanent,
                       "tile " + describe(t) + ": HTTP " + std::to_string(status), t, attempt, status);
    }
    if (status >= 500 || status < 200 || status >= 300) {
      last_error = "HTTP " + std::to_string(status);
      continue;
    }
    Bytes body(res->body.begin(), res->body.end());
    if (sniff_format(body) == ImageFormat::Unknown) {
      throw FetchError(FetchErrorKind::Content, "tile " + describe(t) + ": payload is not an image", t,
                       attempt, status);
    }
    cache_.put(source_.id, t, source_.extension, body);
    return {std::move(body), attempt, false};
  }
  throw FetchError(FetchErrorKind::Transient,
                   "tile " + describe(t) + ": gave up after " + std::to_string(source_.retry.max_attempts) +
                       " attempts (" + last_error + ")",
                   t, source_.retry.max_attempts, status);
}

std::vector<FetchOutcome> TileFetcher::fetch_all(const std::vector<TileCoord>& coords) {
  std::vector<FetchOutcome> outcomes(coords.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < coords.size(); i = next++) {
      outcomes[i].coord = coords[i];
      try {
        outcomes[i].result = fetch(coords[i]);
      } catch (const FetchError& e) {
        outcomes[i].error = e;
      } catch (const Error& e) {
        outcomes[i].error = FetchError(FetchErrorKind::Permanent, e.what(), coords[i], 0, 0);
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(source_.max_parallel), coords.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }
  return outcomes;
}

FetchResult fetch_tile(const TileSource& source, const TileCoord& t, const TileCache& cache) {
  TileFetcher fetcher(source, cache);
  return fetcher.fetch(t);
}

MissingPolicy parse_missing_policy(std::string_view name) {
  if (name == "fail") return MissingPolicy::Fail;
  if (name == "fill_black") return MissingPolicy::FillBlack;
  throw ConfigError("unknown missing-tile policy '" + std::string(name) + "'");
}

GeoRaster assemble_mosaic(TileFetcher& fetcher, const PixelBox& box, MissingPolicy policy) {
  const TileRange range = tiles_covering(box);
  std::vector<TileCoord> coords;
  for (std::int64_t ty = range.y_min; ty <= range.y_max; ++ty) {
    for (std::int64_t tx = range.x_min; tx <= range.x_max; ++tx) coords.push_back({tx, ty, box.zoom});
  }
  std::vector<FetchOutcome> outcomes = fetcher.fetch_all(coords);

  GeoRaster mosaic(box.width(), box.height(), 3, transform_for(box));
  std::vector<TileCoord> missing;
  std::string reasons;
  for (FetchOutcome& o : outcomes) {
    std::optional<GeoRaster> tile;
    if (o.result) {
      try {
        tile = decode_image(o.result->bytes);
        if (tile->width() != kTileSize || tile->height() != kTileSize) {
          throw IoError("tile is " + std::to_string(tile->width()) + "x" + std::to_string(tile->height()));
        }
      } catch (const Error& e) {
        tile.reset();
        reasons += "\n  " + describe(o.coord) + ": " + e.what();
      }
    } else if (o.error) {
      reasons += "\n  " + describe(o.coord) + ": " + o.error->what();
    }
    if (!tile) {
      missing.push_back(o.coord);
      continue;
    }
    if (tile->bands() == 1) {
      GeoRaster rgb(kTileSize, kTileSize, 3);
      for (int b = 0; b < 3; ++b) {
        for (Index y = 0; y < kTileSize; ++y) {
          for (Index x = 0; x < kTileSize; ++x) rgb(x, y, b) = (*tile)(x, y);
        }
      }
      tile = std::move(rgb);
    }
    mosaic.paste(*tile, o.coord.x * kTileSize - box.x0, o.coord.y * kTileSize - box.y0);
  }
  if (!missing.empty() && policy == MissingPolicy::Fail) {
    throw MosaicError(std::to_string(missing.size()) + " tile(s) missing:" + reasons, missing);
  }
  return mosaic;
}

GeoRaster assemble_mosaic(TileFetcher& fetcher, const GeoPoint& corner_a, const GeoPoint& corner_b, int zoom,
                          MissingPolicy policy) {
  return assemble_mosaic(fetcher, bbox_to_pixel_box(corner_a, corner_b, zoom), policy);
}

}  // namespace urbanmap
