#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "urbanmap/image_io.hpp"
#include "urbanmap/raster.hpp"
#include "urbanmap/tilemath.hpp"

namespace urbanmap {

struct RetryPolicy {
  int max_attempts = 3;
  int backoff_base_ms = 200;
};

/// Where tiles come from. The URL template uses {x} {y} {z}, or {quadkey}, and optionally {s}
/// for subdomain rotation.
struct TileSource {
  std::string id = "default";
  std::string url_template;
  std::vector<std::string> subdomains;
  std::vector<std::pair<std::string, std::string>> headers;
  int max_parallel = 4;
  RetryPolicy retry;
  int min_delay_ms = 0;
  int timeout_ms = 10000;
  std::string extension = "jpg";
  int min_zoom = 1;
  int max_zoom = kMaxZoom;

  /// Throws ConfigError.
  void validate() const;
  std::string url_for(const TileCoord& t) const;
};

TileSource tile_source_from_json(const nlohmann::json& doc);
TileSource load_tile_source(const std::filesystem::path& path);

/// On-disk tile store laid out as <root>/<source>/<z>/<x>/<y>.<ext>. Keys never depend on
/// the URL. Writes go through a temporary file and a rename, so concurrent writers of one
/// key leave exactly one complete entry behind.
class TileCache {
public:
  explicit TileCache(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path path_for(const std::string& source_id, const TileCoord& t,
                                 const std::string& extension) const;
  std::optional<Bytes> get(const std::string& source_id, const TileCoord& t,
                           const std::string& extension) const;
  void put(const std::string& source_id, const TileCoord& t, const std::string& extension,
           std::span<const std::uint8_t> bytes) const;
  /// Modification time of the cached entry, which is when it was fetched.
  std::optional<std::filesystem::file_time_type> fetched_at(const std::string& source_id,
                                                            const TileCoord& t,
                                                            const std::string& extension) const;

private:
  std::filesystem::path root_;
};

enum class FetchErrorKind { Permanent, Transient, Content };

class FetchError : public Error {
public:
  FetchError(FetchErrorKind kind, const std::string& what, TileCoord coord, int attempts, int status)
      : Error(what), kind_(kind), coord_(coord), attempts_(attempts), status_(status) {}

  FetchErrorKind kind() const noexcept { return kind_; }
  const TileCoord& coord() const noexcept { return coord_; }
  int attempts() const noexcept { return attempts_; }
  /// Last HTTP status, or 0 when no response arrived.
  int status() const noexcept { return status_; }

private:
  FetchErrorKind kind_;
  TileCoord coord_;
  int attempts_;
  int status_;
};

struct FetchResult {
  Bytes bytes;
  int attempts = 0;
  bool from_cache = false;
};

struct FetchOutcome {
  TileCoord coord;
  std::optional<FetchResult> result;
  std::optional<FetchError> error;
};

class TileFetcher {
public:
  TileFetcher(TileSource source, TileCache cache);

  const TileSource& source() const noexcept { return source_; }
  const TileCache& cache() const noexcept { return cache_; }

  /// Cache first, then the network with retries. 4xx fails at once; 5xx and transport
  /// errors are retried with exponential backoff. Throws FetchError.
  FetchResult fetch(const TileCoord& t);

  /// Fetches every coordinate on a pool of at most max_parallel workers. Outcomes come back
  /// in input order.
  std::vector<FetchOutcome> fetch_all(const std::vector<TileCoord>& coords);

  /// HTTP requests issued so far, retries included.
  std::int64_t network_requests() const noexcept { return requests_.load(); }

private:
  void pace();

  TileSource source_;
  TileCache cache_;
  std::counting_semaphore<> slots_;
  std::mutex pace_mutex_;
  std::chrono::steady_clock::time_point next_request_{};
  std::atomic<std::int64_t> requests_{0};
};

/// One-off fetch through a fresh fetcher.
FetchResult fetch_tile(const TileSource& source, const TileCoord& t, const TileCache& cache);

enum class MissingPolicy { Fail, FillBlack };

MissingPolicy parse_missing_policy(std::string_view name);

/// Lists every missing tile when assembly fails under MissingPolicy::Fail.
class MosaicError : public Error {
public:
  MosaicError(const std::string& what, std::vector<TileCoord> missing)
      : Error(what), missing_(std::move(missing)) {}
  const std::vector<TileCoord>& missing() const noexcept { return missing_; }

private:
  std::vector<TileCoord> missing_;
};

/// RGB mosaic of exactly the pixel box, with tile (x, y) placed at
/// (x * 256 - box.x0, y * 256 - box.y0).
GeoRaster assemble_mosaic(TileFetcher& fetcher, const PixelBox& box, MissingPolicy policy);

GeoRaster assemble_mosaic(TileFetcher& fetcher, const GeoPoint& corner_a, const GeoPoint& corner_b,
                          int zoom, MissingPolicy policy);

}  // namespace urbanmap
