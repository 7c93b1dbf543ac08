#include "urbanmap/annotation.hpp"

#include <chrono>
#include <cmath>
#include <mutex>

#include <nlohmann/json.hpp>

namespace urbanmap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

json event_json(const CellAnnotation& a) {
  return {{"i", a.i},
          {"j", a.j},
          {"diversity", a.code.diversity_level()},
          {"pattern", std::string(1, a.code.pattern_letter())},
          {"timestamp", a.timestamp_ms},
          {"annotator", a.annotator}};
}

CellAnnotation event_from(const json& j) {
  CellAnnotation a;
  a.i = j.at("i").get<Index>();
  a.j = j.at("j").get<Index>();
  a.code = make_code(j.at("diversity").get<int>(), j.at("pattern").get<std::string>().at(0));
  a.timestamp_ms = j.at("timestamp").get<std::int64_t>();
  a.annotator = j.value("annotator", std::string());
  return a;
}

}  // namespace

PixelRect CellGrid::cell_rect(Index i, Index j) const {
  const auto edge = [this](Index k, Index limit) {
    return std::min(limit, static_cast<Index>(std::floor(static_cast<double>(k) * cell_px)));
  };
  const Index x0 = edge(j, width), x1 = edge(j + 1, width);
  const Index y0 = edge(i, height), y1 = edge(i + 1, height);
  return {x0, y0, x1 - x0, y1 - y0};
}

json CellGrid::to_json() const {
  json cells = json::array();
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const PixelRect r = cell_rect(i, j);
      const GeoPoint nw = transform.pixel_to_latlon(static_cast<double>(r.x), static_cast<double>(r.y));
      const GeoPoint se = transform.pixel_to_latlon(static_cast<double>(r.x + r.width),
                                                    static_cast<double>(r.y + r.height));
      cells.push_back({{"i", i},
                       {"j", j},
                       {"x", r.x},
                       {"y", r.y},
                       {"width", r.width},
                       {"height", r.height},
                       {"nw", {nw.lat, nw.lon}},
                       {"se", {se.lat, se.lon}}});
    }
  }
  return {{"cell_size_m", cell_size_m},
          {"cell_size_px", cell_px},
          {"rows", rows},
          {"cols", cols},
          {"width", width},
          {"height", height},
          {"zoom", transform.zoom},
          {"origin_px", {transform.origin_px.x(), transform.origin_px.y()}},
          {"scale_m_per_px", transform.scale_m_per_px},
          {"cells", cells}};
}

CellGrid make_cell_grid(Index width, Index height, const GeoTransform& transform, double cell_size_m) {
  if (width <= 0 || height <= 0) throw DimensionError("cell grid needs a non-empty raster");
  if (!(transform.scale_m_per_px > 0.0) || !(cell_size_m > 0.0)) {
    throw ConfigError("cell size and raster scale must be positive");
  }
  CellGrid g;
  g.width = width;
  g.height = height;
  g.transform = transform;
  g.cell_size_m = cell_size_m;
  g.cell_px = cell_size_m / transform.scale_m_per_px;
  if (g.cell_px < 1.0) throw ConfigError("cells would be smaller than one pixel");
  g.cols = static_cast<Index>(std::ceil(static_cast<double>(width) / g.cell_px));
  g.rows = static_cast<Index>(std::ceil(static_cast<double>(height) / g.cell_px));
  // Guard against floating-point ceil producing an empty trailing cell.
  while (g.cols > 1 && g.cell_rect(0, g.cols - 1).width == 0) --g.cols;
  while (g.rows > 1 && g.cell_rect(g.rows - 1, 0).height == 0) --g.rows;
  return g;
}

json annotation_to_json(const CellAnnotation& a, const ColorMap& palette) {
  const Rgb c = palette.color(a.label());
  return {{"i", a.i},
          {"j", a.j},
          {"code", a.code.str()},
          {"diversity", a.code.diversity_level()},
          {"pattern", std::string(1, a.code.pattern_letter())},
          {"label", index_of(a.label())},
          {"label_name", std::string(label_name(a.label()))},
          {"color", {c.r, c.g, c.b}},
          {"timestamp", a.timestamp_ms},
          {"annotator", a.annotator}};
}

AnnotationJournal::AnnotationJournal(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  bool torn_tail = false;
  {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        apply(event_from(json::parse(line)));
        ++events_;
      } catch (const std::exception&) {
        if (in.peek() != std::char_traits<char>::eof()) {
          throw ConfigError("corrupt annotation journal line " + std::to_string(events_ + 1) + " in '" +
                            path_.string() + "'");
        }
        torn_tail = true;
      }
    }
  }
  out_.open(path_, std::ios::app);
  if (!out_) throw IoError("cannot open annotation journal '" + path_.string() + "'");
  if (torn_tail) out_ << '\n';
}

void AnnotationJournal::apply(const CellAnnotation& a) {
  auto [it, inserted] = state_.try_emplace({a.i, a.j}, a);
  if (!inserted && a.timestamp_ms >= it->second.timestamp_ms) it->second = a;
}

CellAnnotation AnnotationJournal::record(CellAnnotation event) {
  std::unique_lock lock(mutex_);
  if (event.timestamp_ms == 0) event.timestamp_ms = now_ms();
  out_ << event_json(event).dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("cannot append to annotation journal '" + path_.string() + "'");
  ++events_;
  apply(event);
  return state_.at({event.i, event.j});
}

std::optional<CellAnnotation> AnnotationJournal::get(Index i, Index j) const {
  std::shared_lock lock(mutex_);
  const auto it = state_.find({i, j});
  if (it == state_.end()) return std::nullopt;
  return it->second;
}

std::map<std::pair<Index, Index>, CellAnnotation> AnnotationJournal::snapshot() const {
  std::shared_lock lock(mutex_);
  return state_;
}

std::size_t AnnotationJournal::events() const {
  std::shared_lock lock(mutex_);
  return events_;
}

LabelRaster rasterize(const CellGrid& grid, const std::map<std::pair<Index, Index>, CellAnnotation>& cells,
                      const ColorMap& palette) {
  LabelRaster out(grid.width, grid.height, palette, grid.transform);
  for (const auto& [key, a] : cells) {
    if (!grid.contains(key.first, key.second)) continue;
    out.fill(grid.cell_rect(key.first, key.second), a.label());
  }
  return out;
}

}  // namespace urbanmap
