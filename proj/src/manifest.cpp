#include "urbanmap/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "urbanmap/image_io.hpp"

namespace urbanmap {

namespace fs = std::filesystem;
using nlohmann::json;

void HyperparameterRecord::validate() const {
  if (optimizer.empty()) throw ConfigError("optimizer name is empty");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (epochs <= 0 || num_classes <= 0 || crop <= 0 || output_stride <= 0) {
    throw ConfigError("epochs, num_classes, crop and output_stride must be positive");
  }
  if (backbone != "resnet" && backbone != "xception") {
    throw ConfigError("backbone must be 'resnet' or 'xception', got '" + backbone + "'");
  }
}

std::vector<TileEntry> DatasetLayout::tiles_for(TileRole role) const {
  std::vector<TileEntry> out;
  std::copy_if(tiles.begin(), tiles.end(), std::back_inserter(out),
               [role](const TileEntry& t) { return t.role == role; });
  return out;
}

std::size_t expected_window_count(Index dimension, const WindowSpec& spec) {
  const Index stride = spec.stride();
  if (dimension < spec.size) return 0;
  if (dimension == spec.size) return 1;
  return static_cast<std::size_t>((dimension - spec.size + stride - 1) / stride + 1);
}

namespace {

std::string tile_name(Index x, Index y, std::string_view kind) {
  return std::to_string(y) + "_" + std::to_string(x) + "_" + std::string(kind) + ".png";
}

void sort_tiles(std::vector<TileEntry>& tiles) {
  std::sort(tiles.begin(), tiles.end(), [](const TileEntry& a, const TileEntry& b) {
    return std::tuple(static_cast<int>(a.role), a.y, a.x) < std::tuple(static_cast<int>(b.role), b.y, b.x);
  });
}

RegionInfo write_region(const GeoRaster& image, const LabelRaster& labels, const WindowSpec& window,
                        TileRole role, Index row_offset, const fs::path& out_dir,
                        std::vector<TileEntry>& tiles) {
  const std::string role_dir(role_name(role));
  RegionInfo info{row_offset, labels.width(), labels.height(), role_dir + "_region_lbl.png",
                  class_histogram(labels)};
  save_labels(out_dir / info.label, labels);

  const WindowGrid grid = grid_windows(image.width(), image.height(), window);
  for (const TileRecord& rec : extract_tiles(image, labels, grid, role)) {
    TileEntry entry{role, rec.x, rec.y, rec.size, role_dir + "/" + tile_name(rec.x, rec.y, "img"),
                    role_dir + "/" + tile_name(rec.x, rec.y, "lbl")};
    write_file_atomic(out_dir / entry.image, encode_png(rec.image));
    write_file_atomic(out_dir / entry.label,
                      encode_png(GeoRaster(GeoRaster::Storage(rec.label->classes()), 1)));
    tiles.push_back(std::move(entry));
  }
  return info;
}

json window_json(const WindowSpec& w) {
  return {{"size", w.size}, {"overlap", w.overlap}, {"stride", w.stride()}};
}

WindowSpec window_from(const json& j) {
  WindowSpec w{j.at("size").get<Index>(), j.at("overlap").get<double>()};
  w.validate();
  if (j.contains("stride") && j.at("stride").get<Index>() != w.stride()) {
    throw ConfigError("window stride disagrees with size and overlap");
  }
  return w;
}

json region_json(const RegionInfo& r) {
  return {{"row_offset", r.row_offset},
          {"width", r.width},
          {"height", r.height},
          {"label", r.label},
          {"histogram", r.histogram.counts}};
}

RegionInfo region_from(const json& j) {
  RegionInfo r;
  r.row_offset = j.at("row_offset").get<Index>();
  r.width = j.at("width").get<Index>();
  r.height = j.at("height").get<Index>();
  r.label = j.at("label").get<std::string>();
  const auto counts = j.at("histogram").get<std::vector<std::uint64_t>>();
  if (counts.size() != kNumLabels) throw ConfigError("region histogram needs 5 counts");
  std::copy(counts.begin(), counts.end(), r.histogram.counts.begin());
  return r;
}

void check_tile_counts(const DatasetLayout& l) {
  for (const TileRole role : {TileRole::Train, TileRole::Test}) {
    const RegionInfo& r = l.region(role);
    const WindowSpec& w = role == TileRole::Train ? l.train_window : l.test_window;
    const std::size_t expected = expected_window_count(r.width, w) * expected_window_count(r.height, w);
    const std::size_t actual = l.tiles_for(role).size();
    if (expected != actual) {
      throw ConfigError(std::string(role_name(role)) + " tile count " + std::to_string(actual) +
                        " does not match the grid (" + std::to_string(expected) + ")");
    }
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

DatasetLayout write_dataset(const GeoRaster& image, const LabelRaster& labels, const DatasetOptions& options,
                            const fs::path& out_dir) {
  if (image.width() != labels.width() || image.height() != labels.height()) {
    throw DimensionError("image and ground truth dimensions differ");
  }
  options.train_window.validate();
  options.test_window.validate();

  DatasetLayout layout;
  layout.width = image.width();
  layout.height = image.height();
  layout.transform = image.transform();
  layout.split = options.split;
  layout.rows = split_rows(image.height(), options.split);
  layout.train_window = options.train_window;
  layout.test_window = options.test_window;
  layout.palette = labels.palette();

  const auto [train_img, test_img] = split_train_test(image, options.split);
  const auto [train_lbl, test_lbl] = split_train_test(labels, options.split);
  // Grid both regions before writing anything so a too-small region fails cleanly.
  grid_windows(train_img.width(), train_img.height(), options.train_window);
  grid_windows(test_img.width(), test_img.height(), options.test_window);

  fs::create_directories(out_dir);
  layout.train = write_region(train_img, train_lbl, options.train_window, TileRole::Train, 0, out_dir,
                              layout.tiles);
  layout.test = write_region(test_img, test_lbl, options.test_window, TileRole::Test,
                             layout.rows.train_rows, out_dir, layout.tiles);
  sort_tiles(layout.tiles);
  write_text_atomic(out_dir / kLayoutFile, layout_to_json(layout).dump(2) + "\n");
  return layout;
}

json layout_to_json(const DatasetLayout& l) {
  json tiles = json::array();
  for (const TileEntry& t : l.tiles) {
    tiles.push_back({{"role", std::string(role_name(t.role))},
                     {"x", t.x},
                     {"y", t.y},
                     {"size", t.size},
                     {"image", t.image},
                     {"label", t.label}});
  }
  return {
      {"raster",
       {{"width", l.width},
        {"height", l.height},
        {"zoom", l.transform.zoom},
        {"origin_px", {l.transform.origin_px.x(), l.transform.origin_px.y()}},
        {"scale_m_per_px", l.transform.scale_m_per_px}}},
      {"split",
       {{"train_fraction", l.split.train_fraction},
        {"train_rows", l.rows.train_rows},
        {"test_rows", l.rows.test_rows}}},
      {"windows", {{"train", window_json(l.train_window)}, {"test", window_json(l.test_window)}}},
      {"classes", typology_to_json(l.palette).at("classes")},
      {"regions", {{"train", region_json(l.train)}, {"test", region_json(l.test)}}},
      {"tiles", tiles},
  };
}

DatasetLayout layout_from_json(const json& doc) {
  try {
    DatasetLayout l;
    const json& raster = doc.at("raster");
    l.width = raster.at("width").get<Index>();
    l.height = raster.at("height").get<Index>();
    l.transform.zoom = raster.at("zoom").get<int>();
    l.transform.origin_px =
        Eigen::Vector2d(raster.at("origin_px").at(0).get<double>(), raster.at("origin_px").at(1).get<double>());
    l.transform.scale_m_per_px = raster.at("scale_m_per_px").get<double>();
    const json& split = doc.at("split");
    l.split.train_fraction = split.at("train_fraction").get<double>();
    l.rows = {split.at("train_rows").get<Index>(), split.at("test_rows").get<Index>()};
    if (l.rows.train_rows + l.rows.test_rows != l.height) {
      throw ConfigError("train rows + test rows must equal the raster height");
    }
    l.train_window = window_from(doc.at("windows").at("train"));
    l.test_window = window_from(doc.at("windows").at("test"));
    l.palette = colormap_from_json(doc.at("classes"));
    l.train = region_from(doc.at("regions").at("train"));
    l.test = region_from(doc.at("regions").at("test"));
    for (const json& t : doc.at("tiles")) {
      l.tiles.push_back({parse_role(t.at("role").get<std::string>()), t.at("x").get<Index>(),
                         t.at("y").get<Index>(), t.at("size").get<Index>(), t.at("image").get<std::string>(),
                         t.at("label").get<std::string>()});
    }
    check_tile_counts(l);
    return l;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("dataset layout: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(std::string("dataset layout: ") + e.what());
  }
}

json hyperparameters_to_json(const HyperparameterRecord& h) {
  return {{"optimizer", h.optimizer},     {"learning_rate", h.learning_rate}, {"epochs", h.epochs},
          {"num_classes", h.num_classes}, {"crop", h.crop},                   {"backbone", h.backbone},
          {"output_stride", h.output_stride}};
}

HyperparameterRecord hyperparameters_from_json(const json& doc) {
  HyperparameterRecord h;
  h.optimizer = doc.at("optimizer").get<std::string>();
  h.learning_rate = doc.at("learning_rate").get<double>();
  h.epochs = doc.at("epochs").get<int>();
  h.num_classes = doc.at("num_classes").get<int>();
  h.crop = doc.at("crop").get<int>();
  h.backbone = doc.at("backbone").get<std::string>();
  h.output_stride = doc.at("output_stride").get<int>();
  h.validate();
  return h;
}

json manifest_to_json(const DatasetManifest& m) {
  json doc = layout_to_json(m.layout);
  doc["schema_version"] = m.schema_version;
  doc["class_weights"] = {{"scheme", std::string(weighting_name(m.weights.scheme))},
                          {"values", {m.weights.weights(0), m.weights.weights(1), m.weights.weights(2),
                                      m.weights.weights(3)}}};
  doc["hyperparameters"] = hyperparameters_to_json(m.hyperparameters);
  return doc;
}

DatasetManifest manifest_from_json(const json& doc) {
  try {
    DatasetManifest m;
    m.schema_version = doc.at("schema_version").get<int>();
    if (m.schema_version != kManifestSchemaVersion) {
      throw ConfigError("unsupported manifest schema_version " + std::to_string(m.schema_version));
    }
    m.layout = layout_from_json(doc);
    const json& weights = doc.at("class_weights");
    m.weights.scheme = parse_weighting(weights.at("scheme").get<std::string>());
    const auto values = weights.at("values").get<std::vector<double>>();
    if (values.size() != kNumRealClasses) throw ConfigError("class_weights.values needs 4 entries");
    for (int c = 0; c < kNumRealClasses; ++c) {
      if (!(values[c] > 0.0)) throw ConfigError("class weights must be positive");
      m.weights.weights(c) = values[c];
    }
    m.hyperparameters = hyperparameters_from_json(doc.at("hyperparameters"));
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
}

DatasetManifest load_manifest(const fs::path& path) {
  try {
    return manifest_from_json(json::parse(read_text(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest '" + path.string() + "': " + e.what());
  }
}

DatasetManifest export_manifest(const fs::path& dataset_dir, const ExportOptions& options) {
  options.hyperparameters.validate();
  DatasetManifest m;
  try {
    m.layout = layout_from_json(json::parse(read_text(dataset_dir / kLayoutFile)));
  } catch (const json::parse_error& e) {
    throw ConfigError("dataset layout: " + std::string(e.what()));
  }
  sort_tiles(m.layout.tiles);

  auto require = [&](const std::string& rel) {
    if (!fs::is_regular_file(dataset_dir / rel)) {
      throw IoError("missing dataset file: " + (dataset_dir / rel).string());
    }
  };
  require(m.layout.train.label);
  require(m.layout.test.label);
  for (const TileEntry& t : m.layout.tiles) {
    require(t.image);
    require(t.label);
  }
  m.weights = class_weights(m.layout.train.histogram, options.weighting);
  m.hyperparameters = options.hyperparameters;
  write_text_atomic(dataset_dir / kManifestFile, manifest_to_json(m).dump(2) + "\n");
  return m;
}

}  // namespace urbanmap
