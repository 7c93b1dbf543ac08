// Command-line front end: fetch imagery, build datasets, run backends, stitch and score.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "urbanmap/annotation.hpp"
#include "urbanmap/backend.hpp"
#include "urbanmap/evaluation.hpp"
#include "urbanmap/image_io.hpp"
#include "urbanmap/manifest.hpp"
#include "urbanmap/metrics.hpp"
#include "urbanmap/tilefetch.hpp"
#include "urbanmap/typology.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace urbanmap;

namespace {

struct Common {
  std::string colormap;
  int tolerance = kDefaultColorTolerance;

  ColorMap palette() const { return colormap.empty() ? ColorMap::standard() : load_colormap(colormap); }
};

std::pair<GeoPoint, GeoPoint> parse_bbox(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ParseError("bad --bbox value '" + item + "'");
    }
  }
  if (v.size() != 4) throw ParseError("--bbox needs lat1,lon1,lat2,lon2");
  return {{v[0], v[1]}, {v[2], v[3]}};
}

void print_report(const MetricsReport& report) {
  for (const std::string& line : summary_lines(report)) std::cout << line << '\n';
}

void write_json(const std::string& path, const json& doc) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
  } else {
    write_text_atomic(path, doc.dump(2) + "\n");
  }
}

AnnotationServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Urban typology mapping from satellite tiles"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--colormap", common.colormap, "JSON palette overriding the default class colors");
  app.add_option("--tolerance", common.tolerance, "Per-channel color tolerance when encoding RGB labels");

  // typology
  auto* typology = app.add_subcommand("typology", "Print the typology matrix and palette as JSON");

  // fetch
  std::string bbox, source_path, url, out, cache_dir = "tile-cache", missing = "fail";
  int zoom = 17;
  auto* fetch = app.add_subcommand("fetch", "Download tiles for a bounding box and assemble a mosaic");
  fetch->add_option("--bbox", bbox, "lat1,lon1,lat2,lon2")->required();
  fetch->add_option("--zoom", zoom)->capture_default_str();
  auto* src_opt = fetch->add_option("--source", source_path, "Tile source JSON");
  fetch->add_option("--url", url, "URL template, instead of --source")->excludes(src_opt);
  fetch->add_option("--out", out, "Output PNG (a .meta.json sidecar is written next to it)")->required();
  fetch->add_option("--cache", cache_dir)->capture_default_str();
  fetch->add_option("--missing", missing, "fail | fill_black")->capture_default_str();

  // grid
  std::string image_path, labels_path, dataset_dir;
  Index window = 513;
  double overlap = 0.70, test_overlap = 0.0, split = 0.70;
  auto* grid = app.add_subcommand("grid", "Split, grid and write training and test tiles");
  grid->add_option("--image", image_path)->required()->check(CLI::ExistingFile);
  grid->add_option("--labels", labels_path, "Class-index or color label PNG")->required()->check(CLI::ExistingFile);
  grid->add_option("--out", dataset_dir)->required();
  grid->add_option("--window", window)->capture_default_str();
  grid->add_option("--overlap", overlap, "Training window overlap")->capture_default_str();
  grid->add_option("--test-overlap", test_overlap)->capture_default_str();
  grid->add_option("--split", split, "Fraction of rows, from the top, used for training")->capture_default_str();

  // weights
  std::string scheme = "inverse_freq";
  auto* weights = app.add_subcommand("weights", "Class weights from a label raster");
  weights->add_option("--labels", labels_path)->required()->check(CLI::ExistingFile);
  weights->add_option("--scheme", scheme, "inverse_freq | median_freq | none")->capture_default_str();

  // export
  HyperparameterRecord hp;
  auto* exp = app.add_subcommand("export", "Write manifest.json for a gridded dataset");
  exp->add_option("--dataset", dataset_dir)->required()->check(CLI::ExistingDirectory);
  exp->add_option("--weighting", scheme, "inverse_freq | median_freq | none")->capture_default_str();
  exp->add_option("--backbone", hp.backbone, "resnet | xception")->capture_default_str();
  exp->add_option("--epochs", hp.epochs)->capture_default_str();
  exp->add_option("--lr", hp.learning_rate)->capture_default_str();
  exp->add_option("--optimizer", hp.optimizer)->capture_default_str();
  exp->add_option("--output-stride", hp.output_stride)->capture_default_str();

  // infer
  std::string manifest_path, backend_spec, preds_dir;
  unsigned workers = 0;
  int timeout_s = 0;
  auto* infer = app.add_subcommand("infer", "Run a backend over the test tiles");
  infer->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  infer->add_option("--backend", backend_spec, "constant:N | heuristic[:B] | identity | external:CMD")->required();
  infer->add_option("--out", preds_dir)->required();
  infer->add_option("--workers", workers, "Threads for in-process backends (0 = all cores)");
  infer->add_option("--timeout", timeout_s, "Seconds before an external backend is killed");

  // stitch
  std::string policy = "majority";
  auto* stitch_cmd = app.add_subcommand("stitch", "Reassemble prediction tiles into the test region");
  stitch_cmd->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  stitch_cmd->add_option("--preds", preds_dir)->required()->check(CLI::ExistingDirectory);
  stitch_cmd->add_option("--out", out)->required();
  stitch_cmd->add_option("--policy", policy, "majority | first")->capture_default_str();

  // eval
  std::string gt_path, pred_path, report_path, stitched_path;
  int ignore = 0;
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--gt", gt_path, "Ground-truth label raster");
  eval->add_option("--pred", pred_path, "Predicted label raster");
  eval->add_option("--ignore", ignore, "Class index excluded from scoring")->capture_default_str();
  eval->add_option("--manifest", manifest_path, "Score a prediction directory against a dataset");
  eval->add_option("--preds", preds_dir);
  eval->add_option("--report", report_path, "JSON report path (- for stdout)");
  eval->add_option("--stitched", stitched_path, "Color PNG of the stitched prediction");

  // serve
  std::string host = "127.0.0.1", journal_path, source_id = "default", extension = "jpg", static_dir;
  int port = 8080;
  double cell_m = kCellSizeM;
  auto* serve = app.add_subcommand("serve", "HTTP API for cell annotation");
  serve->add_option("--imagery", image_path, "Mosaic PNG with sidecar")->required()->check(CLI::ExistingFile);
  serve->add_option("--labels,--journal", journal_path, "Annotation journal (JSON lines)")->required();
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--cell-size", cell_m, "Cell edge in meters")->capture_default_str();
  serve->add_option("--cache", cache_dir, "Tile cache to expose under /tiles");
  serve->add_option("--source-id", source_id)->capture_default_str();
  serve->add_option("--extension", extension)->capture_default_str();
  serve->add_option("--static", static_dir, "Directory of front-end assets");

  // rasterize
  auto* rasterize_cmd = app.add_subcommand("rasterize", "Render an annotation journal to a label raster");
  rasterize_cmd->add_option("--imagery", image_path)->required()->check(CLI::ExistingFile);
  rasterize_cmd->add_option("--labels,--journal", journal_path)->required()->check(CLI::ExistingFile);
  rasterize_cmd->add_option("--cell-size", cell_m)->capture_default_str();
  rasterize_cmd->add_option("--out", out)->required();

  // synth
  Index synth_size = 2052, synth_cell = 24;
  std::uint64_t seed = 1;
  auto* synth = app.add_subcommand("synth", "Write a synthetic mosaic whose pixels are its label colors");
  synth->add_option("--out", dataset_dir, "Directory for image.png and labels.png")->required();
  synth->add_option("--size", synth_size)->capture_default_str();
  synth->add_option("--cell", synth_cell, "Edge of the square class cells in pixels")->capture_default_str();
  synth->add_option("--seed", seed)->capture_default_str();
  GeoPoint anchor{23.81, 90.41};
  synth->add_option("--lat", anchor.lat, "Latitude of the north-west corner")->capture_default_str();
  synth->add_option("--lon", anchor.lon, "Longitude of the north-west corner")->capture_default_str();
  synth->add_option("--zoom", zoom)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    const ColorMap palette = common.palette();

    if (*synth) {
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<int> cls(0, kNumLabels - 1);
      const Index cells = (synth_size + synth_cell - 1) / synth_cell;
      std::vector<std::uint8_t> pick(static_cast<std::size_t>(cells * cells));
      for (auto& c : pick) c = static_cast<std::uint8_t>(cls(rng));
      LabelRaster::Storage s(synth_size, synth_size);
      for (Index y = 0; y < synth_size; ++y) {
        for (Index x = 0; x < synth_size; ++x) s(y, x) = pick[static_cast<std::size_t>((y / synth_cell) * cells + x / synth_cell)];
      }
      const Eigen::Vector2d nw = latlon_to_global_pixel<double>(anchor, zoom).array().floor();
      const auto x0 = static_cast<std::int64_t>(nw.x()), y0 = static_cast<std::int64_t>(nw.y());
      const LabelRaster labels(std::move(s), palette,
                               transform_for(PixelBox{x0, y0, x0 + synth_size, y0 + synth_size, zoom}));
      fs::create_directories(dataset_dir);
      save_raster(fs::path(dataset_dir) / "image.png", decode_labels(labels));
      save_labels(fs::path(dataset_dir) / "labels.png", labels);
    } else if (*typology) {
      std::cout << typology_to_json(palette).dump(2) << '\n';
    } else if (*fetch) {
      const auto [a, b] = parse_bbox(bbox);
      TileSource source;
      if (!source_path.empty()) {
        source = load_tile_source(source_path);
      } else if (!url.empty()) {
        source.url_template = url;
        source.validate();
      } else {
        throw ConfigError("fetch needs --source or --url");
      }
      TileFetcher fetcher(source, TileCache(cache_dir));
      const GeoRaster mosaic = assemble_mosaic(fetcher, a, b, zoom, parse_missing_policy(missing));
      save_raster(out, mosaic);
      std::fprintf(stderr, "%ldx%ld mosaic, %lld network requests\n", static_cast<long>(mosaic.width()),
                   static_cast<long>(mosaic.height()), static_cast<long long>(fetcher.network_requests()));
    } else if (*grid) {
      const GeoRaster image = load_raster(image_path);
      LabelRaster labels = load_labels(labels_path, common.colormap.empty() ? std::nullopt : std::optional(palette),
                                       common.tolerance);
      const DatasetOptions options{SplitSpec{split}, WindowSpec{window, overlap}, WindowSpec{window, test_overlap}};
      const DatasetLayout layout = write_dataset(image, labels, options, dataset_dir);
      std::printf("%zu training and %zu test tiles written to %s\n", layout.tiles_for(TileRole::Train).size(),
                  layout.tiles_for(TileRole::Test).size(), dataset_dir.c_str());
    } else if (*weights) {
      const LabelRaster labels = load_labels(labels_path, std::nullopt, common.tolerance);
      const ClassHistogram h = class_histogram(labels);
      const ClassWeights w = class_weights(h, parse_weighting(scheme));
      json values = json::array();
      for (int c = 0; c < kNumRealClasses; ++c) values.push_back(w.weights(c));
      std::cout << json{{"scheme", std::string(weighting_name(w.scheme))},
                        {"histogram", h.counts},
                        {"values", values}}
                       .dump(2)
                << '\n';
    } else if (*exp) {
      const DatasetManifest m = export_manifest(dataset_dir, {parse_weighting(scheme), hp});
      std::printf("manifest written to %s (%zu tiles)\n", (fs::path(dataset_dir) / kManifestFile).c_str(),
                  m.layout.tiles.size());
    } else if (*infer) {
      InferenceBackend backend = parse_backend(backend_spec);
      if (auto* ext = std::get_if<ExternalBackend>(&backend); ext && timeout_s > 0) {
        ext->timeout = std::chrono::seconds(timeout_s);
      }
      const auto written = run_inference(backend, manifest_path, preds_dir, workers);
      std::printf("%zu prediction tiles written to %s\n", written.size(), preds_dir.c_str());
    } else if (*stitch_cmd) {
      const MergePolicy merge = policy == "first"      ? MergePolicy::FirstWins
                                : policy == "majority" ? MergePolicy::MajorityVote
                                                       : throw ConfigError("unknown policy '" + policy + "'");
      const LabelRaster stitched = stitch_predictions(load_manifest(manifest_path), preds_dir, merge);
      save_labels(out, stitched);
    } else if (*eval) {
      if (!manifest_path.empty()) {
        if (preds_dir.empty()) throw ConfigError("--manifest needs --preds");
        const DatasetManifest m = load_manifest(manifest_path);
        const EvaluationResult r = evaluate_run(m, fs::path(manifest_path).parent_path(), preds_dir);
        print_report(r.report);
        if (!report_path.empty()) write_json(report_path, report_to_json(r.report));
        if (!stitched_path.empty()) save_raster(stitched_path, decode_labels(r.stitched), r.stitched.palette());
      } else {
        if (gt_path.empty() || pred_path.empty()) throw ConfigError("eval needs --gt and --pred, or --manifest");
        const std::optional<ColorMap> pal = common.colormap.empty() ? std::nullopt : std::optional(palette);
        const LabelRaster gt = load_labels(gt_path, pal, common.tolerance);
        const LabelRaster pred = load_labels(pred_path, pal, common.tolerance);
        const MetricsReport report = make_report(confusion(gt, pred, label_from_index(ignore)));
        print_report(report);
        if (!report_path.empty()) write_json(report_path, report_to_json(report));
      }
    } else if (*serve || *rasterize_cmd) {
      const GeoRaster imagery = load_raster(image_path);
      ServerConfig cfg;
      cfg.grid = make_cell_grid(imagery.width(), imagery.height(), imagery.transform(), cell_m);
      cfg.journal = journal_path;
      cfg.palette = palette;
      if (*rasterize_cmd) {
        const AnnotationJournal journal(journal_path);
        LabelRaster labels = rasterize(cfg.grid, journal.snapshot(), palette);
        labels.set_transform(imagery.transform());
        save_labels(out, labels);
        return 0;
      }
      cfg.imagery = image_path;
      if (!cache_dir.empty() && serve->count("--cache") > 0) cfg.tile_cache = TileCache(cache_dir);
      cfg.tile_source_id = source_id;
      cfg.tile_extension = extension;
      if (!static_dir.empty()) cfg.static_dir = static_dir;
      AnnotationServer server(cfg);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::fprintf(stderr, "serving %ld x %ld cells on http://%s:%d\n", static_cast<long>(cfg.grid.rows),
                   static_cast<long>(cfg.grid.cols), host.c_str(), bound);
      server.listen();
      g_server = nullptr;
    }
  } catch (const BackendError& e) {
    std::fprintf(stderr, "urbanmap: %s\n", e.what());
    if (!e.diagnostics().empty()) std::fprintf(stderr, "%s\n", e.diagnostics().c_str());
    const int code = e.exit_code().value_or(1);
    return code == 0 ? 1 : code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "urbanmap: %s\n", e.what());
    return 1;
  }
  return 0;
}
