#include <doctest.h>

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "support/support.hpp"
#include "urbanmap/annotation.hpp"
#include "urbanmap/backend.hpp"
#include "urbanmap/evaluation.hpp"
#include "urbanmap/image_io.hpp"
#include "urbanmap/manifest.hpp"
// httplib last.
#include <httplib.h>

using namespace urbanmap;
using nlohmann::json;
using urbanmap::testing::Scene;
using urbanmap::testing::synthetic_scene;
using urbanmap::testing::TempDir;

namespace {

const DatasetOptions kSmall{SplitSpec{0.7}, WindowSpec{64, 0.7}, WindowSpec{64, 0.0}};

std::string slurp(const std::filesystem::path& p) {
  const Bytes b = read_file(p);
  return {b.begin(), b.end()};
}

struct Dataset {
  TempDir dir{"urbanmap-ds"};
  Scene scene;
  DatasetLayout layout;
  DatasetManifest manifest;

  explicit Dataset(std::uint64_t seed, Index w = 256, Index h = 256) {
    std::mt19937_64 rng(seed);
    scene = synthetic_scene(rng, w, h);
    layout = write_dataset(scene.image, scene.labels, kSmall, dir.path());
    manifest = export_manifest(dir.path());
  }
  std::filesystem::path manifest_path() const { return dir / kManifestFile; }
};

}  // namespace

TEST_CASE("dataset layout") {
  Dataset ds(11);
  const DatasetLayout& l = ds.layout;
  CHECK(l.rows.train_rows == 179);
  CHECK(l.rows.test_rows == 77);
  CHECK(l.test.row_offset == 179);
  const auto train = l.tiles_for(TileRole::Train);
  const auto test = l.tiles_for(TileRole::Test);
  CHECK(train.size() == expected_window_count(256, kSmall.train_window) * expected_window_count(179, kSmall.train_window));
  CHECK(train.size() == 12 * 8);
  CHECK(test.size() == 4 * 2);

  CHECK(l.train.histogram == class_histogram(ds.scene.labels.crop({0, 0, 256, 179})));
  CHECK(l.test.histogram == class_histogram(ds.scene.labels.crop({0, 179, 256, 77})));

  for (const TileEntry& t : l.tiles) {
    REQUIRE(std::filesystem::exists(ds.dir / t.image));
    REQUIRE(std::filesystem::exists(ds.dir / t.label));
  }
  // Tiles carry the region's pixels, with imagery blackened where the label is unknown.
  const TileEntry& t = test.back();
  const GeoRaster img = decode_image(read_file(ds.dir / t.image));
  const LabelRaster lbl = load_labels(ds.dir / t.label);
  const LabelRaster truth = ds.scene.labels.crop({t.x, t.y + 179, 64, 64});
  CHECK(lbl.same_pixels(truth));
  bool masked = true, kept = true;
  for (Index y = 0; y < 64; ++y) {
    for (Index x = 0; x < 64; ++x) {
      const bool unknown = truth.at(x, y) == ClassLabel::Unrecognized;
      for (int b = 0; b < 3; ++b) {
        if (unknown) masked = masked && img(x, y, b) == 0;
        else kept = kept && img(x, y, b) == ds.scene.image(t.x + x, t.y + 179 + y, b);
      }
    }
  }
  CHECK(masked);
  CHECK(kept);

  const json doc = json::parse(slurp(ds.dir / kLayoutFile));
  CHECK(layout_to_json(layout_from_json(doc)) == doc);
  json broken = doc;
  broken["tiles"].erase(broken["tiles"].begin());
  CHECK_THROWS_AS(layout_from_json(broken), ConfigError);
}

TEST_CASE("manifest export") {
  Dataset ds(12);
  const std::string first = slurp(ds.manifest_path());
  const DatasetManifest again = export_manifest(ds.dir.path());
  CHECK(slurp(ds.manifest_path()) == first);

  CHECK(ds.manifest.weights.weights.isApprox(class_weights(ds.layout.train.histogram).weights));
  CHECK(ds.manifest.weights.weights.mean() == doctest::Approx(1.0));
  const DatasetManifest loaded = load_manifest(ds.manifest_path());
  CHECK(manifest_to_json(loaded) == json::parse(first));
  CHECK(loaded.hyperparameters == HyperparameterRecord{});

  const json h = hyperparameters_to_json(HyperparameterRecord{});
  CHECK(h == json::parse(R"({"optimizer":"SGD","learning_rate":0.007,"epochs":26,"num_classes":5,
                             "crop":513,"backbone":"resnet","output_stride":16})"));
  HyperparameterRecord bad;
  bad.backbone = "vgg";
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  const DatasetManifest median = export_manifest(ds.dir.path(), {WeightingScheme::MedianFrequency, {}});
  CHECK(median.weights.scheme == WeightingScheme::MedianFrequency);

  const std::filesystem::path victim = ds.dir / ds.layout.tiles_for(TileRole::Test)[1].label;
  std::filesystem::remove(victim);
  try {
    export_manifest(ds.dir.path());
    FAIL("dangling tile must fail export");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find(victim.filename().string()) != std::string::npos);
  }
}

TEST_CASE("in-process backends") {
  CHECK(std::holds_alternative<ConstantBackend>(parse_backend("constant:3")));
  CHECK(std::get<ConstantBackend>(parse_backend("constant:3")).label == ClassLabel::ModeratelyFormal);
  CHECK(std::get<ColorHeuristicBackend>(parse_backend("heuristic")).block == 8);
  CHECK(std::get<ColorHeuristicBackend>(parse_backend("heuristic:4")).block == 4);
  CHECK(std::holds_alternative<IdentityBackend>(parse_backend("identity")));
  CHECK(std::get<ExternalBackend>(parse_backend("external:python3 infer.py")).command == "python3 infer.py");
  CHECK_THROWS_AS(parse_backend("constant:9"), ConfigError);
  CHECK_THROWS_AS(parse_backend("magic"), ConfigError);

  std::mt19937_64 rng(13);
  const Scene s = synthetic_scene(rng, 64, 64);
  const ColorMap palette = ColorMap::standard();
  const LabelRaster c = predict_tile(ConstantBackend{ClassLabel::HighlyFormal}, s.image, palette);
  CHECK((c.classes() == 4).all());
  // Blocks of 8 nest inside the 16-pixel label cells, so the heuristic recovers them exactly.
  CHECK(predict_tile(ColorHeuristicBackend{8}, s.image, palette).same_pixels(s.labels));
  CHECK(predict_tile(ColorHeuristicBackend{16}, s.image, palette).same_pixels(s.labels));
}

TEST_CASE("inference and evaluation") {
  Dataset ds(14);
  const auto test_tiles = ds.layout.tiles_for(TileRole::Test);

  SUBCASE("identity scores perfectly") {
    TempDir preds;
    const auto written = run_inference(IdentityBackend{}, ds.manifest_path(), preds.path());
    REQUIRE(written.size() == test_tiles.size());
    CHECK(written[0].filename() == prediction_name(test_tiles[0]));
    const EvaluationResult r = evaluate_run(ds.manifest, ds.dir.path(), preds.path());
    CHECK(r.report.overall_accuracy == 1.0);
    CHECK(r.report.miou == 1.0);
    CHECK(r.stitched.same_pixels(ds.scene.labels.crop({0, 179, 256, 77})));
    CHECK(r.report.matrix.ignored() == static_cast<std::int64_t>(ds.layout.test.histogram.counts[0]));

    write_evaluation(r, preds / "report.json", preds / "stitched.png");
    const json report = json::parse(slurp(preds / "report.json"));
    CHECK(report.at("overall_accuracy") == 1.0);
    CHECK(std::filesystem::exists(preds / "stitched.meta.json"));
    CHECK(decode_image(read_file(preds / "stitched.png")).bands() == 3);

    std::filesystem::remove(written[3]);
    CHECK_THROWS_AS(stitch_predictions(ds.manifest, preds.path()), CoverageError);
  }

  SUBCASE("constant backend scores the class share") {
    TempDir preds;
    run_inference(ConstantBackend{ClassLabel::ModeratelyInformal}, ds.manifest_path(), preds.path());
    const EvaluationResult r = evaluate_run(ds.manifest, ds.dir.path(), preds.path());
    const ClassHistogram& h = ds.layout.test.histogram;
    CHECK(accuracy(r.report.matrix) == Fraction{static_cast<std::int64_t>(h.counts[2]),
                                                static_cast<std::int64_t>(h.real_total())});
    // Overlapping windows agree with each other, so the stitched score equals each pixel counted once.
    CHECK(r.stitched.classes().cwiseEqual(2).all());
  }

  SUBCASE("heuristic runs on worker threads deterministically") {
    TempDir a, b;
    run_inference(ColorHeuristicBackend{8}, ds.manifest_path(), a.path(), 1);
    run_inference(ColorHeuristicBackend{8}, ds.manifest_path(), b.path(), 4);
    for (const TileEntry& t : test_tiles) {
      CHECK(slurp(a / prediction_name(t)) == slurp(b / prediction_name(t)));
    }
    const EvaluationResult r = evaluate_run(ds.manifest, ds.dir.path(), a.path());
    CHECK(r.report.overall_accuracy > 0.9);
  }

  SUBCASE("external process") {
    // The command receives the manifest and output directory as trailing arguments.
    TempDir preds;
    const auto script = [&](const std::string& name, const std::string& body) {
      std::ofstream(ds.dir / name) << body;
      return "external:sh " + (ds.dir / name).string();
    };
    const std::string copy_truth = script("copy_truth.sh", R"(d=$(dirname "$1")
for f in "$d"/test/*_lbl.png; do b=$(basename "$f" _lbl.png); cp "$f" "$2/${b}_img.png"; done
)");
    run_inference(parse_backend(copy_truth), ds.manifest_path(), preds.path());
    const EvaluationResult r = evaluate_run(ds.manifest, ds.dir.path(), preds.path());
    CHECK(r.report.overall_accuracy == 1.0);

    try {
      run_inference(parse_backend(script("fail.sh", "echo boom >&2\nexit 3\n")), ds.manifest_path(), preds.path());
      FAIL("failing backend must raise");
    } catch (const BackendError& e) {
      REQUIRE(e.exit_code());
      CHECK(*e.exit_code() == 3);
      CHECK(e.diagnostics().find("boom") != std::string::npos);
    }

    TempDir empty;
    CHECK_THROWS_AS(run_inference(parse_backend("external:true"), ds.manifest_path(), empty.path()), BackendError);

    ExternalBackend slow{"sleep 5", {}, std::chrono::milliseconds(200)};
    TempDir out;
    CHECK_THROWS_AS(run_inference(slow, ds.manifest_path(), out.path()), BackendError);

    TempDir wrong;
    const std::string bad_class =
        script("copy_images.sh", "for f in $(dirname \"$1\")/test/*_img.png; do cp \"$f\" \"$2\"/; done\n");
    CHECK_THROWS_AS(run_inference(parse_backend(bad_class), ds.manifest_path(), wrong.path()), BackendError);
  }
}

TEST_CASE("annotation grid and journal") {
  const GeoTransform t{Eigen::Vector2d(1000, 2000), 17, 10.0};
  const CellGrid g = make_cell_grid(100, 90, t);
  CHECK(g.cell_px == 40.0);
  CHECK(g.rows == 3);
  CHECK(g.cols == 3);
  const PixelRect edge = g.cell_rect(2, 2);
  CHECK(edge.x == 80);
  CHECK(edge.width == 20);
  CHECK(edge.height == 10);
  CHECK(g.to_json().at("cells").size() == 9);

  TempDir dir;
  const auto path = dir / "journal.jsonl";
  {
    AnnotationJournal j(path);
    j.record({0, 0, parse_code("2/A"), 100, "a"});
    j.record({0, 0, parse_code("4/D"), 50, "b"});  // older, loses
    j.record({1, 2, parse_code("3/A"), 10, "a"});
    CHECK(j.get(0, 0)->code.str() == "2/A");
    CHECK(j.events() == 3);
  }
  {
    std::ofstream torn(path, std::ios::app);
    torn << R"({"i":2,"j":2,"code":"4/)";
  }
  AnnotationJournal replay(path);
  CHECK(replay.events() == 3);
  CHECK(replay.get(0, 0)->code.str() == "2/A");
  CHECK(replay.get(1, 2)->label() == ClassLabel::ModeratelyInformal);
  CHECK_FALSE(replay.get(2, 2));

  const LabelRaster r = rasterize(g, replay.snapshot());
  CHECK(r.at(39, 39) == ClassLabel::HighlyInformal);
  CHECK(r.at(40, 0) == ClassLabel::Unrecognized);
  CHECK(r.at(99, 79) == ClassLabel::ModeratelyInformal);
  CHECK(r.at(99, 89) == ClassLabel::Unrecognized);
}

TEST_CASE("annotation server API") {
  TempDir dir;
  ServerConfig cfg;
  cfg.grid = make_cell_grid(120, 80, GeoTransform{Eigen::Vector2d(0, 0), 17, 10.0});
  cfg.journal = dir / "journal.jsonl";
  TileCache cache(dir / "cache");
  const Bytes tile = encode_png(GeoRaster(kTileSize, kTileSize, 3));
  cache.put("default", {5, 6, 4}, "jpg", tile);
  cfg.tile_cache = cache;

  AnnotationServer server(cfg);
  const int port = server.start();
  httplib::Client cli("127.0.0.1", port);

  auto typology = cli.Get("/api/typology");
  REQUIRE(typology);
  CHECK(json::parse(typology->body).at("codes").size() == 16);
  auto grid = cli.Get("/api/grid");
  REQUIRE(grid);
  CHECK(json::parse(grid->body).at("cols") == 3);

  auto empty = cli.Get("/api/cell/0/1");
  REQUIRE(empty);
  CHECK(json::parse(empty->body).at("code").is_null());
  CHECK(cli.Get("/api/cell/5/0")->status == 404);

  for (const auto& [j, body] : std::vector<std::pair<int, std::string>>{
           {0, R"({"diversity":2,"pattern":"A"})"}, {1, R"({"diversity":3,"pattern":"a"})"},
           {2, R"({"diversity":4,"pattern":"D","annotator":"t"})"}}) {
    auto res = cli.Put("/api/cell/0/" + std::to_string(j), body, "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
  }
  const json cell = json::parse(cli.Get("/api/cell/0/1")->body);
  CHECK(cell.at("code") == "3/A");
  CHECK(cell.at("label") == 2);
  CHECK(cell.at("color") == json::array({255, 255, 0}));

  CHECK(cli.Put("/api/cell/0/0", R"({"diversity":5,"pattern":"A"})", "application/json")->status == 400);
  CHECK(cli.Put("/api/cell/0/0", R"({"diversity":2})", "application/json")->status == 400);
  CHECK(cli.Put("/api/cell/0/0", "not json", "application/json")->status == 400);
  CHECK(cli.Put("/api/cell/9/9", R"({"diversity":2,"pattern":"A"})", "application/json")->status == 404);

  auto rgb = cli.Get("/api/export/labelraster?format=rgb");
  REQUIRE(rgb);
  const GeoRaster img = decode_image(std::span(reinterpret_cast<const std::uint8_t*>(rgb->body.data()), rgb->body.size()));
  CHECK(img.width() == 120);
  CHECK((img(10, 10, 0) == 255 && img(10, 10, 1) == 0 && img(10, 10, 2) == 0));
  CHECK((img(50, 10, 0) == 255 && img(50, 10, 1) == 255 && img(50, 10, 2) == 0));
  CHECK((img(90, 10, 0) == 0 && img(90, 10, 1) == 0 && img(90, 10, 2) == 255));
  CHECK((img(10, 50, 0) == 0 && img(10, 50, 1) == 0 && img(10, 50, 2) == 0));

  auto idx = cli.Get("/api/export/labelraster");
  REQUIRE(idx);
  const GeoRaster classes = decode_image(std::span(reinterpret_cast<const std::uint8_t*>(idx->body.data()), idx->body.size()));
  CHECK(classes.bands() == 1);
  CHECK(classes(50, 10, 0) == 2);

  const json meta = json::parse(cli.Get("/api/export/meta")->body);
  CHECK(meta.at("zoom") == 17);

  auto t = cli.Get("/tiles/4/5/6.png");
  REQUIRE(t);
  CHECK(t->status == 200);
  CHECK(t->body.size() == tile.size());
  CHECK(cli.Get("/tiles/4/6/6.png")->status == 404);

  server.stop();
  AnnotationJournal replay(cfg.journal);
  CHECK(replay.get(0, 2)->annotator == "t");
  CHECK(replay.snapshot().size() == 3);
}

TEST_CASE("twenty-five training tiles") {
  std::mt19937_64 rng(15);
  const Scene s = synthetic_scene(rng, 128, 256);
  TempDir dir;
  // Stride 19 over 128 pixels gives 5 origins per axis.
  write_dataset(s.image, s.labels, {SplitSpec{0.5}, WindowSpec{64, 0.7}, WindowSpec{64, 0.0}}, dir.path());
  const DatasetManifest m = export_manifest(dir.path());
  CHECK(m.layout.tiles_for(TileRole::Train).size() == 25);
  CHECK(expected_window_count(128, WindowSpec{64, 0.7}) == 5);
}

TEST_CASE("stitched score equals the sum of tile matrices") {
  std::mt19937_64 rng(16);
  const Scene s = synthetic_scene(rng, 256, 320, 12, 20);
  TempDir dir;
  // The test region is 256 x 64, so its windows tile it without overlap.
  write_dataset(s.image, s.labels, {SplitSpec{0.8}, WindowSpec{64, 0.7}, WindowSpec{64, 0.0}}, dir.path());
  const DatasetManifest m = export_manifest(dir.path());
  for (const InferenceBackend& b : {InferenceBackend{ColorHeuristicBackend{8}},
                                    InferenceBackend{ConstantBackend{ClassLabel::HighlyFormal}}}) {
    TempDir preds;
    run_inference(b, dir / kManifestFile, preds.path());
    const EvaluationResult r = evaluate_run(m, dir.path(), preds.path());
    CHECK(r.tile_sum == r.report.matrix);
  }
}

TEST_CASE("encode, mask, split, grid, identity, stitch and decode reproduce the test region") {
  std::mt19937_64 rng(17);
  const Scene s = synthetic_scene(rng, 200, 300, 10, 0);
  const GeoRaster painted = decode_labels(s.labels);
  const LabelRaster encoded = encode_labels(painted, ColorMap::standard(), kDefaultColorTolerance);
  REQUIRE(encoded.same_pixels(s.labels));
  TempDir dir;
  write_dataset(s.image, encoded, {SplitSpec{0.7}, WindowSpec{64, 0.7}, WindowSpec{64, 0.0}}, dir.path());
  const DatasetManifest m = export_manifest(dir.path());
  TempDir preds;
  run_inference(IdentityBackend{}, dir / kManifestFile, preds.path());
  const LabelRaster stitched = stitch_predictions(m, preds.path());
  const GeoRaster back = decode_labels(stitched);
  const GeoRaster want = painted.crop({0, 210, 200, 90});
  CHECK((back.storage() == want.storage()).all());
}
