#include <doctest.h>

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "urbanmap/errors.hpp"
#include "urbanmap/typology.hpp"

using namespace urbanmap;

namespace {

// The four code groups as listed in the color-selection table, written out by hand.
const std::set<std::string> kRed{"1/A", "2/A", "2/B"};
const std::set<std::string> kYellow{"1/B", "1/C", "1/D", "2/C", "2/D", "3/A"};
const std::set<std::string> kCyan{"3/B", "3/C", "3/D", "4/A", "4/B", "4/C"};
const std::set<std::string> kBlue{"4/D"};

}  // namespace

TEST_CASE("classify_code reproduces the color table groups") {
  std::set<std::string> seen;
  for (const TypologyCode code : all_codes()) {
    const std::string s = code.str();
    CHECK(seen.insert(s).second);
    switch (classify_code(code)) {
      case ClassLabel::HighlyInformal: CHECK(kRed.count(s) == 1); break;
      case ClassLabel::ModeratelyInformal: CHECK(kYellow.count(s) == 1); break;
      case ClassLabel::ModeratelyFormal: CHECK(kCyan.count(s) == 1); break;
      case ClassLabel::HighlyFormal: CHECK(kBlue.count(s) == 1); break;
      case ClassLabel::Unrecognized: FAIL("a valid code mapped to Unrecognized");
    }
  }
  CHECK(seen.size() == 16);
  CHECK(kRed.size() + kYellow.size() + kCyan.size() + kBlue.size() == 16);
}

TEST_CASE("classify_code spot checks") {
  CHECK(classify_code(parse_code("2/A")) == ClassLabel::HighlyInformal);
  CHECK(classify_code(parse_code("4/D")) == ClassLabel::HighlyFormal);
  CHECK(classify_code(parse_code("3/A")) == ClassLabel::ModeratelyInformal);
  for (const char* s : {"1/A", "2/A", "2/B"}) CHECK(classify_code(parse_code(s)) == ClassLabel::HighlyInformal);
  int formal = 0;
  for (const TypologyCode c : all_codes()) formal += classify_code(c) == ClassLabel::HighlyFormal;
  CHECK(formal == 1);
}

TEST_CASE("parse_code normalizes and rejects") {
  const TypologyCode c = parse_code("4/D");
  CHECK(c.diversity == BuildingDiversity::WithCode);
  CHECK(c.pattern == StreetPattern::Planned);
  CHECK(parse_code(" 2/a ") == make_code(2, 'A'));
  CHECK(parse_code("3 / c").str() == "3/C");

  CHECK_THROWS_AS(parse_code("5/A"), ParseError);
  CHECK_THROWS_AS(parse_code("0/A"), ParseError);
  CHECK_THROWS_AS(parse_code("2/E"), ParseError);
  CHECK_THROWS_AS(parse_code("2A"), ParseError);
  CHECK_THROWS_AS(parse_code("/A"), ParseError);
  CHECK_THROWS_AS(parse_code("22/A"), ParseError);
  try {
    parse_code("5/A");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("'5'") != std::string::npos);
  }
}

TEST_CASE("code string round trip") {
  for (const TypologyCode c : all_codes()) CHECK(parse_code(c.str()) == c);
}

TEST_CASE("default color map") {
  const ColorMap map = ColorMap::standard();
  CHECK(class_color(ClassLabel::HighlyInformal, map) == Rgb{255, 0, 0});
  CHECK(class_color(ClassLabel::ModeratelyInformal, map) == Rgb{255, 255, 0});
  CHECK(class_color(ClassLabel::ModeratelyFormal, map) == Rgb{0, 255, 255});
  CHECK(class_color(ClassLabel::HighlyFormal, map) == Rgb{0, 0, 255});
  CHECK(class_color(ClassLabel::Unrecognized, map) == Rgb{0, 0, 0});

  for (int i = 0; i < kNumLabels; ++i) {
    const ClassLabel l = label_from_index(i);
    CHECK(map.nearest(class_color(l, map)) == l);
    CHECK(map.match(class_color(l, map), 0) == l);
  }
}

TEST_CASE("color map rejects shared colors") {
  auto colors = ColorMap::standard().colors();
  colors[2] = colors[1];
  CHECK_THROWS_AS(ColorMap{colors}, ConfigError);
}

TEST_CASE("typology JSON round trip and overrides") {
  const nlohmann::json doc = typology_to_json(ColorMap::standard());
  CHECK(doc.at("codes").size() == 16);
  CHECK(doc.at("classes").size() == 5);
  CHECK(colormap_from_json(doc) == ColorMap::standard());

  // Partial override, e.g. a green shade for Moderately Informal.
  const auto custom = nlohmann::json::parse(R"({"classes":[{"index":2,"color":[0,200,0]}]})");
  const ColorMap map = colormap_from_json(custom);
  CHECK(map.color(ClassLabel::ModeratelyInformal) == Rgb{0, 200, 0});
  CHECK(map.color(ClassLabel::HighlyInformal) == Rgb{255, 0, 0});

  CHECK_THROWS_AS(colormap_from_json(nlohmann::json::parse(R"({"classes":[{"index":7,"color":[1,2,3]}]})")),
                  ConfigError);
  CHECK_THROWS_AS(colormap_from_json(nlohmann::json::parse(R"({"classes":[{"index":1,"color":[0,0,0]}]})")),
                  ConfigError);
}

TEST_CASE("label indices") {
  CHECK(index_of(ClassLabel::Unrecognized) == 0);
  CHECK(index_of(ClassLabel::HighlyFormal) == 4);
  CHECK_THROWS_AS(label_from_index(5), RangeError);
  CHECK(label_name(ClassLabel::HighlyInformal) == "Highly Informal");
}
