#include "urbanmap/typology.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "urbanmap/errors.hpp"

namespace urbanmap {

namespace {

using L = ClassLabel;

// Rows: building diversity 1..4. Columns: street pattern A..D.
constexpr std::array<std::array<ClassLabel, 4>, 4> kMatrix{{
    {L::HighlyInformal, L::ModeratelyInformal, L::ModeratelyInformal, L::ModeratelyInformal},
    {L::HighlyInformal, L::HighlyInformal, L::ModeratelyInformal, L::ModeratelyInformal},
    {L::ModeratelyInformal, L::ModeratelyFormal, L::ModeratelyFormal, L::ModeratelyFormal},
    {L::ModeratelyFormal, L::ModeratelyFormal, L::ModeratelyFormal, L::HighlyFormal},
}};

constexpr std::array<std::string_view, kNumLabels> kNames{
    "Unrecognized", "Highly Informal", "Moderately Informal", "Moderately Formal", "Highly Formal"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string TypologyCode::str() const {
  return std::string{static_cast<char>('0' + diversity_level()), '/', pattern_letter()};
}

ClassLabel label_from_index(int index) {
  if (index < 0 || index >= kNumLabels) {
    throw RangeError("class index " + std::to_string(index) + " outside [0, 4]");
  }
  return static_cast<ClassLabel>(index);
}

std::string_view label_name(ClassLabel label) noexcept { return kNames[index_of(label)]; }

TypologyCode make_code(int level, char letter) {
  if (level < 1 || level > 4) {
    throw ParseError("building diversity '" + std::to_string(level) + "' outside 1..4");
  }
  const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(letter)));
  if (upper < 'A' || upper > 'D') {
    throw ParseError(std::string("street pattern '") + letter + "' outside A..D");
  }
  return {static_cast<BuildingDiversity>(level), static_cast<StreetPattern>(upper - 'A')};
}

TypologyCode parse_code(std::string_view text) {
  const std::string_view body = trim(text);
  const auto slash = body.find('/');
  if (slash == std::string_view::npos) {
    throw ParseError("typology code '" + std::string(text) + "' lacks '/'");
  }
  const std::string_view digit = trim(body.substr(0, slash));
  const std::string_view letter = trim(body.substr(slash + 1));
  if (digit.size() != 1 || !std::isdigit(static_cast<unsigned char>(digit[0]))) {
    throw ParseError("bad building diversity token '" + std::string(digit) + "'");
  }
  if (letter.size() != 1) {
    throw ParseError("bad street pattern token '" + std::string(letter) + "'");
  }
  return make_code(digit[0] - '0', letter[0]);
}

ClassLabel classify_code(TypologyCode code) noexcept {
  return kMatrix[code.diversity_level() - 1][static_cast<int>(code.pattern)];
}

std::array<TypologyCode, 16> all_codes() noexcept {
  std::array<TypologyCode, 16> codes{};
  std::size_t i = 0;
  for (int level = 1; level <= 4; ++level) {
    for (int p = 0; p < 4; ++p) {
      codes[i++] = {static_cast<BuildingDiversity>(level), static_cast<StreetPattern>(p)};
    }
  }
  return codes;
}

int chebyshev_distance(Rgb a, Rgb b) noexcept {
  return std::max({std::abs(a.r - b.r), std::abs(a.g - b.g), std::abs(a.b - b.b)});
}

ColorMap ColorMap::standard() {
  return ColorMap({Rgb{0, 0, 0}, Rgb{255, 0, 0}, Rgb{255, 255, 0}, Rgb{0, 255, 255}, Rgb{0, 0, 255}});
}

ColorMap::ColorMap(const std::array<Rgb, kNumLabels>& colors) : colors_(colors) {
  if (min_separation() == 0) {
    throw ConfigError("color map is not bijective: two labels share a color");
  }
}

int ColorMap::min_separation() const noexcept {
  int best = std::numeric_limits<int>::max();
  for (int i = 0; i < kNumLabels; ++i) {
    for (int j = i + 1; j < kNumLabels; ++j) {
      best = std::min(best, chebyshev_distance(colors_[i], colors_[j]));
    }
  }
  return best;
}

std::optional<ClassLabel> ColorMap::match(Rgb pixel, int tolerance) const noexcept {
  for (int i = 0; i < kNumLabels; ++i) {
    if (chebyshev_distance(pixel, colors_[i]) <= tolerance) return static_cast<ClassLabel>(i);
  }
  return std::nullopt;
}

ClassLabel ColorMap::nearest(Rgb pixel) const noexcept {
  int best = 0;
  long best_d = std::numeric_limits<long>::max();
  for (int i = 0; i < kNumLabels; ++i) {
    const long dr = pixel.r - colors_[i].r;
    const long dg = pixel.g - colors_[i].g;
    const long db = pixel.b - colors_[i].b;
    const long d = dr * dr + dg * dg + db * db;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return static_cast<ClassLabel>(best);
}

Rgb class_color(ClassLabel label, const ColorMap& map) noexcept { return map.color(label); }

nlohmann::json typology_to_json(const ColorMap& map) {
  nlohmann::json classes = nlohmann::json::array();
  for (int i = 0; i < kNumLabels; ++i) {
    const Rgb c = map.colors()[i];
    classes.push_back({{"index", i},
                       {"name", std::string(kNames[i])},
                       {"color", {c.r, c.g, c.b}},
                       {"ignore", i == 0}});
  }
  nlohmann::json codes = nlohmann::json::array();
  for (const TypologyCode code : all_codes()) {
    codes.push_back({{"code", code.str()},
                     {"diversity", code.diversity_level()},
                     {"pattern", std::string(1, code.pattern_letter())},
                     {"label", index_of(classify_code(code))}});
  }
  return {{"classes", classes}, {"codes", codes}};
}

ColorMap colormap_from_json(const nlohmann::json& doc) {
  const nlohmann::json& classes = doc.contains("classes") ? doc.at("classes") : doc;
  if (!classes.is_array()) throw ConfigError("color map document needs a \"classes\" array");
  std::array<Rgb, kNumLabels> colors = ColorMap::standard().colors();
  for (const auto& entry : classes) {
    const int index = entry.at("index").get<int>();
    if (index < 0 || index >= kNumLabels) {
      throw ConfigError("color map index " + std::to_string(index) + " outside [0, 4]");
    }
    const auto& rgb = entry.at("color");
    if (!rgb.is_array() || rgb.size() != 3) throw ConfigError("color must be [r, g, b]");
    std::array<int, 3> ch{};
    for (std::size_t k = 0; k < 3; ++k) {
      ch[k] = rgb[k].get<int>();
      if (ch[k] < 0 || ch[k] > 255) throw ConfigError("color channel outside 0..255");
    }
    colors[index] = Rgb{static_cast<std::uint8_t>(ch[0]), static_cast<std::uint8_t>(ch[1]),
                        static_cast<std::uint8_t>(ch[2])};
  }
  return ColorMap(colors);
}

ColorMap load_colormap(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open color map '" + path + "'");
  try {
    return colormap_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("color map '" + path + "': " + e.what());
  }
}

}  // namespace urbanmap
