#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace urbanmap {

/// Building axis of the urban typology matrix, ordered by increasing formality.
enum class BuildingDiversity : std::uint8_t {
  None = 1,
  Limited = 2,
  Unwritten = 3,
  WithCode = 4,
};

/// Street-network axis of the urban typology matrix.
enum class StreetPattern : std::uint8_t {
  NaturalGeneration = 0,     // A
  PlannedOutline = 1,        // B: planned outline, natural generation inside
  OuterNaturalGeneration = 2, // C: natural outside, planned inside the district
  Planned = 3,               // D
};

/// One of the 16 cells of the 4x4 typology matrix, written "<digit>/<letter>".
struct TypologyCode {
  BuildingDiversity diversity = BuildingDiversity::None;
  StreetPattern pattern = StreetPattern::NaturalGeneration;

  int diversity_level() const noexcept { return static_cast<int>(diversity); }
  char pattern_letter() const noexcept { return static_cast<char>('A' + static_cast<int>(pattern)); }
  std::string str() const;

  auto operator<=>(const TypologyCode&) const = default;
};

/// Collapsed formal/informal class. Index 0 is the ignore class.
enum class ClassLabel : std::uint8_t {
  Unrecognized = 0,
  HighlyInformal = 1,
  ModeratelyInformal = 2,
  ModeratelyFormal = 3,
  HighlyFormal = 4,
};

inline constexpr int kNumLabels = 5;
inline constexpr int kNumRealClasses = 4;

constexpr int index_of(ClassLabel label) noexcept { return static_cast<int>(label); }
/// Throws RangeError for indices outside [0, kNumLabels).
ClassLabel label_from_index(int index);
std::string_view label_name(ClassLabel label) noexcept;

/// Builds a code from its numeric level (1..4) and letter (A..D, any case).
TypologyCode make_code(int level, char letter);
TypologyCode parse_code(std::string_view text);
ClassLabel classify_code(TypologyCode code) noexcept;
/// All 16 codes, diversity-major.
std::array<TypologyCode, 16> all_codes() noexcept;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  auto operator<=>(const Rgb&) const = default;
};

/// Largest per-channel difference between two colors.
int chebyshev_distance(Rgb a, Rgb b) noexcept;

/// Bijective ClassLabel -> Rgb table.
class ColorMap {
public:
  /// Red / Yellow / Cyan / Blue for the four classes, black for Unrecognized.
  static ColorMap standard();

  /// Throws ConfigError when two labels share a color.
  explicit ColorMap(const std::array<Rgb, kNumLabels>& colors);

  Rgb color(ClassLabel label) const noexcept { return colors_[index_of(label)]; }
  const std::array<Rgb, kNumLabels>& colors() const noexcept { return colors_; }

  /// Smallest Chebyshev distance between any two palette entries.
  int min_separation() const noexcept;

  /// Unique palette entry within `tolerance`, if any. Requires min_separation() > 2 * tolerance
  /// for the answer to be unique; encode_labels checks that up front.
  std::optional<ClassLabel> match(Rgb pixel, int tolerance) const noexcept;

  /// Palette entry with the smallest squared Euclidean distance; ties go to the lower index.
  ClassLabel nearest(Rgb pixel) const noexcept;

  bool operator==(const ColorMap&) const = default;

private:
  std::array<Rgb, kNumLabels> colors_;
};

Rgb class_color(ClassLabel label, const ColorMap& map) noexcept;

/// {"classes":[{index,name,color}], "codes":[{code,diversity,pattern,label}]}
nlohmann::json typology_to_json(const ColorMap& map);
/// Reads the "classes" array of a typology document.
ColorMap colormap_from_json(const nlohmann::json& doc);
ColorMap load_colormap(const std::string& path);

}  // namespace urbanmap
