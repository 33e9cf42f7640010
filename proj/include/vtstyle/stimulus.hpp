#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vtstyle/util.hpp"

namespace vts {

enum class Category { cat, dog };
enum class StyleFamily { functional, decorative };
enum class FontFamily { sans_serif, script };
enum class Placement { center, top_center, bottom_center };

inline constexpr StyleFamily kStyles[] = {StyleFamily::functional, StyleFamily::decorative};

std::string_view to_string(Category c);
std::string_view to_string(StyleFamily s);
std::string_view to_string(FontFamily f);
std::string_view to_string(Placement p);
Category parse_category(std::string_view s);
StyleFamily parse_style(std::string_view s);
FontFamily parse_font_family(std::string_view s);
Placement parse_placement(std::string_view s);

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  std::string hex() const;
  static Rgb from_hex(std::string_view hex);
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kBlack{0, 0, 0};

struct Concept {
  std::string id;
  std::string label;
  Category category = Category::cat;

  friend bool operator==(const Concept&, const Concept&) = default;
};

struct FontSpec {
  std::string name;
  std::filesystem::path file;
  FontFamily family = FontFamily::sans_serif;

  friend bool operator==(const FontSpec&, const FontSpec&) = default;
};

struct SizeCombo {
  Placement placement = Placement::center;
  int size = 35;

  friend bool operator==(const SizeCombo&, const SizeCombo&) = default;
};

struct StyleSettings {
  std::vector<FontSpec> fonts;
  // Decorative colors are drawn uniformly from here; functional must be {black}.
  std::vector<Rgb> palette;
  std::vector<int> sizes;
  std::vector<SizeCombo> combos;

  friend bool operator==(const StyleSettings&, const StyleSettings&) = default;
};

struct StyleConfig {
  StyleSettings functional;
  StyleSettings decorative;

  const StyleSettings& of(StyleFamily s) const {
    return s == StyleFamily::functional ? functional : decorative;
  }
  friend bool operator==(const StyleConfig&, const StyleConfig&) = default;
};

// Defaults for everything except fonts, which must come from configuration.
std::vector<int> default_sizes();
std::vector<SizeCombo> default_combos();
std::vector<Rgb> default_decorative_palette();

struct Canvas {
  int width = 512;
  int height = 512;

  friend bool operator==(const Canvas&, const Canvas&) = default;
};

struct RenderConfig {
  FontSpec font;
  int size = 35;
  Placement placement = Placement::center;
  Rgb color = kBlack;
};

struct StimulusRecord {
  std::string stimulus_id;
  Concept subject;
  StyleFamily style = StyleFamily::functional;
  RenderConfig render;
  std::uint64_t seed = 0;
  // Relative to the directory holding the manifest.
  std::string image_path;
  // Empty until rendered.
  std::string image_digest;
};

nlohmann::ordered_json to_json(const StimulusRecord& r);
StimulusRecord stimulus_from_json(const nlohmann::json& j);

// Throws ConfigError naming the font if the file is missing or unloadable.
void check_font_loads(const FontSpec& font);

std::vector<StimulusRecord> enumerate_plan(std::span<const Concept> concepts,
                                           const StyleConfig& styles, std::uint64_t run_seed);

struct InkBox {
  int left = 0;
  int top = 0;
  int width = 0;
  int height = 0;
};

// Where the ink box must land on the canvas for a given placement.
// Returns the top-left corner.
std::pair<int, int> placement_origin(Placement p, const Canvas& canvas, int ink_width, int ink_height);

Bytes render_stimulus(const StimulusRecord& record, const Canvas& canvas);

// Renders every record into `root / image_path` and fills in image_digest.
void render_all(std::vector<StimulusRecord>& records, const Canvas& canvas,
                const std::filesystem::path& root, unsigned concurrency = 1);

void write_manifest(std::span<const StimulusRecord> records, const std::filesystem::path& path);
std::vector<StimulusRecord> read_manifest(const std::filesystem::path& path);

}  // namespace vts
