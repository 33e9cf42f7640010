#include "vtstyle/stimulus.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <opencv2/core.hpp>
#include <opencv2/freetype.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "vtstyle/error.hpp"

namespace vts {

namespace fs = std::filesystem;

std::string_view to_string(Category c) { return c == Category::cat ? "cat" : "dog"; }

std::string_view to_string(StyleFamily s) {
  return s == StyleFamily::functional ? "functional" : "decorative";
}

std::string_view to_string(FontFamily f) { return f == FontFamily::sans_serif ? "sans_serif" : "script"; }

std::string_view to_string(Placement p) {
  switch (p) {
    case Placement::center: return "center";
    case Placement::top_center: return "top_center";
    case Placement::bottom_center: return "bottom_center";
  }
  return "center";
}

Category parse_category(std::string_view s) {
  if (s == "cat") return Category::cat;
  if (s == "dog") return Category::dog;
  throw ValidationError("unknown category '" + std::string(s) + "' (expected cat or dog)");
}

StyleFamily parse_style(std::string_view s) {
  if (s == "functional") return StyleFamily::functional;
  if (s == "decorative") return StyleFamily::decorative;
  throw ValidationError("unknown style '" + std::string(s) + "'");
}

FontFamily parse_font_family(std::string_view s) {
  if (s == "sans_serif") return FontFamily::sans_serif;
  if (s == "script") return FontFamily::script;
  throw ValidationError("unknown font family '" + std::string(s) + "'");
}

Placement parse_placement(std::string_view s) {
  if (s == "center") return Placement::center;
  if (s == "top_center") return Placement::top_center;
  if (s == "bottom_center") return Placement::bottom_center;
  throw ValidationError("unknown placement '" + std::string(s) + "'");
}

std::string Rgb::hex() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

Rgb Rgb::from_hex(std::string_view hex) {
  auto bad = [&] { return ValidationError("bad color '" + std::string(hex) + "' (expected #rrggbb)"); };
  if (hex.size() != 7 || hex[0] != '#') throw bad();
  auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw bad();
  };
  auto byte = [&](std::size_t i) { return static_cast<std::uint8_t>(nibble(hex[i]) * 16 + nibble(hex[i + 1])); };
  return Rgb{byte(1), byte(3), byte(5)};
}

std::vector<int> default_sizes() { return {30, 35, 40}; }

std::vector<SizeCombo> default_combos() {
  return {{Placement::center, 30},
          {Placement::center, 35},
          {Placement::center, 40},
          {Placement::top_center, 35},
          {Placement::bottom_center, 35}};
}

std::vector<Rgb> default_decorative_palette() {
  return {Rgb{0, 0, 0}, Rgb{255, 0, 0}, Rgb{0, 0, 255}, Rgb{0, 128, 0}, Rgb{128, 0, 128}};
}

nlohmann::ordered_json to_json(const StimulusRecord& r) {
  nlohmann::ordered_json j;
  j["stimulus_id"] = r.stimulus_id;
  j["concept_id"] = r.subject.id;
  j["label"] = r.subject.label;
  j["category"] = to_string(r.subject.category);
  j["style"] = to_string(r.style);
  j["font"] = r.render.font.name;
  j["size"] = r.render.size;
  j["placement"] = to_string(r.render.placement);
  j["color"] = r.render.color.hex();
  j["seed"] = r.seed;
  j["image_path"] = r.image_path;
  j["sha256"] = r.image_digest;
  return j;
}

StimulusRecord stimulus_from_json(const nlohmann::json& j) {
  try {
    StimulusRecord r;
    r.stimulus_id = j.at("stimulus_id").get<std::string>();
    r.subject.id = j.at("concept_id").get<std::string>();
    r.subject.label = j.at("label").get<std::string>();
    r.subject.category = parse_category(j.at("category").get<std::string>());
    r.style = parse_style(j.at("style").get<std::string>());
    r.render.font.name = j.at("font").get<std::string>();
    r.render.font.family =
        r.style == StyleFamily::functional ? FontFamily::sans_serif : FontFamily::script;
    r.render.size = j.at("size").get<int>();
    r.render.placement = parse_placement(j.at("placement").get<std::string>());
    r.render.color = Rgb::from_hex(j.at("color").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.image_path = j.at("image_path").get<std::string>();
    r.image_digest = j.at("sha256").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed stimulus record: ") + e.what());
  }
}

namespace {

cv::Ptr<cv::freetype::FreeType2> load_font(const FontSpec& font) {
  if (font.file.empty() || !fs::is_regular_file(font.file)) {
    throw ConfigError("font '" + font.name + "': file not found: " + font.file.string());
  }
  auto ft = cv::freetype::createFreeType2();
  try {
    ft->loadFontData(font.file.string(), 0);
  } catch (const cv::Exception& e) {
    throw ConfigError("font '" + font.name + "': cannot load " + font.file.string());
  }
  return ft;
}

bool is_ink(const cv::Vec3b& px) { return px[0] != 255 || px[1] != 255 || px[2] != 255; }

std::optional<InkBox> scan_ink(const cv::Mat& img) {
  int min_x = img.cols, max_x = -1, min_y = img.rows, max_y = -1;
  for (int y = 0; y < img.rows; ++y) {
    const auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x) {
      if (!is_ink(row[x])) continue;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
    }
  }
  if (max_x < 0) return std::nullopt;
  return InkBox{min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
}

void validate_settings(StyleFamily style, const StyleSettings& s) {
  const std::string name(to_string(style));
  if (s.fonts.empty()) throw ConfigError(name + ": no fonts configured");
  if (s.combos.empty()) throw ConfigError(name + ": no size-position combos configured");
  const FontFamily want = style == StyleFamily::functional ? FontFamily::sans_serif : FontFamily::script;
  std::set<std::string> names;
  for (const auto& f : s.fonts) {
    if (f.name.empty()) throw ConfigError(name + ": font with empty name");
    if (!names.insert(f.name).second) throw ConfigError(name + ": duplicate font name '" + f.name + "'");
    if (f.family != want) {
      throw ConfigError("font '" + f.name + "': " + name + " style requires " +
                        std::string(to_string(want)) + " fonts");
    }
    check_font_loads(f);
  }
  std::set<std::pair<int, int>> combos;
  for (const auto& c : s.combos) {
    if (std::find(s.sizes.begin(), s.sizes.end(), c.size) == s.sizes.end()) {
      throw ConfigError(name + ": combo size " + std::to_string(c.size) + " not in the size set");
    }
    if (!combos.insert({static_cast<int>(c.placement), c.size}).second) {
      throw ConfigError(name + ": duplicate size-position combo");
    }
  }
  if (s.palette.empty()) throw ConfigError(name + ": palette is empty");
  if (style == StyleFamily::functional && (s.palette.size() != 1 || s.palette[0] != kBlack)) {
    throw ConfigError("functional palette must be exactly black");
  }
}

}  // namespace

void check_font_loads(const FontSpec& font) { (void)load_font(font); }

std::vector<StimulusRecord> enumerate_plan(std::span<const Concept> concepts, const StyleConfig& styles,
                                           std::uint64_t run_seed) {
  std::vector<Concept> sorted(concepts.begin(), concepts.end());
  std::set<std::string> ids;
  for (const auto& c : sorted) {
    if (c.id.empty()) throw ValidationError("concept with empty id");
    if (c.label.empty()) throw ValidationError("concept '" + c.id + "' has an empty label");
    if (!ids.insert(c.id).second) throw ValidationError("duplicate concept id '" + c.id + "'");
  }
  if (sorted.empty()) return {};
  for (StyleFamily s : kStyles) validate_settings(s, styles.of(s));
  std::sort(sorted.begin(), sorted.end(), [](const Concept& a, const Concept& b) { return a.id < b.id; });

  std::vector<StimulusRecord> plan;
  for (const auto& subject : sorted) {
    for (StyleFamily style : kStyles) {
      const StyleSettings& settings = styles.of(style);
      std::vector<FontSpec> fonts = settings.fonts;
      std::sort(fonts.begin(), fonts.end(), [](const FontSpec& a, const FontSpec& b) { return a.name < b.name; });
      for (const auto& font : fonts) {
        for (std::size_t ci = 0; ci < settings.combos.size(); ++ci) {
          const SizeCombo& combo = settings.combos[ci];
          StimulusRecord r;
          r.subject = subject;
          r.style = style;
          r.render.font = font;
          r.render.size = combo.size;
          r.render.placement = combo.placement;
          r.seed = derive_seed(run_seed, {subject.id, font.name, std::to_string(ci)});
          if (style == StyleFamily::decorative) {
            std::mt19937_64 rng(r.seed);
            r.render.color = settings.palette[uniform_below(rng, settings.palette.size())];
          } else {
            r.render.color = kBlack;
          }
          r.stimulus_id = subject.id + "-" + std::string(to_string(style)) + "-" + slugify(font.name) + "-" +
                          std::string(to_string(combo.placement)) + "-" + std::to_string(combo.size);
          r.image_path = "images/" + r.stimulus_id + ".png";
          plan.push_back(std::move(r));
        }
      }
    }
  }
  std::set<std::string> seen;
  for (const auto& r : plan) {
    if (!seen.insert(r.stimulus_id).second) {
      throw ConfigError("font names collide after slugging: stimulus id '" + r.stimulus_id + "' repeats");
    }
  }
  return plan;
}

std::pair<int, int> placement_origin(Placement p, const Canvas& canvas, int ink_width, int ink_height) {
  const int left = (canvas.width - ink_width) / 2;
  int top = 0;
  switch (p) {
    case Placement::center:
      top = (canvas.height - ink_height) / 2;
      break;
    case Placement::top_center:
      top = static_cast<int>(std::lround(0.1 * canvas.height));
      break;
    case Placement::bottom_center:
      top = static_cast<int>(std::lround(0.9 * canvas.height)) - ink_height;
      break;
  }
  return {left, top};
}

Bytes render_stimulus(const StimulusRecord& record, const Canvas& canvas) {
  if (canvas.width <= 0 || canvas.height <= 0) throw ValidationError("canvas must have positive size");
  const std::string& label = record.subject.label;
  if (label.empty()) throw ValidationError("stimulus '" + record.stimulus_id + "': empty label");
  if (record.render.size <= 0) throw ValidationError("stimulus '" + record.stimulus_id + "': size must be positive");

  auto ft = load_font(record.render.font);
  int baseline = 0;
  const cv::Size text = ft->getTextSize(label, record.render.size, -1, &baseline);
  const int margin = 2 * record.render.size;
  cv::Mat scratch(text.height + baseline + 2 * margin, text.width + 2 * margin, CV_8UC3,
                  cv::Scalar(255, 255, 255));
  const Rgb& c = record.render.color;
  ft->putText(scratch, label, cv::Point(margin, margin + text.height), record.render.size,
              cv::Scalar(c.b, c.g, c.r), -1, cv::LINE_AA, true);

  const auto ink = scan_ink(scratch);
  if (!ink) throw RenderError("stimulus '" + record.stimulus_id + "': label produced no ink");
  const auto [left, top] = placement_origin(record.render.placement, canvas, ink->width, ink->height);
  if (left < 0 || top < 0 || left + ink->width > canvas.width || top + ink->height > canvas.height) {
    throw RenderError("stimulus '" + record.stimulus_id + "': text overflows canvas (ink " +
                      std::to_string(ink->width) + "x" + std::to_string(ink->height) + " at " +
                      std::string(to_string(record.render.placement)) + " on " + std::to_string(canvas.width) +
                      "x" + std::to_string(canvas.height) + ")");
  }

  cv::Mat out(canvas.height, canvas.width, CV_8UC3, cv::Scalar(255, 255, 255));
  scratch(cv::Rect(ink->left, ink->top, ink->width, ink->height))
      .copyTo(out(cv::Rect(left, top, ink->width, ink->height)));

  std::vector<std::uint8_t> png;
  if (!cv::imencode(".png", out, png)) throw RenderError("stimulus '" + record.stimulus_id + "': PNG encode failed");
  return png;
}

void render_all(std::vector<StimulusRecord>& records, const Canvas& canvas, const fs::path& root,
                unsigned concurrency) {
  parallel_for(records.size(), concurrency, [&](std::size_t i) {
    const Bytes png = render_stimulus(records[i], canvas);
    write_atomic(root / records[i].image_path, png);
    records[i].image_digest = sha256_hex(png);
  });
}

void write_manifest(std::span<const StimulusRecord> records, const fs::path& path) {
  std::vector<nlohmann::ordered_json> lines;
  lines.reserve(records.size());
  for (const auto& r : records) {
    if (r.image_digest.empty()) throw ValidationError("stimulus '" + r.stimulus_id + "' has no image digest");
    lines.push_back(to_json(r));
  }
  write_jsonl(path, lines);
}

std::vector<StimulusRecord> read_manifest(const fs::path& path) {
  std::vector<StimulusRecord> out;
  for (const auto& j : read_jsonl(path)) out.push_back(stimulus_from_json(j));
  return out;
}

}  // namespace vts
