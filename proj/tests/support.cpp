#include "support.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace vts::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  path_ = fs::temp_directory_path() / ("vtstyle-" + tag + "-" + std::to_string(rd()));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

StyleConfig test_styles() {
  StyleConfig styles;
  for (const auto& f : kFunctionalFonts) {
    styles.functional.fonts.push_back({std::string(f.name), fs::path(f.path), FontFamily::sans_serif});
  }
  for (const auto& f : kDecorativeFonts) {
    styles.decorative.fonts.push_back({std::string(f.name), fs::path(f.path), FontFamily::script});
  }
  for (StyleSettings* st : {&styles.functional, &styles.decorative}) {
    st->sizes = default_sizes();
    st->combos = default_combos();
  }
  styles.functional.palette = {kBlack};
  styles.decorative.palette = default_decorative_palette();
  return styles;
}

RunConfig test_config(std::vector<Concept> concepts, std::vector<std::string> model_ids) {
  RunConfig c;
  c.concepts = std::move(concepts);
  c.seed = 7;
  c.styles = test_styles();
  for (const auto& id : model_ids) {
    ModelEndpoint e;
    e.id = id;
    e.model_name = id;
    c.models.push_back(e);
  }
  validate(c);
  return c;
}

InkScan scan_png(const fs::path& png, int* width, int* height) {
  const cv::Mat img = cv::imread(png.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw std::runtime_error("cannot decode " + png.string());
  if (width) *width = img.cols;
  if (height) *height = img.rows;
  InkScan s;
  s.left = img.cols;
  s.top = img.rows;
  for (int y = 0; y < img.rows; ++y) {
    const auto* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x) {
      const int b = row[x][0], g = row[x][1], r = row[x][2];
      if (r == 255 && g == 255 && b == 255) continue;
      ++s.ink_pixels;
      s.left = std::min(s.left, x);
      s.right = std::max(s.right, x);
      s.top = std::min(s.top, y);
      s.bottom = std::max(s.bottom, y);
      char hex[8];
      std::snprintf(hex, sizeof hex, "#%02x%02x%02x", r, g, b);
      ++s.colors[hex];
      if (r != g || g != b) ++s.non_gray_pixels;
    }
  }
  return s;
}

std::string InkScan::dominant_color() const {
  std::string best;
  long long count = 0;
  for (const auto& [c, n] : colors) {
    if (n > count) {
      best = c;
      count = n;
    }
  }
  return best;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace vts::testing
