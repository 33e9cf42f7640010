#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "test_fonts.hpp"
#include "vtstyle/config.hpp"
#include "vtstyle/stimulus.hpp"

namespace vts::testing {

// A fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

StyleConfig test_styles();

// Two concepts, two mock models, rule-based extraction, defaults elsewhere.
RunConfig test_config(std::vector<Concept> concepts = {{"bengal", "Bengal", Category::cat},
                                                       {"beagle", "Beagle", Category::dog}},
                      std::vector<std::string> model_ids = {"mock-a", "mock-b"});

struct InkScan {
  int left = 0, top = 0, right = -1, bottom = -1;  // inclusive, right < left when blank
  long long ink_pixels = 0;
  long long non_gray_pixels = 0;
  // Exact ink colors as "#rrggbb" with pixel counts.
  std::map<std::string, long long> colors;

  // Most frequent exact ink color, "" when blank.
  std::string dominant_color() const;

  bool blank() const { return right < left; }
  double center_x() const { return (left + right + 1) / 2.0; }
  double center_y() const { return (top + bottom + 1) / 2.0; }
};

// Decodes a PNG independently of the renderer and scans for non-white pixels.
InkScan scan_png(const std::filesystem::path& png, int* width = nullptr, int* height = nullptr);

std::string slurp(const std::filesystem::path& p);

}  // namespace vts::testing
