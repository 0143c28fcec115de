#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "occlane/augment.hpp"
#include "occlane/manifest.hpp"
#include "occlane/raster.hpp"
#include "occlane/rng.hpp"
#include "occlane/synthgen.hpp"

namespace occlane::testing {

/// Scoped temporary directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("occlane-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline RasterMask random_mask(Rng& rng, int w, int h, double p) {
  RasterMask m(w, h);
  for (auto& v : m.bytes()) v = rng.unit() < p ? kPositive : 0;
  return m;
}

inline RasterImage random_image(Rng& rng, int w, int h) {
  RasterImage img(w, h);
  for (auto& v : img.bytes()) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return img;
}

inline std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::vector<std::uint8_t> out;
  if (FILE* f = std::fopen(p.c_str(), "rb")) {
    int c;
    while ((c = std::fgetc(f)) != EOF) out.push_back(static_cast<std::uint8_t>(c));
    std::fclose(f);
  }
  return out;
}

/// Every regular file under `root`, keyed by relative path, with its bytes.
inline std::vector<std::pair<std::string, std::vector<std::uint8_t>>> tree_bytes(const std::filesystem::path& root) {
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.emplace_back(e.path().lexically_relative(root).generic_string(), file_bytes(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string test_node_path() { return OCCLANE_TEST_NODE; }

/// Seeded clear corpus under dir/clear plus its occluded version under dir/aug.
inline DatasetManifest seeded_corpus(const std::filesystem::path& dir, int count, std::uint64_t seed,
                                     SceneParams params = {}) {
  params.seed = seed;
  const DatasetManifest clear = generate_corpus(params, count, dir / "clear");
  PlacementPolicy policy;
  policy.seed = seed;
  AugmentResult r = build_augmented_dataset(clear, make_default_sprites(seed), policy, dir / "aug");
  write_manifest(r.manifest, dir / "aug" / "manifest.json");
  return r.manifest;
}

}  // namespace occlane::testing
