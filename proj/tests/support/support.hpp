#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vesselsynth/eval.hpp"
#include "vesselsynth/image.hpp"
#include "vesselsynth/random.hpp"

namespace testsupport {

namespace fs = std::filesystem;
using vesselsynth::GrayImage;
using vesselsynth::Mask;
using vesselsynth::Rng;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "vs");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::vector<std::uint8_t> read_bytes(const fs::path& path);
std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

Mask random_mask(Rng& rng, int w, int h, double p_one);
GrayImage random_image(Rng& rng, int w, int h);

/// Per-pixel double loop, the reference for eval::confusion.
vesselsynth::eval::ConfusionCounts brute_confusion(const Mask& pred, const Mask& truth, const Mask& fov);

/// Mann-Whitney by comparing every (vessel, background) pair.
double brute_auc(const GrayImage& prob, const Mask& truth, const Mask& fov);

/// 3x3 dilation.
Mask dilate(const Mask& m);

/// Number of 4-connected components of the nonzero pixels.
int count_components(const Mask& m);

/// Chessboard distance from each nonzero pixel to the nearest zero pixel
/// (pixels outside the frame count as zero). Zero pixels map to 0.
std::vector<int> chessboard_distance(const Mask& m);

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

/// Runs the command line entry point in-process.
CliResult run_cli(const std::vector<std::string>& args);

}  // namespace testsupport
