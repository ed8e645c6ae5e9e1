#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vesselsynth/image.hpp"
#include "vesselsynth/nn/trainer.hpp"

namespace vesselsynth::io {

namespace fs = std::filesystem;

/// 0.299 R + 0.587 G + 0.114 B.
GrayImage to_grayscale(const RgbImage& rgb);
GrayImage green_channel(const RgbImage& rgb);
/// 1 - x per pixel.
GrayImage invert(const GrayImage& gray);

enum class GrayMode { luma, green };
GrayImage to_gray(const RgbImage& rgb, GrayMode mode);

// Readers accept anything the image codec decodes (PNG, PGM/PPM, TIFF, ...).
// 8- and 16-bit inputs are scaled to [0, 1]. Failures throw DataError with the path.

/// Gray inputs are replicated to three channels; alpha is dropped.
RgbImage read_rgb(const fs::path& path);
/// Color inputs are converted with to_grayscale.
GrayImage read_gray(const fs::path& path);
/// 1 where any channel is >= 0.5.
Mask read_mask(const fs::path& path);

/// Grayscale PNG or PGM (chosen by extension), values clamped to [0, 1].
/// bit_depth is 8 or 16.
void save_image(const fs::path& path, const GrayImage& image, int bit_depth = 8);
/// 0 / 255, 8-bit.
void save_mask(const fs::path& path, const Mask& mask);
/// 16-bit grayscale PNG.
void save_prob_map(const fs::path& path, const GrayImage& prob);

/// Luma >= threshold, keep the largest 4-connected component, then erode
/// `erosion` times with a 3x3 square.
Mask compute_fov(const RgbImage& rgb, double threshold = 0.07, int erosion = 2);

struct FundusCase {
  std::string id;
  GrayImage image;  ///< grayscale, not inverted
  Mask truth;
  Mask fov;
};

struct CaseError {
  std::string id;
  std::string message;
  std::vector<fs::path> missing;
};

struct DatasetLoad {
  std::vector<FundusCase> cases;  ///< sorted by id
  std::vector<CaseError> errors;
  std::vector<std::string> warnings;
};

/// `dir` is the DRIVE root (containing test/) or the test directory itself:
///   images/NN_test.<ext>, 1st_manual/NN_manual1.<ext>, mask/NN_test_mask.<ext>
DatasetLoad load_drive(const fs::path& dir, GrayMode mode = GrayMode::luma);

/// `dir` holds stare-images/imNNNN.<ext> and labels-ah/imNNNN.ah.<ext>
/// (or both kinds of file directly). The FOV is computed.
DatasetLoad load_stare(const fs::path& dir, GrayMode mode = GrayMode::luma, double fov_threshold = 0.07);

struct ManifestEntry {
  std::uint64_t seed = 0;
  std::string image;  ///< path relative to the manifest's directory
  std::string label;
  double label_fraction = 0.0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// CSV with header `seed,image,label,label_fraction`.
void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(const fs::path& path);

/// Draws uniformly from a materialized manifest. Images are read once.
class ManifestStream final : public nn::SampleStream {
 public:
  explicit ManifestStream(const fs::path& manifest);
  synth::Sample next(Rng& rng) override;
  std::size_t size() const { return samples_.size(); }

 private:
  std::vector<synth::Sample> samples_;
};

}  // namespace vesselsynth::io
