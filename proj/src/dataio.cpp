#include "vesselsynth/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <regex>
#include <sstream>

#include "vesselsynth/kvconfig.hpp"
#include "vesselsynth/random.hpp"

namespace vesselsynth::io {

namespace {

constexpr float kLuma[3] = {0.299f, 0.587f, 0.114f};

const std::vector<std::string> kImageExtensions = {".png", ".tif", ".tiff", ".ppm", ".pgm", ".pnm", ".gif"};

// Decoded pixels as float in [0, 1], channels in RGB order (1 or 3).
cv::Mat decode(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("no such file: " + path.string());
  cv::Mat raw;
  try {
    raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED | cv::IMREAD_ANYDEPTH | cv::IMREAD_ANYCOLOR);
  } catch (const cv::Exception& e) {
    throw DataError("cannot decode " + path.string() + ": " + e.what());
  }
  if (raw.empty()) {
    std::string hint;
    if (path.extension() == ".gif") hint = " (GIF is not supported; convert to PNG)";
    throw DataError("cannot decode " + path.string() + hint);
  }
  double scale = 1.0;
  switch (raw.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    case CV_32F:
    case CV_64F: break;
    default: throw DataError("unsupported sample type in " + path.string());
  }
  cv::Mat f;
  raw.convertTo(f, CV_32F, scale);
  switch (f.channels()) {
    case 1: return f;
    case 3: cv::cvtColor(f, f, cv::COLOR_BGR2RGB); return f;
    case 4: cv::cvtColor(f, f, cv::COLOR_BGRA2RGB); return f;
    default: throw DataError("unsupported channel count in " + path.string());
  }
}

RgbImage to_rgb_image(const cv::Mat& f) {
  RgbImage out(f.cols, f.rows);
  for (int y = 0; y < f.rows; ++y) {
    for (int x = 0; x < f.cols; ++x) {
      float* p = out.at(x, y);
      if (f.channels() == 1) {
        p[0] = p[1] = p[2] = f.at<float>(y, x);
      } else {
        const cv::Vec3f v = f.at<cv::Vec3f>(y, x);
        p[0] = v[0];
        p[1] = v[1];
        p[2] = v[2];
      }
    }
  }
  return out;
}

void write_or_throw(const fs::path& path, const cv::Mat& m) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw DataError("cannot create directory for " + path.string() + ": " + ec.message());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw DataError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw DataError("cannot write " + path.string());
}

cv::Mat quantize(const GrayImage& image, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("bit depth must be 8 or 16");
  const double full = bit_depth == 8 ? 255.0 : 65535.0;
  cv::Mat m(image.height, image.width, bit_depth == 8 ? CV_8UC1 : CV_16UC1);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double v = std::lround(std::clamp(static_cast<double>(image(x, y)), 0.0, 1.0) * full);
      if (bit_depth == 8) m.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(v);
      else m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(v);
    }
  }
  return m;
}

// First existing `stem + ext` for any supported extension.
std::optional<fs::path> find_with_extension(const fs::path& dir, const std::string& stem) {
  for (const std::string& ext : kImageExtensions) {
    fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

// Ids captured by `pattern` over the file names in `dir`, sorted and unique.
std::vector<std::string> scan_ids(const fs::path& dir, const std::regex& pattern) {
  std::vector<std::string> ids;
  if (!fs::is_directory(dir)) return ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) ids.push_back(m[1]);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

void check_shapes(const FundusCase& c) {
  if (!c.image.same_shape(c.truth) || !c.image.same_shape(c.fov))
    throw DataError("case " + c.id + ": image " + std::to_string(c.image.width) + "x" +
                    std::to_string(c.image.height) + ", truth " + std::to_string(c.truth.width) + "x" +
                    std::to_string(c.truth.height) + " and fov " + std::to_string(c.fov.width) + "x" +
                    std::to_string(c.fov.height) + " differ in shape");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

GrayImage to_grayscale(const RgbImage& rgb) {
  GrayImage out(rgb.width, rgb.height);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      const float* p = rgb.at(x, y);
      out(x, y) = kLuma[0] * p[0] + kLuma[1] * p[1] + kLuma[2] * p[2];
    }
  }
  return out;
}

GrayImage green_channel(const RgbImage& rgb) {
  GrayImage out(rgb.width, rgb.height);
  for (int y = 0; y < rgb.height; ++y)
    for (int x = 0; x < rgb.width; ++x) out(x, y) = rgb.at(x, y)[1];
  return out;
}

GrayImage invert(const GrayImage& gray) {
  GrayImage out = gray;
  for (float& v : out.pixels) v = 1.0f - v;
  return out;
}

GrayImage to_gray(const RgbImage& rgb, GrayMode mode) {
  return mode == GrayMode::green ? green_channel(rgb) : to_grayscale(rgb);
}

RgbImage read_rgb(const fs::path& path) { return to_rgb_image(decode(path)); }

GrayImage read_gray(const fs::path& path) {
  const cv::Mat f = decode(path);
  if (f.channels() == 3) return to_grayscale(to_rgb_image(f));
  GrayImage out(f.cols, f.rows);
  for (int y = 0; y < f.rows; ++y)
    for (int x = 0; x < f.cols; ++x) out(x, y) = f.at<float>(y, x);
  return out;
}

Mask read_mask(const fs::path& path) {
  const RgbImage rgb = read_rgb(path);
  Mask out(rgb.width, rgb.height);
  for (int y = 0; y < rgb.height; ++y) {
    for (int x = 0; x < rgb.width; ++x) {
      const float* p = rgb.at(x, y);
      out(x, y) = (p[0] >= 0.5f || p[1] >= 0.5f || p[2] >= 0.5f) ? 1 : 0;
    }
  }
  return out;
}

void save_image(const fs::path& path, const GrayImage& image, int bit_depth) {
  write_or_throw(path, quantize(image, bit_depth));
}

void save_mask(const fs::path& path, const Mask& mask) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) m.at<std::uint8_t>(y, x) = mask(x, y) ? 255 : 0;
  write_or_throw(path, m);
}

void save_prob_map(const fs::path& path, const GrayImage& prob) { save_image(path, prob, 16); }

Mask compute_fov(const RgbImage& rgb, double threshold, int erosion) {
  const GrayImage luma = to_grayscale(rgb);
  cv::Mat bin(luma.height, luma.width, CV_8UC1);
  for (int y = 0; y < luma.height; ++y)
    for (int x = 0; x < luma.width; ++x) bin.at<std::uint8_t>(y, x) = luma(x, y) >= threshold ? 1 : 0;

  cv::Mat labels, stats, centroids;
  const int n = cv::connectedComponentsWithStats(bin, labels, stats, centroids, 4, CV_32S);
  int best = 0;
  int best_area = 0;
  for (int i = 1; i < n; ++i) {
    const int area = stats.at<int>(i, cv::CC_STAT_AREA);
    if (area > best_area) {
      best = i;
      best_area = area;
    }
  }
  cv::Mat keep = (labels == best) & (bin > 0);
  if (best == 0) keep = cv::Mat::zeros(bin.size(), CV_8UC1);
  if (erosion > 0) {
    cv::erode(keep, keep, cv::getStructuringElement(cv::MORPH_RECT, {3, 3}), {-1, -1}, erosion,
              cv::BORDER_CONSTANT, cv::Scalar(0));
  }
  Mask out(luma.width, luma.height);
  for (int y = 0; y < luma.height; ++y)
    for (int x = 0; x < luma.width; ++x) out(x, y) = keep.at<std::uint8_t>(y, x) ? 1 : 0;
  return out;
}

DatasetLoad load_drive(const fs::path& dir, GrayMode mode) {
  DatasetLoad load;
  const fs::path root = fs::is_directory(dir / "test") ? dir / "test" : dir;
  const fs::path images = root / "images";
  const fs::path manual = root / "1st_manual";
  const fs::path masks = root / "mask";

  const std::vector<std::string> ids = scan_ids(images, std::regex(R"((\d+)_test\.[A-Za-z]+)"));
  if (ids.empty()) {
    load.warnings.push_back("no DRIVE test images found under " + images.string());
    return load;
  }
  for (const std::string& id : ids) {
    const auto img = find_with_extension(images, id + "_test");
    const auto truth = find_with_extension(manual, id + "_manual1");
    const auto fov = find_with_extension(masks, id + "_test_mask");
    CaseError err{id, {}, {}};
    if (!img) err.missing.push_back(images / (id + "_test.*"));
    if (!truth) err.missing.push_back(manual / (id + "_manual1.*"));
    if (!fov) err.missing.push_back(masks / (id + "_test_mask.*"));
    if (!err.missing.empty()) {
      err.message = "missing case files";
      load.errors.push_back(std::move(err));
      continue;
    }
    try {
      FundusCase c{id, to_gray(read_rgb(*img), mode), read_mask(*truth), read_mask(*fov)};
      check_shapes(c);
      load.cases.push_back(std::move(c));
    } catch (const DataError& e) {
      load.errors.push_back({id, e.what(), {}});
    }
  }
  return load;
}

DatasetLoad load_stare(const fs::path& dir, GrayMode mode, double fov_threshold) {
  DatasetLoad load;
  const fs::path images = fs::is_directory(dir / "stare-images") ? dir / "stare-images" : dir;
  const fs::path labels = fs::is_directory(dir / "labels-ah") ? dir / "labels-ah" : dir;

  const std::vector<std::string> ids = scan_ids(images, std::regex(R"((im\d+)\.(ppm|png|pnm|tif|tiff))"));
  if (ids.empty()) {
    load.warnings.push_back("no STARE images found under " + images.string());
    return load;
  }
  for (const std::string& id : ids) {
    const auto img = find_with_extension(images, id);
    const auto truth = find_with_extension(labels, id + ".ah");
    if (!truth) {
      load.errors.push_back({id, "missing case files", {labels / (id + ".ah.*")}});
      continue;
    }
    try {
      const RgbImage rgb = read_rgb(*img);
      FundusCase c{id, to_gray(rgb, mode), read_mask(*truth), compute_fov(rgb, fov_threshold)};
      check_shapes(c);
      load.cases.push_back(std::move(c));
    } catch (const DataError& e) {
      load.errors.push_back({id, e.what(), {}});
    }
  }
  return load;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "seed,image,label,label_fraction\n";
  for (const ManifestEntry& e : entries) {
    if (e.image.find(',') != std::string::npos || e.label.find(',') != std::string::npos)
      throw DataError("manifest paths must not contain commas: " + e.image);
    out << e.seed << ',' << e.image << ',' << e.label << ',' << format_double(e.label_fraction) << '\n';
  }
  if (!out) throw DataError("error writing " + path.string());
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "seed,image,label,label_fraction")
    throw DataError(path.string() + ": missing manifest header");
  std::vector<ManifestEntry> entries;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != 4) throw DataError(where + ": expected 4 fields");
    ManifestEntry e{0, f[1], f[2], 0.0};
    const auto seed = std::from_chars(f[0].data(), f[0].data() + f[0].size(), e.seed);
    const auto frac = std::from_chars(f[3].data(), f[3].data() + f[3].size(), e.label_fraction);
    if (seed.ec != std::errc{} || seed.ptr != f[0].data() + f[0].size() || frac.ec != std::errc{} ||
        frac.ptr != f[3].data() + f[3].size())
      throw DataError(where + ": malformed seed or label fraction");
    entries.push_back(std::move(e));
  }
  return entries;
}

ManifestStream::ManifestStream(const fs::path& manifest) {
  const fs::path base = manifest.parent_path();
  for (const ManifestEntry& e : read_manifest(manifest)) {
    synth::Sample s;
    s.seed = e.seed;
    s.image = read_gray(base / e.image);
    s.label = read_mask(base / e.label);
    if (!s.image.same_shape(s.label)) throw DataError("manifest sample " + e.image + ": image and label differ in shape");
    samples_.push_back(std::move(s));
  }
  if (samples_.empty()) throw DataError(manifest.string() + ": manifest lists no samples");
  for (const synth::Sample& s : samples_)
    if (!s.image.same_shape(samples_.front().image))
      throw DataError(manifest.string() + ": samples differ in size");
}

synth::Sample ManifestStream::next(Rng& rng) {
  return samples_[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(samples_.size()) - 1))];
}

}  // namespace vesselsynth::io
