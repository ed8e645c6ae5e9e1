#pragma once

#include <cstdint>
#include <vector>

#include "vesselsynth/image.hpp"
#include "vesselsynth/random.hpp"

namespace vesselsynth::synth {

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Parameters of the line-segment tree generator.
///
/// Angles are radians measured from the +x axis toward +y (raster y grows
/// downward). Lengths and widths are in pixels.
struct GeneratorConfig {
  int image_size = 128;
  Point circle_center{64, 64};
  double circle_radius = 56.0;
  int max_nodes = 30;        ///< N: generated nodes (segment endpoints), root excluded
  int max_children = 3;      ///< children per node
  double mean_length = 14.0;
  double sigma_length = 4.0;
  double branch_angle = 0.5;  ///< mean deviation from the stem direction
  double sigma_angle = 0.25;
  int line_width = 1;
  double gray_lo = 0.35;
  double gray_hi = 0.6;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
};

struct TreeNode {
  Point position;
  double incoming_direction = 0.0;
};

struct TreeEdge {
  int parent = 0;           ///< index into VesselTree::nodes
  int child = 0;            ///< index of the node this edge created
  float gray = 0.0f;
  int width = 1;
  double drawn_length = 0;  ///< length before rounding the endpoint to the raster
};

/// nodes[0] is the root placed at the circle center; every other node is the
/// endpoint of exactly one edge.
struct VesselTree {
  std::vector<TreeNode> nodes;
  std::vector<TreeEdge> edges;

  int generated_nodes() const { return static_cast<int>(nodes.size()) - 1; }
  std::vector<int> child_counts() const;
};

struct Sample {
  GrayImage image;
  Mask label;
  std::uint64_t seed = 0;
  VesselTree tree;
};

/// Redraws allowed per branch before a node is marked exhausted.
inline constexpr int kBranchRetries = 16;
/// Drawn lengths below this are redrawn.
inline constexpr double kMinSegmentLength = 2.0;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double radians);

/// Picks +mean or -mean with equal odds, perturbs by Normal(0, sigma) and
/// adds the result to `stem_direction`.
double sample_branch_angle(double stem_direction, double mean_angle, double sigma, Rng& rng);

Point gen_point(Point origin, double angle, double length);

/// Closed disk test.
bool in_circle(Point p, Point center, double radius);

/// Bresenham centerline from p0 to p1 with a width x width square stamped at
/// every centerline pixel. Writes `gray` to the image and 1 to the label;
/// out-of-bounds pixels are clipped and later writes win.
void rasterize_segment(GrayImage& image, Mask& label, Point p0, Point p1, float gray, int width);

/// Builds one raw sample (lines on a zero background) from (config, seed).
Sample generate_raw(const GeneratorConfig& config, std::uint64_t seed);

}  // namespace vesselsynth::synth
