#include "vesselsynth/synthgen.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace vesselsynth::synth {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("generator config: " + what);
}

double draw_length(const GeneratorConfig& cfg, Rng& rng) {
  double len = normal(rng, cfg.mean_length, cfg.sigma_length);
  while (len < kMinSegmentLength) len = normal(rng, cfg.mean_length, cfg.sigma_length);
  return len;
}

void stamp(GrayImage& image, Mask& label, int cx, int cy, float gray, int width) {
  const int lo = -(width - 1) / 2;
  const int hi = lo + width - 1;
  for (int dy = lo; dy <= hi; ++dy) {
    for (int dx = lo; dx <= hi; ++dx) {
      const int x = cx + dx;
      const int y = cy + dy;
      if (!image.contains(x, y)) continue;
      image(x, y) = gray;
      label(x, y) = 1;
    }
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  require(image_size >= 1, "image_size must be >= 1");
  require(circle_radius > 0.0, "circle_radius must be > 0");
  require(circle_radius <= image_size / 2.0, "circle_radius must be <= image_size / 2");
  require(circle_center.x - circle_radius >= 0.0 && circle_center.y - circle_radius >= 0.0 &&
              circle_center.x + circle_radius <= image_size - 1 &&
              circle_center.y + circle_radius <= image_size - 1,
          "circle must lie inside the image");
  require(max_nodes >= 1, "max_nodes must be >= 1");
  require(max_children >= 1, "max_children must be >= 1");
  require(mean_length > 0.0, "mean_length must be > 0");
  require(sigma_length >= 0.0, "sigma_length must be >= 0");
  require(branch_angle > 0.0 && branch_angle < std::numbers::pi, "branch_angle must be in (0, pi)");
  require(sigma_angle >= 0.0, "sigma_angle must be >= 0");
  require(line_width >= 1, "line_width must be >= 1");
  require(gray_lo > 0.0 && gray_lo <= gray_hi && gray_hi <= 1.0,
          "gray range must satisfy 0 < gray_lo <= gray_hi <= 1");
}

std::vector<int> VesselTree::child_counts() const {
  std::vector<int> counts(nodes.size(), 0);
  for (const auto& e : edges) ++counts[static_cast<std::size_t>(e.parent)];
  return counts;
}

double normalize_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(radians, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

double sample_branch_angle(double stem_direction, double mean_angle, double sigma, Rng& rng) {
  const double sign = uniform_int(rng, 0, 1) == 1 ? 1.0 : -1.0;
  const double delta = normal(rng, sign * mean_angle, sigma);
  return normalize_angle(stem_direction + delta);
}

Point gen_point(Point origin, double angle, double length) {
  return Point{static_cast<int>(std::lround(origin.x + length * std::cos(angle))),
               static_cast<int>(std::lround(origin.y + length * std::sin(angle)))};
}

bool in_circle(Point p, Point center, double radius) {
  const double dx = p.x - center.x;
  const double dy = p.y - center.y;
  return dx * dx + dy * dy <= radius * radius;
}

void rasterize_segment(GrayImage& image, Mask& label, Point p0, Point p1, float gray, int width) {
  if (!label.same_shape(image)) throw ShapeError("rasterize_segment: image and label shapes differ");
  int x = p0.x;
  int y = p0.y;
  const int dx = std::abs(p1.x - p0.x);
  const int dy = -std::abs(p1.y - p0.y);
  const int sx = p0.x < p1.x ? 1 : -1;
  const int sy = p0.y < p1.y ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    stamp(image, label, x, y, gray, width);
    if (x == p1.x && y == p1.y) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

Sample generate_raw(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);

  Sample sample;
  sample.seed = seed;
  sample.image = GrayImage(cfg.image_size, cfg.image_size, 0.0f);
  sample.label = Mask(cfg.image_size, cfg.image_size, 0);

  VesselTree& tree = sample.tree;
  const double root_direction = normalize_angle(uniform_real(rng, -std::numbers::pi, std::numbers::pi));
  tree.nodes.push_back({cfg.circle_center, root_direction});
  std::vector<int> children{0};

  // Breadth-first: nodes are expanded in the order they were recorded.
  for (std::size_t idx = 0; idx < tree.nodes.size() && tree.generated_nodes() < cfg.max_nodes; ++idx) {
    const TreeNode stem = tree.nodes[idx];
    int rejected = 0;
    while (children[idx] < cfg.max_children && tree.generated_nodes() < cfg.max_nodes) {
      const double length = draw_length(cfg, rng);
      const double angle = sample_branch_angle(stem.incoming_direction, cfg.branch_angle, cfg.sigma_angle, rng);
      const Point end = gen_point(stem.position, angle, length);
      if (!in_circle(end, cfg.circle_center, cfg.circle_radius)) {
        if (++rejected >= kBranchRetries) break;
        continue;
      }
      rejected = 0;
      const auto gray = static_cast<float>(uniform_real(rng, cfg.gray_lo, cfg.gray_hi));
      rasterize_segment(sample.image, sample.label, stem.position, end, gray, cfg.line_width);

      const int child_index = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({end, angle});
      tree.edges.push_back({static_cast<int>(idx), child_index, gray, cfg.line_width, length});
      children.push_back(0);
      ++children[idx];
    }
    if (idx == 0 && children[0] == 0) {
      std::ostringstream msg;
      msg << "no branch from the root fit inside the circle after " << kBranchRetries
          << " draws: mean_length (" << cfg.mean_length << ") is too large for circle_radius ("
          << cfg.circle_radius << ")";
      throw GenerationError(msg.str());
    }
  }
  return sample;
}

}  // namespace vesselsynth::synth
