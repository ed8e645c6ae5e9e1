#include <cmath>
#include <numbers>

#include <doctest.h>

#include "support.hpp"
#include "vesselsynth/errors.hpp"
#include "vesselsynth/presets.hpp"
#include "vesselsynth/synthgen.hpp"

using namespace vesselsynth;
using namespace vesselsynth::synth;

namespace {

int count_set(const Mask& m) {
  int n = 0;
  for (auto v : m.pixels) n += v;
  return n;
}

}  // namespace

TEST_SUITE("synthgen") {

TEST_CASE("gen_point follows the y-down convention") {
  CHECK(gen_point({100, 100}, 0.0, 10.0) == Point{110, 100});
  CHECK(gen_point({100, 100}, std::numbers::pi / 2, 10.0) == Point{100, 110});
  CHECK(gen_point({0, 0}, std::numbers::pi / 4, std::sqrt(2.0)) == Point{1, 1});
  CHECK(gen_point({5, 5}, std::numbers::pi, 3.0) == Point{2, 5});
}

TEST_CASE("in_circle is a closed disk") {
  CHECK(in_circle({64, 64}, {64, 64}, 56.0));
  CHECK(in_circle({64 + 56, 64}, {64, 64}, 56.0));
  CHECK(in_circle({64, 64 - 56}, {64, 64}, 56.0));
  CHECK_FALSE(in_circle({64 + 57, 64}, {64, 64}, 56.0));
  // 3-4-5 triangle: exactly on the boundary
  CHECK(in_circle({3, 4}, {0, 0}, 5.0));
  CHECK_FALSE(in_circle({3, 4}, {0, 0}, 4.999));
}

TEST_CASE("normalize_angle wraps into (-pi, pi]") {
  CHECK(normalize_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(normalize_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(normalize_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
  CHECK(normalize_angle(0.25) == doctest::Approx(0.25));
  for (double a = -20.0; a < 20.0; a += 0.37) {
    const double r = normalize_angle(a);
    CHECK(r > -std::numbers::pi);
    CHECK(r <= std::numbers::pi);
    CHECK(std::remainder(r - a, 2 * std::numbers::pi) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("sample_branch_angle with zero spread picks +-mean") {
  Rng rng(7);
  int plus = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const double a = sample_branch_angle(0.0, 0.5, 0.0, rng);
    REQUIRE((a == 0.5 || a == -0.5));
    plus += a > 0;
  }
  const double freq = static_cast<double>(plus) / draws;
  CHECK(freq >= 0.45);
  CHECK(freq <= 0.55);
}

TEST_CASE("sample_branch_angle wraps past pi") {
  Rng rng(11);
  const double stem = std::numbers::pi - 0.01;
  bool saw_wrap = false;
  for (int i = 0; i < 200; ++i) {
    const double a = sample_branch_angle(stem, 0.5, 0.1, rng);
    CHECK(a > -std::numbers::pi);
    CHECK(a <= std::numbers::pi);
    saw_wrap = saw_wrap || a < 0.0;
  }
  CHECK(saw_wrap);
}

TEST_CASE("rasterize: horizontal width-1 segment sets 11 pixels") {
  GrayImage img(32, 32);
  Mask lbl(32, 32);
  rasterize_segment(img, lbl, {10, 10}, {20, 10}, 0.8f, 1);
  CHECK(count_set(lbl) == 11);
  int gray = 0;
  for (float v : img.pixels) gray += v == 0.8f;
  CHECK(gray == 11);
  for (int x = 10; x <= 20; ++x) CHECK(lbl(x, 10) == 1);
}

TEST_CASE("rasterize: width stamps a square per centerline pixel") {
  GrayImage img(32, 32);
  Mask lbl(32, 32);
  rasterize_segment(img, lbl, {10, 10}, {20, 10}, 0.5f, 3);
  CHECK(count_set(lbl) == 13 * 3);
  CHECK(lbl(9, 9) == 1);
  CHECK(lbl(21, 11) == 1);
  CHECK(lbl(15, 12) == 0);
}

TEST_CASE("rasterize: diagonal and steep segments are 8-connected with max(dx,dy)+1 pixels") {
  GrayImage img(64, 64);
  Mask lbl(64, 64);
  rasterize_segment(img, lbl, {3, 50}, {40, 7}, 1.0f, 1);
  CHECK(count_set(lbl) == 44);
  CHECK(lbl(3, 50) == 1);
  CHECK(lbl(40, 7) == 1);
  CHECK(testsupport::count_components(testsupport::dilate(lbl)) == 1);
}

TEST_CASE("rasterize: fully outside segment changes nothing") {
  GrayImage img(16, 16);
  Mask lbl(16, 16);
  rasterize_segment(img, lbl, {-30, -5}, {-10, -20}, 0.7f, 3);
  rasterize_segment(img, lbl, {40, 40}, {60, 45}, 0.7f, 1);
  CHECK(img == GrayImage(16, 16));
  CHECK(lbl == Mask(16, 16));
}

TEST_CASE("rasterize: partially outside segment is clipped") {
  GrayImage img(16, 16);
  Mask lbl(16, 16);
  rasterize_segment(img, lbl, {-5, 3}, {5, 3}, 0.7f, 1);
  CHECK(count_set(lbl) == 6);
}

TEST_CASE("rasterize: last writer wins at a crossing") {
  GrayImage img(32, 32);
  Mask lbl(32, 32);
  rasterize_segment(img, lbl, {5, 15}, {25, 15}, 0.3f, 1);
  rasterize_segment(img, lbl, {15, 5}, {15, 25}, 0.9f, 1);
  CHECK(img(15, 15) == 0.9f);
  CHECK(img(10, 15) == 0.3f);
}

TEST_CASE("rasterize: mismatched shapes throw") {
  GrayImage img(8, 8);
  Mask lbl(9, 8);
  CHECK_THROWS_AS(rasterize_segment(img, lbl, {0, 0}, {3, 3}, 1.0f, 1), ShapeError);
}

TEST_CASE("one node, zero variance: a single segment of the mean length at +-alpha") {
  GeneratorConfig cfg;
  cfg.max_nodes = 1;
  cfg.max_children = 1;
  cfg.sigma_length = 0.0;
  cfg.sigma_angle = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Sample s = generate_raw(cfg, seed);
    REQUIRE(s.tree.edges.size() == 1);
    REQUIRE(s.tree.nodes.size() == 2);
    const TreeEdge& e = s.tree.edges[0];
    CHECK(e.drawn_length == cfg.mean_length);
    const double root_dir = s.tree.nodes[0].incoming_direction;
    const double delta = normalize_angle(s.tree.nodes[1].incoming_direction - root_dir);
    CHECK(std::abs(std::abs(delta) - cfg.branch_angle) < 1e-12);
    const Point expected = gen_point(cfg.circle_center, s.tree.nodes[1].incoming_direction, cfg.mean_length);
    CHECK(s.tree.nodes[1].position == expected);
    const double dx = expected.x - cfg.circle_center.x;
    const double dy = expected.y - cfg.circle_center.y;
    CHECK(std::abs(std::hypot(dx, dy) - cfg.mean_length) <= std::sqrt(0.5) + 1e-12);
  }
}

TEST_CASE("generate_raw is deterministic in (config, seed)") {
  const auto preset = dataset_preset(2);
  for (std::uint64_t seed : {0ull, 1ull, 99ull, 0xdeadbeefull}) {
    const Sample a = generate_raw(preset.generator, seed);
    const Sample b = generate_raw(preset.generator, seed);
    CHECK(a.image == b.image);
    CHECK(a.label == b.label);
  }
  CHECK_FALSE(generate_raw(preset.generator, 1).label == generate_raw(preset.generator, 2).label);
}

TEST_CASE("tree budget, label consistency and containment") {
  for (int variant : {1, 2}) {
    const GeneratorConfig cfg = dataset_preset(variant).generator;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Sample s = generate_raw(cfg, seed);
      CHECK(s.tree.generated_nodes() <= cfg.max_nodes);
      for (int c : s.tree.child_counts()) CHECK(c <= cfg.max_children);
      for (std::size_t i = 0; i < s.image.size(); ++i)
        REQUIRE((s.image.pixels[i] != 0.0f) == (s.label.pixels[i] != 0));
      for (const TreeNode& n : s.tree.nodes) CHECK(in_circle(n.position, cfg.circle_center, cfg.circle_radius));
      for (const TreeEdge& e : s.tree.edges) {
        CHECK(e.gray >= cfg.gray_lo);
        CHECK(e.gray <= cfg.gray_hi);
        CHECK(e.drawn_length >= kMinSegmentLength);
      }
    }
  }
}

TEST_CASE("mean drawn segment length concentrates around the configured mean") {
  // A large circle keeps boundary rejection from biasing the length sample.
  GeneratorConfig cfg;
  cfg.image_size = 1301;
  cfg.circle_center = {650, 650};
  cfg.circle_radius = 640.0;
  cfg.max_nodes = 40;
  cfg.max_children = 3;
  double sum = 0.0;
  std::size_t segments = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Sample s = generate_raw(cfg, seed);
    for (const TreeEdge& e : s.tree.edges) sum += e.drawn_length;
    segments += s.tree.edges.size();
  }
  CHECK(segments == 40000);
  const double bound = 3.0 * cfg.sigma_length / std::sqrt(static_cast<double>(segments));
  CHECK(std::abs(sum / static_cast<double>(segments) - cfg.mean_length) < bound);
}

TEST_CASE("invalid configs are rejected") {
  GeneratorConfig cfg;
  cfg.max_nodes = 0;
  CHECK_THROWS_AS(generate_raw(cfg, 1), ConfigError);
  cfg = GeneratorConfig{};
  cfg.circle_radius = 80.0;
  CHECK_THROWS_AS(generate_raw(cfg, 1), ConfigError);
  cfg = GeneratorConfig{};
  cfg.gray_lo = 0.0;
  CHECK_THROWS_AS(generate_raw(cfg, 1), ConfigError);
}

TEST_CASE("root that cannot place a branch raises a generation error naming the parameter") {
  GeneratorConfig cfg;
  cfg.mean_length = 500.0;
  cfg.sigma_length = 0.0;
  try {
    generate_raw(cfg, 3);
    FAIL("expected GenerationError");
  } catch (const GenerationError& e) {
    CHECK(std::string(e.what()).find("mean_length") != std::string::npos);
  }
}

}
