#include "support.hpp"

#include <atomic>
#include <deque>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

#include "vesselsynth/cli.hpp"

namespace testsupport {

namespace {
std::atomic<int> g_counter{0};
}

TempDir::TempDir(const std::string& tag) {
  const auto base = fs::temp_directory_path();
  for (;;) {
    path_ = base / (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(g_counter++));
    if (fs::create_directories(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Mask random_mask(Rng& rng, int w, int h, double p_one) {
  Mask m(w, h);
  for (auto& v : m.pixels) v = vesselsynth::uniform_real(rng, 0.0, 1.0) < p_one ? 1 : 0;
  return m;
}

GrayImage random_image(Rng& rng, int w, int h) {
  GrayImage g(w, h);
  for (auto& v : g.pixels) v = static_cast<float>(vesselsynth::uniform_real(rng, 0.0, 1.0));
  return g;
}

vesselsynth::eval::ConfusionCounts brute_confusion(const Mask& pred, const Mask& truth, const Mask& fov) {
  vesselsynth::eval::ConfusionCounts c;
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      if (!fov(x, y)) continue;
      const bool p = pred(x, y) != 0;
      const bool t = truth(x, y) != 0;
      if (p && t) ++c.tp;
      if (p && !t) ++c.fp;
      if (!p && !t) ++c.tn;
      if (!p && t) ++c.fn;
    }
  }
  return c;
}

double brute_auc(const GrayImage& prob, const Mask& truth, const Mask& fov) {
  std::vector<float> pos, neg;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (!fov.pixels[i]) continue;
    (truth.pixels[i] ? pos : neg).push_back(prob.pixels[i]);
  }
  double wins = 0.0;
  for (float p : pos)
    for (float n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

Mask dilate(const Mask& m) {
  Mask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!m(x, y)) continue;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (out.contains(x + dx, y + dy)) out(x + dx, y + dy) = 1;
    }
  return out;
}

int count_components(const Mask& m) {
  std::vector<char> seen(m.size(), 0);
  int count = 0;
  for (int y0 = 0; y0 < m.height; ++y0) {
    for (int x0 = 0; x0 < m.width; ++x0) {
      const std::size_t i0 = static_cast<std::size_t>(y0) * m.width + x0;
      if (!m.pixels[i0] || seen[i0]) continue;
      ++count;
      std::deque<std::pair<int, int>> queue{{x0, y0}};
      seen[i0] = 1;
      while (!queue.empty()) {
        const auto [x, y] = queue.front();
        queue.pop_front();
        const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
        for (const auto& d : nb) {
          const int nx = x + d[0], ny = y + d[1];
          if (!m.contains(nx, ny)) continue;
          const std::size_t j = static_cast<std::size_t>(ny) * m.width + nx;
          if (m.pixels[j] && !seen[j]) {
            seen[j] = 1;
            queue.emplace_back(nx, ny);
          }
        }
      }
    }
  }
  return count;
}

std::vector<int> chessboard_distance(const Mask& m) {
  const int w = m.width, h = m.height;
  std::vector<int> d(m.size(), -1);
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!m.pixels[i]) {
        d[i] = 0;
        queue.emplace_back(x, y);
      } else if (x == 0 || y == 0 || x == w - 1 || y == h - 1) {
        d[i] = 1;
        queue.emplace_back(x, y);
      }
    }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    const int here = d[static_cast<std::size_t>(y) * w + x];
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (!m.contains(nx, ny)) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (d[j] < 0) {
          d[j] = here + 1;
          queue.emplace_back(nx, ny);
        }
      }
  }
  return d;
}

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = vesselsynth::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace testsupport
