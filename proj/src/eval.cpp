#include "vesselsynth/eval.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <ostream>

namespace vesselsynth::eval {

namespace {

struct Scored {
  float score;
  bool positive;
};

void require_shapes(const char* where, const Mask& a, const Mask& b, const Mask& fov) {
  if (!a.same_shape(b) || !a.same_shape(fov))
    throw ShapeError(std::string(where) + ": masks differ in shape (" + std::to_string(a.width) + "x" +
                     std::to_string(a.height) + ", " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                     ", fov " + std::to_string(fov.width) + "x" + std::to_string(fov.height) + ")");
}

// In-FOV (score, label) pairs sorted by decreasing score.
std::vector<Scored> collect(const GrayImage& prob, const Mask& truth, const Mask& fov, std::uint64_t& positives,
                            std::uint64_t& negatives) {
  if (!prob.same_shape(truth) || !prob.same_shape(fov)) throw ShapeError("roc: probability map and masks differ in shape");
  std::vector<Scored> s;
  s.reserve(prob.size());
  positives = negatives = 0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    if (!fov.pixels[i]) continue;
    const bool pos = truth.pixels[i] != 0;
    s.push_back({prob.pixels[i], pos});
    (pos ? positives : negatives) += 1;
  }
  if (s.empty()) throw MetricError("roc: the field of view is empty");
  if (positives == 0 || negatives == 0)
    throw MetricError("roc: the field of view must contain both vessel and background pixels");
  std::sort(s.begin(), s.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  return s;
}

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("undefined"); }

}  // namespace

ConfusionCounts confusion(const Mask& predicted, const Mask& truth, const Mask& fov) {
  require_shapes("confusion", predicted, truth, fov);
  ConfusionCounts c;
  for (std::size_t i = 0; i < fov.size(); ++i) {
    if (!fov.pixels[i]) continue;
    const bool p = predicted.pixels[i] != 0;
    const bool t = truth.pixels[i] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

std::optional<double> sensitivity(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
std::optional<double> specificity(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp); }
std::optional<double> accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }

Mask binarize(const GrayImage& prob, double threshold) {
  Mask m(prob.width, prob.height);
  for (std::size_t i = 0; i < prob.size(); ++i) m.pixels[i] = prob.pixels[i] >= threshold ? 1 : 0;
  return m;
}

RocCurve roc(const GrayImage& prob, const Mask& truth, const Mask& fov, ThresholdStrategy strategy) {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
  const std::vector<Scored> s = collect(prob, truth, fov, pos, neg);
  const double P = static_cast<double>(pos);
  const double N = static_cast<double>(neg);

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::size_t i = 0;
  const auto take_while_at_least = [&](double t) {
    while (i < s.size() && s[i].score >= t) {
      (s[i].positive ? tp : fp) += 1;
      ++i;
    }
  };

  if (strategy.kind == ThresholdStrategy::Kind::all_distinct) {
    while (i < s.size()) {
      const float t = s[i].score;
      take_while_at_least(t);
      curve.points.push_back({t, fp / N, tp / P});
    }
  } else {
    if (strategy.grid_size < 2) throw MetricError("roc: uniform grid needs at least 2 thresholds");
    const int k_max = strategy.grid_size - 1;
    for (int k = 0; k <= k_max; ++k) {
      const double t = static_cast<double>(k_max - k) / k_max;
      take_while_at_least(t);
      curve.points.push_back({t, fp / N, tp / P});
    }
    if (i < s.size()) {
      take_while_at_least(-std::numeric_limits<double>::infinity());
      curve.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
    }
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint& a = curve.points[i - 1];
    const RocPoint& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

double auc_rank(const GrayImage& prob, const Mask& truth, const Mask& fov) {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
  std::vector<Scored> s = collect(prob, truth, fov, pos, neg);
  std::reverse(s.begin(), s.end());  // ascending
  // Twice the Mann-Whitney U, accumulated exactly in integers.
  unsigned __int128 twice_u = 0;
  std::uint64_t neg_below = 0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    std::uint64_t p = 0;
    std::uint64_t n = 0;
    while (j < s.size() && s[j].score == s[i].score) {
      (s[j].positive ? p : n) += 1;
      ++j;
    }
    twice_u += static_cast<unsigned __int128>(2) * p * neg_below + static_cast<unsigned __int128>(p) * n;
    neg_below += n;
    i = j;
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

ImageMetrics evaluate_image(std::string id, const GrayImage& prob, const Mask& truth, const Mask& fov,
                            double threshold, ThresholdStrategy strategy) {
  ImageMetrics m;
  m.id = std::move(id);
  m.counts = confusion(binarize(prob, threshold), truth, fov);
  m.sn = sensitivity(m.counts);
  m.sp = specificity(m.counts);
  m.acc = accuracy(m.counts);
  try {
    m.auc = auc(roc(prob, truth, fov, strategy));
  } catch (const MetricError&) {
    m.auc = std::nullopt;
  }
  return m;
}

std::optional<double> mean_of(std::span<const std::optional<double>> values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

void write_report_csv(std::ostream& out, std::span<const ImageMetrics> rows) {
  out << "image_id,Sn,Sp,Acc,AUC\n";
  std::vector<std::optional<double>> sn, sp, acc, area;
  for (const ImageMetrics& r : rows) {
    out << r.id << ',' << fmt(r.sn) << ',' << fmt(r.sp) << ',' << fmt(r.acc) << ',' << fmt(r.auc) << '\n';
    sn.push_back(r.sn);
    sp.push_back(r.sp);
    acc.push_back(r.acc);
    area.push_back(r.auc);
  }
  out << "mean," << fmt(mean_of(sn)) << ',' << fmt(mean_of(sp)) << ',' << fmt(mean_of(acc)) << ','
      << fmt(mean_of(area)) << '\n';
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
  out << "threshold,fpr,tpr\n";
  for (const RocPoint& p : curve.points) out << fmt(p.threshold) << ',' << fmt(p.fpr) << ',' << fmt(p.tpr) << '\n';
}

}  // namespace vesselsynth::eval
