#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace vesselsynth::nn {

struct GradCheckResult {
  std::string name;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;  ///< number of scalar entries compared
  std::size_t skipped = 0;  ///< entries whose perturbation crossed a kink

  bool passed() const { return max_relative_error < tolerance; }
};

inline constexpr double kFiniteDifferenceStep = 1e-4;
inline constexpr double kLayerTolerance = 1e-5;
inline constexpr double kSoftmaxTolerance = 1e-6;
/// Whole network: composition raises the third derivative, so the O(step^2)
/// truncation term of the central difference is larger than for one layer.
inline constexpr double kNetworkTolerance = 1e-4;

/// |a - n| / max(|a|, |n|, floor); 0 when the denominator is zero.
double relative_error(double analytic, double numeric, double floor = 0.0);

/// Entries are judged against max(|a|, |n|, kRelativeFloor * scale), scale
/// being max|analytic| over the tensor (or over a whole network). With step 1e-4 the central difference
/// carries roughly 1e-11 of roundoff, which a bare element-wise ratio turns
/// into an unbounded error for entries that happen to sit near zero.
inline constexpr double kRelativeFloor = 1e-3;

/// Central differences of `loss` with respect to every entry of `values`,
/// compared with `analytic`. Folds the worst entry into `result`. `scale`
/// overrides max|analytic| when larger.
void compare_with_finite_differences(std::span<double> values, std::span<const double> analytic,
                                     const std::function<double()>& loss, GradCheckResult& result,
                                     double step = kFiniteDifferenceStep, double scale = 0.0);

/// Like compare_with_finite_differences, for a whole network.
///
/// `pattern` reports which smooth piece the last loss() call landed in; an
/// entry whose perturbations change the pattern crossed a relu or max-pool
/// switch and is counted in result.skipped instead of compared.
void compare_skipping_kinks(std::span<double> values, std::span<const double> analytic,
                            const std::function<double()>& loss,
                            const std::function<std::vector<std::uint32_t>()>& pattern, GradCheckResult& result,
                            double step = kFiniteDifferenceStep, double scale = 0.0);

// Individual checks on random double-precision tensors.
GradCheckResult check_conv2d(std::uint64_t seed, int stride, int pad);
GradCheckResult check_batchnorm(std::uint64_t seed);
GradCheckResult check_relu(std::uint64_t seed);
GradCheckResult check_maxpool(std::uint64_t seed);
GradCheckResult check_upsample(std::uint64_t seed);
GradCheckResult check_crop_concat(std::uint64_t seed);
GradCheckResult check_softmax_ce(std::uint64_t seed);
/// Whole network (small spec with a concat skip) against the pixel-wise loss.
GradCheckResult check_network(std::uint64_t seed);

/// Every check above.
std::vector<GradCheckResult> run_gradient_checks(std::uint64_t seed);

}  // namespace vesselsynth::nn
