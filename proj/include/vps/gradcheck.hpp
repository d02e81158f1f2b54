#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace vps {

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kLossGradTolerance = 1e-4;
inline constexpr double kModelGradTolerance = 1e-3;

// Central-difference gradient of f at x.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> x, double step = kFiniteDifferenceStep);

// |a - n|_2 / max(|a|_2, |n|_2); 0 when both vanish.
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

struct GradCheckSummary {
  std::string suite;
  std::size_t instances = 0;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct GradCheckOptions {
  std::uint64_t seed = 0;
  int instances = 20;
  int model_instances = 3;
  // Negative control: negate every analytic gradient before comparing.
  bool inject_sign_flip = false;
};

GradCheckSummary check_contrastive_gradients(const GradCheckOptions& options);
GradCheckSummary check_warp_gradients(const GradCheckOptions& options);
GradCheckSummary check_tube_gradients(const GradCheckOptions& options);
GradCheckSummary check_model_gradients(const GradCheckOptions& options);

std::vector<GradCheckSummary> run_gradcheck_suites(const GradCheckOptions& options);

}  // namespace vps
