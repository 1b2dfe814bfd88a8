#include "diffpaint/schedule.hpp"

#include <algorithm>
#include <cmath>

namespace diffpaint {

NoiseSchedule::NoiseSchedule(std::vector<double> betas, ReverseVariance variance)
    : betas_(std::move(betas)), variance_(variance) {
  if (betas_.empty()) {
    throw ConfigError("NoiseSchedule: need at least one timestep");
  }
  const int T = static_cast<int>(betas_.size());
  alphas_.resize(T);
  alpha_bars_.resize(T);
  sigmas_.resize(T);
  posterior_variances_.resize(T);
  double abar = 1.0;
  for (int i = 0; i < T; ++i) {
    const double b = betas_[i];
    if (!(b > 0.0 && b < 1.0)) {
      throw ConfigError("NoiseSchedule: beta[" + std::to_string(i + 1) +
                        "] = " + std::to_string(b) + " outside (0,1)");
    }
    alphas_[i] = 1.0 - b;
    const double abar_prev = abar;
    abar *= alphas_[i];
    alpha_bars_[i] = abar;
    posterior_variances_[i] = (1.0 - abar_prev) / (1.0 - abar) * b;
    sigmas_[i] = variance_ == ReverseVariance::FixedBeta
                     ? std::sqrt(b)
                     : std::sqrt(posterior_variances_[i]);
  }
}

std::size_t NoiseSchedule::index(int t) const {
  require_valid_t(t, "NoiseSchedule");
  return static_cast<std::size_t>(t - 1);
}

void NoiseSchedule::require_valid_t(int t, const char* where) const {
  if (t < 1 || t > T()) {
    throw ConfigError(std::string(where) + ": timestep " + std::to_string(t) +
                      " outside [1, " + std::to_string(T()) + "]");
  }
}

NoiseSchedule build_schedule(ScheduleFamily kind, int T, double beta_start,
                             double beta_end, ReverseVariance variance) {
  if (T < 1) {
    throw ConfigError("build_schedule: T must be >= 1, got " + std::to_string(T));
  }
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ConfigError("build_schedule: need 0 < beta_start <= beta_end < 1, got [" +
                      std::to_string(beta_start) + ", " + std::to_string(beta_end) + "]");
  }
  std::vector<double> betas(T);
  switch (kind) {
    case ScheduleFamily::Linear:
      if (T == 1) {
        betas[0] = beta_start;
      } else {
        for (int i = 0; i < T; ++i) {
          betas[i] = beta_start +
                     static_cast<double>(i) / (T - 1) * (beta_end - beta_start);
        }
      }
      break;
  }
  return NoiseSchedule(std::move(betas), variance);
}

NoiseSchedule default_schedule() {
  return build_schedule(ScheduleFamily::Linear, 1000, 1e-4, 0.02);
}

NoiseSchedule scaled_linear_schedule(int T, ReverseVariance variance) {
  const double scale = 1000.0 / T;
  const double start = scale * 1e-4;
  const double end = std::min(scale * 0.02, 0.999);
  return build_schedule(ScheduleFamily::Linear, T, std::min(start, end), end, variance);
}

ScheduleFamily schedule_family_from_string(const std::string& name) {
  if (name == "linear") return ScheduleFamily::Linear;
  throw ConfigError("unknown schedule family: " + name);
}

}  // namespace diffpaint
