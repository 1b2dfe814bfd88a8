#pragma once

#include <string>
#include <vector>

#include "diffpaint/errors.hpp"

namespace diffpaint {

enum class ScheduleFamily { Linear };

/// Which per-step reverse noise scale sigma_t the sampler uses.
/// FixedBeta:      sigma_t^2 = beta_t (default).
/// PosteriorBeta:  sigma_t^2 = beta_tilde_t = (1 - abar_{t-1}) / (1 - abar_t) * beta_t.
enum class ReverseVariance { FixedBeta, PosteriorBeta };

/// Per-timestep diffusion coefficients. Timesteps are 1-based: t in [1, T],
/// with t = 0 denoting the clean-data endpoint (alpha_bar(0) = 1).
/// All coefficients are computed and stored in double precision.
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> betas,
                ReverseVariance variance = ReverseVariance::FixedBeta);

  int T() const { return static_cast<int>(betas_.size()); }

  double beta(int t) const { return betas_[index(t)]; }
  double alpha(int t) const { return alphas_[index(t)]; }
  /// alpha_bar(0) = 1 by definition.
  double alpha_bar(int t) const {
    if (t == 0) return 1.0;
    return alpha_bars_[index(t)];
  }
  double sigma(int t) const { return sigmas_[index(t)]; }
  double posterior_variance(int t) const { return posterior_variances_[index(t)]; }

  ReverseVariance variance_choice() const { return variance_; }

  const std::vector<double>& betas() const { return betas_; }
  const std::vector<double>& alpha_bars() const { return alpha_bars_; }

  void require_valid_t(int t, const char* where) const;

 private:
  std::size_t index(int t) const;

  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
  std::vector<double> sigmas_;
  std::vector<double> posterior_variances_;
  ReverseVariance variance_;
};

/// Linear family: betas[t] = beta_start + (t-1)/(T-1) * (beta_end - beta_start),
/// with betas[1] = beta_start when T = 1.
NoiseSchedule build_schedule(ScheduleFamily kind, int T, double beta_start,
                             double beta_end,
                             ReverseVariance variance = ReverseVariance::FixedBeta);

/// The standard linear 1e-4..0.02 schedule over T = 1000.
NoiseSchedule default_schedule();

/// Linear schedule whose endpoints are rescaled by 1000/T so that short
/// chains still end near pure noise (alpha_bar(T) ~ 0).
NoiseSchedule scaled_linear_schedule(int T,
                                     ReverseVariance variance = ReverseVariance::FixedBeta);

ScheduleFamily schedule_family_from_string(const std::string& name);

}  // namespace diffpaint
