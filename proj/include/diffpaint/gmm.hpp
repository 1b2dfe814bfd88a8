#pragma once

#include <memory>
#include <vector>

#include "diffpaint/denoiser.hpp"
#include "diffpaint/rng.hpp"
#include "diffpaint/schedule.hpp"
#include "diffpaint/tensor.hpp"

namespace diffpaint {

/// Isotropic Gaussian mixture over image tensors. Each component has one
/// std shared by every element; a component mean is either a single value
/// broadcast to all elements or one value per element.
struct GaussianMixture {
  struct Component {
    double weight = 1.0;
    std::vector<double> mean;  // length 1 (broadcast) or tensor numel
    double std = 1.0;          // >= 0; 0 is a point mass
  };
  std::vector<Component> components;

  void validate() const;
  double mean_at(int k, std::size_t i) const {
    const auto& m = components[k].mean;
    return m.size() == 1 ? m[0] : m[i];
  }

  /// Convenience for scalar (broadcast-mean) mixtures.
  static GaussianMixture scalar(std::vector<double> weights,
                                std::vector<double> means,
                                std::vector<double> stds);

  ImageTensor sample(int channels, int height, int width, RngStream& rng) const;
};

/// E[x0 | x_t] under the mixture prior and the closed-form forward marginal:
/// component k contributes mu_k + (sqrt(abar) s_k^2 / v_k) (x_t - sqrt(abar) mu_k)
/// with v_k = abar s_k^2 + 1 - abar, weighted by posterior responsibilities
/// r_k computed from the component marginals N(sqrt(abar) mu_k, v_k I)
/// (log-sum-exp stabilized).
ImageTensor gmm_posterior_mean_x0(const GaussianMixture& gmm, const ImageTensor& x_t,
                                  int t, const NoiseSchedule& schedule);

/// Exact MMSE noise predictor for mixture data:
/// eps*(x_t, t) = (x_t - sqrt(abar_t) E[x0|x_t]) / sqrt(1 - abar_t).
class GmmOracleDenoiser : public Denoiser {
 public:
  GmmOracleDenoiser(GaussianMixture gmm, NoiseSchedule schedule);

  bool conditional() const override { return false; }
  ImageTensor predict_epsilon(const ImageTensor& x_t, int t) const override;

  const GaussianMixture& mixture() const { return gmm_; }

 private:
  GaussianMixture gmm_;
  NoiseSchedule schedule_;
};

std::unique_ptr<Denoiser> make_gmm_oracle(GaussianMixture gmm,
                                          const NoiseSchedule& schedule);

/// Exact noise predictor for jointly Gaussian data x0 ~ N(mean, cov) over the
/// flattened tensor: E[x0|x_t] = mean + sqrt(abar) Cov (abar Cov + (1-abar) I)^{-1}
/// (x_t - sqrt(abar) mean). Used for correlated-pixel tests that an isotropic
/// mixture cannot represent.
class GaussianDenoiser : public Denoiser {
 public:
  GaussianDenoiser(std::vector<double> mean, std::vector<double> covariance,
                   NoiseSchedule schedule);

  bool conditional() const override { return false; }
  ImageTensor predict_epsilon(const ImageTensor& x_t, int t) const override;

 private:
  std::vector<double> mean_;
  std::vector<double> cov_;  // dense n x n, row-major
  std::size_t dim_;
  NoiseSchedule schedule_;
};

}  // namespace diffpaint
