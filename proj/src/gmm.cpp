#include "diffpaint/gmm.hpp"

#include <cmath>
#include <string>

namespace diffpaint {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * ln(2*pi)

// Cholesky solve of A x = b for SPD A (n x n row-major); overwrites a copy.
std::vector<double> spd_solve(std::vector<double> a, std::vector<double> b,
                              std::size_t n) {
  // factor A = L L^T in place (lower triangle)
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (d <= 0.0) throw DataError("GaussianDenoiser: covariance not positive definite");
    const double ljj = std::sqrt(d);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / ljj;
    }
  }
  // forward then back substitution
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a[k * n + ii] * b[k];
    b[ii] = s / a[ii * n + ii];
  }
  return b;
}

}  // namespace

void GaussianMixture::validate() const {
  if (components.empty()) {
    throw DataError("GaussianMixture: needs at least one component");
  }
  double wsum = 0.0;
  for (const auto& c : components) {
    if (c.weight < 0.0) throw DataError("GaussianMixture: negative weight");
    if (c.std < 0.0) throw DataError("GaussianMixture: negative std");
    if (c.mean.empty()) throw DataError("GaussianMixture: empty component mean");
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9) {
    throw DataError("GaussianMixture: weights sum to " + std::to_string(wsum) +
                    ", expected 1");
  }
}

GaussianMixture GaussianMixture::scalar(std::vector<double> weights,
                                        std::vector<double> means,
                                        std::vector<double> stds) {
  if (weights.size() != means.size() || weights.size() != stds.size()) {
    throw DataError("GaussianMixture::scalar: component arrays differ in length");
  }
  GaussianMixture gmm;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    gmm.components.push_back({weights[k], {means[k]}, stds[k]});
  }
  gmm.validate();
  return gmm;
}

ImageTensor GaussianMixture::sample(int channels, int height, int width,
                                    RngStream& rng) const {
  validate();
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t pick = components.size() - 1;
  for (std::size_t k = 0; k < components.size(); ++k) {
    acc += components[k].weight;
    if (u < acc) {
      pick = k;
      break;
    }
  }
  const auto& c = components[pick];
  ImageTensor out(channels, height, width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = c.mean.size() == 1 ? c.mean[0] : c.mean[i];
    out[i] = static_cast<float>(m + c.std * rng.normal());
  }
  return out;
}

ImageTensor gmm_posterior_mean_x0(const GaussianMixture& gmm, const ImageTensor& x_t,
                                  int t, const NoiseSchedule& schedule) {
  gmm.validate();
  schedule.require_valid_t(t, "gmm_posterior_mean_x0");
  const std::size_t n = x_t.size();
  const std::size_t K = gmm.components.size();
  for (const auto& c : gmm.components) {
    if (c.mean.size() != 1 && c.mean.size() != n) {
      throw ShapeError("gmm_posterior_mean_x0: component mean length mismatch");
    }
  }
  const double abar = schedule.alpha_bar(t);
  const double sa = std::sqrt(abar);

  // log responsibilities under the component marginals N(sa*mu_k, v_k I)
  std::vector<double> logr(K);
  double logr_max = -1e300;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& c = gmm.components[k];
    const double v = abar * c.std * c.std + (1.0 - abar);
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x_t[i] - sa * gmm.mean_at(static_cast<int>(k), i);
      quad += d * d;
    }
    logr[k] = (c.weight > 0.0 ? std::log(c.weight) : -1e300) -
              0.5 * quad / v -
              static_cast<double>(n) * (kHalfLog2Pi + 0.5 * std::log(v));
    logr_max = std::max(logr_max, logr[k]);
  }
  std::vector<double> r(K);
  double rsum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    r[k] = std::exp(logr[k] - logr_max);
    rsum += r[k];
  }
  for (auto& v : r) v /= rsum;

  ImageTensor out = x_t;
  for (std::size_t i = 0; i < n; ++i) {
    double e = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& c = gmm.components[k];
      const double v = abar * c.std * c.std + (1.0 - abar);
      const double mu = gmm.mean_at(static_cast<int>(k), i);
      e += r[k] * (mu + (sa * c.std * c.std / v) * (x_t[i] - sa * mu));
    }
    out[i] = static_cast<float>(e);
  }
  return out;
}

GmmOracleDenoiser::GmmOracleDenoiser(GaussianMixture gmm, NoiseSchedule schedule)
    : gmm_(std::move(gmm)), schedule_(std::move(schedule)) {
  gmm_.validate();
}

ImageTensor GmmOracleDenoiser::predict_epsilon(const ImageTensor& x_t, int t) const {
  const ImageTensor e_x0 = gmm_posterior_mean_x0(gmm_, x_t, t, schedule_);
  const double abar = schedule_.alpha_bar(t);
  const double sa = std::sqrt(abar);
  const double inv_noise = 1.0 / std::sqrt(1.0 - abar);
  ImageTensor out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>((x_t[i] - sa * e_x0[i]) * inv_noise);
  }
  return out;
}

std::unique_ptr<Denoiser> make_gmm_oracle(GaussianMixture gmm,
                                          const NoiseSchedule& schedule) {
  return std::make_unique<GmmOracleDenoiser>(std::move(gmm), schedule);
}

GaussianDenoiser::GaussianDenoiser(std::vector<double> mean,
                                   std::vector<double> covariance,
                                   NoiseSchedule schedule)
    : mean_(std::move(mean)),
      cov_(std::move(covariance)),
      dim_(mean_.size()),
      schedule_(std::move(schedule)) {
  if (dim_ == 0 || cov_.size() != dim_ * dim_) {
    throw ShapeError("GaussianDenoiser: covariance must be dim x dim");
  }
}

ImageTensor GaussianDenoiser::predict_epsilon(const ImageTensor& x_t, int t) const {
  if (x_t.size() != dim_) {
    throw ShapeError("GaussianDenoiser: tensor numel " + std::to_string(x_t.size()) +
                     " != " + std::to_string(dim_));
  }
  schedule_.require_valid_t(t, "GaussianDenoiser");
  const double abar = schedule_.alpha_bar(t);
  const double sa = std::sqrt(abar);

  // A = abar*Cov + (1-abar)*I;  E[x0|xt] = mean + sa * Cov * A^{-1} (xt - sa*mean)
  std::vector<double> a(cov_.size());
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      a[i * dim_ + j] = abar * cov_[i * dim_ + j] + (i == j ? 1.0 - abar : 0.0);
    }
  }
  std::vector<double> resid(dim_);
  for (std::size_t i = 0; i < dim_; ++i) resid[i] = x_t[i] - sa * mean_[i];
  const std::vector<double> y = spd_solve(std::move(a), std::move(resid), dim_);

  const double inv_noise = 1.0 / std::sqrt(1.0 - abar);
  ImageTensor out = x_t;
  for (std::size_t i = 0; i < dim_; ++i) {
    double covy = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) covy += cov_[i * dim_ + j] * y[j];
    const double e_x0 = mean_[i] + sa * covy;
    out[i] = static_cast<float>((x_t[i] - sa * e_x0) * inv_noise);
  }
  return out;
}

}  // namespace diffpaint
