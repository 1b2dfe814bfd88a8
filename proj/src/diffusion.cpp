#include "diffpaint/diffusion.hpp"

#include <cmath>

namespace diffpaint {

ImageTensor forward_kernel_step(const ImageTensor& x_prev, int t,
                                const ImageTensor& eps,
                                const NoiseSchedule& schedule) {
  require_same_shape(x_prev, eps, "forward_kernel_step");
  schedule.require_valid_t(t, "forward_kernel_step");
  const double beta = schedule.beta(t);
  const double signal = std::sqrt(1.0 - beta);
  const double noise = std::sqrt(beta);
  ImageTensor out = x_prev;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(signal * x_prev[i] + noise * eps[i]);
  }
  return out;
}

ImageTensor forward_diffuse(const ImageTensor& x0, int t, const ImageTensor& eps,
                            const NoiseSchedule& schedule) {
  require_same_shape(x0, eps, "forward_diffuse");
  schedule.require_valid_t(t, "forward_diffuse");
  const double abar = schedule.alpha_bar(t);
  const double signal = std::sqrt(abar);
  const double noise = std::sqrt(1.0 - abar);
  ImageTensor out = x0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(signal * x0[i] + noise * eps[i]);
  }
  return out;
}

ImageTensor reverse_step(const ImageTensor& x_t, int t, const ImageTensor& eps_hat,
                         const ImageTensor& z, const NoiseSchedule& schedule) {
  require_same_shape(x_t, eps_hat, "reverse_step");
  require_same_shape(x_t, z, "reverse_step");
  schedule.require_valid_t(t, "reverse_step");
  if (!eps_hat.all_finite()) {
    throw DivergenceError("reverse_step: non-finite noise estimate", t);
  }
  const double alpha = schedule.alpha(t);
  const double abar = schedule.alpha_bar(t);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double eps_coef = (1.0 - alpha) / std::sqrt(1.0 - abar);
  const double sigma = schedule.sigma(t);
  ImageTensor out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(
        inv_sqrt_alpha * (x_t[i] - eps_coef * eps_hat[i]) + sigma * z[i]);
  }
  return out;
}

ImageTensor sample_unconditional(const Denoiser& denoiser,
                                 const NoiseSchedule& schedule, int channels,
                                 int height, int width, RngStream& rng) {
  ImageTensor x = rng.normal_tensor(channels, height, width);
  const ImageTensor zero(channels, height, width, 0.0f);
  for (int t = schedule.T(); t >= 1; --t) {
    const ImageTensor eps_hat = denoiser.predict_epsilon(x, t);
    if (t > 1) {
      const ImageTensor z = rng.normal_tensor(channels, height, width);
      x = reverse_step(x, t, eps_hat, z, schedule);
    } else {
      x = reverse_step(x, t, eps_hat, zero, schedule);
    }
    if (!x.all_finite()) {
      throw DivergenceError("sample_unconditional: non-finite sample", t);
    }
  }
  return x;
}

}  // namespace diffpaint
