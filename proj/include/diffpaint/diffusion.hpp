#pragma once

#include "diffpaint/denoiser.hpp"
#include "diffpaint/rng.hpp"
#include "diffpaint/schedule.hpp"
#include "diffpaint/tensor.hpp"

namespace diffpaint {

/// One forward chain step: sqrt(1 - beta_t) * x_prev + sqrt(beta_t) * eps.
ImageTensor forward_kernel_step(const ImageTensor& x_prev, int t,
                                const ImageTensor& eps,
                                const NoiseSchedule& schedule);

/// Closed-form forward marginal: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps.
ImageTensor forward_diffuse(const ImageTensor& x0, int t, const ImageTensor& eps,
                            const NoiseSchedule& schedule);

/// One reverse step:
///   (1/sqrt(alpha_t)) * (x_t - (1-alpha_t)/sqrt(1-abar_t) * eps_hat) + sigma_t * z.
/// With z = 0 this is the deterministic posterior mean. Callers pass
/// z = all-zeros at t = 1 so the final output is the mean.
ImageTensor reverse_step(const ImageTensor& x_t, int t, const ImageTensor& eps_hat,
                         const ImageTensor& z, const NoiseSchedule& schedule);

/// Ancestral sampler: x_T ~ N(0, I), then reverse steps down to t = 1
/// (no noise injected at the final step). Exactly T denoiser calls;
/// deterministic given the rng state. Throws DivergenceError naming the
/// timestep if an intermediate goes non-finite.
ImageTensor sample_unconditional(const Denoiser& denoiser,
                                 const NoiseSchedule& schedule, int channels,
                                 int height, int width, RngStream& rng);

}  // namespace diffpaint
