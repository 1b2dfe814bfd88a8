#include "diffpaint/inpaint.hpp"

#include "diffpaint/diffusion.hpp"

namespace diffpaint {

InpaintVariant inpaint_variant_from_string(const std::string& name) {
  if (name == "repaint") return InpaintVariant::Repaint;
  if (name == "concat") return InpaintVariant::Concat;
  throw ConfigError("unknown inpainting variant: " + name);
}

std::string to_string(InpaintVariant variant) {
  return variant == InpaintVariant::Repaint ? "repaint" : "concat";
}

ImageTensor repaint_step_mix(const ImageTensor& x_gen, const ImageTensor& x_known,
                             const Mask& mask, int t_minus_1,
                             const ImageTensor& eps,
                             const NoiseSchedule& schedule) {
  require_same_shape(x_gen, x_known, "repaint_step_mix");
  require_mask_matches(mask, x_gen, "repaint_step_mix");
  if (t_minus_1 < 0) throw DataError("repaint_step_mix: negative timestep");
  const ImageTensor known_noised =
      t_minus_1 == 0 ? x_known
                     : forward_diffuse(x_known, t_minus_1, eps, schedule);
  ImageTensor out = x_gen;
  const int c = x_gen.channels();
  for (int ci = 0; ci < c; ++ci) {
    for (int y = 0; y < x_gen.height(); ++y) {
      for (int x = 0; x < x_gen.width(); ++x) {
        if (mask.at(y, x)) out.at(ci, y, x) = known_noised.at(ci, y, x);
      }
    }
  }
  return out;
}

ImageTensor repaint_inpaint(const ImageTensor& x_known, const Mask& mask,
                            const Denoiser& denoiser,
                            const NoiseSchedule& schedule, RngStream& rng,
                            bool mix_at_zero) {
  if (denoiser.conditional()) {
    throw VariantMismatchError("repaint variant requires an unconditional denoiser");
  }
  require_mask_matches(mask, x_known, "repaint_inpaint");

  RngStream gen = rng.substream(kGenerationSubstream);
  RngStream known_noise = rng.substream(kKnownNoiseSubstream);
  const int c = x_known.channels(), h = x_known.height(), w = x_known.width();
  const ImageTensor zero(c, h, w, 0.0f);

  // The gen stream's draw sequence (x_T, then z for t > 1) matches
  // sample_unconditional exactly; known-image noise never touches it.
  ImageTensor x = gen.normal_tensor(c, h, w);
  for (int t = schedule.T(); t >= 1; --t) {
    const ImageTensor eps_hat = denoiser.predict_epsilon(x, t);
    ImageTensor x_gen;
    if (t > 1) {
      const ImageTensor z = gen.normal_tensor(c, h, w);
      x_gen = reverse_step(x, t, eps_hat, z, schedule);
    } else {
      x_gen = reverse_step(x, t, eps_hat, zero, schedule);
    }
    if (t > 1) {
      const ImageTensor eps_known = known_noise.normal_tensor(c, h, w);
      x = repaint_step_mix(x_gen, x_known, mask, t - 1, eps_known, schedule);
    } else if (mix_at_zero) {
      x = repaint_step_mix(x_gen, x_known, mask, 0, x_gen, schedule);
    } else {
      x = std::move(x_gen);
    }
    if (!x.all_finite()) {
      throw DivergenceError("repaint_inpaint: non-finite sample", t);
    }
  }
  return x;
}

ImageTensor concat_inpaint(const ImageTensor& x_known, const Mask& mask,
                           const Denoiser& denoiser,
                           const NoiseSchedule& schedule, RngStream& rng) {
  if (!denoiser.conditional()) {
    throw VariantMismatchError("concat variant requires a conditional denoiser");
  }
  require_mask_matches(mask, x_known, "concat_inpaint");

  RngStream gen = rng.substream(kGenerationSubstream);
  const int c = x_known.channels(), h = x_known.height(), w = x_known.width();
  const ImageTensor zero(c, h, w, 0.0f);

  ImageTensor x = gen.normal_tensor(c, h, w);
  for (int t = schedule.T(); t >= 1; --t) {
    const ImageTensor eps_hat = denoiser.predict_epsilon(x, t, x_known, mask);
    if (t > 1) {
      const ImageTensor z = gen.normal_tensor(c, h, w);
      x = reverse_step(x, t, eps_hat, z, schedule);
    } else {
      x = reverse_step(x, t, eps_hat, zero, schedule);
    }
    if (!x.all_finite()) {
      throw DivergenceError("concat_inpaint: non-finite sample", t);
    }
  }
  // hard paste: conditioning alone cannot guarantee known-region exactness
  for (int ci = 0; ci < c; ++ci) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        if (mask.at(y, xx)) x.at(ci, y, xx) = x_known.at(ci, y, xx);
      }
    }
  }
  return x;
}

ImageTensor inpaint(const ImageTensor& x_known, const Mask& mask,
                    const Denoiser& denoiser, const NoiseSchedule& schedule,
                    const InpaintConfig& config, RngStream& rng) {
  if (config.variant == InpaintVariant::Repaint) {
    return repaint_inpaint(x_known, mask, denoiser, schedule, rng,
                           config.mix_at_zero);
  }
  return concat_inpaint(x_known, mask, denoiser, schedule, rng);
}

}  // namespace diffpaint
