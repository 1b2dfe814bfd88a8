#pragma once

#include <cstdint>
#include <string>

#include "diffpaint/denoiser.hpp"
#include "diffpaint/rng.hpp"
#include "diffpaint/schedule.hpp"
#include "diffpaint/tensor.hpp"

namespace diffpaint {

enum class InpaintVariant { Repaint, Concat };

InpaintVariant inpaint_variant_from_string(const std::string& name);
std::string to_string(InpaintVariant variant);

/// Substream keys shared by both variants: generation draws (x_T and z) are
/// kept apart from known-image noising so an all-unknown mask reproduces the
/// unconditional trajectory bit-for-bit under substream(kGenerationSubstream).
inline constexpr uint64_t kGenerationSubstream = 0;
inline constexpr uint64_t kKnownNoiseSubstream = 1;

struct InpaintConfig {
  InpaintVariant variant = InpaintVariant::Repaint;
  /// Apply a final noise-free mix so known pixels are bit-exact copies.
  bool mix_at_zero = true;
};

/// One mixing step: noise the known image down to level t_minus_1 (identity
/// when t_minus_1 = 0), then take it on mask=1 pixels and x_gen on mask=0
/// pixels. Selection is a per-pixel branch, never arithmetic blending, so the
/// chosen side is copied bit-exactly. `eps` is ignored when t_minus_1 = 0.
ImageTensor repaint_step_mix(const ImageTensor& x_gen, const ImageTensor& x_known,
                             const Mask& mask, int t_minus_1,
                             const ImageTensor& eps,
                             const NoiseSchedule& schedule);

/// Masked-mixing inpainting: one reverse step plus one mix per timestep, no
/// inner resampling. Requires an unconditional denoiser.
ImageTensor repaint_inpaint(const ImageTensor& x_known, const Mask& mask,
                            const Denoiser& denoiser,
                            const NoiseSchedule& schedule, RngStream& rng,
                            bool mix_at_zero = true);

/// Concatenation-conditioned inpainting: every prediction sees
/// [x_t; x_known * M; M]; known pixels are hard-pasted at the end. Requires
/// a conditional denoiser.
ImageTensor concat_inpaint(const ImageTensor& x_known, const Mask& mask,
                           const Denoiser& denoiser,
                           const NoiseSchedule& schedule, RngStream& rng);

ImageTensor inpaint(const ImageTensor& x_known, const Mask& mask,
                    const Denoiser& denoiser, const NoiseSchedule& schedule,
                    const InpaintConfig& config, RngStream& rng);

}  // namespace diffpaint
