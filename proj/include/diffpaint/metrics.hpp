#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "diffpaint/gmm.hpp"
#include "diffpaint/inpaint.hpp"
#include "diffpaint/rng.hpp"
#include "diffpaint/schedule.hpp"
#include "diffpaint/tensor.hpp"
#include "diffpaint/training.hpp"

namespace diffpaint {

/// 10 * log10(range^2 / MSE); empty when the images are identical
/// (infinite-signal case, MSE = 0).
std::optional<double> psnr(const ImageTensor& a, const ImageTensor& b,
                           double data_range);

/// PSNR restricted to mask = 0 pixels; empty when that region is empty or
/// the restriction has zero error.
std::optional<double> masked_psnr(const ImageTensor& a, const ImageTensor& b,
                                  const Mask& mask, double data_range);

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

/// Windowed structural similarity, Gaussian-weighted, valid-mode (windows
/// fully inside the image), computed per channel and averaged.
double ssim(const ImageTensor& a, const ImageTensor& b,
            const SsimParams& params = {});

struct EvalItem {
  std::string id;
  double ssim_value = 0.0;
  std::optional<double> psnr_db;
  std::optional<double> masked_psnr_db;
};

struct EvalReport {
  double ssim_mean = 0.0, ssim_std = 0.0;
  /// Over items with finite PSNR only.
  double psnr_mean_db = 0.0, psnr_std_db = 0.0;
  int infinite_psnr_count = 0;
  double masked_psnr_mean_db = 0.0;
  int masked_infinite_or_empty_count = 0;
  std::vector<EvalItem> items;
  /// Config echo.
  std::string variant;
  std::string mask_kind;
  double coverage = 0.0;
  uint64_t seed = 0;
  /// Images are quantized to 8-bit in [0, 1] before metrics; PSNR range 1.0.
  std::string metric_convention = "8-bit quantized [0,1], PSNR range 1.0";

  std::string to_json() const;
  /// CSV rows `id,ssim,psnr_db` (psnr_db empty-cell when infinite).
  void write_csv(std::ostream& out) const;
};

struct MaskSource {
  MaskKind kind = MaskKind::Rectangles;
  double coverage = 0.25;
  /// When nonempty, used verbatim (cycled) instead of synthesis.
  std::vector<Mask> fixed;

  static MaskSource synthetic(MaskKind kind, double coverage) {
    MaskSource s;
    s.kind = kind;
    s.coverage = coverage;
    return s;
  }
  static MaskSource explicit_masks(std::vector<Mask> masks) {
    MaskSource s;
    s.fixed = std::move(masks);
    return s;
  }
};

/// Random-mask inpainting evaluation: for every image, obtain a mask, inpaint
/// with the requested variant, quantize both sides to 8 bits in [0, 1], and
/// score SSIM / PSNR over the full image plus PSNR over the masked region.
/// Per-item rng substreams make the report seed-deterministic. Any inpainting
/// failure aborts with the item index.
EvalReport evaluate_inpainting(const Denoiser& denoiser,
                               const std::vector<ImageTensor>& dataset,
                               const NoiseSchedule& schedule,
                               const MaskSource& masks,
                               const InpaintConfig& config, RngStream& rng);

/// Maps [-1, 1] to the 256-level grid on [0, 1] (clamp, then
/// round-half-to-even); both evaluation sides pass through this.
ImageTensor quantize_unit8(const ImageTensor& x);

struct ComponentEstimate {
  double weight = 0.0, mean = 0.0, std = 0.0;
  double weight_error = 0.0, mean_error = 0.0, std_error = 0.0;
  std::size_t count = 0;
};

struct MomentReport {
  std::vector<ComponentEstimate> components;
  std::size_t sample_count = 0;
};

/// Component moments of `samples` estimated by nearest-reference-mean
/// assignment of every element, with deviations from the reference mixture.
/// Requires >= 1000 samples. Components that attract no elements report
/// zero mean/std.
MomentReport moment_report(const std::vector<ImageTensor>& samples,
                           const GaussianMixture& reference);

}  // namespace diffpaint
