#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "diffpaint/gmm.hpp"
#include "diffpaint/rng.hpp"
#include "diffpaint/schedule.hpp"
#include "diffpaint/tensor.hpp"
#include "diffpaint/unet.hpp"

namespace diffpaint {

enum class MaskKind { Rectangles, Blobs };

MaskKind mask_kind_from_string(const std::string& name);
std::string to_string(MaskKind kind);

struct TrainConfig {
  int epochs = 250;
  int batch_size = 128;
  double learning_rate = 1e-3;
  int timesteps = 1000;
  uint64_t seed = 0;
  int patch_size = 64;
  double patch_overlap = 0.5;
  /// Conditional runs pair every patch with a fresh mask each epoch and feed
  /// the net the conditioning stack; the loss still covers the full tensor.
  bool conditional = false;
  MaskKind mask_kind = MaskKind::Rectangles;
  double mask_coverage = 0.25;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

/// The schedule a run with this config trains (and later samples) against.
NoiseSchedule schedule_for(const TrainConfig& config);

struct LossCurve {
  struct Step {
    int64_t step = 0;
    int epoch = 0;
    double loss = 0.0;
  };
  std::vector<Step> steps;
  std::vector<double> epoch_means;

  /// CSV rows `step,epoch,loss` with a header line.
  void write_csv(std::ostream& out) const;
};

/// Overlapping tiles of `size` x `size`. Stride is round(size * (1 - overlap)),
/// at least 1; origins run 0, stride, ... up to dim - size, with one extra
/// edge-anchored tile when the remainder is nonzero, so every pixel is covered.
std::vector<ImageTensor> extract_patches(const ImageTensor& image, int size,
                                         double overlap);

struct TrainingTarget {
  ImageTensor x_t;
  int t = 1;
  ImageTensor eps;
};

/// Draws t uniform on [1, T] and eps standard normal, then diffuses x0 to
/// x_t under the closed-form forward marginal.
TrainingTarget sample_training_target(const ImageTensor& x0,
                                      const NoiseSchedule& schedule,
                                      RngStream& rng);

/// Mean over elements of (eps_hat - eps)^2.
double epsilon_loss(const ImageTensor& eps_hat, const ImageTensor& eps);

/// Accretes random shapes until the unknown (0) fraction reaches `coverage`;
/// per-shape area is capped so the result stays within +-0.10 of the target.
Mask synth_mask(int height, int width, MaskKind kind, double coverage,
                RngStream& rng);

enum class SyntheticKind { GmmPixels, GaussianBlobTextures };

SyntheticKind synthetic_kind_from_string(const std::string& name);

struct SyntheticParams {
  int channels = 1;
  int height = 16;
  int width = 16;
  /// GmmPixels: each pixel drawn independently from this scalar mixture.
  GaussianMixture pixel_mixture =
      GaussianMixture::scalar({0.5, 0.5}, {-0.5, 0.5}, {0.2, 0.2});
  /// GaussianBlobTextures: white noise smoothed by a Gaussian kernel of this
  /// width (pixels), rescaled by `gain`, squashed through tanh.
  double blob_sigma = 2.0;
  double blob_gain = 2.0;
};

/// Seed-deterministic images in [-1, 1]. Blob textures carry spatial
/// correlation that decays with distance, so inpainting them is learnable.
std::vector<ImageTensor> make_synthetic_dataset(SyntheticKind kind,
                                                const SyntheticParams& params,
                                                int count, RngStream& rng);

/// Epsilon-prediction training with adaptive-moment SGD. Extracts patches
/// from every dataset image, shuffles them each epoch, and updates after
/// every batch. Mutates `net` in place and returns the loss curve. Throws
/// DivergenceError (with the step index) if the loss goes non-finite.
LossCurve train(UNetDenoiser& net, const std::vector<ImageTensor>& dataset,
                const TrainConfig& config, RngStream& rng);

}  // namespace diffpaint
