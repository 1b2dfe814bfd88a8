#pragma once

#include <memory>
#include <vector>

#include "diffpaint/tensor.hpp"

namespace diffpaint {

/// Noise predictor: estimates the standard-normal sample that produced x_t
/// from the clean image under the closed-form forward marginal.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual bool conditional() const = 0;

  /// Unconditional entry point.
  virtual ImageTensor predict_epsilon(const ImageTensor& /*x_t*/, int /*t*/) const {
    throw VariantMismatchError("denoiser is conditional and requires (x_known, mask)");
  }

  /// Conditional entry point; the implementation stacks the condition
  /// channels itself.
  virtual ImageTensor predict_epsilon(const ImageTensor& /*x_t*/, int /*t*/,
                                      const ImageTensor& /*x_known*/,
                                      const Mask& /*mask*/) const {
    throw VariantMismatchError("unconditional denoiser rejects a supplied condition");
  }
};

enum class Activation { Silu };
enum class Normalization { Group, None };

/// Trainable-denoiser architecture description. Defaults mirror the
/// full-scale model (4 levels, 128 base channels, multipliers {1,2,3,4});
/// desk-scale runs shrink these.
struct DenoiserSpec {
  int base_channels = 128;
  int depth = 4;
  std::vector<int> channel_multipliers = {1, 2, 3, 4};
  int in_channels = 3;
  /// Conditional nets ingest [x_t; x_known * M; M] as in_channels = 2C + 1.
  bool conditional = false;
  Activation activation = Activation::Silu;
  Normalization normalization = Normalization::Group;

  void validate() const;
  /// Channel count C of the images being denoised.
  int data_channels() const;
  /// Input H and W must be divisible by 2^(depth-1).
  int spatial_divisor() const;
};

/// Conditioning stack for the concatenation variant: channels
/// [x_t; x_known * M; M], so C data channels become 2C + 1 input channels.
ImageTensor concat_condition(const ImageTensor& x_t, const ImageTensor& x_known,
                             const Mask& mask);

}  // namespace diffpaint
