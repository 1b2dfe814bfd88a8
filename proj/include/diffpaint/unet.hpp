#pragma once

#include <memory>
#include <string>
#include <vector>

#include "diffpaint/denoiser.hpp"
#include "diffpaint/rng.hpp"

namespace diffpaint {

struct TensorD;  // double-precision activation tensor, internal to the net

/// Named trainable array plus its accumulated gradient. Values are kept in
/// double precision so finite-difference gradient verification is meaningful;
/// checkpoints store them as 32-bit reals.
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;

  std::size_t size() const { return value.size(); }
};

/// Trainable convolutional noise predictor. Encoder/decoder with skip
/// connections, average-pool downsampling, nearest-neighbour upsampling,
/// group normalization, SiLU activations, and a sinusoidal timestep
/// embedding projected into every block. The output head is zero-initialized
/// so an untrained net predicts zero noise.
class UNetDenoiser final : public Denoiser {
 public:
  UNetDenoiser(DenoiserSpec spec, RngStream& rng);

  bool conditional() const override { return spec_.conditional; }
  ImageTensor predict_epsilon(const ImageTensor& x_t, int t) const override;
  ImageTensor predict_epsilon(const ImageTensor& x_t, int t,
                              const ImageTensor& x_known,
                              const Mask& mask) const override;

  /// Forward pass on an already-stacked input tensor (spec().in_channels
  /// channels); returns the predicted noise (data_channels() channels).
  ImageTensor forward(const ImageTensor& input, int t) const;

  /// Forward + reverse-mode backward for one sample. Adds the gradient of
  /// mean((prediction - eps_target)^2) into every Parameter::grad and
  /// returns that sample's loss. Callers average by scaling afterwards.
  double accumulate_gradients(const ImageTensor& input, int t,
                              const ImageTensor& eps_target);

  void zero_gradients();

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  const DenoiserSpec& spec() const { return spec_; }

 private:
  struct Block {
    int conv1_w = -1, conv1_b = -1;
    int tproj_w = -1, tproj_b = -1;
    int conv2_w = -1, conv2_b = -1;
    int gamma = -1, beta = -1;
    int cin = 0, cout = 0;
  };
  struct Workspace;
  struct BlockCache;

  int add_param(std::string name, std::vector<int> shape);
  Block add_block(const std::string& name, int cin, int cout);
  void init_values(RngStream& rng);

  void run_forward(const ImageTensor& input, int t, Workspace& ws) const;
  void block_forward(const Block& blk, const TensorD& in,
                     const std::vector<double>& emb, BlockCache& cache) const;
  TensorD block_backward(const Block& blk, const BlockCache& cache,
                         TensorD dout, const std::vector<double>& emb,
                         std::vector<double>& demb);

  DenoiserSpec spec_;
  int emb_dim_ = 0;
  std::vector<Parameter> params_;
  int stem_w_ = -1, stem_b_ = -1;
  int tmlp_w1_ = -1, tmlp_b1_ = -1, tmlp_w2_ = -1, tmlp_b2_ = -1;
  std::vector<Block> enc_;
  Block mid_;
  std::vector<Block> dec_;  // dec_[i] operates at encoder level i
  int head_w_ = -1, head_b_ = -1;
};

/// Deterministically initialized trainable denoiser (draws all initial
/// weights from rng in a fixed order).
std::unique_ptr<UNetDenoiser> make_trainable_denoiser(const DenoiserSpec& spec,
                                                      RngStream& rng);

}  // namespace diffpaint
