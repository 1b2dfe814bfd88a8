#include "diffpaint/denoiser.hpp"

#include <string>

namespace diffpaint {

void DenoiserSpec::validate() const {
  if (base_channels < 1) throw ConfigError("DenoiserSpec: base_channels must be >= 1");
  if (depth < 1) throw ConfigError("DenoiserSpec: depth must be >= 1");
  if (static_cast<int>(channel_multipliers.size()) != depth) {
    throw ConfigError("DenoiserSpec: need one channel multiplier per level, got " +
                      std::to_string(channel_multipliers.size()) + " for depth " +
                      std::to_string(depth));
  }
  for (int m : channel_multipliers) {
    if (m < 1) throw ConfigError("DenoiserSpec: channel multipliers must be >= 1");
  }
  if (in_channels < 1) throw ConfigError("DenoiserSpec: in_channels must be >= 1");
  if (conditional && (in_channels < 3 || in_channels % 2 == 0)) {
    throw ConfigError("DenoiserSpec: conditional input is 2C+1 channels, got " +
                      std::to_string(in_channels));
  }
}

int DenoiserSpec::data_channels() const {
  return conditional ? (in_channels - 1) / 2 : in_channels;
}

int DenoiserSpec::spatial_divisor() const { return 1 << (depth - 1); }

ImageTensor concat_condition(const ImageTensor& x_t, const ImageTensor& x_known,
                             const Mask& mask) {
  require_same_shape(x_t, x_known, "concat_condition");
  require_mask_matches(mask, x_t, "concat_condition");
  const int c = x_t.channels();
  const int h = x_t.height();
  const int w = x_t.width();
  ImageTensor out(2 * c + 1, h, w);
  for (int ci = 0; ci < c; ++ci) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.at(ci, y, x) = x_t.at(ci, y, x);
        out.at(c + ci, y, x) = mask.at(y, x) ? x_known.at(ci, y, x) : 0.0f;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out.at(2 * c, y, x) = static_cast<float>(mask.at(y, x));
    }
  }
  return out;
}

}  // namespace diffpaint
