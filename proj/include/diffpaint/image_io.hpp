#pragma once

#include <string>

#include "diffpaint/tensor.hpp"

namespace diffpaint {

/// 8-bit grayscale or RGB PNG -> tensor with the affine map [0,255] -> [-1,1].
/// Alpha channels are rejected; 16-bit rasters are rejected.
ImageTensor load_image(const std::string& path);

/// Inverse map with clamping and round-half-to-even; 1 channel writes
/// grayscale, 3 channels write RGB.
void save_image(const ImageTensor& x, const std::string& path);

/// Mask PNG convention: white (255) = region to change/inpaint, black (0) =
/// kept pixels; internally that becomes 0 = unknown, 1 = known. Only the two
/// extreme byte values are accepted.
Mask load_mask(const std::string& path);
void save_mask(const Mask& mask, const std::string& path);

/// Raw float container: magic "TNSR", version byte, rank byte (always 3),
/// dims as unsigned 32-bit little-endian, then little-endian 32-bit reals.
/// Round-trips exactly.
void save_tensor(const ImageTensor& x, const std::string& path);
ImageTensor load_tensor(const std::string& path);

}  // namespace diffpaint
