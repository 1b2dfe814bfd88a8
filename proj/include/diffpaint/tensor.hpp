#pragma once

#include <cstdint>
#include <vector>

#include "diffpaint/errors.hpp"

namespace diffpaint {

/// Dense C x H x W image tensor, float storage, row-major within a channel.
/// Clean images live in [-1, 1]; diffused images may exceed that range.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int channels, int height, int width, float fill = 0.0f);
  ImageTensor(int channels, int height, int width, std::vector<float> data);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  float& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  float at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_shape(const ImageTensor& other) const {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }
  bool all_finite() const;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

/// Single-channel binary map paired with an image. Convention: 1 = known
/// pixel, 0 = region to inpaint.
class Mask {
 public:
  Mask() = default;
  Mask(int height, int width, uint8_t fill = 1);
  /// Validates that every value is exactly 0 or 1.
  Mask(int height, int width, std::vector<uint8_t> data);

  int height() const { return height_; }
  int width() const { return width_; }

  uint8_t& at(int y, int x) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  uint8_t at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  std::vector<uint8_t>& data() { return data_; }
  const std::vector<uint8_t>& data() const { return data_; }

  std::size_t size() const { return data_.size(); }
  std::size_t known_count() const;
  double unknown_fraction() const;

  bool matches(const ImageTensor& image) const {
    return height_ == image.height() && width_ == image.width();
  }
  /// M -> 1 - M.
  Mask inverted() const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<uint8_t> data_;
};

void require_same_shape(const ImageTensor& a, const ImageTensor& b,
                        const char* where);
void require_mask_matches(const Mask& m, const ImageTensor& image,
                          const char* where);

}  // namespace diffpaint
