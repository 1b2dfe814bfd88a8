#include "diffpaint/tensor.hpp"

#include <cmath>
#include <string>

namespace diffpaint {

ImageTensor::ImageTensor(int channels, int height, int width, float fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw ShapeError("ImageTensor: dimensions must be positive, got " +
                     std::to_string(channels) + "x" + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

ImageTensor::ImageTensor(int channels, int height, int width,
                         std::vector<float> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw ShapeError("ImageTensor: dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(channels) * height * width) {
    throw ShapeError("ImageTensor: data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(channels) + "x" +
                     std::to_string(height) + "x" + std::to_string(width));
  }
}

bool ImageTensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Mask::Mask(int height, int width, uint8_t fill) : height_(height), width_(width) {
  if (height <= 0 || width <= 0) {
    throw ShapeError("Mask: dimensions must be positive");
  }
  if (fill > 1) {
    throw DataError("Mask: values must be 0 or 1");
  }
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

Mask::Mask(int height, int width, std::vector<uint8_t> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height <= 0 || width <= 0) {
    throw ShapeError("Mask: dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("Mask: data length does not match dimensions");
  }
  for (uint8_t v : data_) {
    if (v > 1) throw DataError("Mask: values must be exactly 0 or 1");
  }
}

std::size_t Mask::known_count() const {
  std::size_t n = 0;
  for (uint8_t v : data_) n += v;
  return n;
}

double Mask::unknown_fraction() const {
  return 1.0 - static_cast<double>(known_count()) / static_cast<double>(size());
}

Mask Mask::inverted() const {
  Mask out = *this;
  for (uint8_t& v : out.data_) v = static_cast<uint8_t>(1 - v);
  return out;
}

void require_same_shape(const ImageTensor& a, const ImageTensor& b,
                        const char* where) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(where) + ": tensor shapes differ (" +
                     std::to_string(a.channels()) + "x" + std::to_string(a.height()) +
                     "x" + std::to_string(a.width()) + " vs " +
                     std::to_string(b.channels()) + "x" + std::to_string(b.height()) +
                     "x" + std::to_string(b.width()) + ")");
  }
}

void require_mask_matches(const Mask& m, const ImageTensor& image,
                          const char* where) {
  if (!m.matches(image)) {
    throw ShapeError(std::string(where) + ": mask " + std::to_string(m.height()) +
                     "x" + std::to_string(m.width()) + " does not match image " +
                     std::to_string(image.height()) + "x" +
                     std::to_string(image.width()));
  }
}

}  // namespace diffpaint
