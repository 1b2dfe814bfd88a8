#include "diffpaint/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <png.h>

namespace diffpaint {

namespace {

// Libpng's simplified API; `format` must be PNG_FORMAT_GRAY or PNG_FORMAT_RGB.
std::vector<uint8_t> read_png_bytes(const std::string& path, int& channels,
                                    int& height, int& width) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw DataError("cannot read PNG " + path + ": " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&image);
    throw DataError("PNG " + path + " has an alpha channel; flatten it first");
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw DataError("PNG " + path + " is 16-bit; only 8-bit rasters are supported");
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  channels = color ? 3 : 1;
  height = static_cast<int>(image.height);
  width = static_cast<int>(image.width);
  std::vector<uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw DataError("cannot decode PNG " + path + ": " + msg);
  }
  return buffer;
}

void write_png_bytes(const std::string& path, const std::vector<uint8_t>& bytes,
                     int channels, int height, int width) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path + ": " + image.message);
  }
}

uint8_t to_byte(float v) {
  const double unit = ((static_cast<double>(v) + 1.0) / 2.0) * 255.0;
  const double r = std::rint(unit);
  return static_cast<uint8_t>(r < 0.0 ? 0.0 : (r > 255.0 ? 255.0 : r));
}

float from_byte(uint8_t b) {
  return static_cast<float>(b / 255.0 * 2.0 - 1.0);
}

void put_u32_le(std::ofstream& out, uint32_t v) {
  const uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                        static_cast<uint8_t>(v >> 16),
                        static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32_le(std::ifstream& in, const std::string& path) {
  uint8_t b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError("truncated tensor file " + path);
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

ImageTensor load_image(const std::string& path) {
  int channels = 0, height = 0, width = 0;
  const std::vector<uint8_t> bytes = read_png_bytes(path, channels, height, width);
  ImageTensor out(channels, height, width);
  // PNG rows interleave channels; the tensor stores planes
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        out.at(c, y, x) =
            from_byte(bytes[(static_cast<std::size_t>(y) * width + x) * channels + c]);
      }
    }
  }
  return out;
}

void save_image(const ImageTensor& x, const std::string& path) {
  if (x.channels() != 1 && x.channels() != 3) {
    throw DataError("save_image: only 1- or 3-channel tensors map to PNG, got " +
                    std::to_string(x.channels()));
  }
  std::vector<uint8_t> bytes(x.size());
  const int channels = x.channels();
  for (int y = 0; y < x.height(); ++y) {
    for (int xx = 0; xx < x.width(); ++xx) {
      for (int c = 0; c < channels; ++c) {
        bytes[(static_cast<std::size_t>(y) * x.width() + xx) * channels + c] =
            to_byte(x.at(c, y, xx));
      }
    }
  }
  write_png_bytes(path, bytes, channels, x.height(), x.width());
}

Mask load_mask(const std::string& path) {
  int channels = 0, height = 0, width = 0;
  const std::vector<uint8_t> bytes = read_png_bytes(path, channels, height, width);
  if (channels != 1) {
    throw DataError("mask PNG " + path + " must be grayscale");
  }
  std::vector<uint8_t> values(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (bytes[i] == 255) {
      values[i] = 0;  // white marks the region to change
    } else if (bytes[i] == 0) {
      values[i] = 1;
    } else {
      throw DataError("mask PNG " + path + " holds non-binary value " +
                      std::to_string(bytes[i]));
    }
  }
  return Mask(height, width, std::move(values));
}

void save_mask(const Mask& mask, const std::string& path) {
  std::vector<uint8_t> bytes(mask.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = mask.data()[i] ? 0 : 255;
  }
  write_png_bytes(path, bytes, 1, mask.height(), mask.width());
}

void save_tensor(const ImageTensor& x, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write("TNSR", 4);
  const uint8_t version = 1, rank = 3;
  out.write(reinterpret_cast<const char*>(&version), 1);
  out.write(reinterpret_cast<const char*>(&rank), 1);
  put_u32_le(out, static_cast<uint32_t>(x.channels()));
  put_u32_le(out, static_cast<uint32_t>(x.height()));
  put_u32_le(out, static_cast<uint32_t>(x.width()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    uint32_t bits;
    const float v = x[i];
    std::memcpy(&bits, &v, 4);
    put_u32_le(out, bits);
  }
  if (!out) throw DataError("failed writing tensor file " + path);
}

ImageTensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tensor file " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "TNSR", 4) != 0) {
    throw DataError("bad magic in tensor file " + path);
  }
  uint8_t version = 0, rank = 0;
  in.read(reinterpret_cast<char*>(&version), 1);
  in.read(reinterpret_cast<char*>(&rank), 1);
  if (!in || version != 1) throw DataError("unsupported tensor file version in " + path);
  if (rank != 3) throw DataError("tensor file " + path + " must have rank 3");
  const uint32_t c = get_u32_le(in, path);
  const uint32_t h = get_u32_le(in, path);
  const uint32_t w = get_u32_le(in, path);
  if (c == 0 || h == 0 || w == 0) {
    throw DataError("tensor file " + path + " has a zero dimension");
  }
  ImageTensor out(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const uint32_t bits = get_u32_le(in, path);
    float v;
    std::memcpy(&v, &bits, 4);
    out[i] = v;
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw DataError("tensor file " + path + " has trailing bytes");
  }
  return out;
}

}  // namespace diffpaint
