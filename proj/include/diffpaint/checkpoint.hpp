#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "diffpaint/schedule.hpp"
#include "diffpaint/unet.hpp"

namespace diffpaint {

/// Versioned binary container: 8-byte magic "DPNT0001", a 32-bit LE JSON
/// manifest length, the manifest (architecture, full beta array, parameter
/// names/shapes in order), then the parameter arrays as little-endian 32-bit
/// reals. Saving a loaded checkpoint reproduces the file bit for bit.
void save_checkpoint(const std::string& path, const UNetDenoiser& net,
                     const NoiseSchedule& schedule);

struct Checkpoint {
  DenoiserSpec spec;
  NoiseSchedule schedule;
  std::unique_ptr<UNetDenoiser> net;
};

Checkpoint load_checkpoint(const std::string& path);

/// FNV-1a over the file bytes, as fixed-width hex; provenance id for
/// generated datasets.
std::string checkpoint_hash_hex(const std::string& path);

}  // namespace diffpaint
