#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffpaint/denoiser.hpp"
#include "diffpaint/inpaint.hpp"
#include "diffpaint/rng.hpp"
#include "diffpaint/schedule.hpp"
#include "diffpaint/tensor.hpp"

namespace diffpaint {

struct ChangePairProvenance {
  uint64_t seed = 0;
  std::vector<double> schedule_betas;
  std::string schedule_variance;
  std::string model_id;  // checkpoint hash, or a symbolic id for oracles
  std::string variant;
};

/// (original, synthetically inpainted) duo. The mask follows the internal
/// convention: 0 = change region (inpainted), 1 = kept pixels; image_b equals
/// image_a bit-exactly on the kept pixels.
struct ChangePair {
  ImageTensor image_a;
  ImageTensor image_b;
  Mask mask;
  ChangePairProvenance provenance;
};

/// Replaces the mask's 0-region of `image` with synthesized content via
/// masked-mixing inpainting; kept pixels are copied bit-exactly.
ChangePair generate_change_pair(const ImageTensor& image, const Mask& change_mask,
                                const Denoiser& denoiser,
                                const NoiseSchedule& schedule, uint64_t seed,
                                const std::string& model_id);

struct CdDatasetConfig {
  uint64_t seed = 0;
  std::string dataset_id = "cd-synth";
  std::string model_id = "gmm-oracle";
};

struct CdPairRecord {
  std::string id;
  std::string a_path, b_path, mask_path;
  uint64_t seed = 0;
};

struct CdManifest {
  int format_version = 1;
  std::string dataset_id;
  uint64_t seed = 0;
  std::vector<double> schedule_betas;
  std::string schedule_variance;
  std::string model_id;
  std::string variant = "repaint";
  std::vector<CdPairRecord> pairs;

  std::string to_json() const;
};

/// Scans input_dir for `<id>/image.png` + `<id>/mask.png` entries (validated
/// up front, errors name the id), inpaints every change region, and writes
/// `pairs/<id>/{a,b,mask}.png` plus `manifest.json` under output_dir.
/// Per-id seeds derive from config.seed, so reruns are byte-identical; files
/// written before a failure are removed.
CdManifest build_cd_dataset(const std::string& input_dir,
                            const std::string& output_dir,
                            const CdDatasetConfig& config,
                            const Denoiser& denoiser,
                            const NoiseSchedule& schedule);

}  // namespace diffpaint
