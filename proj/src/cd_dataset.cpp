#include "diffpaint/cd_dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "diffpaint/image_io.hpp"

namespace diffpaint {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t hash = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    hash ^= ch;
    hash *= 1099511628211ULL;
  }
  return hash;
}

struct InputEntry {
  std::string id;
  ImageTensor image;
  Mask mask;
};

std::vector<InputEntry> scan_inputs(const std::string& input_dir) {
  if (!fs::is_directory(input_dir)) {
    throw DataError("input directory " + input_dir + " does not exist");
  }
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (entry.is_directory()) ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) {
    throw DataError("input directory " + input_dir + " holds no <id>/ entries");
  }

  std::vector<InputEntry> entries;
  for (const auto& id : ids) {
    const fs::path base = fs::path(input_dir) / id;
    const fs::path image_path = base / "image.png";
    const fs::path mask_path = base / "mask.png";
    if (!fs::exists(image_path) || !fs::exists(mask_path)) {
      throw DataError("entry " + id + " misses image.png or mask.png");
    }
    InputEntry e;
    e.id = id;
    try {
      e.image = load_image(image_path.string());
      e.mask = load_mask(mask_path.string());
    } catch (const DataError& err) {
      throw DataError("entry " + id + ": " + err.what());
    }
    if (!e.mask.matches(e.image)) {
      throw DataError("entry " + id + ": mask " + std::to_string(e.mask.height()) +
                      "x" + std::to_string(e.mask.width()) + " does not match image " +
                      std::to_string(e.image.height()) + "x" +
                      std::to_string(e.image.width()));
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace

ChangePair generate_change_pair(const ImageTensor& image, const Mask& change_mask,
                                const Denoiser& denoiser,
                                const NoiseSchedule& schedule, uint64_t seed,
                                const std::string& model_id) {
  require_mask_matches(change_mask, image, "generate_change_pair");
  RngStream rng(seed);
  ChangePair pair;
  pair.image_a = image;
  pair.image_b = repaint_inpaint(image, change_mask, denoiser, schedule, rng);
  pair.mask = change_mask;
  pair.provenance.seed = seed;
  pair.provenance.schedule_betas = schedule.betas();
  pair.provenance.schedule_variance =
      schedule.variance_choice() == ReverseVariance::FixedBeta ? "fixed-beta"
                                                               : "posterior-beta";
  pair.provenance.model_id = model_id;
  pair.provenance.variant = "repaint";
  return pair;
}

std::string CdManifest::to_json() const {
  json j;
  j["format_version"] = format_version;
  j["dataset_id"] = dataset_id;
  j["seed"] = seed;
  j["schedule"]["betas"] = schedule_betas;
  j["schedule"]["variance"] = schedule_variance;
  j["model_id"] = model_id;
  j["variant"] = variant;
  json pairs_j = json::array();
  for (const auto& p : pairs) {
    json pj;
    pj["id"] = p.id;
    pj["a"] = p.a_path;
    pj["b"] = p.b_path;
    pj["mask"] = p.mask_path;
    pj["seed"] = p.seed;
    pairs_j.push_back(std::move(pj));
  }
  j["pairs"] = std::move(pairs_j);
  return j.dump(2);
}

CdManifest build_cd_dataset(const std::string& input_dir,
                            const std::string& output_dir,
                            const CdDatasetConfig& config,
                            const Denoiser& denoiser,
                            const NoiseSchedule& schedule) {
  const std::vector<InputEntry> entries = scan_inputs(input_dir);

  CdManifest manifest;
  manifest.dataset_id = config.dataset_id;
  manifest.seed = config.seed;
  manifest.schedule_betas = schedule.betas();
  manifest.schedule_variance =
      schedule.variance_choice() == ReverseVariance::FixedBeta ? "fixed-beta"
                                                               : "posterior-beta";
  manifest.model_id = config.model_id;

  std::vector<fs::path> written;
  try {
    fs::create_directories(fs::path(output_dir) / "pairs");
    for (const auto& entry : entries) {
      const uint64_t pair_seed = RngStream::mix(config.seed, fnv1a(entry.id));
      const ChangePair pair = generate_change_pair(
          entry.image, entry.mask, denoiser, schedule, pair_seed, config.model_id);

      const fs::path pair_dir = fs::path(output_dir) / "pairs" / entry.id;
      fs::create_directories(pair_dir);
      const fs::path a = pair_dir / "a.png";
      const fs::path b = pair_dir / "b.png";
      const fs::path m = pair_dir / "mask.png";
      save_image(pair.image_a, a.string());
      written.push_back(a);
      save_image(pair.image_b, b.string());
      written.push_back(b);
      save_mask(pair.mask, m.string());
      written.push_back(m);

      CdPairRecord record;
      record.id = entry.id;
      record.a_path = "pairs/" + entry.id + "/a.png";
      record.b_path = "pairs/" + entry.id + "/b.png";
      record.mask_path = "pairs/" + entry.id + "/mask.png";
      record.seed = pair_seed;
      manifest.pairs.push_back(std::move(record));
    }

    const fs::path manifest_path = fs::path(output_dir) / "manifest.json";
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + manifest_path.string());
    out << manifest.to_json() << '\n';
    out.close();
    written.push_back(manifest_path);

    for (const auto& record : manifest.pairs) {
      for (const auto& rel : {record.a_path, record.b_path, record.mask_path}) {
        if (!fs::exists(fs::path(output_dir) / rel)) {
          throw DataError("manifest references missing file " + rel);
        }
      }
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& path : written) fs::remove(path, ec);
    for (const auto& entry : entries) {
      fs::remove(fs::path(output_dir) / "pairs" / entry.id, ec);
    }
    fs::remove(fs::path(output_dir) / "pairs", ec);
    throw;
  }
  return manifest;
}

}  // namespace diffpaint
