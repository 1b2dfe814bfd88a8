#include "diffpaint/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <utility>

#include "json.hpp"

#include "diffpaint/diffusion.hpp"

namespace diffpaint {

namespace {

using nlohmann::json;

// Fisher-Yates driven by the shared stream so runs stay seed-deterministic.
void shuffle_indices(std::vector<int>& idx, RngStream& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
    std::swap(idx[i], idx[rng.uniform_int(0, i)]);
  }
}

struct AdamState {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t step = 0;
  std::vector<std::vector<double>> m, v;

  explicit AdamState(const std::vector<Parameter>& params) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto& p : params) {
      m.emplace_back(p.size(), 0.0);
      v.emplace_back(p.size(), 0.0);
    }
  }

  void update(std::vector<Parameter>& params, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      auto& p = params[pi];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = p.grad[i];
        m[pi][i] = beta1 * m[pi][i] + (1.0 - beta1) * g;
        v[pi][i] = beta2 * v[pi][i] + (1.0 - beta2) * g * g;
        p.value[i] -= lr * (m[pi][i] / c1) / (std::sqrt(v[pi][i] / c2) + eps);
      }
    }
  }
};

std::vector<int> axis_origins(int dim, int size, int stride) {
  std::vector<int> origins;
  for (int p = 0; p + size <= dim; p += stride) origins.push_back(p);
  if ((dim - size) % stride != 0) origins.push_back(dim - size);
  return origins;
}

void carve_rectangle(Mask& mask, int max_area, RngStream& rng) {
  const int h = mask.height(), w = mask.width();
  int rh = rng.uniform_int(1, std::max(1, h / 3));
  int rw = rng.uniform_int(1, std::max(1, w / 3));
  while (rh * rw > max_area) {
    if (rh >= rw) rh = (rh + 1) / 2; else rw = (rw + 1) / 2;
  }
  const int y0 = rng.uniform_int(0, h - rh);
  const int x0 = rng.uniform_int(0, w - rw);
  for (int y = y0; y < y0 + rh; ++y) {
    for (int x = x0; x < x0 + rw; ++x) mask.at(y, x) = 0;
  }
}

void carve_blob(Mask& mask, int max_area, RngStream& rng) {
  const int h = mask.height(), w = mask.width();
  const double r_max = std::sqrt(max_area / 3.14159265358979323846);
  const double r = 1.0 + rng.uniform() * std::max(0.0, r_max - 1.0);
  const double cy = rng.uniform() * h;
  const double cx = rng.uniform() * w;
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + r)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + r)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
      if (dy * dy + dx * dx <= r * r) mask.at(y, x) = 0;
    }
  }
}

// Periodic (torus) convolution keeps the texture statistics stationary.
ImageTensor blob_texture(const SyntheticParams& params, RngStream& rng) {
  const int h = params.height, w = params.width, c = params.channels;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * params.blob_sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double l2 = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (params.blob_sigma * params.blob_sigma));
    kernel[i + radius] = v;
    l2 += v * v;
  }
  // unit-L2 kernel keeps the smoothed field near unit variance
  const double norm = 1.0 / std::sqrt(l2);
  for (auto& v : kernel) v *= norm;

  ImageTensor out(c, h, w);
  std::vector<double> noise(static_cast<std::size_t>(h) * w);
  std::vector<double> tmp(noise.size());
  for (int ci = 0; ci < c; ++ci) {
    for (auto& v : noise) v = rng.normal();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] * noise[static_cast<std::size_t>(y) * w +
                                            ((x + k) % w + w) % w];
        }
        tmp[static_cast<std::size_t>(y) * w + x] = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += kernel[k + radius] *
                 tmp[static_cast<std::size_t>(((y + k) % h + h) % h) * w + x];
        }
        out.at(ci, y, x) = static_cast<float>(std::tanh(params.blob_gain * acc));
      }
    }
  }
  return out;
}

ImageTensor gmm_pixels(const SyntheticParams& params, RngStream& rng) {
  const auto& comps = params.pixel_mixture.components;
  ImageTensor out(params.channels, params.height, params.width);
  for (auto& v : out.data()) {
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t pick = comps.size() - 1;
    for (std::size_t k = 0; k < comps.size(); ++k) {
      acc += comps[k].weight;
      if (u < acc) {
        pick = k;
        break;
      }
    }
    const double val = comps[pick].mean[0] + comps[pick].std * rng.normal();
    v = static_cast<float>(std::clamp(val, -1.0, 1.0));
  }
  return out;
}

}  // namespace

MaskKind mask_kind_from_string(const std::string& name) {
  if (name == "rectangles") return MaskKind::Rectangles;
  if (name == "blobs") return MaskKind::Blobs;
  throw ConfigError("unknown mask kind: " + name);
}

std::string to_string(MaskKind kind) {
  return kind == MaskKind::Rectangles ? "rectangles" : "blobs";
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("TrainConfig: learning_rate must be >= 0");
  if (timesteps < 1) throw ConfigError("TrainConfig: timesteps must be >= 1");
  if (patch_size < 1) throw ConfigError("TrainConfig: patch_size must be >= 1");
  if (patch_overlap < 0.0 || patch_overlap >= 1.0) {
    throw ConfigError("TrainConfig: patch_overlap must be in [0, 1)");
  }
  if (conditional && (mask_coverage <= 0.0 || mask_coverage >= 1.0)) {
    throw ConfigError("TrainConfig: mask_coverage must be in (0, 1)");
  }
}

std::string TrainConfig::to_json() const {
  json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["learning_rate"] = learning_rate;
  j["timesteps"] = timesteps;
  j["seed"] = seed;
  j["patch_size"] = patch_size;
  j["patch_overlap"] = patch_overlap;
  j["conditional"] = conditional;
  j["mask_kind"] = to_string(mask_kind);
  j["mask_coverage"] = mask_coverage;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid training config JSON: ") + e.what());
  }
  TrainConfig c;
  try {
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
    if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("timesteps")) c.timesteps = j["timesteps"].get<int>();
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    if (j.contains("patch_size")) c.patch_size = j["patch_size"].get<int>();
    if (j.contains("patch_overlap")) c.patch_overlap = j["patch_overlap"].get<double>();
    if (j.contains("conditional")) c.conditional = j["conditional"].get<bool>();
    if (j.contains("mask_kind")) c.mask_kind = mask_kind_from_string(j["mask_kind"].get<std::string>());
    if (j.contains("mask_coverage")) c.mask_coverage = j["mask_coverage"].get<double>();
  } catch (const json::type_error& e) {
    throw ConfigError(std::string("invalid training config field: ") + e.what());
  }
  c.validate();
  return c;
}

NoiseSchedule schedule_for(const TrainConfig& config) {
  return scaled_linear_schedule(config.timesteps);
}

void LossCurve::write_csv(std::ostream& out) const {
  out << "step,epoch,loss\n";
  for (const auto& s : steps) {
    out << s.step << ',' << s.epoch << ',' << s.loss << '\n';
  }
}

std::vector<ImageTensor> extract_patches(const ImageTensor& image, int size,
                                         double overlap) {
  if (size < 1) throw ConfigError("extract_patches: size must be >= 1");
  if (overlap < 0.0 || overlap >= 1.0) {
    throw ConfigError("extract_patches: overlap must be in [0, 1)");
  }
  if (size > image.height() || size > image.width()) {
    throw DataError("extract_patches: patch size " + std::to_string(size) +
                    " exceeds image " + std::to_string(image.height()) + "x" +
                    std::to_string(image.width()));
  }
  const int stride =
      std::max(1, static_cast<int>(std::lround(size * (1.0 - overlap))));
  const std::vector<int> ys = axis_origins(image.height(), size, stride);
  const std::vector<int> xs = axis_origins(image.width(), size, stride);
  std::vector<ImageTensor> patches;
  patches.reserve(ys.size() * xs.size());
  for (int oy : ys) {
    for (int ox : xs) {
      ImageTensor p(image.channels(), size, size);
      for (int c = 0; c < image.channels(); ++c) {
        for (int y = 0; y < size; ++y) {
          for (int x = 0; x < size; ++x) {
            p.at(c, y, x) = image.at(c, oy + y, ox + x);
          }
        }
      }
      patches.push_back(std::move(p));
    }
  }
  return patches;
}

TrainingTarget sample_training_target(const ImageTensor& x0,
                                      const NoiseSchedule& schedule,
                                      RngStream& rng) {
  TrainingTarget target;
  target.t = rng.uniform_int(1, schedule.T());
  target.eps = rng.normal_tensor(x0.channels(), x0.height(), x0.width());
  target.x_t = forward_diffuse(x0, target.t, target.eps, schedule);
  return target;
}

double epsilon_loss(const ImageTensor& eps_hat, const ImageTensor& eps) {
  require_same_shape(eps_hat, eps, "epsilon_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double d = static_cast<double>(eps_hat[i]) - eps[i];
    acc += d * d;
  }
  return acc / static_cast<double>(eps.size());
}

Mask synth_mask(int height, int width, MaskKind kind, double coverage,
                RngStream& rng) {
  if (height < 1 || width < 1) throw ConfigError("synth_mask: empty shape");
  if (coverage <= 0.0 || coverage >= 1.0) {
    throw ConfigError("synth_mask: coverage must be strictly inside (0, 1)");
  }
  const int total = height * width;
  const int max_area = std::max(1, total / 20);
  const auto target_unknown =
      static_cast<std::size_t>(std::ceil(coverage * total));
  Mask mask(height, width, static_cast<uint8_t>(1));
  int guard = 100000;
  while (mask.size() - mask.known_count() < target_unknown) {
    if (--guard == 0) throw DataError("synth_mask: shape accretion stalled");
    if (kind == MaskKind::Rectangles) {
      carve_rectangle(mask, max_area, rng);
    } else {
      carve_blob(mask, max_area, rng);
    }
  }
  return mask;
}

SyntheticKind synthetic_kind_from_string(const std::string& name) {
  if (name == "gmm-pixels") return SyntheticKind::GmmPixels;
  if (name == "gaussian-blob-textures") return SyntheticKind::GaussianBlobTextures;
  throw ConfigError("unknown synthetic dataset kind: " + name);
}

std::vector<ImageTensor> make_synthetic_dataset(SyntheticKind kind,
                                                const SyntheticParams& params,
                                                int count, RngStream& rng) {
  if (count < 1) throw ConfigError("make_synthetic_dataset: count must be >= 1");
  if (params.channels < 1 || params.height < 1 || params.width < 1) {
    throw ConfigError("make_synthetic_dataset: invalid image shape");
  }
  if (kind == SyntheticKind::GmmPixels) params.pixel_mixture.validate();
  if (kind == SyntheticKind::GaussianBlobTextures && params.blob_sigma <= 0.0) {
    throw ConfigError("make_synthetic_dataset: blob_sigma must be > 0");
  }
  std::vector<ImageTensor> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.push_back(kind == SyntheticKind::GmmPixels ? gmm_pixels(params, rng)
                                                   : blob_texture(params, rng));
  }
  return out;
}

LossCurve train(UNetDenoiser& net, const std::vector<ImageTensor>& dataset,
                const TrainConfig& config, RngStream& rng) {
  config.validate();
  if (dataset.empty()) throw DataError("train: dataset is empty");
  if (net.conditional() != config.conditional) {
    throw VariantMismatchError("train: net and config disagree on conditioning");
  }

  std::vector<ImageTensor> patches;
  for (const auto& image : dataset) {
    auto tiles = extract_patches(image, config.patch_size, config.patch_overlap);
    std::move(tiles.begin(), tiles.end(), std::back_inserter(patches));
  }

  const NoiseSchedule schedule = schedule_for(config);
  AdamState adam(net.parameters());
  LossCurve curve;
  std::vector<int> order(patches.size());
  std::iota(order.begin(), order.end(), 0);

  int64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<Mask> masks;
    if (config.conditional) {
      masks.reserve(patches.size());
      for (const auto& p : patches) {
        masks.push_back(synth_mask(p.height(), p.width(), config.mask_kind,
                                   config.mask_coverage, rng));
      }
    }
    shuffle_indices(order, rng);

    double epoch_sum = 0.0;
    int epoch_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const auto batch_n = static_cast<double>(stop - start);

      net.zero_gradients();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const ImageTensor& x0 = patches[static_cast<std::size_t>(order[k])];
        const TrainingTarget target = sample_training_target(x0, schedule, rng);
        ImageTensor input =
            config.conditional
                ? concat_condition(target.x_t, x0,
                                   masks[static_cast<std::size_t>(order[k])])
                : target.x_t;
        batch_loss += net.accumulate_gradients(input, target.t, target.eps);
      }
      batch_loss /= batch_n;
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("train: non-finite loss", static_cast<int>(step));
      }
      for (auto& p : net.parameters()) {
        for (auto& g : p.grad) g /= batch_n;
      }
      adam.update(net.parameters(), config.learning_rate);

      curve.steps.push_back({step, epoch, batch_loss});
      epoch_sum += batch_loss;
      ++epoch_batches;
      ++step;
    }
    curve.epoch_means.push_back(epoch_sum / epoch_batches);
  }
  return curve;
}

}  // namespace diffpaint
