#include "diffpaint/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "json.hpp"

namespace diffpaint {

namespace {

using nlohmann::json;

double mse_over(const ImageTensor& a, const ImageTensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size) * size);
  const double c = (size - 1) / 2.0;
  double sum = 0.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double v =
          std::exp(-((y - c) * (y - c) + (x - c) * (x - c)) / (2.0 * sigma * sigma));
      w[static_cast<std::size_t>(y) * size + x] = v;
      sum += v;
    }
  }
  for (auto& v : w) v /= sum;
  return w;
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  for (double x : xs) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(xs.size()));
}

}  // namespace

std::optional<double> psnr(const ImageTensor& a, const ImageTensor& b,
                           double data_range) {
  require_same_shape(a, b, "psnr");
  if (!(data_range > 0.0)) throw ConfigError("psnr: data_range must be > 0");
  const double mse = mse_over(a, b);
  if (mse == 0.0) return std::nullopt;
  return 10.0 * std::log10(data_range * data_range / mse);
}

std::optional<double> masked_psnr(const ImageTensor& a, const ImageTensor& b,
                                  const Mask& mask, double data_range) {
  require_same_shape(a, b, "masked_psnr");
  require_mask_matches(mask, a, "masked_psnr");
  if (!(data_range > 0.0)) throw ConfigError("masked_psnr: data_range must be > 0");
  double acc = 0.0;
  std::size_t n = 0;
  for (int c = 0; c < a.channels(); ++c) {
    for (int y = 0; y < a.height(); ++y) {
      for (int x = 0; x < a.width(); ++x) {
        if (mask.at(y, x)) continue;
        const double d = static_cast<double>(a.at(c, y, x)) - b.at(c, y, x);
        acc += d * d;
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  const double mse = acc / static_cast<double>(n);
  if (mse == 0.0) return std::nullopt;
  return 10.0 * std::log10(data_range * data_range / mse);
}

double ssim(const ImageTensor& a, const ImageTensor& b, const SsimParams& params) {
  require_same_shape(a, b, "ssim");
  if (params.window < 1 || params.window % 2 == 0) {
    throw ConfigError("ssim: window must be odd and positive");
  }
  if (a.height() < params.window || a.width() < params.window) {
    throw DataError("ssim: image smaller than the comparison window");
  }
  const std::vector<double> win = gaussian_window(params.window, params.sigma);
  const double c1 = params.k1 * params.data_range * params.k1 * params.data_range;
  const double c2 = params.k2 * params.data_range * params.k2 * params.data_range;
  const int n = params.window;
  const int ys = a.height() - n + 1;
  const int xs = a.width() - n + 1;

  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    double channel_sum = 0.0;
    for (int oy = 0; oy < ys; ++oy) {
      for (int ox = 0; ox < xs; ++ox) {
        double ma = 0.0, mb = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
        for (int y = 0; y < n; ++y) {
          for (int x = 0; x < n; ++x) {
            const double wv = win[static_cast<std::size_t>(y) * n + x];
            const double va = a.at(c, oy + y, ox + x);
            const double vb = b.at(c, oy + y, ox + x);
            ma += wv * va;
            mb += wv * vb;
            aa += wv * va * va;
            bb += wv * vb * vb;
            ab += wv * va * vb;
          }
        }
        const double var_a = aa - ma * ma;
        const double var_b = bb - mb * mb;
        const double cov = ab - ma * mb;
        channel_sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                       ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      }
    }
    total += channel_sum / (static_cast<double>(ys) * xs);
  }
  return total / a.channels();
}

ImageTensor quantize_unit8(const ImageTensor& x) {
  ImageTensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double unit = std::clamp((static_cast<double>(x[i]) + 1.0) / 2.0, 0.0, 1.0);
    out[i] = static_cast<float>(std::rint(unit * 255.0) / 255.0);
  }
  return out;
}

std::string EvalReport::to_json() const {
  json j;
  j["ssim_mean"] = ssim_mean;
  j["ssim_std"] = ssim_std;
  j["psnr_mean_db"] = psnr_mean_db;
  j["psnr_std_db"] = psnr_std_db;
  j["infinite_psnr_count"] = infinite_psnr_count;
  j["masked_psnr_mean_db"] = masked_psnr_mean_db;
  j["masked_infinite_or_empty_count"] = masked_infinite_or_empty_count;
  j["variant"] = variant;
  j["mask_kind"] = mask_kind;
  j["coverage"] = coverage;
  j["seed"] = seed;
  j["metric_convention"] = metric_convention;
  json items_j = json::array();
  for (const auto& item : items) {
    json ij;
    ij["id"] = item.id;
    ij["ssim"] = item.ssim_value;
    if (item.psnr_db) ij["psnr_db"] = *item.psnr_db; else ij["psnr_db"] = nullptr;
    if (item.masked_psnr_db) ij["masked_psnr_db"] = *item.masked_psnr_db;
    else ij["masked_psnr_db"] = nullptr;
    items_j.push_back(std::move(ij));
  }
  j["items"] = std::move(items_j);
  return j.dump(2);
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "id,ssim,psnr_db\n";
  for (const auto& item : items) {
    out << item.id << ',' << item.ssim_value << ',';
    if (item.psnr_db) out << *item.psnr_db;
    out << '\n';
  }
}

EvalReport evaluate_inpainting(const Denoiser& denoiser,
                               const std::vector<ImageTensor>& dataset,
                               const NoiseSchedule& schedule,
                               const MaskSource& masks,
                               const InpaintConfig& config, RngStream& rng) {
  if (dataset.empty()) throw DataError("evaluate_inpainting: dataset is empty");

  EvalReport report;
  report.variant = to_string(config.variant);
  report.mask_kind = to_string(masks.kind);
  report.coverage = masks.coverage;
  report.seed = rng.seed();

  std::vector<double> ssims, psnrs, masked;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const ImageTensor& original = dataset[i];
    RngStream item_rng = rng.substream(static_cast<uint64_t>(i));
    Mask mask = masks.fixed.empty()
                    ? [&] {
                        RngStream mask_rng = item_rng.substream(2);
                        return synth_mask(original.height(), original.width(),
                                          masks.kind, masks.coverage, mask_rng);
                      }()
                    : masks.fixed[i % masks.fixed.size()];
    if (!mask.matches(original)) {
      throw ShapeError("evaluate_inpainting: mask/image shape mismatch at item " +
                       std::to_string(i));
    }

    ImageTensor restored;
    try {
      restored = inpaint(original, mask, denoiser, schedule, config, item_rng);
    } catch (const DivergenceError&) {
      throw;
    } catch (const std::runtime_error& e) {
      throw DataError("evaluate_inpainting: item " + std::to_string(i) +
                      " failed: " + e.what());
    }

    const ImageTensor qa = quantize_unit8(original);
    const ImageTensor qb = quantize_unit8(restored);
    EvalItem item;
    item.id = std::to_string(i);
    item.ssim_value = ssim(qa, qb);
    item.psnr_db = psnr(qa, qb, 1.0);
    item.masked_psnr_db = masked_psnr(qa, qb, mask, 1.0);

    ssims.push_back(item.ssim_value);
    if (item.psnr_db) psnrs.push_back(*item.psnr_db);
    else ++report.infinite_psnr_count;
    if (item.masked_psnr_db) masked.push_back(*item.masked_psnr_db);
    else ++report.masked_infinite_or_empty_count;
    report.items.push_back(std::move(item));
  }

  mean_std(ssims, report.ssim_mean, report.ssim_std);
  mean_std(psnrs, report.psnr_mean_db, report.psnr_std_db);
  double unused = 0.0;
  mean_std(masked, report.masked_psnr_mean_db, unused);
  return report;
}

MomentReport moment_report(const std::vector<ImageTensor>& samples,
                           const GaussianMixture& reference) {
  reference.validate();
  if (samples.size() < 1000) {
    throw DataError("moment_report: needs at least 1000 samples, got " +
                    std::to_string(samples.size()));
  }
  const std::size_t k_n = reference.components.size();
  std::vector<std::size_t> counts(k_n, 0);
  std::vector<double> sums(k_n, 0.0), sq_sums(k_n, 0.0);
  std::size_t total = 0;

  for (const auto& sample : samples) {
    for (std::size_t i = 0; i < sample.size(); ++i) {
      const double v = sample[i];
      std::size_t best = 0;
      double best_d = std::abs(v - reference.mean_at(0, i));
      for (std::size_t k = 1; k < k_n; ++k) {
        const double d = std::abs(v - reference.mean_at(static_cast<int>(k), i));
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      counts[best] += 1;
      sums[best] += v;
      sq_sums[best] += v * v;
      ++total;
    }
  }

  MomentReport report;
  report.sample_count = samples.size();
  for (std::size_t k = 0; k < k_n; ++k) {
    ComponentEstimate est;
    est.count = counts[k];
    est.weight = static_cast<double>(counts[k]) / static_cast<double>(total);
    if (counts[k] > 0) {
      est.mean = sums[k] / static_cast<double>(counts[k]);
      const double var =
          std::max(0.0, sq_sums[k] / static_cast<double>(counts[k]) - est.mean * est.mean);
      est.std = std::sqrt(var);
    }
    est.weight_error = est.weight - reference.components[k].weight;
    est.mean_error = est.mean - reference.mean_at(static_cast<int>(k), 0);
    est.std_error = est.std - reference.components[k].std;
    report.components.push_back(est);
  }
  return report;
}

}  // namespace diffpaint
