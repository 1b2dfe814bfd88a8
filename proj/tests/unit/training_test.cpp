#include "diffpaint/training.hpp"

#include <cmath>
#include <vector>

#include "diffpaint/diffusion.hpp"
#include "diffpaint/errors.hpp"
#include "diffpaint/rng.hpp"
#include "diffpaint/schedule.hpp"
#include "doctest.h"

using namespace diffpaint;

namespace {

DenoiserSpec tiny_spec(bool conditional = false) {
  DenoiserSpec spec;
  spec.base_channels = 2;
  spec.depth = 2;
  spec.channel_multipliers = {1, 2};
  spec.conditional = conditional;
  spec.in_channels = conditional ? 3 : 1;
  return spec;
}

// Spatial autocorrelation at horizontal lag `d`, averaged over the image.
double autocorr(const ImageTensor& x, int d) {
  double mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mean += x[i];
  mean /= double(x.size());
  double num = 0.0, den = 0.0;
  int n = 0;
  for (int c = 0; c < x.channels(); ++c)
    for (int y = 0; y < x.height(); ++y)
      for (int xx = 0; xx + d < x.width(); ++xx) {
        num += (x.at(c, y, xx) - mean) * (x.at(c, y, xx + d) - mean);
        ++n;
      }
  for (std::size_t i = 0; i < x.size(); ++i)
    den += (x[i] - mean) * (x[i] - mean);
  den /= double(x.size());
  return (num / n) / den;
}

}  // namespace

TEST_CASE("patch grid arithmetic") {
  ImageTensor big(1, 128, 128, 0.0f);
  auto patches = extract_patches(big, 64, 0.5);
  CHECK(patches.size() == 9);  // origins {0, 32, 64} per axis
  for (const auto& p : patches) {
    CHECK(p.height() == 64);
    CHECK(p.width() == 64);
  }

  ImageTensor exact(1, 64, 64, 0.0f);
  CHECK(extract_patches(exact, 64, 0.5).size() == 1);

  ImageTensor tall(1, 100, 64, 0.0f);
  auto tall_patches = extract_patches(tall, 64, 0.5);
  CHECK(tall_patches.size() == 3);  // vertical origins {0, 32, 36}
}

TEST_CASE("edge anchor keeps full coverage for random shapes") {
  RngStream rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    int size = 4 + rng.uniform_int(0, 12);
    int h = size + rng.uniform_int(0, 40);
    int w = size + rng.uniform_int(0, 40);
    double overlap = 0.8 * rng.uniform();
    // Mark pixels by coordinates; a pixel is covered when some patch
    // contains it. Patches carry no origin info, so recompute the grid the
    // same way the implementation documents it and verify the invariant on
    // the grid itself, then cross-check the patch count.
    int stride = std::max(1, (int)std::lround(size * (1.0 - overlap)));
    std::vector<int> ys, xs;
    for (int o = 0; o + size <= h; o += stride) ys.push_back(o);
    if (ys.back() != h - size) ys.push_back(h - size);
    for (int o = 0; o + size <= w; o += stride) xs.push_back(o);
    if (xs.back() != w - size) xs.push_back(w - size);

    std::vector<bool> covered(h * w, false);
    for (int oy : ys)
      for (int ox : xs)
        for (int dy = 0; dy < size; ++dy)
          for (int dx = 0; dx < size; ++dx)
            covered[(oy + dy) * w + ox + dx] = true;
    for (bool c : covered) CHECK(c);

    ImageTensor img(1, h, w, 0.0f);
    CHECK(extract_patches(img, size, overlap).size() == ys.size() * xs.size());
  }
}

TEST_CASE("patch contents are verbatim crops") {
  ImageTensor img(1, 6, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) img.at(0, y, x) = float(10 * y + x);
  auto patches = extract_patches(img, 4, 0.5);
  // stride 2: origins {0, 2} per axis -> 4 patches; first is the top-left crop
  CHECK(patches.size() == 4);
  CHECK(patches[0].at(0, 0, 0) == 0.0f);
  CHECK(patches[0].at(0, 3, 3) == 33.0f);
}

TEST_CASE("patch extraction rejects oversized requests") {
  ImageTensor img(1, 8, 8, 0.0f);
  CHECK_THROWS_AS(extract_patches(img, 9, 0.5), DataError);
  CHECK_THROWS_AS(extract_patches(img, 4, 1.0), ConfigError);
  CHECK_THROWS_AS(extract_patches(img, 0, 0.5), ConfigError);
}

TEST_CASE("training target reconstructs the forward marginal exactly") {
  NoiseSchedule s = scaled_linear_schedule(40);
  RngStream rng(3);
  ImageTensor x0 = rng.normal_tensor(1, 8, 8);
  for (int i = 0; i < 20; ++i) {
    TrainingTarget target = sample_training_target(x0, s, rng);
    CHECK(target.t >= 1);
    CHECK(target.t <= 40);
    ImageTensor rebuilt = forward_diffuse(x0, target.t, target.eps, s);
    CHECK(target.x_t.data() == rebuilt.data());
  }
}

TEST_CASE("training target draw is seed-deterministic") {
  NoiseSchedule s = scaled_linear_schedule(10);
  ImageTensor x0(1, 4, 4, 0.3f);
  RngStream a(5), b(5);
  TrainingTarget ta = sample_training_target(x0, s, a);
  TrainingTarget tb = sample_training_target(x0, s, b);
  CHECK(ta.t == tb.t);
  CHECK(ta.x_t.data() == tb.x_t.data());
  CHECK(ta.eps.data() == tb.eps.data());
}

TEST_CASE("timestep draw covers [1, T] roughly uniformly") {
  NoiseSchedule s = scaled_linear_schedule(10);
  ImageTensor x0(1, 1, 1, 0.0f);
  RngStream rng(8);
  std::vector<int> counts(11, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i)
    counts[sample_training_target(x0, s, rng).t]++;
  double chi2 = 0.0;
  const double expected = n / 10.0;
  for (int t = 1; t <= 10; ++t)
    chi2 += (counts[t] - expected) * (counts[t] - expected) / expected;
  // 9 degrees of freedom; 1% critical value is 21.67.
  CHECK(chi2 < 21.67);
}

TEST_CASE("epsilon loss basics") {
  ImageTensor a(1, 4, 4, 0.5f);
  CHECK(epsilon_loss(a, a) == 0.0);

  ImageTensor zeros(1, 4, 4, 0.0f);
  ImageTensor ones(1, 4, 4, 1.0f);
  CHECK(epsilon_loss(zeros, ones) == doctest::Approx(1.0).epsilon(1e-12));

  RngStream rng(12);
  ImageTensor eps = rng.normal_tensor(1, 100, 100);
  ImageTensor zero_big(1, 100, 100, 0.0f);
  CHECK(epsilon_loss(zero_big, eps) == doctest::Approx(1.0).epsilon(0.05));

  ImageTensor odd(1, 4, 5, 0.0f);
  CHECK_THROWS_AS(epsilon_loss(a, odd), ShapeError);
}

TEST_CASE("mask synthesis hits the coverage band with binary values") {
  RngStream rng(19);
  for (MaskKind kind : {MaskKind::Rectangles, MaskKind::Blobs}) {
    for (int trial = 0; trial < 10; ++trial) {
      RngStream r = rng.substream(trial + 100 * static_cast<int>(kind));
      Mask m = synth_mask(32, 32, kind, 0.25, r);
      double unknown = m.unknown_fraction();
      CHECK(unknown >= 0.15);
      CHECK(unknown <= 0.35);
      for (uint8_t v : m.data()) CHECK((v == 0 || v == 1));
    }
  }
}

TEST_CASE("mask synthesis is deterministic per seed") {
  RngStream a(77), b(77), c(78);
  Mask ma = synth_mask(16, 16, MaskKind::Rectangles, 0.3, a);
  Mask mb = synth_mask(16, 16, MaskKind::Rectangles, 0.3, b);
  Mask mc = synth_mask(16, 16, MaskKind::Rectangles, 0.3, c);
  CHECK(ma.data() == mb.data());
  CHECK(ma.data() != mc.data());
}

TEST_CASE("mask kind names parse") {
  CHECK(mask_kind_from_string("rectangles") == MaskKind::Rectangles);
  CHECK(mask_kind_from_string("blobs") == MaskKind::Blobs);
  CHECK_THROWS_AS(mask_kind_from_string("squiggles"), ConfigError);
}

TEST_CASE("point-mass pixel mixture produces constant images") {
  SyntheticParams params;
  params.pixel_mixture = GaussianMixture::scalar({1.0}, {0.0}, {0.0});
  params.height = 8;
  params.width = 8;
  RngStream rng(1);
  auto images = make_synthetic_dataset(SyntheticKind::GmmPixels, params, 3, rng);
  CHECK(images.size() == 3);
  for (const auto& img : images)
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(img[i] == 0.0f);
}

TEST_CASE("pixel-mixture images stay inside [-1, 1]") {
  SyntheticParams params;
  params.pixel_mixture = GaussianMixture::scalar({0.5, 0.5}, {-0.9, 0.9}, {0.5, 0.5});
  RngStream rng(2);
  auto images = make_synthetic_dataset(SyntheticKind::GmmPixels, params, 5, rng);
  for (const auto& img : images)
    for (std::size_t i = 0; i < img.size(); ++i) {
      CHECK(img[i] >= -1.0f);
      CHECK(img[i] <= 1.0f);
    }
}

TEST_CASE("blob textures carry decaying spatial correlation") {
  SyntheticParams params;
  params.height = 32;
  params.width = 32;
  params.blob_sigma = 2.0;
  RngStream rng(4);
  auto images =
      make_synthetic_dataset(SyntheticKind::GaussianBlobTextures, params, 6, rng);
  double lag1 = 0.0, lag8 = 0.0;
  for (const auto& img : images) {
    lag1 += autocorr(img, 1);
    lag8 += autocorr(img, 8);
  }
  lag1 /= images.size();
  lag8 /= images.size();
  CHECK(lag1 > 0.5);
  CHECK(lag1 > lag8 + 0.2);
  for (const auto& img : images)
    for (std::size_t i = 0; i < img.size(); ++i) {
      CHECK(img[i] >= -1.0f);
      CHECK(img[i] <= 1.0f);
    }
}

TEST_CASE("synthetic dataset generation is deterministic") {
  SyntheticParams params;
  RngStream a(3), b(3);
  auto da = make_synthetic_dataset(SyntheticKind::GaussianBlobTextures, params, 2, a);
  auto db = make_synthetic_dataset(SyntheticKind::GaussianBlobTextures, params, 2, b);
  for (int i = 0; i < 2; ++i) CHECK(da[i].data() == db[i].data());
}

TEST_CASE("config JSON round trip and partial parsing") {
  TrainConfig c;
  c.epochs = 7;
  c.batch_size = 3;
  c.learning_rate = 5e-4;
  c.timesteps = 42;
  c.seed = 99;
  c.patch_size = 8;
  c.patch_overlap = 0.25;
  c.conditional = true;
  c.mask_kind = MaskKind::Blobs;
  c.mask_coverage = 0.4;
  TrainConfig back = TrainConfig::from_json(c.to_json());
  CHECK(back.epochs == 7);
  CHECK(back.batch_size == 3);
  CHECK(back.learning_rate == doctest::Approx(5e-4));
  CHECK(back.timesteps == 42);
  CHECK(back.seed == 99);
  CHECK(back.patch_size == 8);
  CHECK(back.patch_overlap == doctest::Approx(0.25));
  CHECK(back.conditional);
  CHECK(back.mask_kind == MaskKind::Blobs);
  CHECK(back.mask_coverage == doctest::Approx(0.4));

  TrainConfig partial = TrainConfig::from_json(R"({"epochs": 3})");
  CHECK(partial.epochs == 3);
  CHECK(partial.batch_size == TrainConfig{}.batch_size);

  CHECK_THROWS_AS(TrainConfig::from_json("not json"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json(R"({"epochs": "three"})"), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json(R"({"epochs": 0})"), ConfigError);
}

TEST_CASE("schedule_for uses the configured length") {
  TrainConfig c;
  c.timesteps = 17;
  CHECK(schedule_for(c).T() == 17);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  RngStream init_rng(6);
  auto net = make_trainable_denoiser(tiny_spec(), init_rng);
  std::vector<std::vector<double>> before;
  for (const auto& p : net->parameters()) before.push_back(p.value);

  TrainConfig config;
  config.epochs = 2;
  config.batch_size = 4;
  config.learning_rate = 0.0;
  config.timesteps = 10;
  config.patch_size = 8;
  config.patch_overlap = 0.0;

  std::vector<ImageTensor> data = {ImageTensor(1, 8, 8, 0.25f)};
  RngStream rng(7);
  LossCurve curve = train(*net, data, config, rng);
  CHECK(curve.steps.size() == 2);  // one 1-patch batch per epoch
  CHECK(curve.epoch_means.size() == 2);
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(net->parameters()[i].value == before[i]);
}

TEST_CASE("a few steps of training lower the loss on constant data") {
  RngStream init_rng(8);
  auto net = make_trainable_denoiser(tiny_spec(), init_rng);

  TrainConfig config;
  config.epochs = 40;
  config.batch_size = 8;
  config.learning_rate = 2e-3;
  config.timesteps = 10;
  config.patch_size = 8;
  config.patch_overlap = 0.5;

  std::vector<ImageTensor> data;
  for (int i = 0; i < 8; ++i) data.push_back(ImageTensor(1, 8, 8, 0.5f));
  RngStream rng(9);
  LossCurve curve = train(*net, data, config, rng);
  // Per-epoch means are noisy (random t and eps); compare leading and
  // trailing windows instead of single epochs.
  auto window_mean = [&](std::size_t from, std::size_t count) {
    double acc = 0.0;
    for (std::size_t i = from; i < from + count; ++i) acc += curve.epoch_means[i];
    return acc / count;
  };
  double head = window_mean(0, 5);
  double tail = window_mean(curve.epoch_means.size() - 5, 5);
  CHECK(tail < head);
  for (const auto& s : curve.steps) CHECK(std::isfinite(s.loss));
}

TEST_CASE("training validates dataset and conditioning consistency") {
  RngStream init_rng(10);
  auto net = make_trainable_denoiser(tiny_spec(), init_rng);
  TrainConfig config;
  config.patch_size = 8;
  RngStream rng(11);
  std::vector<ImageTensor> empty;
  CHECK_THROWS_AS(train(*net, empty, config, rng), DataError);

  config.conditional = true;  // net is unconditional
  std::vector<ImageTensor> data = {ImageTensor(1, 8, 8, 0.0f)};
  CHECK_THROWS_AS(train(*net, data, config, rng), VariantMismatchError);
}

TEST_CASE("exploding learning rate raises a divergence error") {
  RngStream init_rng(13);
  auto net = make_trainable_denoiser(tiny_spec(), init_rng);
  TrainConfig config;
  config.epochs = 10;
  config.batch_size = 4;
  // Large enough that one adaptive step pushes consecutive conv layers
  // past the double-precision range (normalization resets scale only once
  // per block).
  config.learning_rate = 1e155;
  config.timesteps = 10;
  config.patch_size = 8;
  std::vector<ImageTensor> data = {ImageTensor(1, 8, 8, 0.5f)};
  RngStream rng(14);
  CHECK_THROWS_AS(train(*net, data, config, rng), DivergenceError);
}

TEST_CASE("conditional training runs end to end") {
  RngStream init_rng(15);
  auto net = make_trainable_denoiser(tiny_spec(true), init_rng);
  TrainConfig config;
  config.epochs = 2;
  config.batch_size = 4;
  config.learning_rate = 1e-3;
  config.timesteps = 10;
  config.patch_size = 8;
  config.conditional = true;
  config.mask_coverage = 0.25;
  std::vector<ImageTensor> data = {ImageTensor(1, 16, 16, 0.5f)};
  RngStream rng(16);
  LossCurve curve = train(*net, data, config, rng);
  CHECK(!curve.steps.empty());
  for (const auto& s : curve.steps) CHECK(std::isfinite(s.loss));
}
