#include "diffpaint/metrics.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "diffpaint/errors.hpp"
#include "diffpaint/gmm.hpp"
#include "diffpaint/inpaint.hpp"
#include "diffpaint/rng.hpp"
#include "diffpaint/schedule.hpp"
#include "doctest.h"

using namespace diffpaint;

TEST_CASE("psnr of a 0.1 offset is 20 dB in both range conventions") {
  ImageTensor a(1, 16, 16, 0.0f);
  ImageTensor b(1, 16, 16, 0.1f);
  auto db = psnr(a, b, 1.0);
  REQUIRE(db.has_value());
  CHECK(*db == doctest::Approx(20.0).epsilon(1e-7));

  ImageTensor b2(1, 16, 16, 0.2f);
  auto db2 = psnr(a, b2, 2.0);
  REQUIRE(db2.has_value());
  CHECK(*db2 == doctest::Approx(20.0).epsilon(1e-7));
}

TEST_CASE("identical images give the infinite-psnr signal") {
  RngStream rng(1);
  ImageTensor a = rng.normal_tensor(2, 8, 8);
  CHECK(!psnr(a, a, 1.0).has_value());
}

TEST_CASE("psnr decreases as the error grows") {
  ImageTensor a(1, 8, 8, 0.0f);
  double prev = 1e9;
  for (float off : {0.05f, 0.1f, 0.2f, 0.4f}) {
    ImageTensor b(1, 8, 8, off);
    auto db = psnr(a, b, 1.0);
    REQUIRE(db.has_value());
    CHECK(*db < prev);
    prev = *db;
  }
}

TEST_CASE("psnr is invariant to a constant shift of both images") {
  RngStream rng(2);
  ImageTensor a = rng.normal_tensor(1, 8, 8);
  ImageTensor b = rng.normal_tensor(1, 8, 8);
  ImageTensor a_shift = a, b_shift = b;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a_shift[i] += 0.25f;
    b_shift[i] += 0.25f;
  }
  auto base = psnr(a, b, 1.0);
  auto shifted = psnr(a_shift, b_shift, 1.0);
  REQUIRE(base.has_value());
  REQUIRE(shifted.has_value());
  // a + 0.25f re-rounds each element (up to half an ulp), so the shifted
  // differences wobble by ~1e-7 relative; the dB value moves far less than
  // this tolerance.
  CHECK(*shifted == doctest::Approx(*base).epsilon(1e-6));
}

TEST_CASE("masked psnr scores the hidden region only") {
  ImageTensor a(1, 4, 4, 0.0f);
  ImageTensor b = a;
  Mask m(4, 4, uint8_t{1});
  // Corrupt one known and one unknown pixel; only the unknown one counts.
  m.at(0, 0) = 0;
  b.at(0, 0, 0) = 0.5f;
  b.at(0, 3, 3) = 0.25f;
  auto db = masked_psnr(a, b, m, 1.0);
  REQUIRE(db.has_value());
  // MSE over the single unknown pixel = 0.25.
  CHECK(*db == doctest::Approx(10.0 * std::log10(1.0 / 0.25)).epsilon(1e-6));

  Mask all_known(4, 4, uint8_t{1});
  CHECK(!masked_psnr(a, b, all_known, 1.0).has_value());

  Mask one_clean(4, 4, uint8_t{1});
  one_clean.at(2, 2) = 0;  // unknown pixel with zero error
  CHECK(!masked_psnr(a, a, one_clean, 1.0).has_value());
}

TEST_CASE("ssim is exactly 1 on identical images") {
  RngStream rng(3);
  ImageTensor a = rng.normal_tensor(1, 16, 16);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim is symmetric") {
  RngStream rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    ImageTensor a = rng.normal_tensor(1, 12, 12);
    ImageTensor b = rng.normal_tensor(1, 12, 12);
    double ab = ssim(a, b);
    double ba = ssim(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(std::abs(ab) <= 1.0 + 1e-12);
  }
}

TEST_CASE("constant images collapse ssim to the luminance term") {
  ImageTensor a(1, 16, 16, 0.5f);
  ImageTensor b(1, 16, 16, 0.6f);
  // Variances and covariance vanish, so
  // ssim = (2 mu_a mu_b + C1) * C2 / ((mu_a^2 + mu_b^2 + C1) * C2)
  // with C1 = (0.01 * 1)^2. Expected value computed from the values as
  // stored in 32-bit reals.
  double mu_a = double(a[0]);
  double mu_b = double(b[0]);
  double c1 = 1e-4;
  double expected = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
  CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("ssim rejects windows larger than the image") {
  ImageTensor small(1, 8, 8, 0.0f);
  CHECK_THROWS_AS(ssim(small, small), DataError);  // default window is 11
  SsimParams params;
  params.window = 4;  // must be odd
  ImageTensor ok(1, 16, 16, 0.0f);
  CHECK_THROWS_AS(ssim(ok, ok, params), ConfigError);
}

TEST_CASE("quantizer maps to the 8-bit grid on [0,1]") {
  ImageTensor x(1, 1, 5,
                std::vector<float>{-1.0f, 1.0f, 0.0f, -2.0f, 2.0f});
  ImageTensor q = quantize_unit8(x);
  CHECK(q[0] == 0.0f);
  CHECK(q[1] == 1.0f);
  CHECK(q[2] == doctest::Approx(128.0 / 255.0).epsilon(1e-7));
  CHECK(q[3] == 0.0f);  // clamped
  CHECK(q[4] == 1.0f);  // clamped
  for (std::size_t i = 0; i < q.size(); ++i) {
    float grid = std::round(q[i] * 255.0f);
    CHECK(q[i] == doctest::Approx(grid / 255.0f).epsilon(1e-7));
  }
}

TEST_CASE("moment report recovers reference moments from its own samples") {
  GaussianMixture ref =
      GaussianMixture::scalar({0.3, 0.7}, {-1.5, 1.5}, {0.3, 0.3});
  RngStream rng(5);
  std::vector<ImageTensor> samples;
  for (int i = 0; i < 4000; ++i) samples.push_back(ref.sample(1, 1, 1, rng));
  MomentReport report = moment_report(samples, ref);
  REQUIRE(report.components.size() == 2);
  CHECK(report.sample_count == 4000);

  // 3 standard errors: weight SE = sqrt(p(1-p)/n), mean SE = s/sqrt(n_k),
  // std SE ~ s/sqrt(2 n_k).
  double n = 4000.0;
  double se_w0 = std::sqrt(0.3 * 0.7 / n);
  CHECK(std::abs(report.components[0].weight_error) < 3.0 * se_w0);
  CHECK(std::abs(report.components[1].weight_error) < 3.0 * se_w0);
  for (int k = 0; k < 2; ++k) {
    double nk = double(report.components[k].count);
    CHECK(std::abs(report.components[k].mean_error) < 3.0 * 0.3 / std::sqrt(nk));
    CHECK(std::abs(report.components[k].std_error) <
          3.0 * 0.3 / std::sqrt(2.0 * nk));
  }
}

TEST_CASE("moment report flags a degenerate sample set") {
  GaussianMixture ref =
      GaussianMixture::scalar({0.5, 0.5}, {-1.0, 1.0}, {0.2, 0.2});
  std::vector<ImageTensor> samples(1500, ImageTensor(1, 1, 1, 1.0f));
  MomentReport report = moment_report(samples, ref);
  // Every element lands on the +1 component.
  CHECK(report.components[0].weight == doctest::Approx(0.0));
  CHECK(report.components[1].weight == doctest::Approx(1.0));
  CHECK(std::abs(report.components[0].weight_error) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("moment report refuses small sample sets") {
  GaussianMixture ref = GaussianMixture::scalar({1.0}, {0.0}, {1.0});
  std::vector<ImageTensor> samples(999, ImageTensor(1, 1, 1, 0.0f));
  CHECK_THROWS_AS(moment_report(samples, ref), DataError);
}

TEST_CASE("evaluation with all-ones masks scores perfect recovery") {
  NoiseSchedule s = scaled_linear_schedule(10);
  auto oracle = make_gmm_oracle(
      GaussianMixture::scalar({0.5, 0.5}, {-0.5, 0.5}, {0.2, 0.2}), s);

  RngStream data_rng(6);
  std::vector<ImageTensor> dataset;
  for (int i = 0; i < 4; ++i) {
    ImageTensor img(1, 16, 16);
    for (auto& v : img.data())
      v = static_cast<float>(0.5 * data_rng.normal());
    dataset.push_back(std::move(img));
  }

  std::vector<Mask> masks(4, Mask(16, 16, uint8_t{1}));
  MaskSource source = MaskSource::explicit_masks(masks);
  InpaintConfig config;
  RngStream rng(7);
  EvalReport report = evaluate_inpainting(*oracle, dataset, s, source, config, rng);
  CHECK(report.items.size() == 4);
  CHECK(report.ssim_mean == doctest::Approx(1.0).epsilon(1e-12));
  // Known pixels are copied bit-exactly, so quantized sides agree.
  CHECK(report.infinite_psnr_count == 4);
  CHECK(report.masked_infinite_or_empty_count == 4);
}

TEST_CASE("evaluation is deterministic in the seed") {
  NoiseSchedule s = scaled_linear_schedule(8);
  auto oracle = make_gmm_oracle(
      GaussianMixture::scalar({0.5, 0.5}, {-0.5, 0.5}, {0.2, 0.2}), s);
  std::vector<ImageTensor> dataset(3, ImageTensor(1, 16, 16, 0.25f));
  MaskSource source = MaskSource::synthetic(MaskKind::Rectangles, 0.25);
  InpaintConfig config;

  RngStream a(11), b(11);
  EvalReport ra = evaluate_inpainting(*oracle, dataset, s, source, config, a);
  EvalReport rb = evaluate_inpainting(*oracle, dataset, s, source, config, b);
  REQUIRE(ra.items.size() == rb.items.size());
  CHECK(ra.ssim_mean == rb.ssim_mean);
  for (std::size_t i = 0; i < ra.items.size(); ++i) {
    CHECK(ra.items[i].ssim_value == rb.items[i].ssim_value);
    CHECK(ra.items[i].psnr_db.has_value() == rb.items[i].psnr_db.has_value());
    if (ra.items[i].psnr_db)
      CHECK(*ra.items[i].psnr_db == *rb.items[i].psnr_db);
  }

  // The JSON and CSV encodings are stable too.
  CHECK(ra.to_json() == rb.to_json());
  std::ostringstream csv_a, csv_b;
  ra.write_csv(csv_a);
  rb.write_csv(csv_b);
  CHECK(csv_a.str() == csv_b.str());
  CHECK(csv_a.str().rfind("id,ssim,psnr_db", 0) == 0);
}

TEST_CASE("report aggregates match the per-item records") {
  NoiseSchedule s = scaled_linear_schedule(8);
  auto oracle = make_gmm_oracle(
      GaussianMixture::scalar({0.5, 0.5}, {-0.5, 0.5}, {0.2, 0.2}), s);
  RngStream data_rng(13);
  std::vector<ImageTensor> dataset;
  for (int i = 0; i < 5; ++i) {
    ImageTensor img(1, 16, 16);
    for (auto& v : img.data())
      v = static_cast<float>(0.4 * data_rng.normal());
    dataset.push_back(std::move(img));
  }
  MaskSource source = MaskSource::synthetic(MaskKind::Blobs, 0.3);
  InpaintConfig config;
  RngStream rng(14);
  EvalReport report = evaluate_inpainting(*oracle, dataset, s, source, config, rng);

  double ssim_acc = 0.0;
  for (const auto& item : report.items) ssim_acc += item.ssim_value;
  CHECK(report.ssim_mean == doctest::Approx(ssim_acc / report.items.size()).epsilon(1e-12));

  int infinite = 0;
  double psnr_acc = 0.0;
  int finite = 0;
  for (const auto& item : report.items) {
    if (item.psnr_db) {
      psnr_acc += *item.psnr_db;
      ++finite;
    } else {
      ++infinite;
    }
  }
  CHECK(report.infinite_psnr_count == infinite);
  if (finite > 0)
    CHECK(report.psnr_mean_db == doctest::Approx(psnr_acc / finite).epsilon(1e-12));
}
