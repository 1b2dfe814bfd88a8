#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "diffpaint/cd_dataset.hpp"
#include "diffpaint/checkpoint.hpp"
#include "diffpaint/diffusion.hpp"
#include "diffpaint/errors.hpp"
#include "diffpaint/gmm.hpp"
#include "diffpaint/image_io.hpp"
#include "diffpaint/inpaint.hpp"
#include "diffpaint/metrics.hpp"
#include "diffpaint/schedule.hpp"
#include "diffpaint/tensor.hpp"
#include "diffpaint/training.hpp"
#include "diffpaint/unet.hpp"

namespace fs = std::filesystem;
using namespace diffpaint;

namespace {

constexpr const char* kDataDirEnv = "DIFFPAINT_DATA_DIR";

std::string default_data_dir() {
  const char* env = std::getenv(kDataDirEnv);
  return env ? std::string(env) : std::string();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return text;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

std::vector<ImageTensor> load_png_dir(const std::string& dir) {
  if (dir.empty())
    throw ConfigError("no data directory: pass --data or set " +
                      std::string(kDataDirEnv));
  if (!fs::is_directory(dir))
    throw DataError("not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw DataError("no .png files in " + dir);
  std::vector<ImageTensor> images;
  images.reserve(paths.size());
  for (const auto& p : paths) images.push_back(load_image(p));
  for (std::size_t i = 1; i < images.size(); ++i) {
    if (images[i].channels() != images[0].channels())
      throw DataError("mixed channel counts in " + dir);
  }
  return images;
}

struct DataSourceFlags {
  std::string data_dir;
  std::string synth_kind;
  int synth_count = 64;
  int height = 16;
  int width = 16;
  int channels = 1;
};

void add_data_source(CLI::App* cmd, DataSourceFlags& flags) {
  cmd->add_option("--data", flags.data_dir,
                  "Directory of .png training images (default: $" +
                      std::string(kDataDirEnv) + ")");
  cmd->add_option(
      "--synth", flags.synth_kind,
      "Generate a synthetic dataset instead: gmm-pixels | gaussian-blob-textures");
  cmd->add_option("--synth-count", flags.synth_count, "Synthetic image count");
  cmd->add_option("--height", flags.height, "Synthetic image height");
  cmd->add_option("--width", flags.width, "Synthetic image width");
  cmd->add_option("--channels", flags.channels, "Synthetic image channels");
}

std::vector<ImageTensor> resolve_dataset(const DataSourceFlags& flags,
                                         uint64_t seed) {
  if (!flags.synth_kind.empty()) {
    SyntheticParams params;
    params.channels = flags.channels;
    params.height = flags.height;
    params.width = flags.width;
    RngStream rng(RngStream::mix(seed, 0x64617461));  // "data"
    return make_synthetic_dataset(synthetic_kind_from_string(flags.synth_kind),
                                  params, flags.synth_count, rng);
  }
  std::string dir = flags.data_dir.empty() ? default_data_dir() : flags.data_dir;
  return load_png_dir(dir);
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory: " + out);
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

int run(int argc, char** argv) {
  CLI::App app{"Denoising-diffusion trainer, sampler, and inpainting toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  uint64_t seed = 0;
  std::string out = ".";
  app.add_option("--config", config_path, "JSON config file (train settings)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for all randomness");
  app.add_option("--out", out, "Output directory (or file where noted)");

  // train
  auto* train_cmd =
      app.add_subcommand("train", "Train a denoiser and write a checkpoint");
  DataSourceFlags train_data;
  add_data_source(train_cmd, train_data);
  int base_channels = 16;
  int depth = 3;
  std::vector<int> multipliers = {1, 2, 2};
  train_cmd->add_option("--base-channels", base_channels, "Stem channel count");
  train_cmd->add_option("--depth", depth, "Resolution levels");
  train_cmd
      ->add_option("--mult", multipliers, "Per-level channel multipliers")
      ->delimiter(',');

  // sample
  auto* sample_cmd =
      app.add_subcommand("sample", "Draw unconditional samples from a checkpoint");
  std::string ckpt_path;
  int sample_count = 1;
  int sample_h = 16, sample_w = 16;
  sample_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")
      ->required();
  sample_cmd->add_option("--count", sample_count, "Number of samples");
  sample_cmd->add_option("--height", sample_h, "Sample height");
  sample_cmd->add_option("--width", sample_w, "Sample width");

  // inpaint
  auto* inpaint_cmd =
      app.add_subcommand("inpaint", "Fill the white mask region of an image");
  std::string image_path, mask_path, variant_name = "repaint";
  std::string inpaint_ckpt;
  int steps_override = 0;
  inpaint_cmd->add_option("--image", image_path, "Input image (.png)")
      ->required();
  inpaint_cmd
      ->add_option("--mask", mask_path,
                   "Mask .png: white = inpaint, black = keep")
      ->required();
  inpaint_cmd->add_option("--variant", variant_name, "repaint | concat");
  inpaint_cmd->add_option("--checkpoint", inpaint_ckpt, "Checkpoint file")
      ->required();
  inpaint_cmd->add_option(
      "--steps", steps_override,
      "Override the checkpoint schedule with a fresh one of this length");

  // eval
  auto* eval_cmd = app.add_subcommand(
      "eval", "Random-mask inpainting evaluation; writes report.json + items.csv");
  DataSourceFlags eval_data;
  add_data_source(eval_cmd, eval_data);
  std::string eval_ckpt, eval_variant = "repaint", eval_mask_kind = "rectangles";
  double eval_coverage = 0.25;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--variant", eval_variant, "repaint | concat");
  eval_cmd->add_option("--mask-kind", eval_mask_kind, "rectangles | blobs");
  eval_cmd->add_option("--coverage", eval_coverage,
                       "Target unknown-area fraction");

  // make-cd-dataset
  auto* cd_cmd = app.add_subcommand(
      "make-cd-dataset",
      "Inpaint the change region of every <id>/image.png + <id>/mask.png pair");
  std::string cd_input, cd_ckpt, cd_dataset_id = "cd-synth";
  int cd_steps = 250;
  cd_cmd->add_option("--input", cd_input, "Input directory of <id>/ entries")
      ->required();
  cd_cmd->add_option("--checkpoint", cd_ckpt,
                     "Checkpoint file (omit to use the built-in pixel-mixture "
                     "oracle denoiser)");
  cd_cmd->add_option("--dataset-id", cd_dataset_id, "Manifest dataset id");
  cd_cmd->add_option("--steps", cd_steps,
                     "Schedule length for the oracle denoiser");

  // synth-data
  auto* synth_cmd = app.add_subcommand(
      "synth-data", "Write a synthetic image dataset as .png files");
  std::string synth_kind = "gaussian-blob-textures";
  int synth_count = 64, synth_h = 16, synth_w = 16, synth_c = 1;
  synth_cmd->add_option("--kind", synth_kind,
                        "gmm-pixels | gaussian-blob-textures");
  synth_cmd->add_option("--count", synth_count, "Image count");
  synth_cmd->add_option("--height", synth_h, "Image height");
  synth_cmd->add_option("--width", synth_w, "Image width");
  synth_cmd->add_option("--channels", synth_c, "Image channels (1 or 3)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // app.exit prints the message (or the help text); fold every parse
    // failure into the usage exit code.
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (train_cmd->parsed()) {
    TrainConfig config;
    if (!config_path.empty()) config = TrainConfig::from_json(read_text_file(config_path));
    if (seed_opt->count() > 0) config.seed = seed;
    config.validate();

    std::vector<ImageTensor> dataset = resolve_dataset(train_data, config.seed);
    const int data_c = dataset[0].channels();

    DenoiserSpec spec;
    spec.base_channels = base_channels;
    spec.depth = depth;
    spec.channel_multipliers = multipliers;
    spec.conditional = config.conditional;
    spec.in_channels = config.conditional ? 2 * data_c + 1 : data_c;
    spec.validate();

    RngStream rng(config.seed);
    auto net = make_trainable_denoiser(spec, rng);
    std::cout << "training: " << dataset.size() << " images, "
              << net->parameter_count() << " parameters, " << config.epochs
              << " epochs\n";
    LossCurve curve = train(*net, dataset, config, rng);

    ensure_out_dir(out);
    NoiseSchedule schedule = schedule_for(config);
    const std::string ckpt = join(out, "checkpoint.dpnt");
    save_checkpoint(ckpt, *net, schedule);
    std::ofstream csv(join(out, "loss.csv"));
    curve.write_csv(csv);
    std::cout << "epoch-mean loss: first " << curve.epoch_means.front()
              << ", last " << curve.epoch_means.back() << "\n"
              << "wrote " << ckpt << " and " << join(out, "loss.csv") << "\n";
    return 0;
  }

  if (sample_cmd->parsed()) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (ckpt.net->conditional())
      throw VariantMismatchError(
          "sample: checkpoint holds a conditional model; use inpaint");
    const int c = ckpt.spec.data_channels();
    ensure_out_dir(out);
    RngStream rng(seed);
    for (int i = 0; i < sample_count; ++i) {
      RngStream item_rng = rng.substream(static_cast<uint64_t>(i));
      ImageTensor x = sample_unconditional(*ckpt.net, ckpt.schedule, c,
                                           sample_h, sample_w, item_rng);
      char name[32];
      std::snprintf(name, sizeof(name), "sample_%04d.png", i);
      if (c == 1 || c == 3) {
        save_image(x, join(out, name));
      } else {
        std::snprintf(name, sizeof(name), "sample_%04d.tnsr", i);
        save_tensor(x, join(out, name));
      }
      std::cout << "wrote " << join(out, name) << "\n";
    }
    return 0;
  }

  if (inpaint_cmd->parsed()) {
    ImageTensor image = load_image(image_path);
    Mask mask = load_mask(mask_path);
    require_mask_matches(mask, image, "inpaint");
    Checkpoint ckpt = load_checkpoint(inpaint_ckpt);
    NoiseSchedule schedule =
        steps_override > 0
            ? scaled_linear_schedule(steps_override, ckpt.schedule.variance_choice())
            : std::move(ckpt.schedule);
    InpaintConfig config;
    config.variant = inpaint_variant_from_string(variant_name);
    RngStream rng(seed);
    ImageTensor result = inpaint(image, mask, *ckpt.net, schedule, config, rng);
    std::string out_path = out;
    if (fs::is_directory(out) || out == ".") {
      ensure_out_dir(out);
      out_path = join(out, "inpainted.png");
    }
    save_image(result, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    Checkpoint ckpt = load_checkpoint(eval_ckpt);
    std::vector<ImageTensor> dataset = resolve_dataset(eval_data, seed);
    InpaintConfig config;
    config.variant = inpaint_variant_from_string(eval_variant);
    MaskSource masks = MaskSource::synthetic(
        mask_kind_from_string(eval_mask_kind), eval_coverage);
    RngStream rng(seed);
    EvalReport report = evaluate_inpainting(*ckpt.net, dataset, ckpt.schedule,
                                            masks, config, rng);
    ensure_out_dir(out);
    write_text_file(join(out, "report.json"), report.to_json());
    std::ofstream csv(join(out, "items.csv"));
    report.write_csv(csv);
    std::printf("ssim %.4f +- %.4f, psnr", report.ssim_mean, report.ssim_std);
    if (report.infinite_psnr_count == static_cast<int>(report.items.size()))
      std::printf(" inf");
    else
      std::printf(" %.2f +- %.2f dB", report.psnr_mean_db, report.psnr_std_db);
    std::printf(" (%d exact), masked psnr %.2f dB\n", report.infinite_psnr_count,
                report.masked_psnr_mean_db);
    std::cout << "wrote " << join(out, "report.json") << " and "
              << join(out, "items.csv") << "\n";
    return 0;
  }

  if (cd_cmd->parsed()) {
    CdDatasetConfig config;
    config.seed = seed;
    config.dataset_id = cd_dataset_id;

    std::unique_ptr<Denoiser> denoiser;
    NoiseSchedule schedule = scaled_linear_schedule(cd_steps);
    if (!cd_ckpt.empty()) {
      Checkpoint ckpt = load_checkpoint(cd_ckpt);
      schedule = std::move(ckpt.schedule);
      denoiser = std::move(ckpt.net);
      config.model_id = checkpoint_hash_hex(cd_ckpt);
    } else {
      denoiser = make_gmm_oracle(SyntheticParams{}.pixel_mixture, schedule);
      config.model_id = "gmm-oracle";
    }

    ensure_out_dir(out);
    CdManifest manifest = build_cd_dataset(cd_input, out, config, *denoiser, schedule);
    std::cout << "wrote " << manifest.pairs.size() << " pairs under " << out
              << " (model " << manifest.model_id << ")\n";
    return 0;
  }

  if (synth_cmd->parsed()) {
    SyntheticParams params;
    params.channels = synth_c;
    params.height = synth_h;
    params.width = synth_w;
    RngStream rng(seed);
    std::vector<ImageTensor> images = make_synthetic_dataset(
        synthetic_kind_from_string(synth_kind), params, synth_count, rng);
    ensure_out_dir(out);
    for (std::size_t i = 0; i < images.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "img_%04zu.png", i);
      save_image(images[i], join(out, name));
    }
    std::cout << "wrote " << images.size() << " images under " << out << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
