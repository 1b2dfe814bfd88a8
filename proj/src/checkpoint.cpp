#include "diffpaint/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"

namespace diffpaint {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'D', 'P', 'N', 'T', '0', '0', '0', '1'};

void put_u32_le(std::ostream& out, uint32_t v) {
  const uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                        static_cast<uint8_t>(v >> 16),
                        static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32_le(std::istream& in, const std::string& path) {
  uint8_t b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw DataError("truncated checkpoint " + path);
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

std::string variance_name(ReverseVariance v) {
  return v == ReverseVariance::FixedBeta ? "fixed-beta" : "posterior-beta";
}

ReverseVariance variance_from_name(const std::string& name,
                                   const std::string& path) {
  if (name == "fixed-beta") return ReverseVariance::FixedBeta;
  if (name == "posterior-beta") return ReverseVariance::PosteriorBeta;
  throw DataError("checkpoint " + path + " names unknown variance " + name);
}

}  // namespace

void save_checkpoint(const std::string& path, const UNetDenoiser& net,
                     const NoiseSchedule& schedule) {
  const DenoiserSpec& spec = net.spec();
  json manifest;
  manifest["format"] = "DPNT0001";
  manifest["spec"]["base_channels"] = spec.base_channels;
  manifest["spec"]["depth"] = spec.depth;
  manifest["spec"]["channel_multipliers"] = spec.channel_multipliers;
  manifest["spec"]["in_channels"] = spec.in_channels;
  manifest["spec"]["conditional"] = spec.conditional;
  manifest["spec"]["activation"] = "silu";
  manifest["spec"]["normalization"] =
      spec.normalization == Normalization::Group ? "group" : "none";
  manifest["schedule"]["betas"] = schedule.betas();
  manifest["schedule"]["variance"] = variance_name(schedule.variance_choice());
  json params = json::array();
  for (const auto& p : net.parameters()) {
    json pj;
    pj["name"] = p.name;
    pj["shape"] = p.shape;
    params.push_back(std::move(pj));
  }
  manifest["params"] = std::move(params);
  const std::string header = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put_u32_le(out, static_cast<uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& p : net.parameters()) {
    for (double v : p.value) {
      const float f = static_cast<float>(v);
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32_le(out, bits);
    }
  }
  if (!out) throw DataError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError("bad magic in checkpoint " + path);
  }
  const uint32_t header_len = get_u32_le(in, path);
  std::string header(header_len, '\0');
  if (!in.read(header.data(), header_len)) {
    throw DataError("truncated checkpoint manifest in " + path);
  }
  json manifest;
  try {
    manifest = json::parse(header);
  } catch (const json::parse_error& e) {
    throw DataError("corrupt checkpoint manifest in " + path + ": " + e.what());
  }

  DenoiserSpec spec;
  NoiseSchedule schedule = [&] {
    try {
      const auto& sj = manifest.at("spec");
      spec.base_channels = sj.at("base_channels").get<int>();
      spec.depth = sj.at("depth").get<int>();
      spec.channel_multipliers = sj.at("channel_multipliers").get<std::vector<int>>();
      spec.in_channels = sj.at("in_channels").get<int>();
      spec.conditional = sj.at("conditional").get<bool>();
      const auto& cj = manifest.at("schedule");
      return NoiseSchedule(cj.at("betas").get<std::vector<double>>(),
                           variance_from_name(cj.at("variance").get<std::string>(), path));
    } catch (const json::exception& e) {
      throw DataError("checkpoint manifest in " + path +
                      " misses required fields: " + e.what());
    }
  }();

  RngStream init_rng(0);  // initialization is overwritten below
  auto net = std::make_unique<UNetDenoiser>(spec, init_rng);

  const auto& params_j = manifest.at("params");
  auto& params = net->parameters();
  if (params_j.size() != params.size()) {
    throw DataError("checkpoint " + path + " holds " +
                    std::to_string(params_j.size()) + " arrays, expected " +
                    std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = params_j[i].at("name").get<std::string>();
    const std::vector<int> shape = params_j[i].at("shape").get<std::vector<int>>();
    if (name != params[i].name || shape != params[i].shape) {
      throw DataError("checkpoint " + path + " array " + name +
                      " does not match the architecture (expected " +
                      params[i].name + ")");
    }
    for (auto& v : params[i].value) {
      const uint32_t bits = get_u32_le(in, path);
      float f;
      std::memcpy(&f, &bits, 4);
      v = f;
    }
  }
  char extra;
  if (in.read(&extra, 1)) {
    throw DataError("checkpoint " + path + " has trailing bytes");
  }
  return Checkpoint{std::move(spec), std::move(schedule), std::move(net)};
}

std::string checkpoint_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path + " for hashing");
  uint64_t hash = 1469598103934665603ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      hash ^= static_cast<uint8_t>(buf[i]);
      hash *= 1099511628211ULL;
    }
    if (!in) break;
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(out);
}

}  // namespace diffpaint
