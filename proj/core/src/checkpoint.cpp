#include "segflow/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "json.hpp"
#include "segflow/errors.hpp"

namespace segflow {

namespace {

constexpr char kMagic[8] = {'S', 'G', 'F', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a_bytes(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

nlohmann::json config_to_json_obj(const ModelConfig& c) {
  return nlohmann::json{
      {"encoder_channels", c.encoder_channels},
      {"flow_channels", c.flow_channels},
      {"fusion_enabled", c.fusion_enabled},
      {"fusion_scales", std::vector<int>(c.fusion_scales.begin(), c.fusion_scales.end())},
      {"input_height", c.input_height},
      {"input_width", c.input_width},
      {"lambda_flow", c.lambda_flow},
      {"seed", c.seed},
  };
}

ModelConfig config_from_json_obj(const nlohmann::json& j) {
  ModelConfig c;
  c.input_height = j.at("input_height").get<int>();
  c.input_width = j.at("input_width").get<int>();
  c.encoder_channels = j.at("encoder_channels").get<std::vector<int>>();
  c.flow_channels = j.at("flow_channels").get<std::vector<int>>();
  c.fusion_enabled = j.at("fusion_enabled").get<bool>();
  auto scales = j.at("fusion_scales").get<std::vector<int>>();
  c.fusion_scales = std::set<int>(scales.begin(), scales.end());
  c.lambda_flow = j.at("lambda_flow").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) {
  // nlohmann::json objects iterate in key order, so dump() is canonical.
  return config_to_json_obj(config).dump();
}

ModelConfig model_config_from_json(const std::string& json_text) {
  return config_from_json_obj(nlohmann::json::parse(json_text));
}

std::uint64_t model_config_hash(const ModelConfig& config) {
  const std::string s = model_config_to_json(config);
  return fnv1a_bytes(s.data(), s.size());
}

void save_checkpoint(const SegFlowModel& model, const std::filesystem::path& path) {
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& p : model.parameters()) {
    manifest.push_back({{"name", p.name},
                        {"owner", branch_name(p.owner)},
                        {"shape", p.value.shape()}});
  }
  nlohmann::json header{
      {"config", config_to_json_obj(model.config())},
      {"config_hash", model_config_hash(model.config())},
      {"params", manifest},
  };
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_checkpoint: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& p : model.parameters())
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  if (!out) throw IoError("save_checkpoint: short write to " + path.string());
}

SegFlowModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("load_checkpoint: bad magic in " + path.string());
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kVersion) throw IoError("load_checkpoint: unsupported version");
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || header_len == 0 || header_len > (1ull << 24))
    throw IoError("load_checkpoint: corrupt header length");
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IoError("load_checkpoint: truncated header");

  try {
    nlohmann::json header = nlohmann::json::parse(header_text, nullptr, false);
    if (header.is_discarded()) throw IoError("load_checkpoint: header is not valid JSON");
    ModelConfig config = config_from_json_obj(header.at("config"));
    const auto stored_hash = header.at("config_hash").get<std::uint64_t>();
    if (stored_hash != model_config_hash(config))
      throw IoError("load_checkpoint: config hash mismatch");

    SegFlowModel model(config);
    const auto& manifest = header.at("params");
    auto& params = model.parameters();
    if (manifest.size() != params.size())
      throw IoError("load_checkpoint: parameter manifest does not match architecture");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& entry = manifest[i];
      if (entry.at("name").get<std::string>() != params[i].name ||
          entry.at("shape").get<std::vector<int>>() != params[i].value.shape())
        throw IoError("load_checkpoint: manifest entry mismatch at " + params[i].name);
      in.read(reinterpret_cast<char*>(params[i].value.data()),
              static_cast<std::streamsize>(params[i].value.size() * sizeof(double)));
      if (!in) throw IoError("load_checkpoint: truncated parameter data");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("load_checkpoint: corrupt header in " + path.string() + ": " + e.what());
  }
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("file_hash: cannot open " + path.string());
  std::uint64_t h = 1469598103934665603ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a_bytes(buf, static_cast<std::size_t>(in.gcount()), h);
    if (!in) break;
  }
  return h;
}

}  // namespace segflow
