#include "xlt/errors.hpp"
#include "xlt/model.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstring>
#include <fstream>

namespace xlt {

namespace {

constexpr std::array<char, 8> kMagic{'X', 'L', 'T', 'C', 'K', 'P', 'T', '\0'};

nlohmann::json config_json(const ModelConfig& cfg) {
  return {{"n_layers", cfg.n_layers}, {"d_model", cfg.d_model},   {"n_heads", cfg.n_heads},
          {"d_ff", cfg.d_ff},         {"max_len", cfg.max_len},   {"vocab_size", cfg.vocab_size},
          {"dropout_rate", cfg.dropout_rate}};
}

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw DataError("truncated checkpoint");
  return value;
}

}  // namespace

void save_checkpoint(const Parameters& params, const ModelConfig& cfg,
                     const std::filesystem::path& path) {
  check_parameters(params, cfg);
  nlohmann::json header;
  header["config"] = config_json(cfg);
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : params) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}});
  }
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint: " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_pod<std::uint32_t>(out, kCheckpointVersion);
  write_pod<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : params) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

std::pair<Parameters, ModelConfig> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError("not a parameter checkpoint: " + path.string());
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = read_pod<std::uint64_t>(in);
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("truncated checkpoint header");

  nlohmann::json header;
  ModelConfig cfg;
  try {
    header = nlohmann::json::parse(text);
    const auto& c = header.at("config");
    cfg.n_layers = c.at("n_layers").get<std::size_t>();
    cfg.d_model = c.at("d_model").get<std::size_t>();
    cfg.n_heads = c.at("n_heads").get<std::size_t>();
    cfg.d_ff = c.at("d_ff").get<std::size_t>();
    cfg.max_len = c.at("max_len").get<std::size_t>();
    cfg.vocab_size = c.at("vocab_size").get<std::size_t>();
    cfg.dropout_rate = c.at("dropout_rate").get<double>();
  } catch (const nlohmann::json::exception& err) {
    throw DataError(std::string("malformed checkpoint header: ") + err.what());
  }

  Parameters params = init_parameters(cfg, 0);
  const auto& index = header.at("tensors");
  if (index.size() != params.size()) throw DataError("checkpoint tensor count mismatch");
  for (const auto& entry : index) {
    const auto name = entry.at("name").get<std::string>();
    if (!params.contains(name)) throw DataError("checkpoint has unknown tensor " + name);
    Tensor& t = params.tensor(name);
    if (entry.at("shape").get<std::vector<std::size_t>>() != t.shape()) {
      throw DataError("checkpoint shape mismatch for " + name);
    }
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!in) throw DataError("truncated checkpoint data for " + name);
  }
  return {std::move(params), cfg};
}

}  // namespace xlt
