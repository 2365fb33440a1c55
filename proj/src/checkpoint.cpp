#include "space/checkpoint.hpp"

#include "space/errors.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace space {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'P', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("checkpoint: unexpected end of file");
  return v;
}

std::uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    default: throw IoError("checkpoint: unsupported tensor dtype");
  }
}

torch::ScalarType dtype_from_code(std::uint8_t c) {
  switch (c) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    default: throw IoError("checkpoint: unknown tensor dtype code");
  }
}

std::map<std::string, torch::Tensor> named_state(const torch::nn::Module& module) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : module.named_parameters(true)) out[p.key()] = p.value();
  for (const auto& b : module.named_buffers(true)) out[b.key()] = b.value();
  return out;
}

json meta_to_json(const CheckpointMeta& m) {
  return {{"model", m.model}, {"profile", m.profile}, {"step", m.step},
          {"model_config", m.model_config}, {"extra", m.extra}};
}

CheckpointMeta meta_from_json(const json& j) {
  CheckpointMeta m;
  m.model = j.at("model").get<std::string>();
  m.profile = j.at("profile").get<std::string>();
  m.step = j.at("step").get<long>();
  m.model_config = j.value("model_config", json::object());
  m.extra = j.value("extra", json::object());
  return m;
}

CheckpointMeta read_header(std::istream& in, const std::filesystem::path& path) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("'" + path.string() + "' is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version == 0 || version > kCheckpointVersion) {
    throw IoError("'" + path.string() + "': unsupported checkpoint version " +
                  std::to_string(version));
  }
  const auto n = get<std::uint64_t>(in);
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError("checkpoint: truncated metadata");
  try {
    return meta_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint metadata: ") + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                     const torch::nn::Module& module, torch::optim::Optimizer* optimizer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kCheckpointVersion);
    const std::string text = meta_to_json(meta).dump();
    put<std::uint64_t>(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));

    const auto state = named_state(module);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(state.size()));
    for (const auto& [name, tensor] : state) {
      const torch::Tensor t = tensor.detach().to(torch::kCPU).contiguous();
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint8_t>(out, dtype_code(t.scalar_type()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dim()));
      for (auto s : t.sizes()) put<std::int64_t>(out, s);
      out.write(static_cast<const char*>(t.data_ptr()),
                static_cast<std::streamsize>(t.numel() * t.element_size()));
    }

    std::string blob;
    if (optimizer != nullptr) {
      torch::serialize::OutputArchive archive;
      optimizer->save(archive);
      std::ostringstream ss;
      archive.save_to(ss);
      blob = ss.str();
    }
    put<std::uint64_t>(out, blob.size());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing checkpoint '" + path.string() + "'");
  return read_header(in, path);
}

CheckpointMeta load_checkpoint(const std::filesystem::path& path, torch::nn::Module& module,
                               torch::optim::Optimizer* optimizer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("missing checkpoint '" + path.string() + "'");
  const CheckpointMeta meta = read_header(in, path);

  auto state = named_state(module);
  const auto count = get<std::uint32_t>(in);
  std::size_t loaded = 0;
  torch::NoGradGuard no_grad;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    const auto dtype = dtype_from_code(get<std::uint8_t>(in));
    const auto rank = get<std::uint32_t>(in);
    std::vector<int64_t> sizes(rank);
    for (auto& s : sizes) s = get<std::int64_t>(in);
    torch::Tensor t = torch::empty(sizes, dtype);
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * t.element_size()));
    if (!in) throw IoError("checkpoint: truncated tensor '" + name + "'");
    auto it = state.find(name);
    if (it == state.end()) throw IoError("checkpoint tensor '" + name + "' has no destination");
    if (it->second.sizes() != t.sizes()) {
      throw IoError("checkpoint tensor '" + name + "' has the wrong shape");
    }
    it->second.copy_(t);
    ++loaded;
  }
  if (loaded != state.size()) {
    throw IoError("checkpoint '" + path.string() + "' is missing module tensors");
  }

  const auto blob_size = get<std::uint64_t>(in);
  if (blob_size > 0 && optimizer != nullptr) {
    std::string blob(blob_size, '\0');
    in.read(blob.data(), static_cast<std::streamsize>(blob_size));
    if (!in) throw IoError("checkpoint: truncated optimizer state");
    std::istringstream ss(blob);
    torch::serialize::InputArchive archive;
    archive.load_from(ss);
    optimizer->load(archive);
  }
  return meta;
}

}  // namespace space
