#include "segrefine/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "segrefine/errors.hpp"

namespace segrefine {

namespace {

constexpr char kMagic[8] = {'S', 'R', 'C', 'K', 'P', 'T', '0', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& file) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw DataFormatError(file, "truncated checkpoint");
  }
  return v;
}

std::uint8_t dtype_code(const torch::Tensor& t) {
  switch (t.scalar_type()) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    default: throw std::invalid_argument("checkpoint arrays must be f32, f64 or i64");
  }
}

torch::ScalarType dtype_from(std::uint8_t code, const std::string& file) {
  switch (code) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    default: throw DataFormatError(file, "unknown array dtype code " + std::to_string(code));
  }
}

void write_array(std::ostream& os, const std::string& name, const torch::Tensor& value) {
  const auto t = value.detach().contiguous();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint8_t>(os, dtype_code(t));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(t.dim()));
  for (const auto d : t.sizes()) put<std::int64_t>(os, d);
  os.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
}

}  // namespace

nlohmann::json config_to_json(const RefinerConfig& c) {
  return {{"backbone_width", c.backbone_width},
          {"stage_depths", c.stage_depths},
          {"pyramid_bins", c.pyramid_bins},
          {"input_channels", c.input_channels},
          {"head_strides", c.head_strides},
          {"stem_channels", c.stem_channels},
          {"psp_channels", c.psp_channels},
          {"decoder4_channels", c.decoder4_channels},
          {"decoder1_channels", c.decoder1_channels}};
}

RefinerConfig config_from_json(const nlohmann::json& j) {
  RefinerConfig c;
  c.backbone_width = j.at("backbone_width").get<double>();
  c.stage_depths = j.at("stage_depths").get<std::vector<int>>();
  c.pyramid_bins = j.at("pyramid_bins").get<std::vector<int>>();
  c.input_channels = j.at("input_channels").get<int>();
  c.head_strides = j.at("head_strides").get<std::array<int, 3>>();
  c.stem_channels = j.at("stem_channels").get<int>();
  c.psp_channels = j.at("psp_channels").get<int>();
  c.decoder4_channels = j.at("decoder4_channels").get<int>();
  c.decoder1_channels = j.at("decoder1_channels").get<int>();
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const RefinerModel& model,
                     const CheckpointMeta& meta,
                     const std::map<std::string, torch::Tensor>& extra_arrays) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // write to a sibling file first so an interrupted save never clobbers a good checkpoint
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + tmp.string());
    os.write(kMagic, sizeof(kMagic));
    const nlohmann::json j{{"config", config_to_json(model.config())},
                           {"iteration", meta.iteration},
                           {"seed", meta.seed},
                           {"extra", meta.extra}};
    const std::string text = j.dump();
    put<std::uint64_t>(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));

    const auto params = model.net()->named_parameters();
    const auto buffers = model.net()->named_buffers();
    put<std::uint64_t>(os, params.size() + buffers.size() + extra_arrays.size());
    for (const auto& p : params) write_array(os, "model/" + p.key(), p.value());
    for (const auto& b : buffers) write_array(os, "model/" + b.key(), b.value());
    for (const auto& [name, value] : extra_arrays) write_array(os, name, value);
    if (!os) throw IoError("failed writing checkpoint: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + file);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataFormatError(file, "not a checkpoint (bad magic)");
  }
  const auto meta_len = get<std::uint64_t>(is, file);
  std::string text(meta_len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(meta_len))) {
    throw DataFormatError(file, "truncated metadata");
  }
  CheckpointMeta meta;
  try {
    const auto j = nlohmann::json::parse(text);
    meta.config = config_from_json(j.at("config"));
    meta.iteration = j.at("iteration").get<std::int64_t>();
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.extra = j.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw DataFormatError(file, std::string("bad metadata: ") + e.what());
  }

  LoadedCheckpoint out{meta, RefinerModel(meta.config, meta.seed), {}};
  auto params = out.model.net()->named_parameters();
  auto buffers = out.model.net()->named_buffers();
  std::size_t restored = 0;

  const auto count = get<std::uint64_t>(is, file);
  torch::NoGradGuard guard;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(is, file);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw DataFormatError(file, "truncated array name");
    const auto dtype = dtype_from(get<std::uint8_t>(is, file), file);
    const auto rank = get<std::uint32_t>(is, file);
    std::vector<std::int64_t> dims(rank);
    for (auto& d : dims) d = get<std::int64_t>(is, file);
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    if (!is.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()))) {
      throw DataFormatError(file, "truncated data for " + name);
    }
    if (name.rfind("model/", 0) == 0) {
      const auto key = name.substr(6);
      torch::Tensor* target = params.find(key);
      if (target == nullptr) target = buffers.find(key);
      if (target == nullptr) throw DataFormatError(file, "unexpected array " + name);
      if (target->sizes() != t.sizes() || target->scalar_type() != t.scalar_type()) {
        throw DataFormatError(file, "shape or dtype mismatch for " + name);
      }
      target->copy_(t);
      ++restored;
    } else {
      out.extra_arrays.emplace(name, t);
    }
  }
  if (restored != params.size() + buffers.size()) {
    throw DataFormatError(file, "checkpoint is missing model arrays");
  }
  return out;
}

}  // namespace segrefine
