#include "lcgan/networks/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace lcgan::nn {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "lcgan-checkpoint";
constexpr int kVersion = 1;

void put_le32(std::vector<char>& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

float get_le32(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

const TensorRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void Checkpoint::add(TensorRecord record) {
  if (find(record.name)) throw CheckpointError("checkpoint: tensor '" + record.name + "' added twice");
  if (static_cast<std::int64_t>(record.values.size()) != shape_numel(record.shape)) {
    throw CheckpointError("checkpoint: tensor '" + record.name + "' has " + std::to_string(record.values.size()) +
                          " values for shape " + shape_string(record.shape));
  }
  tensors.push_back(std::move(record));
}

void save_checkpoint(const fs::path& dir, const Checkpoint& checkpoint) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CheckpointError("checkpoint: cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json table = nlohmann::json::array();
  std::vector<char> blob;
  std::int64_t offset = 0;
  for (const auto& t : checkpoint.tensors) {
    table.push_back({{"name", t.name}, {"shape", t.shape}, {"offset", offset}, {"count", t.values.size()}});
    for (float v : t.values) put_le32(blob, v);
    offset += static_cast<std::int64_t>(t.values.size()) * 4;
  }
  const nlohmann::json manifest{{"format", kFormat},
                                {"version", kVersion},
                                {"dtype", "float32"},
                                {"byte_order", "little"},
                                {"architecture", checkpoint.architecture},
                                {"metadata", checkpoint.metadata},
                                {"tensors", table}};

  std::ofstream bin(dir / "params.bin", std::ios::binary | std::ios::trunc);
  bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!bin) throw CheckpointError("checkpoint: cannot write " + (dir / "params.bin").string());
  std::ofstream man(dir / "manifest.json", std::ios::trunc);
  man << manifest.dump(2) << '\n';
  if (!man) throw CheckpointError("checkpoint: cannot write " + (dir / "manifest.json").string());
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const auto man_path = dir / "manifest.json";
  const auto bin_path = dir / "params.bin";
  std::ifstream man(man_path);
  if (!man) throw CheckpointError("checkpoint: no manifest at " + man_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(man);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint: malformed manifest " + man_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kFormat || manifest.value("version", 0) != kVersion) {
    throw CheckpointError("checkpoint: " + man_path.string() + " is not a version " + std::to_string(kVersion) +
                          " checkpoint manifest");
  }
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw CheckpointError("checkpoint: no params.bin in " + dir.string());
  const std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  Checkpoint out;
  try {
    out.architecture = manifest.at("architecture");
    out.metadata = manifest.at("metadata");
    std::int64_t expected = 0;
    for (const auto& entry : manifest.at("tensors")) {
      TensorRecord r;
      r.name = entry.at("name").get<std::string>();
      r.shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::int64_t>();
      const auto count = entry.at("count").get<std::int64_t>();
      if (count != shape_numel(r.shape) || offset != expected ||
          offset + count * 4 > static_cast<std::int64_t>(blob.size())) {
        throw CheckpointError("checkpoint: table entry '" + r.name + "' does not match params.bin");
      }
      r.values.resize(static_cast<std::size_t>(count));
      for (std::int64_t i = 0; i < count; ++i) r.values[i] = get_le32(blob.data() + offset + 4 * i);
      expected = offset + count * 4;
      out.add(std::move(r));
    }
    if (expected != static_cast<std::int64_t>(blob.size())) {
      throw CheckpointError("checkpoint: params.bin has " + std::to_string(blob.size()) + " bytes, table covers " +
                            std::to_string(expected));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint: malformed manifest " + man_path.string() + ": " + e.what());
  }
  return out;
}

template <typename T>
void append_parameters(Checkpoint& checkpoint, const ParameterStore<T>& store, const std::string& prefix) {
  for (const auto& e : store.entries()) {
    const auto d = e.tensor.data();
    checkpoint.add({prefix + e.name, e.tensor.shape(), std::vector<float>(d.begin(), d.end())});
  }
}

template <typename T>
void restore_parameters(const Checkpoint& checkpoint, ParameterStore<T>& store, const std::string& prefix) {
  for (const auto& e : store.entries()) {
    const auto* r = checkpoint.find(prefix + e.name);
    if (!r) throw CheckpointError("checkpoint: missing tensor '" + prefix + e.name + "'");
    if (r->shape != e.tensor.shape()) {
      throw CheckpointError("checkpoint: tensor '" + prefix + e.name + "' has shape " + shape_string(r->shape) +
                            ", network expects " + shape_string(e.tensor.shape()));
    }
    // Handles share storage with the store entry.
    auto t = e.tensor;
    auto out = t.mutable_data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(r->values[i]);
  }
}

template void append_parameters(Checkpoint&, const ParameterStore<float>&, const std::string&);
template void append_parameters(Checkpoint&, const ParameterStore<double>&, const std::string&);
template void restore_parameters(const Checkpoint&, ParameterStore<float>&, const std::string&);
template void restore_parameters(const Checkpoint&, ParameterStore<double>&, const std::string&);

}  // namespace lcgan::nn
