#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lcgan/networks/parameters.hpp"

// On disk a checkpoint is a directory with manifest.json (architecture,
// metadata and a name/shape/offset table) and params.bin holding
// little-endian float32 values concatenated in table order.
namespace lcgan::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TensorRecord {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  nlohmann::json architecture = nlohmann::json::object();
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<TensorRecord> tensors;

  const TensorRecord* find(const std::string& name) const;
  void add(TensorRecord record);
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
/// Throws CheckpointError for a missing directory, a malformed manifest or a
/// params.bin whose size disagrees with the table.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Appends every entry of `store` as "<prefix><name>".
template <typename T>
void append_parameters(Checkpoint& checkpoint, const ParameterStore<T>& store, const std::string& prefix);

/// Overwrites every entry of `store` from "<prefix><name>"; missing names or
/// shape mismatches throw CheckpointError.
template <typename T>
void restore_parameters(const Checkpoint& checkpoint, ParameterStore<T>& store, const std::string& prefix);

}  // namespace lcgan::nn
