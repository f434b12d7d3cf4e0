#ifndef LMSTYLE_CHECKPOINT_H_
#define LMSTYLE_CHECKPOINT_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lmstyle/adam.h"
#include "lmstyle/parameters.h"
#include "lmstyle/tensor.h"

namespace lmstyle {

// Binary container layout (all integers little-endian):
//   u8  format version (kCheckpointVersion)
//   4B  magic "LMSC"
//   u32 meta count, then {str key, str value}
//   u32 tensor count, then {str name, u8 dtype, u32 rank, i64 dims[rank], payload}
//   u32 optimizer count, then {str name, i64 t, f64 lr, beta1, beta2, eps,
//                              u32 n, then n x {str param, tensor m, tensor v}}
// where str is u32 byte length + UTF-8 bytes and payload is row-major.
inline constexpr uint8_t kCheckpointVersion = 1;

enum class DType : uint8_t { kFloat64 = 1, kFloat32 = 2 };

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct OptimizerRecord {
  std::string name;
  std::vector<std::string> param_names;
  AdamState state;
};

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;
  std::vector<OptimizerRecord> optimizers;

  const Tensor* find_tensor(const std::string& name) const;
  const OptimizerRecord* find_optimizer(const std::string& name) const;
  const std::string& meta_at(const std::string& key) const;

  // Adds every parameter of the set (names are kept as-is).
  void add_parameters(const ParameterSet& params);
  // Restores the values of every parameter in the set whose name starts
  // with prefix. Missing entries or shape mismatches are errors.
  void load_parameters(ParameterSet& params, const std::string& prefix = "") const;
  // Same, reading parameter prefix + rest from tensor source_prefix + rest.
  void load_parameters(ParameterSet& params, const std::string& prefix, const std::string& source_prefix) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace lmstyle

#endif  // LMSTYLE_CHECKPOINT_H_
