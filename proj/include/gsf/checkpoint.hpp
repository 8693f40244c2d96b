#pragma once

#include <string>
#include <vector>

#include "gsf/tensor.hpp"

namespace gsf {

struct NamedTensor {
  std::string name;
  Tensor value;
};

// GSWT weight files: "GSWT", u16 version, u32 record count, then per record
// u32 name length, name bytes, u32 rank, u32 dims[rank], f32 data.
inline constexpr unsigned kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

// Copies values from `source` into `dest` by name; every dest entry must be present with a matching shape.
void assign_by_name(std::vector<NamedTensor>& dest, const std::vector<NamedTensor>& source);

}  // namespace gsf
