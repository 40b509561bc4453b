#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lincirc/tensor.hpp"

namespace lincirc {

// Tensor archive, the on-disk carrier for checkpoints, dictionaries and
// corpora. Layout (all little-endian):
//   magic "LCGT", u8 version=1, u32 tensor count;
//   per tensor: u16 name length, UTF-8 name, u8 dtype (0 = f32), u8 rank,
//   u32 dims[rank], raw row-major f32 payload.
// Round-trips must be bit-exact.

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void save_archive(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_archive(const std::string& path);

// Lookup helper; throws io-error if absent.
const Tensor& archive_get(const std::vector<NamedTensor>& ar, const std::string& name);
bool archive_has(const std::vector<NamedTensor>& ar, const std::string& name);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);
std::uint64_t file_fnv64(const std::string& path);

}  // namespace lincirc
