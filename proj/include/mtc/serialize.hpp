#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "mtc/tensor.hpp"

namespace mtc::io {

// Binary tensor record:
//   "TNSR" | version 0x01 | rank u8 | extents u32 LE each | f64 LE row-major
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

// Density map record (rank-2 tensors only):
//   "DMAP" | version 0x01 | H u32 LE | W u32 LE | H*W f64 LE row-major
void write_density_map(std::ostream& os, const Tensor& t);
Tensor read_density_map(std::istream& is);
void save_density_map(const std::string& path, const Tensor& t);
Tensor load_density_map(const std::string& path);

// Named weight bundle:
//   "MTCW" | version u8 0x01 | entry count u32 LE |
//   per entry: name length u16 LE | UTF-8 name | embedded TNSR record
// Entry order is preserved, so a bundle written twice is byte-identical.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;
void write_weights(std::ostream& os, const NamedTensors& entries);
NamedTensors read_weights(std::istream& is);
void save_weights(const std::string& path, const NamedTensors& entries);
NamedTensors load_weights(const std::string& path);

}  // namespace mtc::io
