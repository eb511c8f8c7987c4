#pragma once

#include "nllab/nn.hpp"

#include <string>
#include <utility>
#include <vector>

namespace nllab {

// Flat binary parameter container: 8-byte magic+version tag, then a shape
// table and raw little-endian 64-bit values per named tensor. Gradients are
// not stored.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const ParamTensor*>>& tensors);

std::vector<std::pair<std::string, ParamTensor>> load_checkpoint(const std::string& path);

// Copies checkpoint values into an existing network whose layer shapes must
// match; names follow the save_mlp convention below.
void save_mlp(const std::string& path, const Mlp& net, const std::string& prefix);
void load_mlp(const std::string& path, Mlp& net, const std::string& prefix);

} // namespace nllab
