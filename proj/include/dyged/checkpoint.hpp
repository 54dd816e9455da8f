#pragma once

#include <filesystem>
#include <string>

#include "dyged/model.hpp"

// Text checkpoint, version 1:
//   dyged-checkpoint 1
//   variant <tag>            d_in / hidden / embed / k / mlp_layers / dropout follow, one per line
//   tensor <name> <rows> <cols>
//   <rows lines of tab-separated values, 17 significant digits>
//   end
namespace dyged::checkpoint {

inline constexpr int kVersion = 1;

std::string serialize(const ModelParams& params);
ModelParams deserialize(std::string_view content, const std::string& source = "<checkpoint>");

void save(const ModelParams& params, const std::filesystem::path& path);
ModelParams load(const std::filesystem::path& path);

}  // namespace dyged::checkpoint
