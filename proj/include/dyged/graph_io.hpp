#pragma once

#include <filesystem>

#include "dyged/graph.hpp"

// Dataset directory layout:
//   meta          n=<int> T=<int> d=<int>
//   edges.tsv     t <TAB> u <TAB> v <TAB> w
//   features.tsv  u <TAB> f1 <TAB> … <TAB> fd     (static X; omitted when d=0)
//   labels.tsv    t <TAB> {0|1}
namespace dyged::io {

DynamicGraph read_dataset(const std::filesystem::path& dir);
void write_dataset(const DynamicGraph& g, const std::filesystem::path& dir);

}  // namespace dyged::io
