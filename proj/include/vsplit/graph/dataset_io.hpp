#pragma once

#include <filesystem>

#include "vsplit/graph/hetgraph.hpp"

namespace vsplit {

/// Reads a dataset directory:
///   nodes.tsv          id <TAB> type
///   features.tsv       id <TAB> comma-separated floats
///   edges_<rel>.tsv    src <TAB> dst [<TAB> comma-separated floats]
///   labels.tsv         id <TAB> class
///   metapaths.txt      one metapath per line
///   splits.tsv         id <TAB> train|val|test
/// Node ids follow the order of nodes.tsv. Errors carry file and line.
DatasetBundle load_dataset(const std::filesystem::path& dir);

/// Writes the same layout; floats use the shortest round-trip form so a
/// reload reproduces every value exactly.
void write_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);

}  // namespace vsplit
