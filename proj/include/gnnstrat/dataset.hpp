#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gnnstrat/graph.hpp"
#include "gnnstrat/tensor.hpp"

namespace gnnstrat {

class LoadError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct Split {
    std::vector<NodeId> train;
    std::vector<NodeId> val;
    std::vector<NodeId> test;
};

struct Dataset {
    std::string name;
    CsrGraph graph;
    Matrix features;  // num_nodes x num_features
    std::vector<std::uint32_t> labels;
    std::size_t num_classes = 0;
    Split split;

    std::size_t num_nodes() const { return graph.num_nodes(); }
    std::size_t num_features() const { return features.cols(); }
};

/// Checks the in-memory invariants (row counts, label range, disjoint in-range splits).
void validate(const Dataset& ds);

/// Reads the portable dataset directory:
///   meta.json       {"name", "num_nodes", "num_features", "num_classes", "num_undirected_edges"}
///   edges.u32le     (min, max) pairs, one per undirected edge
///   features.f32le  row-major num_nodes x num_features
///   labels.u32le    num_nodes class ids
///   split.json      {"train": [...], "val": [...], "test": [...]}
/// Every file length must match the counts in meta.json exactly.
Dataset load_dataset(const std::filesystem::path& dir);

/// Writes `ds` in the portable format. Features are narrowed to 32-bit floats.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace gnnstrat
