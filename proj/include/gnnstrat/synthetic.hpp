#pragma once

#include <cstdint>

#include "gnnstrat/dataset.hpp"

namespace gnnstrat {

struct SyntheticOptions {
    std::size_t num_nodes = 500;
    std::size_t edges_per_node = 2;  // preferential attachment: links added by each new node
    std::size_t num_classes = 3;
    std::size_t num_features = 64;
    std::size_t train_per_class = 20;
    std::size_t num_val = 100;
    std::size_t num_test = 200;
    std::uint64_t seed = 0;
};

/// Preferential-attachment graph (power-law degree tail) with class-correlated
/// sparse binary features and homophilous labels. Deterministic in the seed.
Dataset make_power_law_dataset(const SyntheticOptions& options);

}  // namespace gnnstrat
