#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "gnnstrat/graph.hpp"

namespace gnnstrat {

class PartitionError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// counts[d] = number of nodes with degree d, for d in [0, max degree].
struct DegreeHistogram {
    std::vector<std::uint64_t> counts;

    std::uint64_t total() const;
    std::size_t max_degree() const { return counts.empty() ? 0 : counts.size() - 1; }
};

DegreeHistogram degree_histogram(std::span<const std::uint32_t> degrees);

/// CSV with header "degree,count", one row per bin.
void write_histogram_csv(std::ostream& out, const DegreeHistogram& hist);

/// Otsu's threshold on an integer histogram: the cut t ("low" = degree <= t)
/// maximising the between-class variance w0*w1*(mu0 - mu1)^2. Ties resolve to
/// the smallest t. Comparisons are exact (integer arithmetic).
std::uint32_t otsu_threshold(const DegreeHistogram& hist);

/// Two-group split of the nodes. For degree partitions low_mask[v] == (deg[v] <= theta);
/// random partitions carry no theta.
struct DegreePartition {
    std::optional<std::uint32_t> theta;
    std::vector<bool> low_mask;
    std::vector<bool> high_mask;
    std::size_t low_count = 0;
    std::size_t high_count = 0;

    std::size_t size() const { return low_mask.size(); }
    std::vector<NodeId> low_nodes() const;
    std::vector<NodeId> high_nodes() const;
};

/// Throws PartitionError("partition has empty group") when either side is empty.
DegreePartition partition_by_degree(std::span<const std::uint32_t> degrees, std::uint32_t theta);

/// Uniformly random subset of exactly `low_count` nodes marked low. Requires 0 < low_count < n.
DegreePartition random_partition(std::size_t n, std::size_t low_count, std::uint64_t seed);

}  // namespace gnnstrat
