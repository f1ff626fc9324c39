#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gnnstrat/autodiff.hpp"
#include "gnnstrat/tensor.hpp"

namespace gnnstrat {

class GraphError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;
using DegreeVector = std::vector<std::uint32_t>;

/// Compressed sparse row adjacency.
///
/// Structural graphs are undirected, loop-free, deduplicated and sorted per
/// row; they carry no values. Normalised operators built from them (see
/// renormalized_adjacency, mean_adjacency) carry one value per stored entry
/// and may include the diagonal.
class CsrGraph {
   public:
    CsrGraph() = default;
    CsrGraph(std::size_t num_nodes, std::vector<std::size_t> row_ptr, std::vector<NodeId> col_idx,
             std::vector<double> values = {});

    /// Builds a structural graph from undirected edges listed once each, in any
    /// orientation. Rejects self-loops, duplicates and out-of-range ids.
    static CsrGraph from_undirected_edges(std::size_t num_nodes, std::span<const Edge> edges);

    std::size_t num_nodes() const { return n_; }
    std::size_t num_entries() const { return col_idx_.size(); }
    std::size_t num_undirected_edges() const;
    bool has_values() const { return !values_.empty(); }

    std::span<const std::size_t> row_ptr() const { return row_ptr_; }
    std::span<const NodeId> col_idx() const { return col_idx_; }
    std::span<const double> values() const { return values_; }

    std::span<const NodeId> neighbors(NodeId v) const {
        return std::span<const NodeId>(col_idx_).subspan(row_ptr_[v], row_ptr_[v + 1] - row_ptr_[v]);
    }
    std::span<const double> row_values(NodeId v) const {
        return std::span<const double>(values_).subspan(row_ptr_[v], row_ptr_[v + 1] - row_ptr_[v]);
    }
    std::size_t degree(NodeId v) const { return row_ptr_[v + 1] - row_ptr_[v]; }

    /// Undirected edges (u < v), ascending.
    std::vector<Edge> edge_list() const;

    Matrix to_dense() const;

   private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_ptr_{0};
    std::vector<NodeId> col_idx_;
    std::vector<double> values_;
};

struct ValidationOptions {
    bool allow_self_loops = false;
    bool require_symmetric = true;
};

/// Throws GraphError describing the first violated CSR invariant.
void validate(const CsrGraph& g, ValidationOptions options = {});

/// Structural neighbour counts (self-loops excluded).
DegreeVector degrees(const CsrGraph& g);

/// D~^{-1/2} (A + I) D~^{-1/2} with D~ the degree matrix of A + I.
CsrGraph renormalized_adjacency(const CsrGraph& g);

/// Row-stochastic neighbourhood mean operator; isolated nodes get an empty row.
CsrGraph mean_adjacency(const CsrGraph& g);

struct Subgraph {
    CsrGraph graph;
    std::vector<NodeId> nodes;          // new id -> old id, ascending
    std::vector<std::int64_t> old_to_new;  // -1 for dropped nodes
};

/// Keeps edges with both endpoints in `nodes`; relabels in ascending old-id order.
Subgraph induced_subgraph(const CsrGraph& g, std::span<const NodeId> nodes);

/// Sparse-dense product adj * dense. The backward pass scatters through the
/// transpose, so non-symmetric operators are handled too. `adj` must outlive
/// the tape's backward pass.
Tensor spmm(Tape& tape, const CsrGraph& adj, const Tensor& dense);

}  // namespace gnnstrat
