#include "gnnstrat/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gnnstrat {

CsrGraph::CsrGraph(std::size_t num_nodes, std::vector<std::size_t> row_ptr, std::vector<NodeId> col_idx,
                   std::vector<double> values)
    : n_(num_nodes), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)), values_(std::move(values)) {
    if (row_ptr_.size() != n_ + 1) throw GraphError("row_ptr must have num_nodes + 1 entries");
    if (row_ptr_.front() != 0 || row_ptr_.back() != col_idx_.size()) {
        throw GraphError("row_ptr must start at 0 and end at the number of stored entries");
    }
    if (!values_.empty() && values_.size() != col_idx_.size()) {
        throw GraphError("values length differs from col_idx length");
    }
}

CsrGraph CsrGraph::from_undirected_edges(std::size_t num_nodes, std::span<const Edge> edges) {
    std::vector<std::size_t> counts(num_nodes + 1, 0);
    for (const auto& [u, v] : edges) {
        if (u >= num_nodes || v >= num_nodes) {
            throw GraphError("edge (" + std::to_string(u) + ", " + std::to_string(v) + ") references a node >= " +
                             std::to_string(num_nodes));
        }
        if (u == v) throw GraphError("self-loop on node " + std::to_string(u));
        ++counts[u + 1];
        ++counts[v + 1];
    }
    for (std::size_t i = 0; i < num_nodes; ++i) counts[i + 1] += counts[i];
    std::vector<NodeId> cols(counts.back());
    std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
    for (const auto& [u, v] : edges) {
        cols[cursor[u]++] = v;
        cols[cursor[v]++] = u;
    }
    for (std::size_t r = 0; r < num_nodes; ++r) {
        auto first = cols.begin() + static_cast<std::ptrdiff_t>(counts[r]);
        auto last = cols.begin() + static_cast<std::ptrdiff_t>(counts[r + 1]);
        std::sort(first, last);
        if (auto dup = std::adjacent_find(first, last); dup != last) {
            throw GraphError("duplicate edge (" + std::to_string(r) + ", " + std::to_string(*dup) + ")");
        }
    }
    return CsrGraph(num_nodes, std::move(counts), std::move(cols));
}

std::size_t CsrGraph::num_undirected_edges() const {
    std::size_t loops = 0;
    for (NodeId v = 0; v < n_; ++v)
        for (NodeId u : neighbors(v)) loops += (u == v);
    return (col_idx_.size() - loops) / 2;
}

std::vector<Edge> CsrGraph::edge_list() const {
    std::vector<Edge> out;
    out.reserve(col_idx_.size() / 2);
    for (NodeId v = 0; v < n_; ++v)
        for (NodeId u : neighbors(v))
            if (v < u) out.emplace_back(v, u);
    return out;
}

Matrix CsrGraph::to_dense() const {
    Matrix d(n_, n_);
    for (NodeId v = 0; v < n_; ++v) {
        const auto nb = neighbors(v);
        for (std::size_t k = 0; k < nb.size(); ++k) d(v, nb[k]) = values_.empty() ? 1.0 : values_[row_ptr_[v] + k];
    }
    return d;
}

void validate(const CsrGraph& g, ValidationOptions options) {
    const auto rp = g.row_ptr();
    const std::size_t n = g.num_nodes();
    for (std::size_t v = 0; v < n; ++v) {
        if (rp[v] > rp[v + 1]) throw GraphError("row_ptr decreases at node " + std::to_string(v));
        const auto nb = g.neighbors(static_cast<NodeId>(v));
        for (std::size_t k = 0; k < nb.size(); ++k) {
            if (nb[k] >= n) throw GraphError("neighbour id out of range in row " + std::to_string(v));
            if (!options.allow_self_loops && nb[k] == v) throw GraphError("self-loop on node " + std::to_string(v));
            if (k > 0 && nb[k - 1] >= nb[k]) {
                throw GraphError("row " + std::to_string(v) + " is not strictly ascending (unsorted or duplicate)");
            }
        }
    }
    if (!options.require_symmetric) return;
    for (NodeId v = 0; v < n; ++v) {
        const auto nb = g.neighbors(v);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const NodeId u = nb[k];
            const auto back = g.neighbors(u);
            const auto it = std::lower_bound(back.begin(), back.end(), v);
            if (it == back.end() || *it != v) {
                throw GraphError("edge (" + std::to_string(v) + ", " + std::to_string(u) + ") has no reverse");
            }
            if (g.has_values()) {
                const double forward = g.row_values(v)[k];
                const double reverse = g.row_values(u)[static_cast<std::size_t>(it - back.begin())];
                if (forward != reverse) {
                    throw GraphError("asymmetric value on edge (" + std::to_string(v) + ", " + std::to_string(u) + ")");
                }
            }
        }
    }
}

DegreeVector degrees(const CsrGraph& g) {
    DegreeVector deg(g.num_nodes());
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        std::uint32_t d = 0;
        for (NodeId u : g.neighbors(v)) d += (u != v);
        deg[v] = d;
    }
    return deg;
}

CsrGraph renormalized_adjacency(const CsrGraph& g) {
    const std::size_t n = g.num_nodes();
    const DegreeVector deg = degrees(g);
    // 1 / sqrt(d_v d_u) in one rounding: symmetric, and exact whenever d_v d_u is a perfect square.
    const auto entry = [&](NodeId v, NodeId u) {
        return 1.0 / std::sqrt((static_cast<double>(deg[v]) + 1.0) * (static_cast<double>(deg[u]) + 1.0));
    };

    std::vector<std::size_t> row_ptr(n + 1, 0);
    std::vector<NodeId> cols;
    std::vector<double> vals;
    cols.reserve(g.num_entries() + n);
    vals.reserve(g.num_entries() + n);
    for (NodeId v = 0; v < n; ++v) {
        bool diagonal_done = false;
        for (NodeId u : g.neighbors(v)) {
            if (u == v) continue;
            if (!diagonal_done && u > v) {
                cols.push_back(v);
                vals.push_back(entry(v, v));
                diagonal_done = true;
            }
            cols.push_back(u);
            vals.push_back(entry(v, u));
        }
        if (!diagonal_done) {
            cols.push_back(v);
            vals.push_back(entry(v, v));
        }
        row_ptr[v + 1] = cols.size();
    }
    return CsrGraph(n, std::move(row_ptr), std::move(cols), std::move(vals));
}

CsrGraph mean_adjacency(const CsrGraph& g) {
    const auto rp = g.row_ptr();
    std::vector<double> vals(g.num_entries());
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        const std::size_t d = g.degree(v);
        for (std::size_t k = rp[v]; k < rp[v + 1]; ++k) vals[k] = 1.0 / static_cast<double>(d);
    }
    return CsrGraph(g.num_nodes(), {rp.begin(), rp.end()}, {g.col_idx().begin(), g.col_idx().end()}, std::move(vals));
}

Subgraph induced_subgraph(const CsrGraph& g, std::span<const NodeId> nodes) {
    Subgraph sub;
    sub.old_to_new.assign(g.num_nodes(), -1);
    for (NodeId v : nodes) {
        if (v >= g.num_nodes()) throw GraphError("subgraph node " + std::to_string(v) + " out of range");
        sub.old_to_new[v] = 0;
    }
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        if (sub.old_to_new[v] < 0) continue;
        sub.old_to_new[v] = static_cast<std::int64_t>(sub.nodes.size());
        sub.nodes.push_back(v);
    }
    std::vector<std::size_t> row_ptr{0};
    std::vector<NodeId> cols;
    std::vector<double> vals;
    for (NodeId old : sub.nodes) {
        const auto nb = g.neighbors(old);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const std::int64_t mapped = sub.old_to_new[nb[k]];
            if (mapped < 0) continue;
            cols.push_back(static_cast<NodeId>(mapped));
            if (g.has_values()) vals.push_back(g.row_values(old)[k]);
        }
        row_ptr.push_back(cols.size());
    }
    sub.graph = CsrGraph(sub.nodes.size(), std::move(row_ptr), std::move(cols), std::move(vals));
    return sub;
}

Tensor spmm(Tape& tape, const CsrGraph& adj, const Tensor& dense) {
    if (adj.num_nodes() != dense.rows()) {
        throw ShapeError("spmm shape mismatch: adjacency " + std::to_string(adj.num_nodes()) + "x" +
                         std::to_string(adj.num_nodes()) + " vs dense " + dense.value().shape_string());
    }
    const std::size_t f = dense.cols();
    const bool weighted = adj.has_values();
    Matrix out(adj.num_nodes(), f);
    for (NodeId v = 0; v < adj.num_nodes(); ++v) {
        auto orow = out.row(v);
        const auto nb = adj.neighbors(v);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const double w = weighted ? adj.row_values(v)[k] : 1.0;
            const auto drow = dense.value().row(nb[k]);
            for (std::size_t j = 0; j < f; ++j) orow[j] += w * drow[j];
        }
    }
    return tape.record(std::move(out), {dense}, [&adj, dense](const Matrix& dy) {
        Matrix& g = Tape::grad_buffer(dense);
        const bool weighted = adj.has_values();
        const std::size_t f = dense.cols();
        for (NodeId v = 0; v < adj.num_nodes(); ++v) {
            const auto nb = adj.neighbors(v);
            const auto drow = dy.row(v);
            for (std::size_t k = 0; k < nb.size(); ++k) {
                const double w = weighted ? adj.row_values(v)[k] : 1.0;
                auto grow = g.row(nb[k]);
                for (std::size_t j = 0; j < f; ++j) grow[j] += w * drow[j];
            }
        }
    });
}

}  // namespace gnnstrat
