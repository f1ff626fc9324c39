#include "gnnstrat/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

namespace gnnstrat {

namespace {

constexpr std::size_t kDefaultDenseLimit = 5000;

double max_off_diagonal(const std::vector<double>& a, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) m = std::max(m, std::abs(a[i * n + j]));
    }
    return m;
}

// Eigenvalues of one connected block, given as a dense principal submatrix of `adj`.
std::vector<double> block_eigenvalues(const CsrGraph& adj, const std::vector<NodeId>& nodes,
                                      const std::vector<std::int64_t>& local, const JacobiOptions& options) {
    const std::size_t n = nodes.size();
    if (n == 1) {
        const auto nb = adj.neighbors(nodes[0]);
        const auto vals = adj.row_values(nodes[0]);
        double d = 0.0;
        for (std::size_t k = 0; k < nb.size(); ++k) {
            if (nb[k] == nodes[0]) d = vals[k];
        }
        return {d};
    }
    Matrix dense(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto nb = adj.neighbors(nodes[i]);
        const auto vals = adj.row_values(nodes[i]);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            if (const auto j = local[nb[k]]; j >= 0) dense(i, static_cast<std::size_t>(j)) = vals[k];
        }
    }
    return symmetric_eigenvalues(dense, options);
}

}  // namespace

std::vector<double> symmetric_eigenvalues(const Matrix& m, JacobiOptions options) {
    const std::size_t n = m.rows();
    if (n == 0 || m.cols() != n) throw SpectralError("eigenvalues need a non-empty square matrix, got " + m.shape_string());
    if (!m.all_finite()) throw SpectralError("matrix has non-finite entries");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (std::abs(m(i, j) - m(j, i)) > options.symmetry_tolerance) {
                throw SpectralError("matrix is not symmetric at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
            }
        }
    }

    std::vector<double> a(m.data().begin(), m.data().end());
    // Round-robin ordering: each step applies up to n/2 disjoint rotations, first to row pairs, then to
    // column pairs one row at a time. Disjoint rotations commute, so every pivot is still zeroed exactly,
    // and the matrix is only ever walked row by row.
    const std::size_t slots = n + (n % 2);
    std::vector<std::size_t> ring(slots);
    for (std::size_t i = 0; i < slots; ++i) ring[i] = i;
    struct Rotation {
        std::size_t p, q;
        double c, s, app, aqq;
    };
    std::vector<Rotation> rots;
    rots.reserve(slots / 2);
    // Rotations on entries this small cannot affect convergence; skipping them saves the sparse start.
    const double skip_below = options.tolerance * 1e-3;
    std::size_t sweep = 0;
    while (max_off_diagonal(a, n) >= options.tolerance) {
        if (sweep++ == options.max_sweeps) {
            throw SpectralError("Jacobi did not converge in " + std::to_string(options.max_sweeps) + " sweeps");
        }
        for (std::size_t step = 0; step + 1 < slots; ++step) {
            rots.clear();
            for (std::size_t i = 0; i < slots / 2; ++i) {
                std::size_t p = ring[i], q = ring[slots - 1 - i];
                if (p >= n || q >= n) continue;
                if (p > q) std::swap(p, q);
                const double apq = a[p * n + q];
                if (std::abs(apq) < skip_below) continue;
                const double app = a[p * n + p];
                const double aqq = a[q * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                rots.push_back({p, q, c, t * c, app - t * apq, aqq + t * apq});
            }
            std::rotate(ring.begin() + 1, ring.end() - 1, ring.end());
            if (rots.empty()) continue;
            for (const auto& r : rots) {
                double* rp = &a[r.p * n];
                double* rq = &a[r.q * n];
                for (std::size_t k = 0; k < n; ++k) {
                    const double x = rp[k];
                    const double y = rq[k];
                    rp[k] = r.c * x - r.s * y;
                    rq[k] = r.s * x + r.c * y;
                }
            }
            for (std::size_t k = 0; k < n; ++k) {
                double* row = &a[k * n];
                for (const auto& r : rots) {
                    const double x = row[r.p];
                    const double y = row[r.q];
                    row[r.p] = r.c * x - r.s * y;
                    row[r.q] = r.s * x + r.c * y;
                }
            }
            for (const auto& r : rots) {
                a[r.p * n + r.p] = r.app;
                a[r.q * n + r.q] = r.aqq;
                a[r.p * n + r.q] = 0.0;
                a[r.q * n + r.p] = 0.0;
            }
        }
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a[i * n + i];
    std::sort(eig.begin(), eig.end(), std::greater<>());
    return eig;
}

std::string_view to_string(SpectrumGroup g) {
    switch (g) {
        case SpectrumGroup::low: return "low";
        case SpectrumGroup::high: return "high";
        case SpectrumGroup::full: return "full";
    }
    return "?";
}

SpectrumGroup parse_spectrum_group(std::string_view s) {
    if (s == "low") return SpectrumGroup::low;
    if (s == "high") return SpectrumGroup::high;
    if (s == "full") return SpectrumGroup::full;
    throw SpectralError("unknown group '" + std::string(s) + "' (expected low, high or full)");
}

std::string_view to_string(Normalization n) {
    return n == Normalization::subgraph ? "subgraph" : "full-restricted";
}

Normalization parse_normalization(std::string_view s) {
    if (s == "subgraph") return Normalization::subgraph;
    if (s == "full-restricted") return Normalization::full_restricted;
    throw SpectralError("unknown normalization '" + std::string(s) + "' (expected subgraph or full-restricted)");
}

double Spectrum::dispersion() const {
    if (eigenvalues.empty()) return 0.0;
    double mean = 0.0;
    for (double l : eigenvalues) mean += std::abs(l);
    mean /= static_cast<double>(eigenvalues.size());
    double ss = 0.0;
    for (double l : eigenvalues) ss += (std::abs(l) - mean) * (std::abs(l) - mean);
    return std::sqrt(ss / static_cast<double>(eigenvalues.size()));
}

double Spectrum::mean_pairwise_gap() const {
    const std::size_t n = eigenvalues.size();
    if (n < 2) return 0.0;
    // Sorted descending: sum_{i<j} (l_i - l_j) = sum_i l_i * (n - 1 - 2i).
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += eigenvalues[i] * (static_cast<double>(n) - 1.0 - 2.0 * static_cast<double>(i));
    }
    return total / (static_cast<double>(n) * static_cast<double>(n - 1) / 2.0);
}

std::size_t default_dense_limit() {
    const char* env = std::getenv("GNNSTRAT_DENSE_EIG_LIMIT");
    if (env == nullptr || *env == '\0') return kDefaultDenseLimit;
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0' || v == 0) throw SpectralError(std::string("invalid GNNSTRAT_DENSE_EIG_LIMIT: ") + env);
    return static_cast<std::size_t>(v);
}

std::vector<std::vector<NodeId>> connected_components(const CsrGraph& g) {
    std::vector<std::vector<NodeId>> out;
    std::vector<bool> seen(g.num_nodes(), false);
    std::vector<NodeId> stack;
    for (NodeId start = 0; start < g.num_nodes(); ++start) {
        if (seen[start]) continue;
        std::vector<NodeId> comp;
        seen[start] = true;
        stack.push_back(start);
        while (!stack.empty()) {
            const NodeId v = stack.back();
            stack.pop_back();
            comp.push_back(v);
            for (NodeId u : g.neighbors(v)) {
                if (!seen[u]) {
                    seen[u] = true;
                    stack.push_back(u);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

Spectrum partition_spectrum(const CsrGraph& graph, const DegreePartition& partition, SpectrumGroup group,
                            const SpectrumOptions& options) {
    if (partition.size() != graph.num_nodes()) throw SpectralError("partition does not match graph");
    std::vector<NodeId> members;
    if (group == SpectrumGroup::full) {
        members.resize(graph.num_nodes());
        for (NodeId v = 0; v < graph.num_nodes(); ++v) members[v] = v;
    } else {
        members = group == SpectrumGroup::low ? partition.low_nodes() : partition.high_nodes();
    }
    if (members.empty()) throw SpectralError(std::string(to_string(group)) + "-degree group is empty");
    const std::size_t limit = options.dense_limit.value_or(default_dense_limit());
    if (members.size() > limit) {
        throw SpectralError(std::string(to_string(group)) + " group has " + std::to_string(members.size()) +
                            " nodes, above the dense eigensolver limit of " + std::to_string(limit) +
                            "; sample the group or raise GNNSTRAT_DENSE_EIG_LIMIT");
    }

    CsrGraph adj;
    if (options.normalization == Normalization::subgraph) {
        adj = renormalized_adjacency(induced_subgraph(graph, members).graph);
    } else {
        adj = induced_subgraph(renormalized_adjacency(graph), members).graph;
    }

    Spectrum s;
    s.group = group;
    s.num_nodes = members.size();
    s.theta = partition.theta;
    s.normalization = options.normalization;
    s.eigenvalues.reserve(members.size());
    std::vector<std::int64_t> local(adj.num_nodes(), -1);
    for (const auto& comp : connected_components(adj)) {
        for (std::size_t i = 0; i < comp.size(); ++i) local[comp[i]] = static_cast<std::int64_t>(i);
        const auto eig = block_eigenvalues(adj, comp, local, options.jacobi);
        s.eigenvalues.insert(s.eigenvalues.end(), eig.begin(), eig.end());
        for (NodeId v : comp) local[v] = -1;
    }
    std::sort(s.eigenvalues.begin(), s.eigenvalues.end(), std::greater<>());
    return s;
}

Spectrum graph_spectrum(const CsrGraph& graph, const SpectrumOptions& options) {
    DegreePartition all;
    all.low_mask.assign(graph.num_nodes(), true);
    all.high_mask.assign(graph.num_nodes(), false);
    all.low_count = graph.num_nodes();
    return partition_spectrum(graph, all, SpectrumGroup::full, options);
}

void write_spectrum_csv(std::ostream& out, const Spectrum& s) {
    out << "index,eigenvalue\n";
    char buf[64];
    for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g", s.eigenvalues[i]);
        out << i << ',' << buf << '\n';
    }
}

nlohmann::json spectrum_summary_json(const Spectrum& s) {
    nlohmann::json j;
    j["group"] = to_string(s.group);
    j["n"] = s.num_nodes;
    j["theta"] = s.theta ? nlohmann::json(*s.theta) : nlohmann::json(nullptr);
    j["normalization"] = to_string(s.normalization);
    j["dispersion"] = s.dispersion();
    j["mean_pairwise_gap"] = s.mean_pairwise_gap();
    j["min_eigenvalue"] = s.eigenvalues.back();
    j["max_eigenvalue"] = s.eigenvalues.front();
    return j;
}

}  // namespace gnnstrat
