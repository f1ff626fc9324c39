#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gnnstrat/graph.hpp"
#include "gnnstrat/stratify.hpp"
#include "gnnstrat/tensor.hpp"

namespace gnnstrat {

class SpectralError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

struct JacobiOptions {
    double tolerance = 1e-10;      // converged when every |off-diagonal| is below this
    std::size_t max_sweeps = 100;
    double symmetry_tolerance = 1e-12;
};

/// All eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations, sorted descending.
std::vector<double> symmetric_eigenvalues(const Matrix& a, JacobiOptions options = {});

enum class SpectrumGroup { low, high, full };
std::string_view to_string(SpectrumGroup g);
SpectrumGroup parse_spectrum_group(std::string_view s);

enum class Normalization {
    subgraph,          // renormalize the induced subgraph with its own degrees
    full_restricted,   // renormalize the whole graph, then keep the group's rows and columns
};
std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view s);

struct Spectrum {
    SpectrumGroup group = SpectrumGroup::full;
    std::size_t num_nodes = 0;
    std::optional<std::uint32_t> theta;
    Normalization normalization = Normalization::subgraph;
    std::vector<double> eigenvalues;  // descending

    /// Population standard deviation of |lambda|.
    double dispersion() const;
    /// Mean |lambda_i - lambda_j| over unordered pairs i < j.
    double mean_pairwise_gap() const;
};

struct SpectrumOptions {
    Normalization normalization = Normalization::subgraph;
    std::optional<std::size_t> dense_limit;  // default: GNNSTRAT_DENSE_EIG_LIMIT or 5000
    JacobiOptions jacobi;
};

std::size_t default_dense_limit();

/// Spectrum of the renormalized adjacency over one group of `partition`
/// (or over the whole graph for SpectrumGroup::full). Connected components are
/// solved separately; the spectrum of a block-diagonal matrix is the union of its blocks'.
Spectrum partition_spectrum(const CsrGraph& graph, const DegreePartition& partition, SpectrumGroup group,
                            const SpectrumOptions& options = {});
Spectrum graph_spectrum(const CsrGraph& graph, const SpectrumOptions& options = {});

/// Connected components of a (symmetric) graph as ascending node lists, ordered by smallest node.
std::vector<std::vector<NodeId>> connected_components(const CsrGraph& g);

void write_spectrum_csv(std::ostream& out, const Spectrum& s);
nlohmann::json spectrum_summary_json(const Spectrum& s);

}  // namespace gnnstrat
