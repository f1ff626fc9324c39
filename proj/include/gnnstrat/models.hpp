#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gnnstrat/autodiff.hpp"
#include "gnnstrat/dataset.hpp"
#include "gnnstrat/graph.hpp"
#include "gnnstrat/stratify.hpp"

namespace gnnstrat {

class ModelError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

enum class Arch { gcn, gat, sage };
enum class Variant { baseline, stratified, random_split };

std::string_view to_string(Arch arch);
std::string_view to_string(Variant variant);
Arch parse_arch(std::string_view s);
Variant parse_variant(std::string_view s);  // accepts "random" for random_split

struct ModelSpec {
    Arch arch = Arch::gcn;
    Variant variant = Variant::baseline;
    std::size_t num_layers = 2;
    std::size_t hidden_dim = 32;
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    std::size_t gat_heads = 1;
    double leaky_slope = 0.2;

    void validate() const;
    std::size_t num_groups() const { return variant == Variant::baseline ? 1 : 2; }
    std::size_t heads() const { return arch == Arch::gat ? gat_heads : 1; }
    /// Input width of layer i (hidden GAT layers concatenate their heads).
    std::size_t layer_input_dim(std::size_t layer) const;
    std::size_t layer_output_dim(std::size_t layer) const;
};

/// Parameters of one degree group in one layer: one weight matrix per head
/// and, for GAT, one attention vector (2*out x 1) per head.
///
/// GCN/GAT weights are in x out and applied as H * W. SAGE weights are
/// 2*in x out, applied as [h || mean] * W.
struct GroupWeights {
    std::vector<Tensor> weights;
    std::vector<Tensor> attentions;
};

/// groups[0] is the low-degree group (the only group of a baseline model), groups[1] the high-degree group.
struct LayerWeights {
    std::vector<GroupWeights> groups;
};

struct ModelWeights {
    std::vector<LayerWeights> layers;

    /// Every parameter in declaration order: layer, group, head, weight before attention.
    std::vector<Tensor> parameters() const;
    ModelWeights clone() const;
};

/// Glorot-uniform initialisation of every matrix and attention vector.
ModelWeights init_weights(const ModelSpec& spec, std::uint64_t seed);

/// Throws ModelError if the weight shapes do not match `spec`.
void check_weights(const ModelSpec& spec, const ModelWeights& weights);

/// Attention edge list: every (target <- source) pair with source in N(target) or
/// source == target, sorted by target then source.
struct AttentionEdges {
    std::size_t num_nodes = 0;
    std::vector<NodeId> targets;
    std::vector<NodeId> sources;
};

AttentionEdges attention_edges(const CsrGraph& g);

/// sigma(A_hat * H * W_g), rows taken from the group of each node.
Tensor gcn_layer(Tape& tape, const Tensor& h, const CsrGraph& norm_adj, const LayerWeights& weights,
                 const DegreePartition* partition, bool apply_activation);

/// Single-layer attention. The group of the target node chooses W and a for all of its in-edges.
/// Multiple heads are concatenated when `concat_heads`, averaged otherwise.
Tensor gat_layer(Tape& tape, const Tensor& h, const AttentionEdges& edges, const LayerWeights& weights,
                 const DegreePartition* partition, bool apply_activation, double leaky_slope,
                 bool concat_heads = true);

/// Attention coefficients of one group/head, one per edge (segment sums are 1).
Tensor gat_attention(Tape& tape, const Tensor& transformed, const Tensor& attention, const AttentionEdges& edges,
                     double leaky_slope);

/// sigma([h || mean_neighbours(h)] * W_g).
Tensor sage_layer(Tape& tape, const Tensor& h, const CsrGraph& mean_adj, const LayerWeights& weights,
                  const DegreePartition* partition, bool apply_activation);

/// Graph operators and the constant first-layer input precomputed for one dataset and architecture.
struct ForwardContext {
    Arch arch = Arch::gcn;
    std::size_t num_nodes = 0;
    CsrGraph norm_adj;
    CsrGraph mean_adj;
    AttentionEdges edges;
    Tensor first_layer_input;  // the feature matrix, with its nonzeros indexed

    static ForwardContext build(const Dataset& ds, Arch arch);
    static ForwardContext build(const CsrGraph& graph, const Matrix& features, Arch arch);
};

/// Logits (n x C): ReLU after every hidden layer, none after the last.
/// `partition` is required unless spec.variant is baseline.
Tensor model_forward(Tape& tape, const ModelSpec& spec, const ModelWeights& weights, const ForwardContext& ctx,
                     const DegreePartition* partition);

/// Checkpoint: versioned binary header (arch, variant, dims, theta) followed by
/// little-endian float64 parameter blocks in declaration order.
struct Checkpoint {
    ModelSpec spec;
    std::optional<std::uint32_t> theta;
    ModelWeights weights;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gnnstrat
