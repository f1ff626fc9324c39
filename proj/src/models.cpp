#include "gnnstrat/models.hpp"

#include <functional>

#include "gnnstrat/optim.hpp"

namespace gnnstrat {

std::string_view to_string(Arch arch) {
    switch (arch) {
        case Arch::gcn: return "gcn";
        case Arch::gat: return "gat";
        case Arch::sage: return "sage";
    }
    return "?";
}

std::string_view to_string(Variant variant) {
    switch (variant) {
        case Variant::baseline: return "baseline";
        case Variant::stratified: return "stratified";
        case Variant::random_split: return "random";
    }
    return "?";
}

Arch parse_arch(std::string_view s) {
    if (s == "gcn") return Arch::gcn;
    if (s == "gat") return Arch::gat;
    if (s == "sage" || s == "graphsage") return Arch::sage;
    throw std::invalid_argument("unknown model '" + std::string(s) + "' (expected gcn, gat or sage)");
}

Variant parse_variant(std::string_view s) {
    if (s == "baseline") return Variant::baseline;
    if (s == "stratified") return Variant::stratified;
    if (s == "random" || s == "random_split") return Variant::random_split;
    throw std::invalid_argument("unknown variant '" + std::string(s) + "' (expected baseline, stratified or random)");
}

void ModelSpec::validate() const {
    if (num_layers < 1) throw ModelError("num_layers must be >= 1");
    if (hidden_dim < 1 || input_dim < 1 || num_classes < 1) throw ModelError("model dimensions must be >= 1");
    if (heads() < 1) throw ModelError("gat_heads must be >= 1");
}

std::size_t ModelSpec::layer_input_dim(std::size_t layer) const {
    if (layer == 0) return input_dim;
    return hidden_dim * heads();
}

std::size_t ModelSpec::layer_output_dim(std::size_t layer) const {
    return layer + 1 == num_layers ? num_classes : hidden_dim;
}

std::vector<Tensor> ModelWeights::parameters() const {
    std::vector<Tensor> out;
    for (const auto& layer : layers)
        for (const auto& group : layer.groups) {
            for (std::size_t h = 0; h < group.weights.size(); ++h) {
                out.push_back(group.weights[h]);
                if (h < group.attentions.size()) out.push_back(group.attentions[h]);
            }
        }
    return out;
}

ModelWeights ModelWeights::clone() const {
    ModelWeights copy = *this;
    for (auto& layer : copy.layers)
        for (auto& group : layer.groups) {
            for (auto& w : group.weights) w = w.clone();
            for (auto& a : group.attentions) a = a.clone();
        }
    return copy;
}

ModelWeights init_weights(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    ModelWeights weights;
    std::uint64_t stream = 0;
    const char* group_names[] = {"low", "high"};
    for (std::size_t l = 0; l < spec.num_layers; ++l) {
        const std::size_t in = spec.layer_input_dim(l);
        const std::size_t out = spec.layer_output_dim(l);
        const std::size_t rows = spec.arch == Arch::sage ? 2 * in : in;
        LayerWeights layer;
        for (std::size_t g = 0; g < spec.num_groups(); ++g) {
            GroupWeights group;
            const std::string prefix = "layer" + std::to_string(l) + "." +
                                       (spec.num_groups() == 1 ? std::string("shared") : group_names[g]);
            for (std::size_t h = 0; h < spec.heads(); ++h) {
                const std::string suffix = spec.heads() > 1 ? ".head" + std::to_string(h) : "";
                group.weights.push_back(
                    Tensor::parameter(glorot_uniform(rows, out, derive_seed(seed, stream++)), prefix + ".weight" + suffix));
                if (spec.arch == Arch::gat) {
                    group.attentions.push_back(Tensor::parameter(glorot_uniform(2 * out, 1, derive_seed(seed, stream++)),
                                                                 prefix + ".attention" + suffix));
                }
            }
            layer.groups.push_back(std::move(group));
        }
        weights.layers.push_back(std::move(layer));
    }
    return weights;
}

void check_weights(const ModelSpec& spec, const ModelWeights& weights) {
    spec.validate();
    if (weights.layers.size() != spec.num_layers) {
        throw ModelError("weights have " + std::to_string(weights.layers.size()) + " layers, spec expects " +
                         std::to_string(spec.num_layers));
    }
    for (std::size_t l = 0; l < spec.num_layers; ++l) {
        const auto& layer = weights.layers[l];
        if (layer.groups.size() != spec.num_groups()) {
            throw ModelError("layer " + std::to_string(l) + " has " + std::to_string(layer.groups.size()) +
                             " groups, expected " + std::to_string(spec.num_groups()));
        }
        const std::size_t in = spec.layer_input_dim(l);
        const std::size_t out = spec.layer_output_dim(l);
        const std::size_t rows = spec.arch == Arch::sage ? 2 * in : in;
        for (const auto& group : layer.groups) {
            if (group.weights.size() != spec.heads()) throw ModelError("wrong number of heads in layer " + std::to_string(l));
            if (group.attentions.size() != (spec.arch == Arch::gat ? spec.heads() : 0)) {
                throw ModelError("attention vectors do not match architecture in layer " + std::to_string(l));
            }
            for (const auto& w : group.weights) {
                if (w.rows() != rows || w.cols() != out) {
                    throw ModelError("weight '" + w.name() + "' is " + w.value().shape_string() + ", expected " +
                                     std::to_string(rows) + "x" + std::to_string(out));
                }
            }
            for (const auto& a : group.attentions) {
                if (a.rows() != 2 * out || a.cols() != 1) {
                    throw ModelError("attention '" + a.name() + "' is " + a.value().shape_string() + ", expected " +
                                     std::to_string(2 * out) + "x1");
                }
            }
        }
    }
}

AttentionEdges attention_edges(const CsrGraph& g) {
    AttentionEdges edges;
    edges.num_nodes = g.num_nodes();
    edges.targets.reserve(g.num_entries() + g.num_nodes());
    edges.sources.reserve(g.num_entries() + g.num_nodes());
    for (NodeId k = 0; k < g.num_nodes(); ++k) {
        bool self_done = false;
        for (NodeId j : g.neighbors(k)) {
            if (j == k) continue;
            if (!self_done && j > k) {
                edges.targets.push_back(k);
                edges.sources.push_back(k);
                self_done = true;
            }
            edges.targets.push_back(k);
            edges.sources.push_back(j);
        }
        if (!self_done) {
            edges.targets.push_back(k);
            edges.sources.push_back(k);
        }
    }
    return edges;
}

namespace {

using GroupFn = std::function<Tensor(const GroupWeights&)>;

/// Evaluates `fn` with the low group's weights and, for two-group layers,
/// with the high group's as well, then selects rows by the partition mask.
Tensor per_group(Tape& tape, const LayerWeights& weights, const DegreePartition* partition, const GroupFn& fn) {
    if (weights.groups.empty()) throw ModelError("layer has no weight groups");
    if (weights.groups.size() == 1) return fn(weights.groups.front());
    if (partition == nullptr) throw ModelError("stratified layer requires a degree partition");
    Tensor low = fn(weights.groups[0]);
    Tensor high = fn(weights.groups[1]);
    return row_merge(tape, partition->low_mask, low, high);
}

Tensor maybe_relu(Tape& tape, const Tensor& x, bool apply) { return apply ? activate(tape, x, Activation::relu()) : x; }

void check_partition(const DegreePartition* partition, std::size_t n) {
    if (partition != nullptr && partition->size() != n) {
        throw ShapeError("partition covers " + std::to_string(partition->size()) + " nodes, layer input has " +
                         std::to_string(n));
    }
}

}  // namespace

// A_hat (H W) rather than (A_hat H) W: the product then runs on H, which is sparse at the input layer.
Tensor gcn_layer(Tape& tape, const Tensor& h, const CsrGraph& norm_adj, const LayerWeights& weights,
                 const DegreePartition* partition, bool apply_activation) {
    check_partition(partition, h.rows());
    return per_group(tape, weights, partition, [&](const GroupWeights& g) {
        return maybe_relu(tape, spmm(tape, norm_adj, matmul(tape, h, g.weights.at(0))), apply_activation);
    });
}

Tensor gat_attention(Tape& tape, const Tensor& transformed, const Tensor& attention, const AttentionEdges& edges,
                     double leaky_slope) {
    const std::size_t width = transformed.cols();
    if (attention.rows() != 2 * width || attention.cols() != 1) {
        throw ShapeError("attention vector " + attention.value().shape_string() + " does not match feature width " +
                         std::to_string(width));
    }
    const Tensor target_part = slice_rows(tape, attention, 0, width);
    const Tensor source_part = slice_rows(tape, attention, width, 2 * width);
    const Tensor target_scores = matmul(tape, transformed, target_part);
    const Tensor source_scores = matmul(tape, transformed, source_part);
    const Tensor raw = edge_score_sum(tape, target_scores, source_scores, edges.targets, edges.sources);
    const Tensor scores = activate(tape, raw, Activation::leaky_relu(leaky_slope));
    return segment_softmax(tape, scores, edges.targets, edges.num_nodes);
}

Tensor gat_layer(Tape& tape, const Tensor& h, const AttentionEdges& edges, const LayerWeights& weights,
                 const DegreePartition* partition, bool apply_activation, double leaky_slope, bool concat_heads) {
    if (h.rows() != edges.num_nodes) {
        throw ShapeError("gat_layer: " + std::to_string(h.rows()) + " feature rows for " +
                         std::to_string(edges.num_nodes) + " nodes");
    }
    check_partition(partition, h.rows());
    return per_group(tape, weights, partition, [&](const GroupWeights& g) {
        if (g.attentions.size() != g.weights.size()) throw ModelError("gat_layer: missing attention vectors");
        std::optional<Tensor> combined;
        for (std::size_t head = 0; head < g.weights.size(); ++head) {
            const Tensor transformed = matmul(tape, h, g.weights[head]);
            const Tensor alpha = gat_attention(tape, transformed, g.attentions[head], edges, leaky_slope);
            Tensor out = segment_weighted_sum(tape, alpha, transformed, edges.targets, edges.sources, edges.num_nodes);
            if (!combined) {
                combined = out;
            } else {
                combined = concat_heads ? concat_cols(tape, *combined, out) : add(tape, *combined, out);
            }
        }
        Tensor result = *combined;
        if (!concat_heads && g.weights.size() > 1) result = scale(tape, result, 1.0 / static_cast<double>(g.weights.size()));
        return maybe_relu(tape, result, apply_activation);
    });
}

// [h || M h] W  ==  h W_self + M (h W_neigh), with W_self / W_neigh the top / bottom halves of W.
Tensor sage_layer(Tape& tape, const Tensor& h, const CsrGraph& mean_adj, const LayerWeights& weights,
                  const DegreePartition* partition, bool apply_activation) {
    check_partition(partition, h.rows());
    const std::size_t in = h.cols();
    return per_group(tape, weights, partition, [&](const GroupWeights& g) {
        const Tensor& w = g.weights.at(0);
        if (w.rows() != 2 * in) {
            throw ShapeError("sage weight " + w.value().shape_string() + " does not match input width " +
                             std::to_string(in));
        }
        const Tensor self = matmul(tape, h, slice_rows(tape, w, 0, in));
        const Tensor neigh = spmm(tape, mean_adj, matmul(tape, h, slice_rows(tape, w, in, 2 * in)));
        return maybe_relu(tape, add(tape, self, neigh), apply_activation);
    });
}

ForwardContext ForwardContext::build(const Dataset& ds, Arch arch) { return build(ds.graph, ds.features, arch); }

ForwardContext ForwardContext::build(const CsrGraph& graph, const Matrix& features, Arch arch) {
    if (features.rows() != graph.num_nodes()) {
        throw ShapeError("feature matrix has " + std::to_string(features.rows()) + " rows for " +
                         std::to_string(graph.num_nodes()) + " nodes");
    }
    ForwardContext ctx;
    ctx.arch = arch;
    ctx.num_nodes = graph.num_nodes();
    ctx.first_layer_input = Tensor::constant(features);
    ctx.first_layer_input.index_nonzeros();
    switch (arch) {
        case Arch::gcn: ctx.norm_adj = renormalized_adjacency(graph); break;
        case Arch::sage: ctx.mean_adj = mean_adjacency(graph); break;
        case Arch::gat: ctx.edges = attention_edges(graph); break;
    }
    return ctx;
}

Tensor model_forward(Tape& tape, const ModelSpec& spec, const ModelWeights& weights, const ForwardContext& ctx,
                     const DegreePartition* partition) {
    check_weights(spec, weights);
    if (ctx.arch != spec.arch) throw ModelError("forward context was built for a different architecture");
    if (spec.variant != Variant::baseline && partition == nullptr) {
        throw ModelError(std::string(to_string(spec.variant)) + " model requires a degree partition");
    }
    const DegreePartition* groups = spec.variant == Variant::baseline ? nullptr : partition;
    Tensor h = ctx.first_layer_input;
    for (std::size_t l = 0; l < spec.num_layers; ++l) {
        const bool last = l + 1 == spec.num_layers;
        const auto& lw = weights.layers[l];
        switch (spec.arch) {
            case Arch::gcn:
                h = gcn_layer(tape, h, ctx.norm_adj, lw, groups, !last);
                break;
            case Arch::sage:
                h = sage_layer(tape, h, ctx.mean_adj, lw, groups, !last);
                break;
            case Arch::gat:
                h = gat_layer(tape, h, ctx.edges, lw, groups, !last, spec.leaky_slope, /*concat_heads=*/!last);
                break;
        }
    }
    return h;
}

}  // namespace gnnstrat
