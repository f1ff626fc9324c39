#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gnnstrat/models.hpp"
#include "support.hpp"

using namespace gnnstrat;
using namespace testing_support;

namespace {

const Arch kArchs[] = {Arch::gcn, Arch::gat, Arch::sage};

double relu(double x) { return x > 0 ? x : 0.0; }

ModelSpec small_spec(Arch arch, Variant variant, std::size_t layers = 2) {
    ModelSpec s;
    s.arch = arch;
    s.variant = variant;
    s.num_layers = layers;
    s.hidden_dim = 4;
    s.input_dim = 3;
    s.num_classes = 3;
    return s;
}

std::vector<double> row_times(std::span<const double> x, const Matrix& w) {
    std::vector<double> out(w.cols(), 0.0);
    for (std::size_t k = 0; k < x.size(); ++k)
        for (std::size_t j = 0; j < w.cols(); ++j) out[j] += x[k] * w(k, j);
    return out;
}

const Matrix& group_w(const LayerWeights& lw, const DegreePartition& p, std::size_t v) {
    return lw.groups.at(lw.groups.size() == 1 || p.low_mask[v] ? 0 : 1).weights.at(0).value();
}

// sigma(sum_u A_hat[v,u] h_u W_g(v)) one node at a time, A_hat from its definition.
Matrix naive_gcn(const CsrGraph& g, const Matrix& h, const LayerWeights& lw, const DegreePartition& p, bool act) {
    const auto deg = degrees(g);
    Matrix out(g.num_nodes(), lw.groups[0].weights[0].cols());
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        std::vector<double> agg(h.cols(), 0.0);
        auto take = [&](NodeId u) {
            const double c = 1.0 / std::sqrt((deg[v] + 1.0) * (deg[u] + 1.0));
            for (std::size_t k = 0; k < h.cols(); ++k) agg[k] += c * h(u, k);
        };
        take(v);
        for (NodeId u : g.neighbors(v)) take(u);
        const auto y = row_times(agg, group_w(lw, p, v));
        for (std::size_t j = 0; j < y.size(); ++j) out(v, j) = act ? relu(y[j]) : y[j];
    }
    return out;
}

Matrix naive_gat(const CsrGraph& g, const Matrix& h, const LayerWeights& lw, const DegreePartition& p, bool act,
                 double slope) {
    const std::size_t f = lw.groups[0].weights[0].cols();
    Matrix out(g.num_nodes(), f);
    for (NodeId k = 0; k < g.num_nodes(); ++k) {
        const std::size_t gi = lw.groups.size() == 1 || p.low_mask[k] ? 0 : 1;
        const Matrix& w = lw.groups[gi].weights[0].value();
        const Matrix& a = lw.groups[gi].attentions[0].value();
        std::vector<NodeId> nb{k};
        for (NodeId j : g.neighbors(k)) nb.push_back(j);
        const auto zk = row_times(h.row(k), w);
        std::vector<std::vector<double>> z;
        std::vector<double> e;
        for (NodeId j : nb) {
            z.push_back(row_times(h.row(j), w));
            double s = 0.0;
            for (std::size_t c = 0; c < f; ++c) s += a(c, 0) * zk[c] + a(f + c, 0) * z.back()[c];
            e.push_back(s > 0 ? s : slope * s);
        }
        double mx = e[0], total = 0.0;
        for (double x : e) mx = std::max(mx, x);
        for (double& x : e) total += (x = std::exp(x - mx));
        for (std::size_t c = 0; c < f; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < nb.size(); ++i) s += e[i] / total * z[i][c];
            out(k, c) = act ? relu(s) : s;
        }
    }
    return out;
}

Matrix naive_sage(const CsrGraph& g, const Matrix& h, const LayerWeights& lw, const DegreePartition& p, bool act) {
    Matrix out(g.num_nodes(), lw.groups[0].weights[0].cols());
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        std::vector<double> joined(h.row(v).begin(), h.row(v).end());
        std::vector<double> mean(h.cols(), 0.0);
        for (NodeId u : g.neighbors(v))
            for (std::size_t k = 0; k < h.cols(); ++k) mean[k] += h(u, k) / static_cast<double>(g.degree(v));
        joined.insert(joined.end(), mean.begin(), mean.end());
        const auto y = row_times(joined, group_w(lw, p, v));
        for (std::size_t j = 0; j < y.size(); ++j) out(v, j) = act ? relu(y[j]) : y[j];
    }
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

/// Copies group 0 onto group 1 in place (tied weights).
void tie_groups(ModelWeights& w) {
    for (auto& layer : w.layers) {
        auto& low = layer.groups[0];
        auto& high = layer.groups[1];
        for (std::size_t h = 0; h < low.weights.size(); ++h) {
            high.weights[h].mutable_value() = low.weights[h].value();
            if (h < low.attentions.size()) high.attentions[h].mutable_value() = low.attentions[h].value();
        }
    }
}

ModelWeights group0_only(const ModelWeights& w) {
    ModelWeights out;
    for (const auto& layer : w.layers) out.layers.push_back(LayerWeights{{layer.groups[0]}});
    return out;
}

Matrix forward(const ModelSpec& spec, const ModelWeights& w, const CsrGraph& g, const Matrix& x,
               const DegreePartition* p) {
    const auto ctx = ForwardContext::build(g, x, spec.arch);
    Tape tape(Tape::Recording::off);
    return model_forward(tape, spec, w, ctx, p).value();
}

}  // namespace

TEST(Layers, StratifiedMatchesNaivePerNodeOracle) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 6 + trial % 3;
        const auto g = random_graph(n, 0.4, rng);
        const auto h = random_matrix(n, 3, rng);
        const auto p = random_two_groups(n, rng);
        for (Arch arch : kArchs) {
            const auto spec = small_spec(arch, Variant::stratified, 1);
            const auto w = init_weights(spec, rng());
            const auto& lw = w.layers[0];
            Tape tape(Tape::Recording::off);
            const auto hx = Tensor::constant(h);
            for (bool act : {true, false}) {
                Matrix got, want;
                switch (arch) {
                    case Arch::gcn:
                        got = gcn_layer(tape, hx, renormalized_adjacency(g), lw, &p, act).value();
                        want = naive_gcn(g, h, lw, p, act);
                        break;
                    case Arch::gat:
                        got = gat_layer(tape, hx, attention_edges(g), lw, &p, act, 0.2).value();
                        want = naive_gat(g, h, lw, p, act, 0.2);
                        break;
                    case Arch::sage:
                        got = sage_layer(tape, hx, mean_adjacency(g), lw, &p, act).value();
                        want = naive_sage(g, h, lw, p, act);
                        break;
                }
                EXPECT_LE(max_abs_diff(got, want), 1e-12) << to_string(arch) << " trial " << trial;
            }
        }
    }
}

TEST(Layers, IsolatedSageNodeUsesZeroAggregate) {
    const auto g = CsrGraph::from_undirected_edges(2, {});
    const auto h = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
    const auto spec = small_spec(Arch::sage, Variant::baseline, 1);
    const auto w = init_weights(spec, 3);
    Tape tape(Tape::Recording::off);
    const auto got = sage_layer(tape, Tensor::constant(h), mean_adjacency(g), w.layers[0], nullptr, false).value();
    const auto& wm = w.layers[0].groups[0].weights[0].value();
    for (std::size_t j = 0; j < got.cols(); ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < 3; ++k) s += h(1, k) * wm(k, j);
        EXPECT_NEAR(got(1, j), s, 1e-15);
    }
}

TEST(Gat, IdenticalFeaturesGiveUniformAttention) {
    const std::vector<Edge> edges{{0, 1}, {0, 2}};
    const auto g = CsrGraph::from_undirected_edges(3, edges);
    const auto e = attention_edges(g);
    std::mt19937_64 rng(42);
    const auto row = random_matrix(1, 4, rng);
    Matrix z(3, 4);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) z(i, j) = row(0, j);
    Tape tape(Tape::Recording::off);
    const auto alpha = gat_attention(tape, Tensor::constant(z), Tensor::constant(random_matrix(8, 1, rng)), e, 0.2);
    for (std::size_t k = 0; k < e.targets.size(); ++k) {
        if (e.targets[k] == 0) EXPECT_NEAR(alpha.at(k, 0), 1.0 / 3.0, 1e-15);
    }
}

TEST(Gat, AttentionRowsSumToOne) {
    std::mt19937_64 rng(43);
    const auto g = random_graph(30, 0.2, rng);
    const auto e = attention_edges(g);
    Tape tape(Tape::Recording::off);
    const auto alpha = gat_attention(tape, Tensor::constant(random_matrix(30, 5, rng, -3, 3)),
                                     Tensor::constant(random_matrix(10, 1, rng)), e, 0.2);
    std::vector<double> sums(30, 0.0);
    for (std::size_t k = 0; k < e.targets.size(); ++k) sums[e.targets[k]] += alpha.at(k, 0);
    for (double s : sums) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Gat, EdgesIncludeSelfAndAreSorted) {
    const std::vector<Edge> edges{{0, 2}, {1, 2}};
    const auto e = attention_edges(CsrGraph::from_undirected_edges(3, edges));
    EXPECT_EQ(e.targets, (std::vector<NodeId>{0, 0, 1, 1, 2, 2, 2}));
    EXPECT_EQ(e.sources, (std::vector<NodeId>{0, 2, 1, 2, 0, 1, 2}));
}

TEST(Model, TiedWeightsReproduceBaselineBitExactly) {
    std::mt19937_64 rng(44);
    for (int instance = 0; instance < 50; ++instance) {
        const std::size_t n = 5 + instance % 20;
        const auto g = random_graph(n, 0.3, rng);
        const auto x = random_matrix(n, 3, rng);
        const auto p = random_two_groups(n, rng);
        for (Arch arch : kArchs) {
            auto strat = init_weights(small_spec(arch, Variant::stratified), rng());
            tie_groups(strat);
            const auto a = forward(small_spec(arch, Variant::stratified), strat, g, x, &p);
            const auto b = forward(small_spec(arch, Variant::baseline), group0_only(strat), g, x, nullptr);
            ASSERT_EQ(a, b) << to_string(arch) << " instance " << instance;
        }
    }
}

TEST(Model, AllLowPartitionEqualsBaselineWithLowWeights) {
    std::mt19937_64 rng(45);
    const auto g = random_graph(12, 0.3, rng);
    const auto x = random_matrix(12, 3, rng);
    DegreePartition all_low;
    all_low.low_mask.assign(12, true);
    all_low.high_mask.assign(12, false);
    all_low.low_count = 12;
    for (Arch arch : kArchs) {
        const auto w = init_weights(small_spec(arch, Variant::stratified), rng());
        EXPECT_EQ(forward(small_spec(arch, Variant::stratified), w, g, x, &all_low),
                  forward(small_spec(arch, Variant::baseline), group0_only(w), g, x, nullptr));
    }
}

TEST(Model, HighWeightsOnlyAffectHighRows) {
    std::mt19937_64 rng(46);
    for (int trial = 0; trial < 10; ++trial) {
        const auto g = random_graph(15, 0.25, rng);
        const auto x = random_matrix(15, 3, rng);
        const auto p = random_two_groups(15, rng);
        for (Arch arch : kArchs) {
            const auto spec = small_spec(arch, Variant::stratified, 1);
            auto w = init_weights(spec, rng());
            const auto before = forward(spec, w, g, x, &p);
            w.layers[0].groups[1].weights[0].mutable_value() = random_matrix(spec.arch == Arch::sage ? 6 : 3, 3, rng);
            if (arch == Arch::gat) w.layers[0].groups[1].attentions[0].mutable_value() = random_matrix(6, 1, rng);
            const auto after = forward(spec, w, g, x, &p);
            for (std::size_t v = 0; v < 15; ++v) {
                const bool changed = !std::equal(before.row(v).begin(), before.row(v).end(), after.row(v).begin());
                if (p.low_mask[v]) ASSERT_FALSE(changed) << to_string(arch) << " node " << v;
            }
        }
    }
}

TEST(Model, PermutationEquivariance) {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 14;
        const auto g = random_graph(n, 0.3, rng);
        const auto x = random_matrix(n, 3, rng);
        const auto p = random_two_groups(n, rng);
        std::vector<NodeId> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);

        std::vector<Edge> edges;
        for (auto [u, v] : g.edge_list()) edges.emplace_back(perm[u], perm[v]);
        const auto pg = CsrGraph::from_undirected_edges(n, edges);
        Matrix px(n, 3);
        DegreePartition pp = p;
        for (std::size_t v = 0; v < n; ++v) {
            for (std::size_t k = 0; k < 3; ++k) px(perm[v], k) = x(v, k);
            pp.low_mask[perm[v]] = p.low_mask[v];
            pp.high_mask[perm[v]] = p.high_mask[v];
        }
        for (Arch arch : kArchs) {
            for (Variant variant : {Variant::baseline, Variant::stratified}) {
                const auto spec = small_spec(arch, variant);
                const auto w = init_weights(spec, rng());
                const auto a = forward(spec, w, g, x, &p);
                const auto b = forward(spec, w, pg, px, &pp);
                for (std::size_t v = 0; v < n; ++v)
                    for (std::size_t c = 0; c < 3; ++c) ASSERT_NEAR(a(v, c), b(perm[v], c), 1e-12);
            }
        }
    }
}

TEST(Model, GradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(48);
    for (Arch arch : kArchs) {
        for (Variant variant : {Variant::baseline, Variant::stratified}) {
            const auto g = random_graph(10, 0.3, rng);
            const auto ctx = ForwardContext::build(g, random_matrix(10, 3, rng), arch);
            const auto p = random_two_groups(10, rng);
            const auto spec = small_spec(arch, variant);
            const auto w = init_weights(spec, rng());
            std::vector<std::uint32_t> labels(10);
            for (auto& l : labels) l = static_cast<std::uint32_t>(rng() % 3);
            const auto mask = all_nodes(10);
            const double err = max_gradient_error(w.parameters(), [&](Tape& t) {
                return cross_entropy_masked(t, model_forward(t, spec, w, ctx, &p), labels, mask);
            });
            EXPECT_LE(err, 1e-4) << to_string(arch) << "/" << to_string(variant);
        }
    }
}

TEST(Model, MultiHeadGatShapesAndGradients) {
    std::mt19937_64 rng(49);
    auto spec = small_spec(Arch::gat, Variant::stratified);
    spec.gat_heads = 3;
    const auto g = random_graph(9, 0.35, rng);
    const auto ctx = ForwardContext::build(g, random_matrix(9, 3, rng), Arch::gat);
    const auto p = random_two_groups(9, rng);
    const auto w = init_weights(spec, 5);
    EXPECT_EQ(w.layers[1].groups[0].weights[0].rows(), 12u);
    Tape tape(Tape::Recording::off);
    const auto logits = model_forward(tape, spec, w, ctx, &p);
    EXPECT_EQ(logits.cols(), 3u);
    const auto mask = all_nodes(9);
    const std::vector<std::uint32_t> labels{0, 1, 2, 0, 1, 2, 0, 1, 2};
    EXPECT_LE(max_gradient_error(w.parameters(),
                                 [&](Tape& t) { return cross_entropy_masked(t, model_forward(t, spec, w, ctx, &p), labels, mask); }),
              1e-4);
}

TEST(Model, StratifiedWithoutPartitionThrows) {
    std::mt19937_64 rng(50);
    const auto g = random_graph(5, 0.5, rng);
    const auto spec = small_spec(Arch::gcn, Variant::stratified);
    EXPECT_THROW(forward(spec, init_weights(spec, 1), g, random_matrix(5, 3, rng), nullptr), ModelError);
    EXPECT_THROW(forward(spec, init_weights(small_spec(Arch::gcn, Variant::baseline), 1), g, random_matrix(5, 3, rng),
                         nullptr),
                 ModelError);
}

TEST(Model, CoraLogitsShape) {
    const auto ds = load_dataset(GNNSTRAT_CORA_DIR);
    ModelSpec spec;
    spec.input_dim = ds.num_features();
    spec.num_classes = ds.num_classes;
    const auto ctx = ForwardContext::build(ds, Arch::gcn);
    Tape tape(Tape::Recording::off);
    const auto logits = model_forward(tape, spec, init_weights(spec, 0), ctx, nullptr);
    EXPECT_EQ(logits.rows(), 2708u);
    EXPECT_EQ(logits.cols(), 7u);
}

TEST(Checkpoint, RoundTripsAndRejectsTrailingBytes) {
    auto spec = small_spec(Arch::gat, Variant::stratified);
    spec.gat_heads = 2;
    const Checkpoint ckpt{spec, 3u, init_weights(spec, 9)};
    const auto path = std::filesystem::temp_directory_path() / "gnnstrat_ckpt_test.bin";
    save_checkpoint(path, ckpt);
    const auto back = load_checkpoint(path);
    EXPECT_EQ(back.theta, 3u);
    EXPECT_EQ(back.spec.gat_heads, 2u);
    const auto a = ckpt.weights.parameters();
    const auto b = back.weights.parameters();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].value(), b[i].value());
        EXPECT_EQ(a[i].name(), b[i].name());
    }
    {
        std::ofstream f(path, std::ios::binary | std::ios::app);
        f.put('x');
    }
    EXPECT_THROW(load_checkpoint(path), ModelError);
    std::filesystem::remove(path);
}
