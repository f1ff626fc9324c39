#include "gnnstrat/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

namespace gnnstrat {

Dataset make_power_law_dataset(const SyntheticOptions& o) {
    const std::size_t m = o.edges_per_node;
    if (m == 0 || o.num_nodes <= m + 1) throw std::invalid_argument("synthetic graph needs num_nodes > edges_per_node + 1");
    if (o.num_classes < 2 || o.num_features == 0) throw std::invalid_argument("synthetic graph needs >= 2 classes and features");
    if (o.train_per_class * o.num_classes + o.num_val + o.num_test > o.num_nodes) {
        throw std::invalid_argument("synthetic splits exceed the node count");
    }
    std::mt19937_64 rng(o.seed);

    // Seed clique on m + 1 nodes, then each node attaches to m distinct targets
    // drawn proportionally to degree (uniform pick from the endpoint list).
    std::vector<Edge> edges;
    std::vector<NodeId> endpoints;
    for (NodeId u = 0; u <= m; ++u) {
        for (NodeId v = u + 1; v <= m; ++v) {
            edges.emplace_back(u, v);
            endpoints.push_back(u);
            endpoints.push_back(v);
        }
    }
    for (NodeId v = static_cast<NodeId>(m + 1); v < o.num_nodes; ++v) {
        std::set<NodeId> targets;
        while (targets.size() < m) {
            std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
            targets.insert(endpoints[pick(rng)]);
        }
        for (NodeId t : targets) {
            edges.emplace_back(t, v);
            endpoints.push_back(t);
            endpoints.push_back(v);
        }
    }

    Dataset ds;
    ds.name = "synthetic-power-law";
    ds.graph = CsrGraph::from_undirected_edges(o.num_nodes, edges);
    ds.num_classes = o.num_classes;

    // Labels: mostly inherited from the first attachment target, so neighbours tend to agree.
    ds.labels.assign(o.num_nodes, 0);
    std::uniform_int_distribution<std::uint32_t> any_class(0, static_cast<std::uint32_t>(o.num_classes - 1));
    std::bernoulli_distribution inherit(0.7);
    for (NodeId v = 0; v < o.num_nodes; ++v) {
        const auto nb = ds.graph.neighbors(v);
        const auto earlier = std::find_if(nb.begin(), nb.end(), [v](NodeId u) { return u < v; });
        ds.labels[v] = (earlier != nb.end() && inherit(rng)) ? ds.labels[*earlier] : any_class(rng);
    }

    // Each class owns a block of feature columns that its nodes switch on more often.
    ds.features = Matrix(o.num_nodes, o.num_features, 0.0);
    std::bernoulli_distribution on_own(0.3);
    std::bernoulli_distribution on_other(0.05);
    const std::size_t block = std::max<std::size_t>(1, o.num_features / o.num_classes);
    for (NodeId v = 0; v < o.num_nodes; ++v) {
        for (std::size_t f = 0; f < o.num_features; ++f) {
            const bool own = f / block == ds.labels[v];
            if (own ? on_own(rng) : on_other(rng)) ds.features(v, f) = 1.0;
        }
    }

    std::vector<NodeId> order(o.num_nodes);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> taken(o.num_classes, 0);
    std::vector<bool> used(o.num_nodes, false);
    for (NodeId v : order) {
        if (taken[ds.labels[v]] < o.train_per_class) {
            ++taken[ds.labels[v]];
            ds.split.train.push_back(v);
            used[v] = true;
        }
    }
    for (NodeId v : order) {
        if (used[v]) continue;
        if (ds.split.val.size() < o.num_val) {
            ds.split.val.push_back(v);
        } else if (ds.split.test.size() < o.num_test) {
            ds.split.test.push_back(v);
        }
    }
    validate(ds);
    return ds;
}

}  // namespace gnnstrat
