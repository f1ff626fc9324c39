#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "gnnstrat/autodiff.hpp"
#include "gnnstrat/dataset.hpp"
#include "gnnstrat/graph.hpp"
#include "gnnstrat/stratify.hpp"

namespace testing_support {

using namespace gnnstrat;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(rows, cols);
    for (auto& x : m.data()) x = u(rng);
    return m;
}

/// Erdos-Renyi graph G(n, p) without self-loops.
inline CsrGraph random_graph(std::size_t n, double p, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(p);
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u) {
        for (NodeId v = u + 1; v < n; ++v) {
            if (coin(rng)) edges.emplace_back(u, v);
        }
    }
    return CsrGraph::from_undirected_edges(n, edges);
}

/// Random partition with both groups nonempty (n >= 2).
inline DegreePartition random_two_groups(std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> k(1, n - 1);
    return random_partition(n, k(rng), rng());
}

/// Relative error ||a - b|| / max(||a||, ||b||) (0 when both vanish).
inline double relative_error(const Matrix& a, const Matrix& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
        na += a.data()[i] * a.data()[i];
        nb += b.data()[i] * b.data()[i];
    }
    const double scale = std::sqrt(std::max(na, nb));
    return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

/// Central finite differences of a scalar function of `params`.
inline std::vector<Matrix> numeric_gradients(std::vector<Tensor>& params, const std::function<double()>& f,
                                             double h = 1e-5) {
    std::vector<Matrix> out;
    for (auto& p : params) {
        Matrix g(p.rows(), p.cols());
        auto values = p.mutable_value().data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = f();
            values[i] = saved - h;
            const double down = f();
            values[i] = saved;
            g.data()[i] = (up - down) / (2.0 * h);
        }
        out.push_back(std::move(g));
    }
    return out;
}

/// Largest per-parameter relative error between tape gradients and finite differences of `loss`.
inline double max_gradient_error(std::vector<Tensor> params, const std::function<Tensor(Tape&)>& loss) {
    for (auto& p : params) p.zero_grad();
    {
        Tape tape;
        tape.backward(loss(tape));
    }
    std::vector<Matrix> analytic;
    for (auto& p : params) analytic.push_back(p.has_grad() ? p.grad() : Matrix(p.rows(), p.cols()));
    const auto numeric = numeric_gradients(params, [&] {
        Tape tape(Tape::Recording::off);
        return loss(tape).at(0, 0);
    });
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) worst = std::max(worst, relative_error(analytic[i], numeric[i]));
    return worst;
}

/// Small random node-classification problem with every node in exactly one split.
inline Dataset random_dataset(std::size_t n, std::size_t features, std::size_t classes, double p,
                              std::mt19937_64& rng) {
    Dataset ds;
    ds.name = "random";
    ds.graph = random_graph(n, p, rng);
    ds.features = random_matrix(n, features, rng);
    ds.num_classes = classes;
    std::uniform_int_distribution<std::uint32_t> label(0, static_cast<std::uint32_t>(classes - 1));
    for (std::size_t v = 0; v < n; ++v) ds.labels.push_back(label(rng));
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
        auto& bucket = i % 3 == 0 ? ds.split.train : i % 3 == 1 ? ds.split.val : ds.split.test;
        bucket.push_back(order[i]);
    }
    return ds;
}

inline std::vector<std::uint32_t> all_nodes(std::size_t n) {
    std::vector<std::uint32_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

}  // namespace testing_support
