#include "gnnstrat/optim.hpp"

#include <cmath>
#include <random>
#include <string>

namespace gnnstrat {

void adam_step(std::span<Tensor> params, AdamState& state, double lr, double weight_decay) {
    if (state.first_moment.empty() && state.second_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.rows(), p.cols());
            state.second_moment.emplace_back(p.rows(), p.cols());
        }
    }
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw ShapeError("adam state tracks " + std::to_string(state.first_moment.size()) + " parameters, got " +
                         std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& p = params[i];
        if (!state.first_moment[i].same_shape(p.value()) || !state.second_moment[i].same_shape(p.value())) {
            throw ShapeError("adam moment shape differs from parameter '" + p.name() + "'");
        }
        if (p.has_grad()) {
            if (!p.grad().same_shape(p.value())) throw ShapeError("gradient shape differs for '" + p.name() + "'");
            if (!p.grad().all_finite()) throw OptimizerError("non-finite gradient for parameter '" + p.name() + "'");
        }
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(state.beta1, t);
    const double bias2 = 1.0 - std::pow(state.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        auto w = p.mutable_value().data();
        auto m = state.first_moment[i].data();
        auto v = state.second_moment[i].data();
        const bool has_grad = p.has_grad();
        const auto g = p.grad().data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double grad = (has_grad ? g[k] : 0.0) + weight_decay * w[k];
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * grad;
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * grad * grad;
            const double m_hat = m[k] / bias1;
            const double v_hat = v[k] / bias2;
            w[k] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("glorot_uniform needs rows, cols >= 1");
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (double& x : m.data()) x = dist(rng);
    return m;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace gnnstrat
