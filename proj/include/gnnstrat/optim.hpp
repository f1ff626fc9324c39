#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "gnnstrat/tensor.hpp"

namespace gnnstrat {

class OptimizerError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Moment estimates for a fixed list of parameters.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
};

/// One Adam update with coupled L2 decay (grad += weight_decay * param) and
/// bias correction. Parameters that received no gradient are treated as having
/// a zero gradient. Throws OptimizerError naming the parameter on a
/// non-finite gradient; nothing is modified in that case.
void adam_step(std::span<Tensor> params, AdamState& state, double lr, double weight_decay);

/// Uniform(-b, b) with b = sqrt(6 / (rows + cols)).
Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::uint64_t seed);

/// Mixes a base seed with a stream index (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace gnnstrat
