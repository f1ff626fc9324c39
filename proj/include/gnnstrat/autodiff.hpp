#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gnnstrat/tensor.hpp"

namespace gnnstrat {

class AutodiffError : public std::logic_error {
   public:
    using std::logic_error::logic_error;
};

/// Ordered record of differentiable operations.
///
/// Entries are appended in execution order, so every entry comes after the
/// entries that produced its inputs. backward() walks them in exact reverse
/// order and clears the tape. Structural arguments handed to operations by
/// reference (graphs, index spans) must outlive the backward pass.
class Tape {
   public:
    using BackwardFn = std::function<void(const Matrix& output_grad)>;

    enum class Recording { on, off };

    explicit Tape(Recording recording = Recording::on) : recording_(recording == Recording::on) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    ~Tape();

    /// Wraps `value` as the output of an operation over `inputs`. When no input
    /// requires a gradient (or recording is off) nothing is recorded and the
    /// result is a plain constant.
    Tensor record(Matrix value, std::initializer_list<Tensor> inputs, BackwardFn backward);

    /// Seeds d(loss)/d(loss) = 1 and propagates to every grad-tracked tensor.
    /// Gradients add up when a tensor feeds several consumers.
    void backward(const Tensor& loss);

    void clear();
    std::size_t size() const { return entries_.size(); }
    bool recording() const { return recording_; }

    /// Gradient buffer of `t`, zero-initialised on first use.
    static Matrix& grad_buffer(const Tensor& t);

   private:
    struct Entry {
        std::shared_ptr<detail::TensorNode> output;
        BackwardFn backward;
    };

    bool recording_;
    std::vector<Entry> entries_;
};

enum class ActivationKind { relu, leaky_relu, elu };

struct Activation {
    ActivationKind kind = ActivationKind::relu;
    double slope = 0.2;  // leaky_relu negative slope; elu alpha

    static Activation relu() { return {ActivationKind::relu, 0.0}; }
    static Activation leaky_relu(double slope = 0.2) { return {ActivationKind::leaky_relu, slope}; }
    static Activation elu(double alpha = 1.0) { return {ActivationKind::elu, alpha}; }
};

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sum(Tape& tape, const Tensor& x);
Tensor scale(Tape& tape, const Tensor& x, double factor);
Tensor activate(Tape& tape, const Tensor& x, Activation act);
Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b);
Tensor slice_rows(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end);

/// Row k of the result is low[k] when mask[k] is set, high[k] otherwise.
Tensor row_merge(Tape& tape, const std::vector<bool>& mask, const Tensor& low, const Tensor& high);

/// Softmax of a column of edge scores within each segment (max-shifted).
/// Segments without edges contribute nothing.
Tensor segment_softmax(Tape& tape, const Tensor& scores, std::span<const std::uint32_t> segment_ids,
                       std::size_t num_segments);

/// out[e] = target_scores[targets[e]] + source_scores[sources[e]] for column vectors.
Tensor edge_score_sum(Tape& tape, const Tensor& target_scores, const Tensor& source_scores,
                      std::span<const std::uint32_t> targets, std::span<const std::uint32_t> sources);

/// out[targets[e], :] += weights[e] * values[sources[e], :]
Tensor segment_weighted_sum(Tape& tape, const Tensor& weights, const Tensor& values,
                            std::span<const std::uint32_t> targets, std::span<const std::uint32_t> sources,
                            std::size_t num_targets);

/// Mean over `mask` of -log softmax(logits[v])[labels[v]].
Tensor cross_entropy_masked(Tape& tape, const Tensor& logits, std::span<const std::uint32_t> labels,
                            std::span<const std::uint32_t> mask);

}  // namespace gnnstrat
