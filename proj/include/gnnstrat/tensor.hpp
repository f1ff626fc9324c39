#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gnnstrat {

class ShapeError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major matrix of doubles. Plain value type, no gradient bookkeeping.
class Matrix {
   public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix column(std::span<const double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    void fill(double v);
    bool same_shape(const Matrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
    bool all_finite() const;

    std::string shape_string() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

   private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

class Tape;

/// Column positions of the nonzero entries of each row (CSR pattern without values).
struct RowSparsity {
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> cols;
};

namespace detail {

struct TensorNode {
    Matrix value;
    std::shared_ptr<const RowSparsity> sparsity;  // nonzero index of `value`, if built
    Matrix grad;  // empty until a gradient flows in
    bool requires_grad = false;
    std::string name;
    const Tape* tape = nullptr;  // set while the node is an output of a live tape entry
    std::size_t tape_position = 0;
};

}  // namespace detail

/// Shared handle to a value that may take part in reverse-mode differentiation.
///
/// Copies alias the same storage, so a parameter can be handed to several
/// operations and its gradient accumulates across all of them.
class Tensor {
   public:
    Tensor();
    explicit Tensor(Matrix value, bool requires_grad = false, std::string name = {});

    static Tensor parameter(Matrix value, std::string name);
    static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }

    std::size_t rows() const { return node_->value.rows(); }
    std::size_t cols() const { return node_->value.cols(); }
    const Matrix& value() const { return node_->value; }
    /// Invalidates the nonzero index.
    Matrix& mutable_value() {
        node_->sparsity.reset();
        return node_->value;
    }
    double at(std::size_t r, std::size_t c) const { return node_->value(r, c); }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    /// Gradient accumulated by the last backward pass. Empty if none reached this tensor.
    const Matrix& grad() const { return node_->grad; }
    void zero_grad() { node_->grad = Matrix(); }

    const std::string& name() const { return node_->name; }
    bool is_taped() const { return node_->tape != nullptr; }
    bool aliases(const Tensor& other) const { return node_ == other.node_; }

    /// Records where the nonzeros of the value are, so products with this tensor
    /// on the left only visit them. Meant for constant, mostly-zero inputs.
    void index_nonzeros();
    const RowSparsity* nonzero_index() const { return node_->sparsity.get(); }

    /// Deep copy detached from any tape.
    Tensor clone() const;

   private:
    friend class Tape;
    std::shared_ptr<detail::TensorNode> node_;
};

}  // namespace gnnstrat
