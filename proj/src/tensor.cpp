#include "gnnstrat/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace gnnstrat {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match shape " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw ShapeError("ragged initializer for matrix");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::column(std::span<const double> values) {
    return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

std::string Matrix::shape_string() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

Tensor::Tensor() : node_(std::make_shared<detail::TensorNode>()) {}

Tensor::Tensor(Matrix value, bool requires_grad, std::string name) : node_(std::make_shared<detail::TensorNode>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
    node_->name = std::move(name);
}

Tensor Tensor::parameter(Matrix value, std::string name) { return Tensor(std::move(value), true, std::move(name)); }

void Tensor::index_nonzeros() {
    auto index = std::make_shared<RowSparsity>();
    const Matrix& v = node_->value;
    index->row_ptr.reserve(v.rows() + 1);
    index->row_ptr.push_back(0);
    for (std::size_t i = 0; i < v.rows(); ++i) {
        const auto row = v.row(i);
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (row[k] != 0.0) index->cols.push_back(static_cast<std::uint32_t>(k));
        }
        index->row_ptr.push_back(index->cols.size());
    }
    node_->sparsity = std::move(index);
}

Tensor Tensor::clone() const { return Tensor(node_->value, node_->requires_grad, node_->name); }

}  // namespace gnnstrat
