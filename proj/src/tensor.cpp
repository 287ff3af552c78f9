#include "lavarnet/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "lavarnet/errors.hpp"

namespace lavarnet {

std::vector<std::size_t> Shape::dims() const {
    if (rank_ == 1) return {dims_[0]};
    if (rank_ == 2) return {dims_[0], dims_[1]};
    return {};
}

std::string Shape::str() const {
    if (rank_ == 1) return fmt::format("[{}]", dims_[0]);
    if (rank_ == 2) return fmt::format("[{}x{}]", dims_[0], dims_[1]);
    return "[]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), values_(shape.size(), fill) {
    if (shape.size() == 0) throw DimensionError("tensor shape must have positive dimensions");
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
    if (shape.size() == 0) throw DimensionError("tensor shape must have positive dimensions");
    if (values_.size() != shape.size())
        throw DimensionError(fmt::format("tensor shape {} holds {} values, got {}", shape.str(),
                                         shape.size(), values_.size()));
}

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor(Shape(n), std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor(Shape(rows, cols), std::move(values));
}

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace lavarnet
