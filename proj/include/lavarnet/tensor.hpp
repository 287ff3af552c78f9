#ifndef LAVARNET_TENSOR_HPP
#define LAVARNET_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lavarnet {

// Shape of a tensor of rank 1 (vector) or rank 2 (row-major matrix). Scalars
// are vectors of length one.
class Shape {
public:
    Shape() = default;
    explicit Shape(std::size_t length) : rank_(1), dims_{length, 1} {}
    Shape(std::size_t rows, std::size_t cols) : rank_(2), dims_{rows, cols} {}

    std::size_t rank() const { return rank_; }
    std::size_t dim(std::size_t axis) const { return dims_[axis]; }
    std::size_t rows() const { return dims_[0]; }
    std::size_t cols() const { return rank_ == 2 ? dims_[1] : 1; }
    std::size_t size() const { return rank_ == 0 ? 0 : dims_[0] * dims_[1]; }
    std::vector<std::size_t> dims() const;
    std::string str() const;

    bool operator==(const Shape&) const = default;

private:
    std::size_t rank_ = 0;
    std::size_t dims_[2] = {0, 0};
};

// Dense real tensor with value semantics.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor vector(std::vector<double> values);
    static Tensor vector(std::initializer_list<double> values) {
        return vector(std::vector<double>(values));
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor scalar(double value) { return vector(std::vector<double>{value}); }

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return values_.size(); }
    std::size_t rows() const { return shape_.rows(); }
    std::size_t cols() const { return shape_.cols(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& at(std::size_t r, std::size_t c) { return values_[r * shape_.cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * shape_.cols() + c]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    bool all_finite() const;

    bool operator==(const Tensor&) const = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

}  // namespace lavarnet

#endif  // LAVARNET_TENSOR_HPP
