#ifndef LAVARNET_SERIES_HPP
#define LAVARNET_SERIES_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace lavarnet {

// Marker for an unobserved value.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

// Time-ordered real matrix: rows are time steps, columns are variables.
class SeriesMatrix {
public:
    SeriesMatrix() = default;
    SeriesMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
    SeriesMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::vector<double> column(std::size_t c) const;

    // Rows [begin, begin + count).
    SeriesMatrix row_block(std::size_t begin, std::size_t count) const;
    SeriesMatrix select_columns(std::span<const std::size_t> columns) const;

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    bool operator==(const SeriesMatrix& other) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

}  // namespace lavarnet

#endif  // LAVARNET_SERIES_HPP
