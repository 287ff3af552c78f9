#include "lavarnet/series.hpp"

#include <cstring>

#include <fmt/format.h>

#include "lavarnet/errors.hpp"

namespace lavarnet {

SeriesMatrix::SeriesMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows * cols)
        throw DimensionError(fmt::format("series matrix {}x{} given {} values", rows, cols,
                                         values_.size()));
}

std::vector<double> SeriesMatrix::column(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

SeriesMatrix SeriesMatrix::row_block(std::size_t begin, std::size_t count) const {
    if (begin + count > rows_)
        throw ContractError(
            fmt::format("row block [{}, {}) exceeds {} rows", begin, begin + count, rows_));
    const auto first = values_.begin() + static_cast<std::ptrdiff_t>(begin * cols_);
    return SeriesMatrix(count, cols_,
                        std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * cols_)));
}

SeriesMatrix SeriesMatrix::select_columns(std::span<const std::size_t> columns) const {
    SeriesMatrix out(rows_, columns.size());
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (columns[j] >= cols_)
                throw ContractError(fmt::format("column {} out of range ({} columns)", columns[j], cols_));
            out(r, j) = (*this)(r, columns[j]);
        }
    return out;
}

// Bitwise comparison, so that missing markers compare equal to themselves.
bool SeriesMatrix::operator==(const SeriesMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ &&
           (values_.empty() ||
            std::memcmp(values_.data(), other.values_.data(), values_.size() * sizeof(double)) == 0);
}

}  // namespace lavarnet
