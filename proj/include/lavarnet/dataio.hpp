#ifndef LAVARNET_DATAIO_HPP
#define LAVARNET_DATAIO_HPP

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lavarnet/series.hpp"

namespace lavarnet {

struct CsvTable {
    std::vector<std::string> names;
    SeriesMatrix values;  // empty cells hold kMissing

    std::size_t column_index(const std::string& name) const;
};

// Header row plus rectangular numeric body; empty cells are missing values.
// Throws DataError with the row/column of any ragged row or bad cell.
CsvTable parse_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable load_csv(const std::filesystem::path& path);
// 17 significant digits; missing values written as empty cells.
void write_csv(std::ostream& out, const CsvTable& table);
void save_csv(const std::filesystem::path& path, const CsvTable& table);

// Fills interior gaps on the line between the nearest observed neighbours
// and leading/trailing gaps with the nearest observed value.
SeriesMatrix linear_interpolate_missing(const SeriesMatrix& series);

// Indices of the columns that survive: targets always; other columns unless
// they hold more than `max_zeros` zeros or (with `drop_constant`) never change.
std::vector<std::size_t> surviving_columns(const SeriesMatrix& series,
                                           std::span<const std::size_t> targets,
                                           std::size_t max_zeros, bool drop_constant);

CsvTable drop_sparse_or_constant(const CsvTable& table, std::span<const std::size_t> targets,
                                 std::size_t max_zeros = std::numeric_limits<std::size_t>::max(),
                                 bool drop_constant = true);

// Trailing (causal) mean over the last `order` rows; row r < order - 1 uses
// the r + 1 rows available.
SeriesMatrix moving_average(const SeriesMatrix& series, std::size_t order = 4);

// Contiguous chronological row ranges [0, train_end), [train_end, val_end),
// [val_end, total).
struct SplitBounds {
    std::size_t train_end = 0;
    std::size_t val_end = 0;
    std::size_t total = 0;

    std::size_t train_rows() const { return train_end; }
    std::size_t val_rows() const { return val_end - train_end; }
    std::size_t test_rows() const { return total - val_end; }

    bool operator==(const SplitBounds&) const = default;
};

// floor(train * L) and floor(val * L) rows, remainder to test.
SplitBounds split_by_fractions(std::size_t length, double train = 0.6, double val = 0.2,
                               double test = 0.2);
SplitBounds split_by_counts(std::size_t length, std::size_t train, std::size_t val,
                            std::size_t test);

// Per-column statistics from training rows (population standard deviation).
struct Normalization {
    std::vector<double> mean;
    std::vector<double> std;

    double forward(std::size_t column, double x) const { return (x - mean[column]) / std[column]; }
    double inverse(std::size_t column, double z) const { return z * std[column] + mean[column]; }
};

struct Dataset {
    SeriesMatrix series;
    std::vector<std::string> names;
    SplitBounds split;
    std::optional<Normalization> normalization;
};

Dataset make_dataset(SeriesMatrix series, std::vector<std::string> names, SplitBounds split);

// Throws DataError naming the column if a training-row std is zero.
Normalization fit_normalization(const SeriesMatrix& series, const SplitBounds& split,
                                std::span<const std::string> names = {});
// Normalized copy carrying the training statistics.
Dataset zscore(const Dataset& dataset);

struct WindowSample {
    SeriesMatrix input;          // T x K rows [target_row - T, target_row)
    std::vector<double> target;  // target columns of target_row
    std::size_t target_row = 0;  // row index in the full series
};

struct WindowedData {
    std::size_t T = 0;
    std::vector<std::size_t> targets;
    std::vector<WindowSample> train;
    std::vector<WindowSample> val;
    std::vector<WindowSample> test;
};

// Windows never cross a split boundary. Throws DataError if a split has at
// most T rows.
WindowedData make_windows(const Dataset& dataset, std::size_t T,
                          std::span<const std::size_t> targets);

// Prediction table `t,target,actual,predicted`.
struct PredictionRow {
    std::size_t t = 0;
    std::string target;
    double actual = 0.0;
    double predicted = 0.0;
};
void save_predictions(const std::filesystem::path& path, std::span<const PredictionRow> rows);

}  // namespace lavarnet

#endif  // LAVARNET_DATAIO_HPP
