#include "lavarnet/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "lavarnet/errors.hpp"

namespace lavarnet {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string format_value(double v) {
    return is_missing(v) ? std::string() : fmt::format("{:.17g}", v);
}

}  // namespace

std::size_t CsvTable::column_index(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError(fmt::format("no column named '{}'", name));
    return static_cast<std::size_t>(it - names.begin());
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw DataError(fmt::format("{}: missing header row", source));
    if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    CsvTable table;
    for (std::string_view name : split_fields(line)) table.names.emplace_back(name);
    const std::size_t cols = table.names.size();

    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != cols)
            throw DataError(fmt::format("{}: row {} (line {}) has {} fields, header has {}", source,
                                        rows + 1, line_no, fields.size(), cols));
        for (std::size_t c = 0; c < cols; ++c) {
            const std::string_view cell = fields[c];
            if (cell.empty()) {
                values.push_back(kMissing);
                continue;
            }
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                throw DataError(fmt::format("{}: non-numeric value '{}' at row {}, column {} ('{}')",
                                            source, cell, rows + 1, c + 1, table.names[c]));
            values.push_back(v);
        }
        ++rows;
    }
    table.values = SeriesMatrix(rows, cols, std::move(values));
    return table;
}

CsvTable load_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    return parse_csv(in, path.string());
}

void write_csv(std::ostream& out, const CsvTable& table) {
    fmt::print(out, "{}\n", fmt::join(table.names, ","));
    for (std::size_t r = 0; r < table.values.rows(); ++r) {
        const auto row = table.values.row(r);
        for (std::size_t c = 0; c < row.size(); ++c)
            fmt::print(out, "{}{}", format_value(row[c]), c + 1 == row.size() ? "\n" : ",");
    }
}

void save_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    write_csv(out, table);
}

SeriesMatrix linear_interpolate_missing(const SeriesMatrix& series) {
    SeriesMatrix out = series;
    const std::size_t L = series.rows();
    for (std::size_t c = 0; c < series.cols(); ++c) {
        std::vector<std::size_t> observed;
        for (std::size_t r = 0; r < L; ++r)
            if (!is_missing(series(r, c))) observed.push_back(r);
        if (observed.empty())
            throw DataError(fmt::format("column {} has no observed values", c + 1));
        if (observed.size() == L) continue;
        for (std::size_t r = 0; r < observed.front(); ++r) out(r, c) = series(observed.front(), c);
        for (std::size_t r = observed.back() + 1; r < L; ++r) out(r, c) = series(observed.back(), c);
        for (std::size_t i = 0; i + 1 < observed.size(); ++i) {
            const std::size_t a = observed[i], b = observed[i + 1];
            const double va = series(a, c), vb = series(b, c);
            for (std::size_t r = a + 1; r < b; ++r) {
                const double frac = static_cast<double>(r - a) / static_cast<double>(b - a);
                out(r, c) = va + (vb - va) * frac;
            }
        }
    }
    return out;
}

std::vector<std::size_t> surviving_columns(const SeriesMatrix& series,
                                           std::span<const std::size_t> targets,
                                           std::size_t max_zeros, bool drop_constant) {
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < series.cols(); ++c) {
        if (std::find(targets.begin(), targets.end(), c) != targets.end()) {
            keep.push_back(c);
            continue;
        }
        std::size_t zeros = 0;
        bool constant = true;
        for (std::size_t r = 0; r < series.rows(); ++r) {
            if (series(r, c) == 0.0) ++zeros;
            if (r > 0 && series(r, c) != series(0, c)) constant = false;
        }
        if (zeros > max_zeros) continue;
        if (drop_constant && constant) continue;
        keep.push_back(c);
    }
    if (keep.empty()) throw DataError("every column was dropped");
    return keep;
}

CsvTable drop_sparse_or_constant(const CsvTable& table, std::span<const std::size_t> targets,
                                 std::size_t max_zeros, bool drop_constant) {
    const auto keep = surviving_columns(table.values, targets, max_zeros, drop_constant);
    CsvTable out;
    for (std::size_t c : keep) out.names.push_back(table.names[c]);
    out.values = table.values.select_columns(keep);
    return out;
}

SeriesMatrix moving_average(const SeriesMatrix& series, std::size_t order) {
    if (order == 0) throw ContractError("moving_average: order must be at least 1");
    if (series.rows() < order)
        throw DataError(fmt::format("moving_average: {} rows for order {}", series.rows(), order));
    SeriesMatrix out(series.rows(), series.cols());
    for (std::size_t r = 0; r < series.rows(); ++r) {
        const std::size_t first = r + 1 >= order ? r + 1 - order : 0;
        const double count = static_cast<double>(r + 1 - first);
        for (std::size_t c = 0; c < series.cols(); ++c) {
            double acc = 0.0;
            for (std::size_t i = first; i <= r; ++i) acc += series(i, c);
            out(r, c) = acc / count;
        }
    }
    return out;
}

SplitBounds split_by_fractions(std::size_t length, double train, double val, double test) {
    if (train < 0 || val < 0 || test < 0 || std::abs(train + val + test - 1.0) > 1e-9)
        throw DataError(fmt::format("split fractions {}, {}, {} must be non-negative and sum to 1",
                                    train, val, test));
    const auto n_train = static_cast<std::size_t>(std::floor(train * static_cast<double>(length)));
    const auto n_val = static_cast<std::size_t>(std::floor(val * static_cast<double>(length)));
    if (n_train + n_val > length) throw DataError("split fractions exceed the series length");
    return split_by_counts(length, n_train, n_val, length - n_train - n_val);
}

SplitBounds split_by_counts(std::size_t length, std::size_t train, std::size_t val,
                            std::size_t test) {
    if (train + val + test != length)
        throw DataError(fmt::format("split counts {}+{}+{} do not sum to length {}", train, val,
                                    test, length));
    if (train == 0 || val == 0 || test == 0)
        throw DataError(fmt::format("empty split ({}/{}/{})", train, val, test));
    return {train, train + val, length};
}

Dataset make_dataset(SeriesMatrix series, std::vector<std::string> names, SplitBounds split) {
    if (split.total != series.rows())
        throw DataError(fmt::format("split covers {} rows, series has {}", split.total, series.rows()));
    if (names.size() != series.cols())
        throw DataError(fmt::format("{} column names for {} columns", names.size(), series.cols()));
    return {std::move(series), std::move(names), split, std::nullopt};
}

Normalization fit_normalization(const SeriesMatrix& series, const SplitBounds& split,
                                std::span<const std::string> names) {
    Normalization norm;
    const double n = static_cast<double>(split.train_end);
    for (std::size_t c = 0; c < series.cols(); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < split.train_end; ++r) mean += series(r, c);
        mean /= n;
        double ss = 0.0;
        for (std::size_t r = 0; r < split.train_end; ++r) {
            const double d = series(r, c) - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / n);
        if (!(sd > 0.0))
            throw DataError(fmt::format("column '{}' has zero standard deviation on training rows",
                                        c < names.size() ? names[c] : std::to_string(c + 1)));
        norm.mean.push_back(mean);
        norm.std.push_back(sd);
    }
    return norm;
}

Dataset zscore(const Dataset& dataset) {
    Dataset out = dataset;
    const Normalization norm = fit_normalization(dataset.series, dataset.split, dataset.names);
    for (std::size_t r = 0; r < out.series.rows(); ++r)
        for (std::size_t c = 0; c < out.series.cols(); ++c)
            out.series(r, c) = norm.forward(c, dataset.series(r, c));
    out.normalization = norm;
    return out;
}

WindowedData make_windows(const Dataset& dataset, std::size_t T,
                          std::span<const std::size_t> targets) {
    if (T == 0) throw ContractError("make_windows: T must be at least 1");
    if (targets.empty()) throw ContractError("make_windows: no targets");
    for (std::size_t c : targets)
        if (c >= dataset.series.cols())
            throw ContractError(fmt::format("make_windows: target column {} out of range", c));
    WindowedData out;
    out.T = T;
    out.targets.assign(targets.begin(), targets.end());

    const SplitBounds& s = dataset.split;
    const struct {
        const char* name;
        std::size_t begin, end;
        std::vector<WindowSample>* dest;
    } ranges[] = {{"train", 0, s.train_end, &out.train},
                  {"validation", s.train_end, s.val_end, &out.val},
                  {"test", s.val_end, s.total, &out.test}};
    for (const auto& range : ranges) {
        if (range.end - range.begin < T + 1)
            throw DataError(fmt::format("{} split has {} rows, need at least T+1 = {}", range.name,
                                        range.end - range.begin, T + 1));
        for (std::size_t row = range.begin + T; row < range.end; ++row) {
            WindowSample sample;
            sample.input = dataset.series.row_block(row - T, T);
            sample.target.reserve(targets.size());
            for (std::size_t c : targets) sample.target.push_back(dataset.series(row, c));
            sample.target_row = row;
            range.dest->push_back(std::move(sample));
        }
    }
    return out;
}

void save_predictions(const std::filesystem::path& path, std::span<const PredictionRow> rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    fmt::print(out, "t,target,actual,predicted\n");
    for (const PredictionRow& r : rows)
        fmt::print(out, "{},{},{:.17g},{:.17g}\n", r.t, r.target, r.actual, r.predicted);
}

}  // namespace lavarnet
