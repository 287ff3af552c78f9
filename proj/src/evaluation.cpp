#include "lavarnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "lavarnet/errors.hpp"

namespace lavarnet {

namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kReportFormat = "lavarnet-report/1";

std::vector<double> flat_window(const SeriesMatrix& m) {
    return {m.values().begin(), m.values().end()};
}

Json tensor_rows(const Tensor& t) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < t.rows(); ++r) {
        Json row = Json::array();
        for (std::size_t c = 0; c < t.cols(); ++c) row.push_back(t.at(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Tensor tensor_from_rows(const Json& rows) {
    const std::size_t R = rows.size();
    const std::size_t C = R == 0 ? 0 : rows.at(0).size();
    std::vector<double> values;
    for (const Json& row : rows) {
        if (row.size() != C) throw DataError("report: ragged weight matrix");
        for (const Json& v : row) values.push_back(v.get<double>());
    }
    return Tensor::matrix(R, C, std::move(values));
}

std::string csv_optional(const std::optional<double>& v) {
    return v ? fmt::format("{:.17g}", *v) : std::string();
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size() || pred.empty())
        throw ContractError(fmt::format("mae: lengths {} and {}", pred.size(), actual.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - actual[i]);
    return acc / static_cast<double>(pred.size());
}

LaggedVariable to_lagged(const WindowCell& cell, std::size_t T) {
    if (cell.row >= T) throw ContractError(fmt::format("window row {} outside T = {}", cell.row, T));
    return {cell.col, T - cell.row};
}

std::vector<WindowCell> top_lagged_set(const Tensor& A, std::size_t c) {
    const std::size_t T = A.rows(), K = A.cols();
    if (c == 0 || c > T * K)
        throw ContractError(fmt::format("top_lagged_set: cardinality {} outside 1..{}", c, T * K));
    std::vector<WindowCell> cells;
    cells.reserve(T * K);
    for (std::size_t r = 0; r < T; ++r)
        for (std::size_t k = 0; k < K; ++k) cells.push_back({r, k});
    // stable sort keeps row-major order among equal magnitudes
    std::stable_sort(cells.begin(), cells.end(), [&](const WindowCell& a, const WindowCell& b) {
        return std::abs(A.at(a.row, a.col)) > std::abs(A.at(b.row, b.col));
    });
    cells.resize(c);
    return cells;
}

InterpretScore score_interpretation(const CouplingNetwork& truth, std::span<const Tensor> A,
                                    std::span<const std::size_t> target_vars) {
    if (A.size() != target_vars.size() || A.empty())
        throw ContractError(fmt::format("interpretation: {} weight matrices for {} targets",
                                        A.size(), target_vars.size()));
    InterpretScore score;
    std::size_t lag_hits = 0, lag_total = 0, var_hits = 0, var_total = 0;
    for (std::size_t i = 0; i < A.size(); ++i) {
        const std::size_t k = target_vars[i];
        if (k >= truth.K())
            throw ContractError(fmt::format("target variable {} has no ground truth", k + 1));
        if (A[i].cols() != truth.K())
            throw DimensionError(fmt::format("weights have {} columns, network has {} variables",
                                             A[i].cols(), truth.K()));
        const std::size_t T = A[i].rows();
        const std::set<LaggedVariable> L = truth.driving_lagged(k);
        const std::set<std::size_t> V = truth.driving_variables(k);

        // More true lagged variables than window cells: take every cell.
        const std::size_t c = std::min(L.size(), T * truth.K());
        std::set<LaggedVariable> L_est;
        std::set<std::size_t> V_est;
        if (c > 0) {
            for (const WindowCell& cell : top_lagged_set(A[i], c)) {
                L_est.insert(to_lagged(cell, T));
                V_est.insert(cell.col);
            }
        }
        std::size_t lh = 0, vh = 0;
        for (const LaggedVariable& lv : L) lh += L_est.contains(lv);
        for (std::size_t v : V) vh += V_est.contains(v);

        score.lagged_hits.push_back(lh);
        score.lagged_true.push_back(L.size());
        score.var_hits.push_back(vh);
        score.var_true.push_back(V.size());
        lag_hits += lh;
        lag_total += L.size();
        var_hits += vh;
        var_total += V.size();
    }
    if (lag_total == 0) throw ContractError("interpretation: targets have no true drivers");
    score.r_l = static_cast<double>(lag_hits) / static_cast<double>(lag_total);
    score.r_v = static_cast<double>(var_hits) / static_cast<double>(var_total);
    return score;
}

double score_RL(const CouplingNetwork& truth, std::span<const Tensor> A,
                std::span<const std::size_t> target_vars) {
    return score_interpretation(truth, A, target_vars).r_l;
}

double score_RV(const CouplingNetwork& truth, std::span<const Tensor> A,
                std::span<const std::size_t> target_vars) {
    return score_interpretation(truth, A, target_vars).r_v;
}

std::vector<Tensor> attention_matrices(const ModelParams& params) {
    if (!is_lavarnet_family(params.variant()))
        throw ContractError(fmt::format("{} has no lagged-variable weights", to_string(params.variant())));
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < params.dims().K_out; ++i)
        out.push_back(params.get("A_" + std::to_string(i)));
    return out;
}

SeriesMatrix forecast(const ModelParams& params, std::span<const WindowSample> samples) {
    const std::size_t K_out = params.dims().K_out;
    SeriesMatrix out(samples.size(), K_out);
    Graph g;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        g.clear();
        const BoundParams bound(g, params, false);
        const auto y = g.value(forward(g, bound, samples[s].input));
        std::copy(y.begin(), y.end(), out.row(s).begin());
    }
    return out;
}

SeriesMatrix knn_forecast(std::span<const WindowSample> train, std::span<const WindowSample> samples,
                          std::size_t k_neighbors) {
    if (train.empty()) throw ContractError("knn_forecast: no training windows");
    std::vector<std::vector<double>> windows, targets;
    windows.reserve(train.size());
    targets.reserve(train.size());
    for (const WindowSample& s : train) {
        windows.push_back(flat_window(s.input));
        targets.push_back(s.target);
    }
    SeriesMatrix out(samples.size(), train.front().target.size());
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto query = flat_window(samples[s].input);
        const auto y = knn_predict(query, windows, targets, k_neighbors);
        std::copy(y.begin(), y.end(), out.row(s).begin());
    }
    return out;
}

void EvalReport::validate() const {
    if (targets.empty()) throw ContractError("report has no targets");
    auto unit = [](const std::optional<double>& v) { return !v || (*v >= 0.0 && *v <= 1.0); };
    for (const TargetScore& t : targets) {
        if (!(t.mae_norm >= 0.0) || !(t.mae_orig >= 0.0))
            throw ContractError(fmt::format("target '{}' has a negative or undefined MAE", t.name));
        if (!unit(t.r_l) || !unit(t.r_v))
            throw ContractError(fmt::format("target '{}' has a score outside [0, 1]", t.name));
    }
    if (!unit(r_l) || !unit(r_v)) throw ContractError("report score outside [0, 1]");
}

EvalReport score_forecasts(const RunInfo& info, std::span<const std::string> target_names,
                           std::span<const std::size_t> target_columns,
                           const SeriesMatrix& predictions, std::span<const WindowSample> samples,
                           const std::optional<Normalization>& norm) {
    if (target_columns.empty()) throw ContractError("score_forecasts: no targets");
    if (target_names.size() != target_columns.size())
        throw ContractError("score_forecasts: target names and columns differ in length");
    if (predictions.rows() != samples.size() || predictions.cols() != target_columns.size())
        throw DimensionError(fmt::format("score_forecasts: {}x{} predictions for {} samples, {} targets",
                                         predictions.rows(), predictions.cols(), samples.size(),
                                         target_columns.size()));
    EvalReport report;
    report.variant = info.variant;
    report.n = info.n;
    report.T = info.T;
    report.seed = info.seed;
    for (std::size_t i = 0; i < target_columns.size(); ++i) {
        const std::size_t col = target_columns[i];
        std::vector<double> pred(samples.size()), actual(samples.size());
        for (std::size_t s = 0; s < samples.size(); ++s) {
            pred[s] = predictions(s, i);
            actual[s] = samples[s].target.at(i);
        }
        TargetScore t;
        t.name = target_names[i];
        t.column = col;
        t.mae_norm = mae(pred, actual);
        if (norm) {
            for (std::size_t s = 0; s < samples.size(); ++s) {
                pred[s] = norm->inverse(col, pred[s]);
                actual[s] = norm->inverse(col, actual[s]);
            }
            t.mae_orig = mae(pred, actual);
        } else {
            t.mae_orig = t.mae_norm;
        }
        report.targets.push_back(std::move(t));
    }
    double sum_norm = 0.0, sum_orig = 0.0;
    for (const TargetScore& t : report.targets) {
        sum_norm += t.mae_norm;
        sum_orig += t.mae_orig;
    }
    report.avg_mae_norm = sum_norm / static_cast<double>(report.targets.size());
    report.avg_mae_orig = sum_orig / static_cast<double>(report.targets.size());
    return report;
}

void attach_interpretation(EvalReport& report, std::span<const Tensor> A,
                           const CouplingNetwork* truth) {
    if (A.size() != report.targets.size())
        throw ContractError(fmt::format("{} weight matrices for {} targets", A.size(),
                                        report.targets.size()));
    for (std::size_t i = 0; i < A.size(); ++i) report.targets[i].A = A[i];
    if (!truth) return;
    std::vector<std::size_t> vars;
    for (const TargetScore& t : report.targets) vars.push_back(t.column);
    const InterpretScore s = score_interpretation(*truth, A, vars);
    for (std::size_t i = 0; i < A.size(); ++i) {
        report.targets[i].r_l = s.lagged_true[i] == 0
                                    ? 1.0
                                    : static_cast<double>(s.lagged_hits[i]) / static_cast<double>(s.lagged_true[i]);
        report.targets[i].r_v = s.var_true[i] == 0
                                    ? 1.0
                                    : static_cast<double>(s.var_hits[i]) / static_cast<double>(s.var_true[i]);
    }
    report.r_l = s.r_l;
    report.r_v = s.r_v;
}

void emit_report(const EvalReport& report, const std::filesystem::path& path) {
    report.validate();
    Json j;
    j["format"] = kReportFormat;
    j["variant"] = std::string(to_string(report.variant));
    j["n"] = report.n;
    j["T"] = report.T;
    j["seed"] = report.seed;
    j["avg_mae_norm"] = report.avg_mae_norm;
    j["avg_mae_orig"] = report.avg_mae_orig;
    if (report.r_l) j["r_l"] = *report.r_l;
    if (report.r_v) j["r_v"] = *report.r_v;
    Json targets = Json::array();
    for (const TargetScore& t : report.targets) {
        Json e;
        e["name"] = t.name;
        e["column"] = t.column + 1;
        e["mae_norm"] = t.mae_norm;
        e["mae_orig"] = t.mae_orig;
        if (t.r_l) e["r_l"] = *t.r_l;
        if (t.r_v) e["r_v"] = *t.r_v;
        if (t.A) e["A"] = tensor_rows(*t.A);
        targets.push_back(std::move(e));
    }
    j["targets"] = std::move(targets);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out << j.dump(2) << '\n';
    if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));

    std::filesystem::path csv_path = path;
    csv_path.replace_extension(".csv");
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw DataError(fmt::format("cannot write '{}'", csv_path.string()));
    fmt::print(csv, "target,mae_norm,mae_orig,r_l,r_v\n");
    for (const TargetScore& t : report.targets)
        fmt::print(csv, "{},{:.17g},{:.17g},{},{}\n", t.name, t.mae_norm, t.mae_orig,
                   csv_optional(t.r_l), csv_optional(t.r_v));
}

EvalReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    try {
        const Json j = Json::parse(in);
        if (j.at("format") != kReportFormat)
            throw DataError(fmt::format("'{}' is not a report", path.string()));
        EvalReport r;
        r.variant = parse_variant(j.at("variant").get<std::string>());
        r.n = j.at("n").get<std::size_t>();
        r.T = j.at("T").get<std::size_t>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.avg_mae_norm = j.at("avg_mae_norm").get<double>();
        r.avg_mae_orig = j.at("avg_mae_orig").get<double>();
        if (j.contains("r_l")) r.r_l = j["r_l"].get<double>();
        if (j.contains("r_v")) r.r_v = j["r_v"].get<double>();
        for (const Json& e : j.at("targets")) {
            TargetScore t;
            t.name = e.at("name").get<std::string>();
            t.column = e.at("column").get<std::size_t>() - 1;
            t.mae_norm = e.at("mae_norm").get<double>();
            t.mae_orig = e.at("mae_orig").get<double>();
            if (e.contains("r_l")) t.r_l = e["r_l"].get<double>();
            if (e.contains("r_v")) t.r_v = e["r_v"].get<double>();
            if (e.contains("A")) t.A = tensor_from_rows(e["A"]);
            r.targets.push_back(std::move(t));
        }
        return r;
    } catch (const Json::exception& e) {
        throw DataError(fmt::format("malformed report '{}': {}", path.string(), e.what()));
    }
}

}  // namespace lavarnet
