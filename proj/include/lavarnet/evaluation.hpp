#ifndef LAVARNET_EVALUATION_HPP
#define LAVARNET_EVALUATION_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lavarnet/datagen.hpp"
#include "lavarnet/dataio.hpp"
#include "lavarnet/models.hpp"
#include "lavarnet/tensor.hpp"

namespace lavarnet {

double mae(std::span<const double> pred, std::span<const double> actual);

// Zero-based cell of a T x K weight matrix. Window row 0 is the oldest step,
// so row r stands for lag T - r.
struct WindowCell {
    std::size_t row = 0;
    std::size_t col = 0;

    auto operator<=>(const WindowCell&) const = default;
};

LaggedVariable to_lagged(const WindowCell& cell, std::size_t T);

// The c cells of largest |A|, ties to the smaller row, then smaller column.
// Returned in that ranking order.
std::vector<WindowCell> top_lagged_set(const Tensor& A, std::size_t c);

// Interpretability scores over all targets. target_vars[i] is the variable
// predicted with weights A[i].
struct InterpretScore {
    // Per target: true lagged variables recovered / present, and the same
    // for driving variables.
    std::vector<std::size_t> lagged_hits;
    std::vector<std::size_t> lagged_true;
    std::vector<std::size_t> var_hits;
    std::vector<std::size_t> var_true;
    double r_l = 0.0;
    double r_v = 0.0;
};

InterpretScore score_interpretation(const CouplingNetwork& truth, std::span<const Tensor> A,
                                    std::span<const std::size_t> target_vars);
double score_RL(const CouplingNetwork& truth, std::span<const Tensor> A,
                std::span<const std::size_t> target_vars);
double score_RV(const CouplingNetwork& truth, std::span<const Tensor> A,
                std::span<const std::size_t> target_vars);

// A_i matrices of a LAVARNET-family model, in target order.
std::vector<Tensor> attention_matrices(const ModelParams& params);

// One row per sample, one column per target; normalized units.
SeriesMatrix forecast(const ModelParams& params, std::span<const WindowSample> samples);
SeriesMatrix knn_forecast(std::span<const WindowSample> train, std::span<const WindowSample> samples,
                          std::size_t k_neighbors = 5);

struct TargetScore {
    std::string name;
    std::size_t column = 0;  // zero-based column in the series
    double mae_norm = 0.0;
    double mae_orig = 0.0;
    std::optional<double> r_l;
    std::optional<double> r_v;
    std::optional<Tensor> A;
};

struct EvalReport {
    Variant variant = Variant::Lavarnet;
    std::size_t n = 0;
    std::size_t T = 0;
    std::uint64_t seed = 0;
    std::vector<TargetScore> targets;
    double avg_mae_norm = 0.0;
    double avg_mae_orig = 0.0;
    std::optional<double> r_l;
    std::optional<double> r_v;

    // ContractError if there are no targets, a MAE is negative or a score
    // lies outside [0, 1].
    void validate() const;
};

struct RunInfo {
    Variant variant = Variant::Lavarnet;
    std::size_t n = 0;
    std::size_t T = 0;
    std::uint64_t seed = 0;
};

// MAE per target of `predictions` (normalized units) against the samples'
// targets; original units via `norm` when present.
EvalReport score_forecasts(const RunInfo& info, std::span<const std::string> target_names,
                           std::span<const std::size_t> target_columns,
                           const SeriesMatrix& predictions, std::span<const WindowSample> samples,
                           const std::optional<Normalization>& norm);

// Adds A snapshots and, with a ground truth, R_L / R_V.
void attach_interpretation(EvalReport& report, std::span<const Tensor> A,
                           const CouplingNetwork* truth);

// Writes `path` (JSON) and the per-target table next to it with a .csv
// extension.
void emit_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport read_report(const std::filesystem::path& path);

}  // namespace lavarnet

#endif  // LAVARNET_EVALUATION_HPP
