#ifndef LAVARNET_TRAINING_HPP
#define LAVARNET_TRAINING_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "lavarnet/dataio.hpp"
#include "lavarnet/models.hpp"

namespace lavarnet {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    std::size_t epochs = 70;
    std::size_t batch_size = 64;
    double lr_max = 0.01;
    double lr_min = 1e-4;
    AdamConfig adam;
    std::uint64_t seed = 0;
    Variant variant = Variant::Lavarnet;
    std::size_t n = 20;
    std::vector<std::size_t> candidates;  // neuron grid; empty means {n}

    // Throws ContractError on E = 0, batch size 0, n = 0, Knn or a bad lr range.
    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
    Variant variant = Variant::Lavarnet;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double initial_train_loss = 0.0;  // at the initial parameters
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    ModelParams best_params;
};

double mse_loss(std::span<const double> pred, std::span<const double> actual);

// Learning rate of epoch i (0-based) out of E.
double cosine_lr(std::size_t i, std::size_t E, double lr_min, double lr_max);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

// One bias-corrected Adam update of a flat parameter vector. The state is
// sized on first use.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& config = {});

// Mean per-sample MSE of the model over `samples`.
double dataset_loss(const ModelParams& params, std::span<const WindowSample> samples);

std::vector<double> flatten(const ModelParams& params);
void unflatten(std::span<const double> flat, ModelParams& params);

// Trains one model with n = config.n. Throws TrainingAbort on a non-finite
// batch loss.
TrainHistory train(const WindowedData& data, const TrainConfig& config);

// Index of the history with the lowest best validation loss; ties go to the
// smaller n, then to the earlier entry.
std::size_t select_best(std::span<const TrainHistory> histories);

// One training per candidate n, all with the base seed.
using TrainFn = std::function<TrainHistory(const WindowedData&, const TrainConfig&)>;
TrainHistory grid_search(const WindowedData& data, const TrainConfig& config,
                         const TrainFn& trainer = train);

// `epoch,train_loss,val_loss,lr`
void save_history(const std::filesystem::path& path, const TrainHistory& history);

}  // namespace lavarnet

#endif  // LAVARNET_TRAINING_HPP
