#include "lavarnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "lavarnet/errors.hpp"
#include "lavarnet/random.hpp"

namespace lavarnet {

void TrainConfig::validate() const {
    if (epochs == 0) throw ContractError("training needs at least one epoch");
    if (batch_size == 0) throw ContractError("batch size must be at least 1");
    if (n == 0) throw ContractError("neuron count must be at least 1");
    if (!(lr_min > 0.0) || !(lr_min <= lr_max))
        throw ContractError(fmt::format("need 0 < lr_min <= lr_max, got {} and {}", lr_min, lr_max));
    if (variant == Variant::Knn) throw ContractError("KNN is not trained by gradient descent");
    for (std::size_t c : candidates)
        if (c == 0) throw ContractError("grid candidates must be at least 1");
}

double mse_loss(std::span<const double> pred, std::span<const double> actual) {
    if (pred.size() != actual.size() || pred.empty())
        throw ContractError(fmt::format("mse_loss: lengths {} and {}", pred.size(), actual.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - actual[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

double cosine_lr(std::size_t i, std::size_t E, double lr_min, double lr_max) {
    if (E == 0 || i > E) throw ContractError(fmt::format("cosine_lr: epoch {} of {}", i, E));
    const double phase = static_cast<double>(i) * std::numbers::pi / static_cast<double>(E);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& config) {
    if (params.size() != grads.size())
        throw DimensionError(fmt::format("adam_step: {} params, {} grads", params.size(), grads.size()));
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size())
        throw DimensionError("adam_step: optimizer state does not match parameters");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

std::vector<double> flatten(const ModelParams& params) {
    std::vector<double> flat;
    flat.reserve(params.scalar_count());
    for (const NamedTensor& t : params.tensors())
        flat.insert(flat.end(), t.value.values().begin(), t.value.values().end());
    return flat;
}

void unflatten(std::span<const double> flat, ModelParams& params) {
    if (flat.size() != params.scalar_count())
        throw DimensionError(fmt::format("unflatten: {} values for {} parameters", flat.size(),
                                         params.scalar_count()));
    std::size_t offset = 0;
    for (NamedTensor& t : params.tensors()) {
        auto dst = t.value.values();
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), dst.size(), dst.begin());
        offset += dst.size();
    }
}

double dataset_loss(const ModelParams& params, std::span<const WindowSample> samples) {
    if (samples.empty()) throw ContractError("dataset_loss: no samples");
    Graph g;
    double total = 0.0;
    for (const WindowSample& s : samples) {
        g.clear();
        const BoundParams bound(g, params, false);
        const Var out = forward(g, bound, s.input);
        total += mse_loss(g.value(out), s.target);
    }
    return total / static_cast<double>(samples.size());
}

namespace {

ModelDims dims_for(const WindowedData& data, std::size_t n) {
    if (data.train.empty() || data.val.empty())
        throw ContractError("training needs non-empty train and validation windows");
    return {n, data.T, data.train.front().input.cols(), data.targets.size()};
}

// Reverse-mode pass over one minibatch; returns the mean batch loss and
// writes the flat gradient.
double batch_gradient(Graph& g, const ModelParams& params, std::span<const WindowSample> train,
                      std::span<const std::size_t> batch, std::vector<double>& grad) {
    g.clear();
    const BoundParams bound(g, params, true);
    std::vector<Var> losses;
    losses.reserve(batch.size());
    for (std::size_t idx : batch) {
        const WindowSample& s = train[idx];
        const Var pred = forward(g, bound, s.input);
        losses.push_back(g.mse(pred, g.constant(s.target)));
    }
    const Var loss = g.mean(losses);
    const double value = g.value(loss)[0];
    if (!std::isfinite(value)) return value;
    g.backward(loss);
    std::size_t offset = 0;
    for (Var v : bound.vars()) {
        const auto gv = g.grad(v);
        std::copy(gv.begin(), gv.end(), grad.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += gv.size();
    }
    return value;
}

}  // namespace

TrainHistory train(const WindowedData& data, const TrainConfig& config) {
    config.validate();
    const ModelDims dims = dims_for(data, config.n);

    TrainHistory history;
    history.variant = config.variant;
    history.n = config.n;
    history.seed = config.seed;

    ModelParams params = init_params(config.variant, dims, derive_seed(config.seed, 1));
    std::vector<double> flat = flatten(params);
    std::vector<double> grad(flat.size(), 0.0);
    AdamState state;
    history.initial_train_loss = dataset_loss(params, data.train);
    history.best_val_loss = std::numeric_limits<double>::infinity();

    const std::uint64_t shuffle_seed = derive_seed(config.seed, 2);
    std::vector<std::size_t> order(data.train.size());
    Graph g;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(derive_seed(shuffle_seed, epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        const double lr = cosine_lr(epoch, config.epochs, config.lr_min, config.lr_max);
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_index) {
            const std::size_t count = std::min(config.batch_size, order.size() - begin);
            const std::span<const std::size_t> batch(order.data() + begin, count);
            const double loss = batch_gradient(g, params, data.train, batch, grad);
            if (!std::isfinite(loss))
                throw TrainingAbort(fmt::format("non-finite training loss ({}) at epoch {}, batch {}",
                                                loss, epoch + 1, batch_index + 1));
            loss_sum += loss * static_cast<double>(count);
            adam_step(flat, grad, state, lr, config.adam);
            unflatten(flat, params);
        }

        EpochRecord record{epoch + 1, loss_sum / static_cast<double>(order.size()),
                           dataset_loss(params, data.val), lr};
        if (!std::isfinite(record.val_loss))
            throw TrainingAbort(fmt::format("non-finite validation loss at epoch {}", epoch + 1));
        if (record.val_loss < history.best_val_loss) {
            history.best_val_loss = record.val_loss;
            history.best_epoch = record.epoch;
            history.best_params = params;
        }
        history.epochs.push_back(record);
    }
    return history;
}

std::size_t select_best(std::span<const TrainHistory> histories) {
    if (histories.empty()) throw ContractError("select_best: no histories");
    std::size_t best = 0;
    for (std::size_t i = 1; i < histories.size(); ++i) {
        const TrainHistory& a = histories[i];
        const TrainHistory& b = histories[best];
        if (a.best_val_loss < b.best_val_loss ||
            (a.best_val_loss == b.best_val_loss && a.n < b.n))
            best = i;
    }
    return best;
}

TrainHistory grid_search(const WindowedData& data, const TrainConfig& config,
                         const TrainFn& trainer) {
    config.validate();
    std::vector<std::size_t> grid = config.candidates;
    if (grid.empty()) grid.push_back(config.n);
    std::vector<TrainHistory> runs;
    runs.reserve(grid.size());
    for (std::size_t n : grid) {
        TrainConfig candidate = config;
        candidate.n = n;
        candidate.candidates.clear();
        runs.push_back(trainer(data, candidate));
    }
    return std::move(runs[select_best(runs)]);
}

void save_history(const std::filesystem::path& path, const TrainHistory& history) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    fmt::print(out, "epoch,train_loss,val_loss,lr\n");
    for (const EpochRecord& r : history.epochs)
        fmt::print(out, "{},{:.17g},{:.17g},{:.17g}\n", r.epoch, r.train_loss, r.val_loss, r.lr);
}

}  // namespace lavarnet
