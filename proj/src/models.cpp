#include "lavarnet/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "lavarnet/errors.hpp"
#include "lavarnet/random.hpp"

namespace lavarnet {

namespace {

bool is_bias(std::string_view name) {
    return name == "b_h" || name == "b_y" || name == "b" || name.starts_with("head_b");
}

void check_window(const SeriesMatrix& X, const ModelDims& d) {
    if (X.rows() != d.T || X.cols() != d.K)
        throw DimensionError(
            fmt::format("window is {}x{}, model expects {}x{}", X.rows(), X.cols(), d.T, d.K));
}

void check_cell(const ModelDims& d, std::size_t t, std::size_t k) {
    if (t >= d.T || k >= d.K)
        throw ContractError(
            fmt::format("cell (t={}, k={}) outside the {}x{} window", t, k, d.T, d.K));
}

Var column_constant(Graph& g, const SeriesMatrix& X, std::size_t k) {
    const std::vector<double> col = X.column(k);
    return g.constant(col);
}

Var hidden_pre(Graph& g, const BoundParams& p, const SeriesMatrix& X, std::size_t t,
               std::size_t k) {
    const ModelDims& d = p.params().dims();
    check_window(X, d);
    check_cell(d, t, k);
    const Var row = g.matvec(p.get("W_T"), g.constant(X.row(t)));
    const Var col = g.matvec(p.get("W_V"), column_constant(g, X, k));
    return g.add(row, col);
}

void require_variant(const BoundParams& p, Variant v, std::string_view op) {
    if (p.params().variant() != v)
        throw ContractError(fmt::format("{} requires {} parameters, got {}", op, to_string(v),
                                        to_string(p.params().variant())));
}

Var forward_lavarnet(Graph& g, const BoundParams& p, const SeriesMatrix& X) {
    const ModelDims& d = p.params().dims();
    const HiddenStateGrid grid = hidden_grid(g, p, X);
    std::vector<Var> outputs;
    outputs.reserve(d.K_out);
    for (std::size_t i = 0; i < d.K_out; ++i) {
        const std::string suffix = std::to_string(i);
        const Var z = g.weighted_concat(p.get("A_" + suffix), grid.y);
        outputs.push_back(g.affine(p.get("head_w_" + suffix), z, p.get("head_b_" + suffix)));
    }
    return g.concat(outputs);
}

Var forward_rnn(Graph& g, const BoundParams& p, const SeriesMatrix& X) {
    const ModelDims& d = p.params().dims();
    check_window(X, d);
    Var h = g.constant(Tensor(Shape(d.n)));
    Var y = h;
    for (std::size_t t = 0; t < d.T; ++t) {
        const ElmanStep step = elman_step(g, p, g.constant(X.row(t)), h);
        h = step.h;
        y = step.y;
    }
    return g.affine(p.get("head_w"), y, p.get("head_b"));
}

Var forward_lstm(Graph& g, const BoundParams& p, const SeriesMatrix& X) {
    const ModelDims& d = p.params().dims();
    check_window(X, d);
    const Var zero = g.constant(Tensor(Shape(d.n)));
    LstmState state{zero, zero};
    for (std::size_t t = 0; t < d.T; ++t) state = lstm_step(g, p, g.constant(X.row(t)), state);
    return g.affine(p.get("head_w"), state.h, p.get("head_b"));
}

}  // namespace

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::Lavarnet: return "lavarnet";
        case Variant::RLavarnet: return "rlavarnet";
        case Variant::FRLavarnet: return "frlavarnet";
        case Variant::Rnn: return "rnn";
        case Variant::Lstm: return "lstm";
        case Variant::Knn: return "knn";
    }
    return "unknown";
}

Variant parse_variant(std::string_view name) {
    for (Variant v : {Variant::Lavarnet, Variant::RLavarnet, Variant::FRLavarnet, Variant::Rnn,
                      Variant::Lstm, Variant::Knn})
        if (to_string(v) == name) return v;
    throw ContractError(fmt::format("unknown model variant '{}'", name));
}

bool is_lavarnet_family(Variant v) {
    return v == Variant::Lavarnet || v == Variant::RLavarnet || v == Variant::FRLavarnet;
}

std::vector<TensorSpec> param_layout(Variant variant, const ModelDims& d) {
    if (variant != Variant::Knn && (d.n == 0 || d.T == 0 || d.K == 0 || d.K_out == 0))
        throw ContractError(fmt::format("model dims must be positive (n={}, T={}, K={}, K_out={})",
                                        d.n, d.T, d.K, d.K_out));
    std::vector<TensorSpec> out;
    switch (variant) {
        case Variant::Lavarnet:
        case Variant::RLavarnet:
        case Variant::FRLavarnet:
            out.push_back({"W_T", Shape(d.n, d.K)});
            out.push_back({"W_V", Shape(d.n, d.T)});
            if (variant == Variant::RLavarnet) out.push_back({"U_h", Shape(d.n, d.n)});
            if (variant == Variant::FRLavarnet) out.push_back({"U_tilde", Shape(d.n, d.n * d.K)});
            out.push_back({"b_h", Shape(d.n)});
            out.push_back({"W_y", Shape(d.n, d.n)});
            out.push_back({"b_y", Shape(d.n)});
            for (std::size_t i = 0; i < d.K_out; ++i) {
                const std::string s = std::to_string(i);
                out.push_back({"A_" + s, Shape(d.T, d.K)});
                out.push_back({"head_w_" + s, Shape(1, d.T * d.K * d.n)});
                out.push_back({"head_b_" + s, Shape(1)});
            }
            break;
        case Variant::Rnn:
            out.push_back({"W_h", Shape(d.n, d.K)});
            out.push_back({"U_h", Shape(d.n, d.n)});
            out.push_back({"b_h", Shape(d.n)});
            out.push_back({"W_y", Shape(d.n, d.n)});
            out.push_back({"b_y", Shape(d.n)});
            out.push_back({"head_w", Shape(d.K_out, d.n)});
            out.push_back({"head_b", Shape(d.K_out)});
            break;
        case Variant::Lstm:
            out.push_back({"W", Shape(4 * d.n, d.K)});
            out.push_back({"U", Shape(4 * d.n, d.n)});
            out.push_back({"b", Shape(4 * d.n)});
            out.push_back({"head_w", Shape(d.K_out, d.n)});
            out.push_back({"head_b", Shape(d.K_out)});
            break;
        case Variant::Knn:
            break;
    }
    return out;
}

std::size_t param_count(Variant variant, std::size_t n, std::size_t T, std::size_t K,
                        std::size_t K_out) {
    const std::size_t base = n * K + n * T + n + n * n + n + K_out * T * K + K_out * (T * K * n + 1);
    switch (variant) {
        case Variant::Lavarnet: return base;
        case Variant::RLavarnet: return base + n * n;
        case Variant::FRLavarnet: return base + n * n * K;
        case Variant::Rnn: return n * K + n * n + n + n * n + n + K_out * n + K_out;
        case Variant::Lstm: return 4 * n * (K + n + 1) + K_out * (n + 1);
        case Variant::Knn: return 0;
    }
    return 0;
}

ModelParams::ModelParams(Variant variant, ModelDims dims, std::vector<NamedTensor> tensors)
    : variant_(variant), dims_(dims), tensors_(std::move(tensors)) {
    const std::vector<TensorSpec> layout = param_layout(variant, dims);
    if (layout.size() != tensors_.size())
        throw ContractError(fmt::format("{} expects {} tensors, got {}", to_string(variant),
                                        layout.size(), tensors_.size()));
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (layout[i].name != tensors_[i].name)
            throw ContractError(fmt::format("{}: tensor {} should be '{}', got '{}'",
                                            to_string(variant), i, layout[i].name,
                                            tensors_[i].name));
        if (layout[i].shape != tensors_[i].value.shape())
            throw DimensionError(fmt::format("{}: tensor '{}' should be {}, got {}",
                                             to_string(variant), layout[i].name,
                                             layout[i].shape.str(),
                                             tensors_[i].value.shape().str()));
    }
}

std::size_t ModelParams::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i)
        if (tensors_[i].name == name) return i;
    throw ContractError(
        fmt::format("{} parameters have no tensor '{}'", to_string(variant_), name));
}

std::size_t ModelParams::scalar_count() const {
    return std::accumulate(tensors_.begin(), tensors_.end(), std::size_t{0},
                           [](std::size_t acc, const NamedTensor& t) { return acc + t.value.size(); });
}

ModelParams zero_params(Variant variant, const ModelDims& dims) {
    std::vector<NamedTensor> tensors;
    for (const TensorSpec& spec : param_layout(variant, dims))
        tensors.push_back({spec.name, Tensor(spec.shape)});
    return ModelParams(variant, dims, std::move(tensors));
}

ModelParams init_params(Variant variant, const ModelDims& dims, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<NamedTensor> tensors;
    for (const TensorSpec& spec : param_layout(variant, dims)) {
        Tensor t(spec.shape);
        if (spec.name.starts_with("A_")) {
            for (double& v : t.values()) v = rng.uniform(-0.1, 0.1);
        } else if (!is_bias(spec.name)) {
            const double s = 1.0 / std::sqrt(static_cast<double>(spec.shape.cols()));
            for (double& v : t.values()) v = rng.uniform(-s, s);
        }
        if (variant == Variant::Lstm && spec.name == "b")
            for (std::size_t i = dims.n; i < 2 * dims.n; ++i) t[i] = 1.0;
        tensors.push_back({spec.name, std::move(t)});
    }
    return ModelParams(variant, dims, std::move(tensors));
}

BoundParams::BoundParams(Graph& graph, const ModelParams& params, bool trainable)
    : params_(&params) {
    vars_.reserve(params.tensors().size());
    for (const NamedTensor& t : params.tensors())
        vars_.push_back(trainable ? graph.parameter(t.value) : graph.constant(t.value));
}

BoundParams::BoundParams(const ModelParams& params, std::vector<Var> vars)
    : params_(&params), vars_(std::move(vars)) {
    if (vars_.size() != params.tensors().size())
        throw ContractError(fmt::format("bound parameters: {} nodes for {} tensors", vars_.size(),
                                        params.tensors().size()));
}

Var lavarnet_hidden(Graph& g, const BoundParams& p, const SeriesMatrix& X, std::size_t t,
                    std::size_t k) {
    if (!is_lavarnet_family(p.params().variant()))
        throw ContractError("lavarnet_hidden requires LAVARNET-family parameters");
    const Var pre = hidden_pre(g, p, X, t, k);
    return g.sigmoid(g.add(pre, p.get("b_h")));
}

Var rlavarnet_hidden(Graph& g, const BoundParams& p, const SeriesMatrix& X, std::size_t t,
                     std::size_t k, Var h_prev_k) {
    require_variant(p, Variant::RLavarnet, "rlavarnet_hidden");
    Var pre = hidden_pre(g, p, X, t, k);
    pre = g.add(pre, g.matvec(p.get("U_h"), h_prev_k));
    return g.sigmoid(g.add(pre, p.get("b_h")));
}

Var frlavarnet_hidden(Graph& g, const BoundParams& p, const SeriesMatrix& X, std::size_t t,
                      std::size_t k, Var h_prev_all) {
    require_variant(p, Variant::FRLavarnet, "frlavarnet_hidden");
    Var pre = hidden_pre(g, p, X, t, k);
    pre = g.add(pre, g.matvec(p.get("U_tilde"), h_prev_all));
    return g.sigmoid(g.add(pre, p.get("b_h")));
}

Var output_vector(Graph& g, const BoundParams& p, Var h) {
    return g.sigmoid(g.affine(p.get("W_y"), h, p.get("b_y")));
}

HiddenStateGrid hidden_grid(Graph& g, const BoundParams& p, const SeriesMatrix& X) {
    const ModelParams& params = p.params();
    const Variant variant = params.variant();
    if (!is_lavarnet_family(variant))
        throw ContractError("hidden_grid requires LAVARNET-family parameters");
    const ModelDims& d = params.dims();
    check_window(X, d);

    const Var W_T = p.get("W_T");
    const Var W_V = p.get("W_V");
    const Var b_h = p.get("b_h");
    const Var W_y = p.get("W_y");
    const Var b_y = p.get("b_y");
    const Var U = variant == Variant::RLavarnet    ? p.get("U_h")
                  : variant == Variant::FRLavarnet ? p.get("U_tilde")
                                                   : Var{};

    // W_T x_{t,:} depends only on t and W_V x_{:,k} only on k.
    std::vector<Var> row_proj(d.T), col_proj(d.K);
    for (std::size_t t = 0; t < d.T; ++t) row_proj[t] = g.matvec(W_T, g.constant(X.row(t)));
    for (std::size_t k = 0; k < d.K; ++k) col_proj[k] = g.matvec(W_V, column_constant(g, X, k));

    HiddenStateGrid grid{d.T, d.K, std::vector<Var>(d.T * d.K), std::vector<Var>(d.T * d.K)};
    for (std::size_t t = 0; t < d.T; ++t) {
        // The zero initial state contributes nothing at t = 0.
        Var recurrent_all;
        if (variant == Variant::FRLavarnet && t > 0)
            recurrent_all = g.matvec(
                U, g.concat(std::span<const Var>(grid.h).subspan((t - 1) * d.K, d.K)));
        for (std::size_t k = 0; k < d.K; ++k) {
            Var pre = g.add(row_proj[t], col_proj[k]);
            if (variant == Variant::RLavarnet && t > 0)
                pre = g.add(pre, g.matvec(U, grid.h_at(t - 1, k)));
            if (recurrent_all.valid()) pre = g.add(pre, recurrent_all);
            const Var h = g.sigmoid(g.add(pre, b_h));
            grid.h[t * d.K + k] = h;
            grid.y[t * d.K + k] = g.sigmoid(g.affine(W_y, h, b_y));
        }
    }
    return grid;
}

ElmanStep elman_step(Graph& g, const BoundParams& p, Var x_t, Var h_prev) {
    require_variant(p, Variant::Rnn, "elman_step");
    Var pre = g.matvec(p.get("W_h"), x_t);
    pre = g.add(pre, g.matvec(p.get("U_h"), h_prev));
    const Var h = g.sigmoid(g.add(pre, p.get("b_h")));
    const Var y = g.sigmoid(g.affine(p.get("W_y"), h, p.get("b_y")));
    return {h, y};
}

LstmState lstm_step(Graph& g, const BoundParams& p, Var x_t, LstmState state) {
    require_variant(p, Variant::Lstm, "lstm_step");
    const std::size_t n = p.params().dims().n;
    const Var z = g.add(g.affine(p.get("W"), x_t, p.get("b")), g.matvec(p.get("U"), state.h));
    const Var input = g.sigmoid(g.slice(z, 0, n));
    const Var forget = g.sigmoid(g.slice(z, n, n));
    const Var candidate = g.tanh(g.slice(z, 2 * n, n));
    const Var output = g.sigmoid(g.slice(z, 3 * n, n));
    const Var c = g.add(g.mul(forget, state.c), g.mul(input, candidate));
    const Var h = g.mul(output, g.tanh(c));
    return {h, c};
}

Var forward(Graph& g, const BoundParams& p, const SeriesMatrix& X) {
    switch (p.params().variant()) {
        case Variant::Lavarnet:
        case Variant::RLavarnet:
        case Variant::FRLavarnet:
            return forward_lavarnet(g, p, X);
        case Variant::Rnn:
            return forward_rnn(g, p, X);
        case Variant::Lstm:
            return forward_lstm(g, p, X);
        case Variant::Knn:
            break;
    }
    throw ContractError("forward: knn has no parametric forward pass");
}

std::vector<double> predict(const SeriesMatrix& X, const ModelParams& params) {
    Graph g;
    const BoundParams bound(g, params, false);
    const Var out = forward(g, bound, X);
    const auto values = g.value(out);
    return {values.begin(), values.end()};
}

std::vector<double> predict(const SeriesMatrix& X, const ModelParams& params, Variant variant) {
    if (params.variant() != variant)
        throw ContractError(fmt::format("predict: variant {} given {} parameters",
                                        to_string(variant), to_string(params.variant())));
    return predict(X, params);
}

std::vector<double> knn_predict(std::span<const double> query,
                                std::span<const std::vector<double>> train_windows,
                                std::span<const std::vector<double>> train_targets,
                                std::size_t k_neighbors) {
    if (train_windows.empty()) throw ContractError("knn_predict: empty training set");
    if (train_windows.size() != train_targets.size())
        throw ContractError("knn_predict: window/target count mismatch");
    if (k_neighbors == 0 || k_neighbors > train_windows.size())
        throw ContractError(fmt::format("knn_predict: need {} neighbors, have {} training windows",
                                        k_neighbors, train_windows.size()));

    std::vector<std::pair<double, std::size_t>> dist(train_windows.size());
    for (std::size_t i = 0; i < train_windows.size(); ++i) {
        const std::vector<double>& w = train_windows[i];
        if (w.size() != query.size())
            throw DimensionError(fmt::format("knn_predict: query has {} values, window {} has {}",
                                             query.size(), i, w.size()));
        double acc = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double diff = query[j] - w[j];
            acc += diff * diff;
        }
        dist[i] = {acc, i};
    }
    // Pair ordering breaks distance ties by the smaller index.
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_neighbors),
                      dist.end());

    std::vector<double> out(train_targets[dist[0].second].size(), 0.0);
    for (std::size_t r = 0; r < k_neighbors; ++r) {
        const std::vector<double>& target = train_targets[dist[r].second];
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += target[j];
    }
    for (double& v : out) v /= static_cast<double>(k_neighbors);
    return out;
}

}  // namespace lavarnet
