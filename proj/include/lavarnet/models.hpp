#ifndef LAVARNET_MODELS_HPP
#define LAVARNET_MODELS_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lavarnet/graph.hpp"
#include "lavarnet/series.hpp"
#include "lavarnet/tensor.hpp"

namespace lavarnet {

enum class Variant { Lavarnet, RLavarnet, FRLavarnet, Rnn, Lstm, Knn };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);
bool is_lavarnet_family(Variant v);

// n: neurons, T: window length, K: input variables, K_out: predicted targets.
struct ModelDims {
    std::size_t n = 0;
    std::size_t T = 0;
    std::size_t K = 0;
    std::size_t K_out = 0;

    bool operator==(const ModelDims&) const = default;
};

struct NamedTensor {
    std::string name;
    Tensor value;

    bool operator==(const NamedTensor&) const = default;
};

struct TensorSpec {
    std::string name;
    Shape shape;
};

// Tensor names and shapes, in canonical order, for a variant.
//
// LAVARNET family: W_T, W_V, [U_h | U_tilde], b_h, W_y, b_y, then for each
// target i: A_i (T x K), head_w_i (1 x T*K*n), head_b_i (1).
// Rnn: W_h, U_h, b_h, W_y, b_y, head_w (K_out x n), head_b.
// Lstm: W (4n x K), U (4n x n), b (4n), head_w, head_b; gate blocks are
// ordered input, forget, candidate, output.
// Knn has no tensors.
std::vector<TensorSpec> param_layout(Variant variant, const ModelDims& dims);

// Number of trainable scalars.
std::size_t param_count(Variant variant, std::size_t n, std::size_t T, std::size_t K,
                        std::size_t K_out);

// All trainable tensors of one model.
class ModelParams {
public:
    ModelParams() = default;
    // Throws ContractError unless `tensors` matches param_layout exactly.
    ModelParams(Variant variant, ModelDims dims, std::vector<NamedTensor> tensors);

    Variant variant() const { return variant_; }
    const ModelDims& dims() const { return dims_; }

    std::span<const NamedTensor> tensors() const { return tensors_; }
    std::span<NamedTensor> tensors() { return tensors_; }
    std::size_t index_of(std::string_view name) const;
    const Tensor& get(std::string_view name) const { return tensors_[index_of(name)].value; }
    Tensor& get(std::string_view name) { return tensors_[index_of(name)].value; }
    std::size_t scalar_count() const;

    bool operator==(const ModelParams&) const = default;

private:
    Variant variant_ = Variant::Lavarnet;
    ModelDims dims_;
    std::vector<NamedTensor> tensors_;
};

ModelParams zero_params(Variant variant, const ModelDims& dims);

// Weights ~ U[-s, s] with s = 1/sqrt(fan-in) (fan-in = columns), biases zero,
// A matrices ~ U[-0.1, 0.1]. The LSTM forget-gate bias starts at 1.
ModelParams init_params(Variant variant, const ModelDims& dims, std::uint64_t seed);

// Parameters registered as graph nodes, in canonical order.
class BoundParams {
public:
    BoundParams(Graph& graph, const ModelParams& params, bool trainable);
    // Uses existing nodes, one per tensor in canonical order. Values are read
    // from the nodes; `params` supplies only variant and dims.
    BoundParams(const ModelParams& params, std::vector<Var> vars);

    const ModelParams& params() const { return *params_; }
    std::span<const Var> vars() const { return vars_; }
    Var operator[](std::size_t index) const { return vars_[index]; }
    Var get(std::string_view name) const { return vars_[params_->index_of(name)]; }

private:
    const ModelParams* params_;
    std::vector<Var> vars_;
};

// Hidden state h_{t,k} of the non-recurrent variant. X is the T x K input
// window; t and k are zero-based.
Var lavarnet_hidden(Graph& g, const BoundParams& p, const SeriesMatrix& X, std::size_t t,
                    std::size_t k);
// Adds U_h * h_prev_k, h_prev_k being h_{t-1,k} (zero vector at t = 0).
Var rlavarnet_hidden(Graph& g, const BoundParams& p, const SeriesMatrix& X, std::size_t t,
                     std::size_t k, Var h_prev_k);
// Adds U_tilde * h_prev_all, the concatenation h_{t-1,0} .. h_{t-1,K-1}.
Var frlavarnet_hidden(Graph& g, const BoundParams& p, const SeriesMatrix& X, std::size_t t,
                      std::size_t k, Var h_prev_all);
// y = sigmoid(W_y h + b_y).
Var output_vector(Graph& g, const BoundParams& p, Var h);

// The T*K hidden states and output vectors, indexed t-major.
struct HiddenStateGrid {
    std::size_t T = 0;
    std::size_t K = 0;
    std::vector<Var> h;
    std::vector<Var> y;

    Var h_at(std::size_t t, std::size_t k) const { return h[t * K + k]; }
    Var y_at(std::size_t t, std::size_t k) const { return y[t * K + k]; }
};

HiddenStateGrid hidden_grid(Graph& g, const BoundParams& p, const SeriesMatrix& X);

struct ElmanStep {
    Var h;
    Var y;
};

// h_t = sigmoid(W_h x_t + U_h h_prev + b_h), y_t = sigmoid(W_y h_t + b_y).
ElmanStep elman_step(Graph& g, const BoundParams& p, Var x_t, Var h_prev);

struct LstmState {
    Var h;
    Var c;
};

LstmState lstm_step(Graph& g, const BoundParams& p, Var x_t, LstmState state);

// Prediction vector of length K_out for one T x K window, as a graph node.
// Not defined for Knn.
Var forward(Graph& g, const BoundParams& p, const SeriesMatrix& X);

std::vector<double> predict(const SeriesMatrix& X, const ModelParams& params);
// Throws ContractError if `variant` does not match the parameters.
std::vector<double> predict(const SeriesMatrix& X, const ModelParams& params, Variant variant);

// Mean target of the k nearest training windows (Euclidean distance over the
// flattened window); ties go to the earlier training index.
std::vector<double> knn_predict(std::span<const double> query,
                                std::span<const std::vector<double>> train_windows,
                                std::span<const std::vector<double>> train_targets,
                                std::size_t k_neighbors = 5);

}  // namespace lavarnet

#endif  // LAVARNET_MODELS_HPP
