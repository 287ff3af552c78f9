#ifndef LAVARNET_GRAPH_HPP
#define LAVARNET_GRAPH_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lavarnet/tensor.hpp"

namespace lavarnet {

// Logistic function. Never returns 0; returns exactly 1.0 once 1 - sigmoid(x)
// drops below half an ulp of 1 (x > ~36.7).
double sigmoid(double x) noexcept;

Tensor sigmoid(const Tensor& x);
Tensor matvec(const Tensor& w, const Tensor& x);

// Handle to a node of a Graph. Only meaningful for the graph that issued it.
struct Var {
    static constexpr std::uint32_t npos = UINT32_MAX;
    std::uint32_t id = npos;
    bool valid() const { return id != npos; }
};

// Reverse-mode tape. Nodes are appended in construction order, which is also
// a topological order, so backward() is a single reverse sweep. Values and
// gradients of all nodes live in two flat pools; clear() keeps their capacity
// so one graph can be reused across minibatches without reallocating.
//
// A Graph is not thread-safe; use one per thread.
class Graph {
public:
    Var constant(const Tensor& value);
    Var constant(std::span<const double> values);
    // Trainable leaf. Its gradient slot has the same shape as its value.
    Var parameter(const Tensor& value);

    Var matvec(Var w, Var x);
    Var affine(Var w, Var x, Var b);
    Var add(Var a, Var b);
    Var mul(Var a, Var b);
    // Scalar (length-one) `s` times vector `v`.
    Var scale(Var s, Var v);
    Var sigmoid(Var x);
    Var tanh(Var x);
    Var element(Var t, std::size_t index);
    Var slice(Var v, std::size_t offset, std::size_t length);
    Var concat(std::span<const Var> parts);
    // concat(weights[0]*parts[0], weights[1]*parts[1], ...). `weights` may
    // have any shape; it is read in row-major order.
    Var weighted_concat(Var weights, std::span<const Var> parts);
    Var mse(Var pred, Var target);
    Var mean(std::span<const Var> scalars);

    // Accumulates d(loss)/d(node) into every node that depends on a
    // parameter. All gradient slots are reset to zero first.
    void backward(Var loss);

    const Shape& shape(Var v) const { return nodes_[v.id].shape; }
    std::span<const double> value(Var v) const;
    std::span<const double> grad(Var v) const;
    Tensor value_tensor(Var v) const;
    Tensor grad_tensor(Var v) const;

    std::vector<Var> parameters() const;
    std::size_t node_count() const { return nodes_.size(); }
    void clear();

private:
    enum class Op : std::uint8_t {
        Constant,
        Parameter,
        MatVec,
        Affine,
        Add,
        Mul,
        Scale,
        Sigmoid,
        Tanh,
        Element,
        Slice,
        Concat,
        WeightedConcat,
        Mse,
        Mean,
    };

    struct Node {
        Op op;
        bool requires_grad;
        Shape shape;
        std::size_t offset;
        std::uint32_t in[3];
        std::size_t aux;         // element index or slice offset
        std::size_t list_begin;  // operand list for concat-like ops
        std::size_t list_count;
    };

    Var push(Op op, Shape shape, std::initializer_list<Var> inputs, std::size_t aux = 0);
    double* val(std::uint32_t id) { return values_.data() + nodes_[id].offset; }
    const double* val(std::uint32_t id) const { return values_.data() + nodes_[id].offset; }
    double* grd(std::uint32_t id) { return grads_.data() + nodes_[id].offset; }
    bool needs(std::uint32_t id) const { return nodes_[id].requires_grad; }
    void check(Var v) const;
    void backward_node(std::size_t id);

    std::vector<Node> nodes_;
    std::vector<double> values_;
    std::vector<double> grads_;
    std::vector<std::uint32_t> lists_;
};

}  // namespace lavarnet

#endif  // LAVARNET_GRAPH_HPP
