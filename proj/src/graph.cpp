#include "lavarnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "lavarnet/errors.hpp"

namespace lavarnet {

namespace {

constexpr double kSigmoidLow = std::numeric_limits<double>::denorm_min();

bool is_vector_like(const Shape& s) { return s.rank() == 1; }

}  // namespace

double sigmoid(double x) noexcept {
    double y;
    if (x >= 0.0) {
        y = 1.0 / (1.0 + std::exp(-x));
    } else {
        const double e = std::exp(x);
        y = e / (1.0 + e);
    }
    // The upper tail rounds to 1.0 for x above ~36.7; saturated gates must
    // pass values through unchanged.
    return std::max(y, kSigmoidLow);
}

Tensor sigmoid(const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
    return out;
}

Tensor matvec(const Tensor& w, const Tensor& x) {
    if (w.shape().rank() != 2 || x.shape().rank() != 1 || w.cols() != x.size())
        throw DimensionError(
            fmt::format("matvec: {} does not conform with {}", w.shape().str(), x.shape().str()));
    Tensor out(Shape(w.rows()));
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) acc += w.at(i, j) * x[j];
        out[i] = acc;
    }
    return out;
}

void Graph::check(Var v) const {
    if (!v.valid() || v.id >= nodes_.size()) throw ContractError("graph: invalid variable handle");
}

Var Graph::push(Op op, Shape shape, std::initializer_list<Var> inputs, std::size_t aux) {
    Node node{};
    node.op = op;
    node.shape = shape;
    node.offset = values_.size();
    node.aux = aux;
    node.requires_grad = op == Op::Parameter;
    std::fill(std::begin(node.in), std::end(node.in), Var::npos);
    std::size_t slot = 0;
    for (Var v : inputs) {
        node.in[slot++] = v.id;
        node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
    }
    nodes_.push_back(node);
    values_.resize(values_.size() + shape.size());
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(const Tensor& value) {
    const Var v = push(Op::Constant, value.shape(), {});
    std::copy(value.values().begin(), value.values().end(), val(v.id));
    return v;
}

Var Graph::constant(std::span<const double> values) {
    if (values.empty()) throw DimensionError("graph: empty constant");
    const Var v = push(Op::Constant, Shape(values.size()), {});
    std::copy(values.begin(), values.end(), val(v.id));
    return v;
}

Var Graph::parameter(const Tensor& value) {
    const Var v = push(Op::Parameter, value.shape(), {});
    std::copy(value.values().begin(), value.values().end(), val(v.id));
    return v;
}

Var Graph::matvec(Var w, Var x) {
    check(w);
    check(x);
    const Shape ws = shape(w);
    const Shape xs = shape(x);
    if (ws.rank() != 2 || !is_vector_like(xs) || ws.cols() != xs.size())
        throw DimensionError(fmt::format("matvec: {} does not conform with {}", ws.str(), xs.str()));
    const Var out = push(Op::MatVec, Shape(ws.rows()), {w, x});
    const double* W = val(w.id);
    const double* X = val(x.id);
    double* Y = val(out.id);
    const std::size_t n = ws.rows(), m = ws.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* row = W + i * m;
        for (std::size_t j = 0; j < m; ++j) acc += row[j] * X[j];
        Y[i] = acc;
    }
    return out;
}

Var Graph::affine(Var w, Var x, Var b) {
    check(w);
    check(x);
    check(b);
    const Shape ws = shape(w);
    const Shape xs = shape(x);
    const Shape bs = shape(b);
    if (ws.rank() != 2 || !is_vector_like(xs) || ws.cols() != xs.size())
        throw DimensionError(fmt::format("affine: {} does not conform with {}", ws.str(), xs.str()));
    if (!is_vector_like(bs) || bs.size() != ws.rows())
        throw DimensionError(
            fmt::format("affine: bias {} does not conform with {}", bs.str(), ws.str()));
    const Var out = push(Op::Affine, Shape(ws.rows()), {w, x, b});
    const double* W = val(w.id);
    const double* X = val(x.id);
    const double* B = val(b.id);
    double* Y = val(out.id);
    const std::size_t n = ws.rows(), m = ws.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* row = W + i * m;
        for (std::size_t j = 0; j < m; ++j) acc += row[j] * X[j];
        Y[i] = acc + B[i];
    }
    return out;
}

Var Graph::add(Var a, Var b) {
    check(a);
    check(b);
    if (shape(a) != shape(b))
        throw DimensionError(fmt::format("add: {} vs {}", shape(a).str(), shape(b).str()));
    const Var out = push(Op::Add, shape(a), {a, b});
    const double* A = val(a.id);
    const double* B = val(b.id);
    double* Y = val(out.id);
    for (std::size_t i = 0, n = shape(out).size(); i < n; ++i) Y[i] = A[i] + B[i];
    return out;
}

Var Graph::mul(Var a, Var b) {
    check(a);
    check(b);
    if (shape(a) != shape(b))
        throw DimensionError(fmt::format("mul: {} vs {}", shape(a).str(), shape(b).str()));
    const Var out = push(Op::Mul, shape(a), {a, b});
    const double* A = val(a.id);
    const double* B = val(b.id);
    double* Y = val(out.id);
    for (std::size_t i = 0, n = shape(out).size(); i < n; ++i) Y[i] = A[i] * B[i];
    return out;
}

Var Graph::scale(Var s, Var v) {
    check(s);
    check(v);
    if (shape(s).size() != 1)
        throw DimensionError(fmt::format("scale: factor {} is not a scalar (operand {})",
                                         shape(s).str(), shape(v).str()));
    const Var out = push(Op::Scale, shape(v), {s, v});
    const double f = *val(s.id);
    const double* V = val(v.id);
    double* Y = val(out.id);
    for (std::size_t i = 0, n = shape(out).size(); i < n; ++i) Y[i] = f * V[i];
    return out;
}

Var Graph::sigmoid(Var x) {
    check(x);
    const Var out = push(Op::Sigmoid, shape(x), {x});
    const double* X = val(x.id);
    double* Y = val(out.id);
    for (std::size_t i = 0, n = shape(out).size(); i < n; ++i) Y[i] = lavarnet::sigmoid(X[i]);
    return out;
}

Var Graph::tanh(Var x) {
    check(x);
    const Var out = push(Op::Tanh, shape(x), {x});
    const double* X = val(x.id);
    double* Y = val(out.id);
    for (std::size_t i = 0, n = shape(out).size(); i < n; ++i) Y[i] = std::tanh(X[i]);
    return out;
}

Var Graph::element(Var t, std::size_t index) {
    check(t);
    if (index >= shape(t).size())
        throw ContractError(
            fmt::format("element: index {} out of range for {}", index, shape(t).str()));
    const Var out = push(Op::Element, Shape(1), {t}, index);
    *val(out.id) = val(t.id)[index];
    return out;
}

Var Graph::slice(Var v, std::size_t offset, std::size_t length) {
    check(v);
    if (length == 0 || offset + length > shape(v).size())
        throw ContractError(fmt::format("slice: [{}, {}) out of range for {}", offset,
                                        offset + length, shape(v).str()));
    const Var out = push(Op::Slice, Shape(length), {v}, offset);
    const double* V = val(v.id) + offset;
    std::copy(V, V + length, val(out.id));
    return out;
}

Var Graph::concat(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat: no operands");
    std::size_t total = 0;
    bool grad = false;
    for (Var p : parts) {
        check(p);
        total += shape(p).size();
        grad = grad || needs(p.id);
    }
    const Var out = push(Op::Concat, Shape(total), {});
    Node& node = nodes_[out.id];
    node.requires_grad = grad;
    node.list_begin = lists_.size();
    node.list_count = parts.size();
    double* Y = val(out.id);
    for (Var p : parts) {
        lists_.push_back(p.id);
        const std::size_t n = shape(p).size();
        std::copy(val(p.id), val(p.id) + n, Y);
        Y += n;
    }
    return out;
}

Var Graph::weighted_concat(Var weights, std::span<const Var> parts) {
    check(weights);
    if (parts.size() != shape(weights).size())
        throw DimensionError(fmt::format("weighted_concat: weights {} for {} operands",
                                         shape(weights).str(), parts.size()));
    std::size_t total = 0;
    bool grad = needs(weights.id);
    for (Var p : parts) {
        check(p);
        total += shape(p).size();
        grad = grad || needs(p.id);
    }
    const Var out = push(Op::WeightedConcat, Shape(total), {weights});
    Node& node = nodes_[out.id];
    node.requires_grad = grad;
    node.list_begin = lists_.size();
    node.list_count = parts.size();
    const double* w = val(weights.id);
    double* Y = val(out.id);
    for (std::size_t j = 0; j < parts.size(); ++j) {
        lists_.push_back(parts[j].id);
        const double* P = val(parts[j].id);
        const std::size_t n = shape(parts[j]).size();
        for (std::size_t i = 0; i < n; ++i) Y[i] = w[j] * P[i];
        Y += n;
    }
    return out;
}

Var Graph::mse(Var pred, Var target) {
    check(pred);
    check(target);
    if (shape(pred).size() != shape(target).size())
        throw DimensionError(
            fmt::format("mse: {} vs {}", shape(pred).str(), shape(target).str()));
    const Var out = push(Op::Mse, Shape(1), {pred, target});
    const double* P = val(pred.id);
    const double* T = val(target.id);
    const std::size_t n = shape(pred).size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = P[i] - T[i];
        acc += d * d;
    }
    *val(out.id) = acc / static_cast<double>(n);
    return out;
}

Var Graph::mean(std::span<const Var> scalars) {
    if (scalars.empty()) throw DimensionError("mean: no operands");
    bool grad = false;
    for (Var s : scalars) {
        check(s);
        if (shape(s).size() != 1)
            throw DimensionError(fmt::format("mean: operand {} is not a scalar", shape(s).str()));
        grad = grad || needs(s.id);
    }
    const Var out = push(Op::Mean, Shape(1), {});
    Node& node = nodes_[out.id];
    node.requires_grad = grad;
    node.list_begin = lists_.size();
    node.list_count = scalars.size();
    double acc = 0.0;
    for (Var s : scalars) {
        lists_.push_back(s.id);
        acc += *val(s.id);
    }
    *val(out.id) = acc / static_cast<double>(scalars.size());
    return out;
}

std::span<const double> Graph::value(Var v) const {
    check(v);
    return {val(v.id), nodes_[v.id].shape.size()};
}

std::span<const double> Graph::grad(Var v) const {
    check(v);
    if (grads_.size() != values_.size())
        throw ContractError("graph: gradients requested before backward()");
    return {grads_.data() + nodes_[v.id].offset, nodes_[v.id].shape.size()};
}

Tensor Graph::value_tensor(Var v) const {
    const auto span = value(v);
    return Tensor(shape(v), std::vector<double>(span.begin(), span.end()));
}

Tensor Graph::grad_tensor(Var v) const {
    const auto span = grad(v);
    return Tensor(shape(v), std::vector<double>(span.begin(), span.end()));
}

std::vector<Var> Graph::parameters() const {
    std::vector<Var> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (nodes_[i].op == Op::Parameter) out.push_back(Var{static_cast<std::uint32_t>(i)});
    return out;
}

void Graph::clear() {
    nodes_.clear();
    values_.clear();
    grads_.clear();
    lists_.clear();
}

void Graph::backward(Var loss) {
    check(loss);
    if (shape(loss).size() != 1)
        throw ContractError(
            fmt::format("backward: loss must be scalar, got shape {}", shape(loss).str()));
    grads_.assign(values_.size(), 0.0);
    *grd(loss.id) = 1.0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
        if (nodes_[id].requires_grad) backward_node(id);
    }
}

void Graph::backward_node(std::size_t id) {
    const Node& node = nodes_[id];
    const double* g = grads_.data() + node.offset;
    const std::size_t n = node.shape.size();
    switch (node.op) {
        case Op::Constant:
        case Op::Parameter:
            break;
        case Op::MatVec:
        case Op::Affine: {
            const std::uint32_t w = node.in[0], x = node.in[1];
            const std::size_t m = nodes_[w].shape.cols();
            const double* W = val(w);
            const double* X = val(x);
            if (needs(w)) {
                double* dW = grd(w);
                for (std::size_t i = 0; i < n; ++i) {
                    const double gi = g[i];
                    if (gi == 0.0) continue;
                    double* row = dW + i * m;
                    for (std::size_t j = 0; j < m; ++j) row[j] += gi * X[j];
                }
            }
            if (needs(x)) {
                double* dX = grd(x);
                for (std::size_t i = 0; i < n; ++i) {
                    const double gi = g[i];
                    const double* row = W + i * m;
                    for (std::size_t j = 0; j < m; ++j) dX[j] += row[j] * gi;
                }
            }
            if (node.op == Op::Affine && needs(node.in[2])) {
                double* dB = grd(node.in[2]);
                for (std::size_t i = 0; i < n; ++i) dB[i] += g[i];
            }
            break;
        }
        case Op::Add:
            for (std::uint32_t in : {node.in[0], node.in[1]}) {
                if (!needs(in)) continue;
                double* d = grd(in);
                for (std::size_t i = 0; i < n; ++i) d[i] += g[i];
            }
            break;
        case Op::Mul: {
            const std::uint32_t a = node.in[0], b = node.in[1];
            if (needs(a)) {
                double* d = grd(a);
                const double* B = val(b);
                for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * B[i];
            }
            if (needs(b)) {
                double* d = grd(b);
                const double* A = val(a);
                for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * A[i];
            }
            break;
        }
        case Op::Scale: {
            const std::uint32_t s = node.in[0], v = node.in[1];
            const double* V = val(v);
            if (needs(s)) {
                double acc = 0.0;
                for (std::size_t i = 0; i < n; ++i) acc += g[i] * V[i];
                *grd(s) += acc;
            }
            if (needs(v)) {
                const double f = *val(s);
                double* d = grd(v);
                for (std::size_t i = 0; i < n; ++i) d[i] += f * g[i];
            }
            break;
        }
        case Op::Sigmoid: {
            const double* Y = val(static_cast<std::uint32_t>(id));
            double* d = grd(node.in[0]);
            for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * Y[i] * (1.0 - Y[i]);
            break;
        }
        case Op::Tanh: {
            const double* Y = val(static_cast<std::uint32_t>(id));
            double* d = grd(node.in[0]);
            for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * (1.0 - Y[i] * Y[i]);
            break;
        }
        case Op::Element:
            grd(node.in[0])[node.aux] += g[0];
            break;
        case Op::Slice: {
            double* d = grd(node.in[0]) + node.aux;
            for (std::size_t i = 0; i < n; ++i) d[i] += g[i];
            break;
        }
        case Op::Concat: {
            const double* G = g;
            for (std::size_t j = 0; j < node.list_count; ++j) {
                const std::uint32_t p = lists_[node.list_begin + j];
                const std::size_t len = nodes_[p].shape.size();
                if (needs(p)) {
                    double* d = grd(p);
                    for (std::size_t i = 0; i < len; ++i) d[i] += G[i];
                }
                G += len;
            }
            break;
        }
        case Op::WeightedConcat: {
            const std::uint32_t w = node.in[0];
            const double* W = val(w);
            double* dW = needs(w) ? grd(w) : nullptr;
            const double* G = g;
            for (std::size_t j = 0; j < node.list_count; ++j) {
                const std::uint32_t p = lists_[node.list_begin + j];
                const std::size_t len = nodes_[p].shape.size();
                const double* P = val(p);
                if (dW) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < len; ++i) acc += G[i] * P[i];
                    dW[j] += acc;
                }
                if (needs(p)) {
                    double* d = grd(p);
                    for (std::size_t i = 0; i < len; ++i) d[i] += W[j] * G[i];
                }
                G += len;
            }
            break;
        }
        case Op::Mse: {
            const std::uint32_t p = node.in[0], t = node.in[1];
            const std::size_t m = nodes_[p].shape.size();
            const double* P = val(p);
            const double* T = val(t);
            const double coef = 2.0 * g[0] / static_cast<double>(m);
            if (needs(p)) {
                double* d = grd(p);
                for (std::size_t i = 0; i < m; ++i) d[i] += coef * (P[i] - T[i]);
            }
            if (needs(t)) {
                double* d = grd(t);
                for (std::size_t i = 0; i < m; ++i) d[i] -= coef * (P[i] - T[i]);
            }
            break;
        }
        case Op::Mean: {
            const double share = g[0] / static_cast<double>(node.list_count);
            for (std::size_t j = 0; j < node.list_count; ++j) {
                const std::uint32_t s = lists_[node.list_begin + j];
                if (needs(s)) *grd(s) += share;
            }
            break;
        }
    }
}

}  // namespace lavarnet
