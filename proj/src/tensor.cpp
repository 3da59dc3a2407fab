// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#include "modvid/tensor.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_set>

namespace modvid::nd {

namespace {

thread_local bool t_grad_enabled = true;
thread_local std::uint64_t t_macs = 0;

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out + "]";
}

bool any_requires(const std::vector<Tensor>& ts) {
    for (const auto& t : ts)
        if (t.requires_grad()) return true;
    return false;
}

// Wraps a forward value into a graph node; the backward closure is kept only
// when recording is on and some input needs a gradient.
Tensor make_result(Shape shape, Vector value, const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward_fn) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    if (t_grad_enabled && any_requires(inputs)) {
        node->requires_grad = true;
        for (const auto& t : inputs) node->inputs.push_back(t.node());
        node->backward = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

MatrixMap grad_map(Node& n, Index rows, Index cols) { return {n.grad.data(), rows, cols}; }

ConstMatrixMap value_map(const Node& n, Index rows, Index cols) {
    return {n.value.data(), rows, cols};
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2)
        throw InvalidArgument(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw InvalidArgument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
}

// outer x axis x inner decomposition used by softmax.
struct AxisSplit {
    Index outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& s, Index axis) {
    if (axis < 0) axis += static_cast<Index>(s.size());
    if (axis < 0 || axis >= static_cast<Index>(s.size()))
        throw InvalidArgument("softmax: axis out of range for " + shape_str(s));
    AxisSplit a;
    for (Index i = 0; i < axis; ++i) a.outer *= s[static_cast<std::size_t>(i)];
    a.len = s[static_cast<std::size_t>(axis)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) a.inner *= s[i];
    return a;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

} // namespace

Index numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), Index{1}, std::multiplies<>());
}

void Node::accumulate(const Vector& g) {
    if (!requires_grad) return;
    if (grad.size() != value.size()) grad = Vector::Zero(value.size());
    grad += g;
}

void Node::accumulate_matrix(const Eigen::Ref<const RowMatrix>& g) {
    if (!requires_grad) return;
    if (grad.size() != value.size()) grad = Vector::Zero(value.size());
    MatrixMap(grad.data(), g.rows(), g.cols()) += g;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const Index n = nd::numel(shape);
    return from_values(std::move(shape), Vector::Zero(n), requires_grad);
}

Tensor Tensor::from_values(Shape shape, Vector values, bool requires_grad) {
    if (nd::numel(shape) != values.size())
        throw InvalidArgument("Tensor: " + std::to_string(values.size()) +
                              " values do not fill shape " + shape_str(shape));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m, bool requires_grad) {
    Vector v(m.size());
    MatrixMap(v.data(), m.rows(), m.cols()) = m;
    return from_values({m.rows(), m.cols()}, std::move(v), requires_grad);
}

Tensor Tensor::scalar(double v) { return from_values({}, Vector::Constant(1, v)); }

Index Tensor::rows() const {
    if (rank() == 2) return dim(0);
    if (rank() <= 1) return 1;
    throw InvalidArgument("Tensor: no matrix view for " + shape_str(shape()));
}

Index Tensor::cols() const {
    if (rank() == 2) return dim(1);
    if (rank() == 1) return dim(0);
    if (rank() == 0) return 1;
    throw InvalidArgument("Tensor: no matrix view for " + shape_str(shape()));
}

double Tensor::item() const {
    if (numel() != 1) throw InvalidArgument("Tensor::item on " + shape_str(shape()));
    return node_->value[0];
}

Vector Tensor::grad() const {
    return has_grad() ? node_->grad : Vector::Zero(numel());
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

std::uint64_t mac_count() { return t_macs; }
void reset_mac_count() { t_macs = 0; }

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw InvalidArgument("matmul: inner dimensions " + shape_str(a.shape()) + " * " +
                              shape_str(b.shape()));
    t_macs += static_cast<std::uint64_t>(m * k * n);
    Vector out(m * n);
    MatrixMap(out.data(), m, n).noalias() = a.matrix() * b.matrix();
    return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        auto& an = *self.inputs[0];
        auto& bn = *self.inputs[1];
        ConstMatrixMap g(self.grad.data(), m, n);
        if (an.requires_grad) an.accumulate_matrix(RowMatrix(g * value_map(bn, k, n).transpose()));
        if (bn.requires_grad) bn.accumulate_matrix(RowMatrix(value_map(an, m, k).transpose() * g));
    });
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const Index m = a.dim(0), n = a.dim(1);
    Vector out(m * n);
    MatrixMap(out.data(), n, m) = a.matrix().transpose();
    return make_result({n, m}, std::move(out), {a}, [m, n](Node& self) {
        self.inputs[0]->accumulate_matrix(RowMatrix(ConstMatrixMap(self.grad.data(), n, m).transpose()));
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    return make_result(a.shape(), a.values() + b.values(), {a, b}, [](Node& self) {
        self.inputs[0]->accumulate(self.grad);
        self.inputs[1]->accumulate(self.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    return make_result(a.shape(), a.values() - b.values(), {a, b}, [](Node& self) {
        self.inputs[0]->accumulate(self.grad);
        self.inputs[1]->accumulate(Vector(-self.grad));
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    return make_result(a.shape(), a.values().cwiseProduct(b.values()), {a, b}, [](Node& self) {
        auto& an = *self.inputs[0];
        auto& bn = *self.inputs[1];
        if (an.requires_grad) an.accumulate(Vector(self.grad.cwiseProduct(bn.value)));
        if (bn.requires_grad) bn.accumulate(Vector(self.grad.cwiseProduct(an.value)));
    });
}

Tensor scale(const Tensor& a, double s) {
    return make_result(a.shape(), a.values() * s, {a},
                       [s](Node& self) { self.inputs[0]->accumulate(Vector(self.grad * s)); });
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
    require_rank2(a, "add_row");
    const Index m = a.dim(0), n = a.dim(1);
    if (bias.numel() != n)
        throw InvalidArgument("add_row: bias " + shape_str(bias.shape()) + " for " +
                              shape_str(a.shape()));
    Vector out(m * n);
    MatrixMap(out.data(), m, n) = a.matrix().rowwise() + bias.values().transpose();
    return make_result({m, n}, std::move(out), {a, bias}, [m, n](Node& self) {
        self.inputs[0]->accumulate(self.grad);
        auto& bn = *self.inputs[1];
        if (bn.requires_grad)
            bn.accumulate(Vector(ConstMatrixMap(self.grad.data(), m, n).colwise().sum().transpose()));
    });
}

Tensor affine_row(const Tensor& a, const Tensor& w, const Tensor& b) {
    require_rank2(a, "affine_row");
    const Index m = a.dim(0), n = a.dim(1);
    if (w.numel() != n || b.numel() != n)
        throw InvalidArgument("affine_row: parameter size mismatch for " + shape_str(a.shape()));
    Vector out(m * n);
    MatrixMap(out.data(), m, n) =
        (a.matrix().array().rowwise() * w.values().transpose().array()).rowwise() +
        b.values().transpose().array();
    return make_result({m, n}, std::move(out), {a, w, b}, [m, n](Node& self) {
        auto& an = *self.inputs[0];
        auto& wn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        ConstMatrixMap g(self.grad.data(), m, n);
        if (an.requires_grad)
            an.accumulate_matrix(RowMatrix(g.array().rowwise() * wn.value.transpose().array()));
        if (wn.requires_grad)
            wn.accumulate(Vector(
                (g.array() * value_map(an, m, n).array()).colwise().sum().transpose()));
        if (bn.requires_grad) bn.accumulate(Vector(g.colwise().sum().transpose()));
    });
}

Tensor softmax(const Tensor& x, Index axis) {
    const AxisSplit s = split_axis(x.shape(), axis);
    const Vector& in = x.values();
    if (in.hasNaN()) throw InvalidData("softmax: NaN input");
    Vector out(in.size());
    for (Index o = 0; o < s.outer; ++o) {
        for (Index i = 0; i < s.inner; ++i) {
            const Index base = o * s.len * s.inner + i;
            double top = -std::numeric_limits<double>::infinity();
            for (Index j = 0; j < s.len; ++j) top = std::max(top, in[base + j * s.inner]);
            double total = 0.0;
            for (Index j = 0; j < s.len; ++j) {
                const double e = std::exp(in[base + j * s.inner] - top);
                out[base + j * s.inner] = e;
                total += e;
            }
            for (Index j = 0; j < s.len; ++j) out[base + j * s.inner] /= total;
        }
    }
    return make_result(x.shape(), std::move(out), {x}, [s](Node& self) {
        const Vector& y = self.value;
        const Vector& g = self.grad;
        Vector dx(y.size());
        for (Index o = 0; o < s.outer; ++o) {
            for (Index i = 0; i < s.inner; ++i) {
                const Index base = o * s.len * s.inner + i;
                double dot = 0.0;
                for (Index j = 0; j < s.len; ++j) dot += g[base + j * s.inner] * y[base + j * s.inner];
                for (Index j = 0; j < s.len; ++j) {
                    const Index p = base + j * s.inner;
                    dx[p] = y[p] * (g[p] - dot);
                }
            }
        }
        self.inputs[0]->accumulate(dx);
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.rank() < 1) throw InvalidArgument("layer_norm: scalar input");
    const Index n = x.shape().back();
    const Index m = n == 0 ? 0 : x.numel() / n;
    if (n < 2) throw InvalidArgument("layer_norm: normalised axis needs length >= 2");
    if (gain.numel() != n || bias.numel() != n)
        throw InvalidArgument("layer_norm: gain/bias must have length " + std::to_string(n));

    ConstMatrixMap in(x.values().data(), m, n);
    RowMatrix xhat(m, n);
    Vector inv_std(m);
    for (Index r = 0; r < m; ++r) {
        const double mu = in.row(r).mean();
        const double var = (in.row(r).array() - mu).square().mean();
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = (in.row(r).array() - mu) * inv_std[r];
    }
    Vector out(m * n);
    MatrixMap(out.data(), m, n) =
        (xhat.array().rowwise() * gain.values().transpose().array()).rowwise() +
        bias.values().transpose().array();
    return make_result(x.shape(), std::move(out), {x, gain, bias},
                       [m, n, xhat = std::move(xhat), inv_std](Node& self) {
        auto& xn = *self.inputs[0];
        auto& gn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        ConstMatrixMap g(self.grad.data(), m, n);
        if (xn.requires_grad) {
            RowMatrix dxhat = g.array().rowwise() * gn.value.transpose().array();
            RowMatrix dx(m, n);
            for (Index r = 0; r < m; ++r) {
                const double mean_d = dxhat.row(r).mean();
                const double mean_dx = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
                dx.row(r) = inv_std[r] *
                            (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx);
            }
            xn.accumulate_matrix(dx);
        }
        if (gn.requires_grad)
            gn.accumulate(Vector((g.array() * xhat.array()).colwise().sum().transpose()));
        if (bn.requires_grad) bn.accumulate(Vector(g.colwise().sum().transpose()));
    });
}

Tensor gelu(const Tensor& x) {
    const Vector& in = x.values();
    Vector out(in.size());
    for (Index i = 0; i < in.size(); ++i) out[i] = in[i] * 0.5 * std::erfc(-in[i] * kInvSqrt2);
    return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
        const Vector& v = self.inputs[0]->value;
        Vector dx(v.size());
        for (Index i = 0; i < v.size(); ++i) {
            const double cdf = 0.5 * std::erfc(-v[i] * kInvSqrt2);
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v[i] * v[i]);
            dx[i] = self.grad[i] * (cdf + v[i] * pdf);
        }
        self.inputs[0]->accumulate(dx);
    });
}

Tensor sigmoid(const Tensor& x) {
    Vector out = x.values().unaryExpr([](double v) {
        return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    });
    return make_result(x.shape(), std::move(out), {x}, [](Node& self) {
        const Vector& y = self.value;
        self.inputs[0]->accumulate(
            Vector(self.grad.array() * y.array() * (1.0 - y.array())));
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel(shape) != x.numel())
        throw InvalidArgument("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
    return make_result(std::move(shape), x.values(), {x},
                       [](Node& self) { self.inputs[0]->accumulate(self.grad); });
}

Tensor slice_cols(const Tensor& x, Index start, Index count) {
    require_rank2(x, "slice_cols");
    const Index m = x.dim(0), n = x.dim(1);
    if (start < 0 || count < 0 || start + count > n)
        throw InvalidArgument("slice_cols: range out of bounds");
    Vector out(m * count);
    MatrixMap(out.data(), m, count) = x.matrix().middleCols(start, count);
    return make_result({m, count}, std::move(out), {x}, [m, n, start, count](Node& self) {
        auto& xn = *self.inputs[0];
        if (!xn.requires_grad) return;
        if (xn.grad.size() != xn.value.size()) xn.grad = Vector::Zero(xn.value.size());
        grad_map(xn, m, n).middleCols(start, count) += ConstMatrixMap(self.grad.data(), m, count);
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
    const Index m = parts.front().rows();
    Index n = 0;
    std::vector<Index> widths;
    for (const auto& p : parts) {
        require_rank2(p, "concat_cols");
        if (p.dim(0) != m) throw InvalidArgument("concat_cols: row count mismatch");
        widths.push_back(p.dim(1));
        n += p.dim(1);
    }
    Vector out(m * n);
    MatrixMap o(out.data(), m, n);
    Index at = 0;
    for (const auto& p : parts) {
        o.middleCols(at, p.dim(1)) = p.matrix();
        at += p.dim(1);
    }
    return make_result({m, n}, std::move(out), parts, [m, n, widths](Node& self) {
        ConstMatrixMap g(self.grad.data(), m, n);
        Index at = 0;
        for (std::size_t i = 0; i < widths.size(); ++i) {
            auto& pn = *self.inputs[i];
            if (pn.requires_grad) pn.accumulate_matrix(RowMatrix(g.middleCols(at, widths[i])));
            at += widths[i];
        }
    });
}

Tensor gather_rows(const Tensor& x, const std::vector<Index>& rows) {
    require_rank2(x, "gather_rows");
    const Index m = x.dim(0), n = x.dim(1);
    const Index k = static_cast<Index>(rows.size());
    Vector out(k * n);
    MatrixMap o(out.data(), k, n);
    for (Index i = 0; i < k; ++i) {
        const Index r = rows[static_cast<std::size_t>(i)];
        if (r < 0 || r >= m) throw InvalidArgument("gather_rows: row index out of range");
        o.row(i) = x.matrix().row(r);
    }
    return make_result({k, n}, std::move(out), {x}, [m, n, rows](Node& self) {
        auto& xn = *self.inputs[0];
        if (!xn.requires_grad) return;
        if (xn.grad.size() != xn.value.size()) xn.grad = Vector::Zero(xn.value.size());
        MatrixMap g = grad_map(xn, m, n);
        ConstMatrixMap up(self.grad.data(), static_cast<Index>(rows.size()), n);
        for (std::size_t i = 0; i < rows.size(); ++i) g.row(rows[i]) += up.row(static_cast<Index>(i));
    });
}

Tensor sum(const Tensor& x) {
    return make_result({}, Vector::Constant(1, x.values().sum()), {x}, [](Node& self) {
        auto& xn = *self.inputs[0];
        xn.accumulate(Vector(Vector::Constant(xn.value.size(), self.grad[0])));
    });
}

Tensor mean(const Tensor& x) {
    const double n = static_cast<double>(x.numel());
    return scale(sum(x), n > 0 ? 1.0 / n : 0.0);
}

Tensor bce_with_logits(const Tensor& logits, const Vector& targets) {
    if (targets.size() != logits.numel())
        throw InvalidArgument("bce_with_logits: target count mismatch");
    const Vector& z = logits.values();
    const double n = static_cast<double>(z.size());
    if (z.size() == 0) throw InvalidArgument("bce_with_logits: empty input");
    double total = 0.0;
    for (Index i = 0; i < z.size(); ++i)
        total += std::max(z[i], 0.0) - z[i] * targets[i] + std::log1p(std::exp(-std::abs(z[i])));
    return make_result({}, Vector::Constant(1, total / n), {logits}, [targets, n](Node& self) {
        auto& zn = *self.inputs[0];
        Vector dz(zn.value.size());
        for (Index i = 0; i < dz.size(); ++i) {
            const double v = zn.value[i];
            const double p = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
            dz[i] = self.grad[0] * (p - targets[i]) / n;
        }
        zn.accumulate(dz);
    });
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw InvalidArgument("backward: loss must be a scalar");
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS; input order fixes the traversal order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->accumulate(Vector(Vector::Ones(1)));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
    }
}

} // namespace modvid::nd
