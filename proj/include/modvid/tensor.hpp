// Copyright (C) 2026 The modvid Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "modvid/errors.hpp"

/// Small reverse-mode autodiff over dense double arrays. Rank-2 tensors are
/// row-major matrices; every op works on Eigen maps of the flat storage.
namespace modvid::nd {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

Index numel(const Shape& s);

struct Node {
    Shape shape;
    Vector value;
    Vector grad;  // empty until something flows into it
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    void accumulate(const Vector& g);
    void accumulate_matrix(const Eigen::Ref<const RowMatrix>& g);
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from_values(Shape shape, Vector values, bool requires_grad = false);
    static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    Index rank() const { return static_cast<Index>(node_->shape.size()); }
    Index dim(Index i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
    Index numel() const { return node_->value.size(); }

    /// Matrix view extents; a rank-1 tensor is a single row.
    Index rows() const;
    Index cols() const;

    const Vector& values() const { return node_->value; }
    /// Direct write access for optimizers on leaf parameters.
    Vector& mutable_values() { return node_->value; }
    ConstMatrixMap matrix() const { return {node_->value.data(), rows(), cols()}; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    bool has_grad() const { return node_->grad.size() == numel(); }
    /// Gradient buffer; zeros when nothing has flowed into this tensor.
    Vector grad() const;
    void zero_grad() { node_->grad.resize(0); }

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};
bool grad_enabled();

/// Multiply-accumulate operations performed by matmul on this thread.
std::uint64_t mac_count();
void reset_mac_count();

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// a[m x n] + bias[n], bias broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& bias);
/// a[m x n] * w[n] + b[n] elementwise, broadcast over rows.
Tensor affine_row(const Tensor& a, const Tensor& w, const Tensor& b);

/// Softmax along `axis` with max subtraction. NaN input throws InvalidData.
Tensor softmax(const Tensor& x, Index axis);
/// Normalises over the last axis, then applies gain and bias (both [n]).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
/// Exact GELU, x * Phi(x).
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor slice_cols(const Tensor& x, Index start, Index count);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& x, const std::vector<Index>& rows);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean binary cross-entropy of sigmoid(logits) against targets in {0,1}.
Tensor bce_with_logits(const Tensor& logits, const Vector& targets);

/// Populates grad on every requires_grad tensor reachable from `loss`.
/// Throws InvalidArgument for a non-scalar loss.
void backward(const Tensor& loss);

} // namespace modvid::nd
