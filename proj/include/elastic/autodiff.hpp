#pragma once

// Minimal reverse-mode autodiff over DenseMatrix, double precision only.
// A Tape records one forward pass; backward() replays it in reverse and
// accumulates (never overwrites) gradients into trainable leaves.

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "elastic/matrix.hpp"

namespace elastic::ad {

class Tape;

/// A value node: matrix, gradient slot of the same shape, trainable flag.
/// Leaves are created with make_param/make_const; intermediates come out of
/// Tape ops. requires_grad marks nodes the backward pass must reach.
class Parameter {
public:
    DenseMatrix value;
    DenseMatrix grad;
    bool trainable = false;
    bool requires_grad = false;
    std::string name;

    Parameter(DenseMatrix v, bool train, std::string n)
        : value(std::move(v)),
          grad(value.rows, value.cols),
          trainable(train),
          requires_grad(train),
          name(std::move(n)) {}

    int rows() const { return value.rows; }
    int cols() const { return value.cols; }
    bool is_scalar() const { return value.rows == 1 && value.cols == 1; }
    double scalar() const { return value(0, 0); }
    void zero_grad() { grad.fill(0.0); }

private:
    friend class Tape;
    const Tape* producer_ = nullptr;  // tape that produced this node; null for leaves
};

using ParamPtr = std::shared_ptr<Parameter>;

inline ParamPtr make_param(DenseMatrix v, bool trainable, std::string name = {}) {
    return std::make_shared<Parameter>(std::move(v), trainable, std::move(name));
}
inline ParamPtr make_const(DenseMatrix v, std::string name = {}) {
    return std::make_shared<Parameter>(std::move(v), false, std::move(name));
}

class Tape {
public:
    // c = a·b
    ParamPtr matmul(const ParamPtr& a, const ParamPtr& b);
    // elementwise, equal shapes
    ParamPtr add(const ParamPtr& a, const ParamPtr& b);
    ParamPtr sub(const ParamPtr& a, const ParamPtr& b);
    // c·a for constant c
    ParamPtr scale(const ParamPtr& a, double c);
    ParamPtr transpose(const ParamPtr& a);
    ParamPtr tanh(const ParamPtr& a);
    // column/row selection; backward scatters into the selected slots only
    ParamPtr gather_cols(const ParamPtr& a, std::vector<int> idx);
    ParamPtr gather_rows(const ParamPtr& a, std::vector<int> idx);
    // out(i,j) = a(i,j) · s(0, idx[j]); s is a 1×S row vector
    ParamPtr col_scale(const ParamPtr& a, const ParamPtr& s, std::vector<int> idx);
    // out = a + bias broadcast over rows; bias is 1×n
    ParamPtr row_broadcast_add(const ParamPtr& a, const ParamPtr& bias);
    // Σ aᵢⱼ² as a 1×1 node
    ParamPtr frobenius_sq(const ParamPtr& a);
    // mean of squared differences against a constant target
    ParamPtr loss_mse(const ParamPtr& pred, const DenseMatrix& target);
    // mean softmax cross-entropy, stable log-sum-exp; labels index columns
    ParamPtr loss_softmax_ce(const ParamPtr& logits, std::vector<int> labels);

    /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
    /// of intermediates are reset first; leaf gradients accumulate across
    /// backward calls until zero_grads.
    void backward(const ParamPtr& loss);

    std::size_t recorded_ops() const { return steps_.size(); }

private:
    ParamPtr make_result(DenseMatrix value, bool requires_grad);
    void record(std::function<void()> back);

    std::vector<std::function<void()>> steps_;
    std::vector<ParamPtr> results_;
};

void zero_grads(std::span<const ParamPtr> params);
void sgd_step(std::span<const ParamPtr> params, double learning_rate);

}  // namespace elastic::ad
