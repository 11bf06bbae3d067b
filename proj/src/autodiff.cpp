#include "elastic/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "elastic/kernels.hpp"

namespace elastic::ad {

ParamPtr Tape::make_result(DenseMatrix value, bool requires_grad) {
    auto p = std::make_shared<Parameter>(std::move(value), false, std::string{});
    p->requires_grad = requires_grad;
    p->producer_ = this;
    results_.push_back(p);
    return p;
}

void Tape::record(std::function<void()> back) { steps_.push_back(std::move(back)); }

ParamPtr Tape::matmul(const ParamPtr& a, const ParamPtr& b) {
    if (a->cols() != b->rows())
        throw DimensionError("matmul: inner dimensions mismatch (" + a->value.shape_str() +
                             " vs " + b->value.shape_str() + ")");
    const int m = a->rows(), k = a->cols(), n = b->cols();
    DenseMatrix out(m, n);
    kernels::matmul_nn(a->value.data.data(), b->value.data.data(), out.data.data(), m, k, n,
                       false);
    const bool rg = a->requires_grad || b->requires_grad;
    auto res = make_result(std::move(out), rg);
    if (rg) {
        record([a, b, res, m, k, n] {
            const double* g = res->grad.data.data();
            if (a->requires_grad)  // dA += G·Bᵀ
                kernels::matmul_nt(g, b->value.data.data(), a->grad.data.data(), m, n, k, true);
            if (b->requires_grad)  // dB += Aᵀ·G
                kernels::matmul_tn(a->value.data.data(), g, b->grad.data.data(), k, m, n, true);
        });
    }
    return res;
}

ParamPtr Tape::add(const ParamPtr& a, const ParamPtr& b) {
    if (!a->value.same_shape(b->value))
        throw DimensionError("add: shape mismatch (" + a->value.shape_str() + " vs " +
                             b->value.shape_str() + ")");
    DenseMatrix out = a->value;
    for (int i = 0; i < out.size(); ++i) out.data[i] += b->value.data[i];
    const bool rg = a->requires_grad || b->requires_grad;
    auto res = make_result(std::move(out), rg);
    if (rg) {
        record([a, b, res] {
            const int n = res->grad.size();
            if (a->requires_grad)
                for (int i = 0; i < n; ++i) a->grad.data[i] += res->grad.data[i];
            if (b->requires_grad)
                for (int i = 0; i < n; ++i) b->grad.data[i] += res->grad.data[i];
        });
    }
    return res;
}

ParamPtr Tape::sub(const ParamPtr& a, const ParamPtr& b) {
    if (!a->value.same_shape(b->value))
        throw DimensionError("sub: shape mismatch (" + a->value.shape_str() + " vs " +
                             b->value.shape_str() + ")");
    DenseMatrix out = a->value;
    for (int i = 0; i < out.size(); ++i) out.data[i] -= b->value.data[i];
    const bool rg = a->requires_grad || b->requires_grad;
    auto res = make_result(std::move(out), rg);
    if (rg) {
        record([a, b, res] {
            const int n = res->grad.size();
            if (a->requires_grad)
                for (int i = 0; i < n; ++i) a->grad.data[i] += res->grad.data[i];
            if (b->requires_grad)
                for (int i = 0; i < n; ++i) b->grad.data[i] -= res->grad.data[i];
        });
    }
    return res;
}

ParamPtr Tape::scale(const ParamPtr& a, double c) {
    DenseMatrix out = a->value;
    for (double& v : out.data) v *= c;
    auto res = make_result(std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, res, c] {
            const int n = res->grad.size();
            for (int i = 0; i < n; ++i) a->grad.data[i] += c * res->grad.data[i];
        });
    }
    return res;
}

ParamPtr Tape::transpose(const ParamPtr& a) {
    const int m = a->rows(), n = a->cols();
    DenseMatrix out(n, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out(j, i) = a->value(i, j);
    auto res = make_result(std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, res, m, n] {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) a->grad(i, j) += res->grad(j, i);
        });
    }
    return res;
}

ParamPtr Tape::tanh(const ParamPtr& a) {
    DenseMatrix out = a->value;
    for (double& v : out.data) v = std::tanh(v);
    auto res = make_result(std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, res] {
            const int n = res->grad.size();
            for (int i = 0; i < n; ++i) {
                const double y = res->value.data[i];
                a->grad.data[i] += res->grad.data[i] * (1.0 - y * y);
            }
        });
    }
    return res;
}

ParamPtr Tape::gather_cols(const ParamPtr& a, std::vector<int> idx) {
    const int m = a->rows(), n = static_cast<int>(idx.size());
    for (int j : idx)
        if (j < 0 || j >= a->cols()) throw IndexError("gather_cols: column index out of range");
    DenseMatrix out(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = a->value(i, idx[j]);
    auto res = make_result(std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, res, idx = std::move(idx), m, n] {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) a->grad(i, idx[j]) += res->grad(i, j);
        });
    }
    return res;
}

ParamPtr Tape::gather_rows(const ParamPtr& a, std::vector<int> idx) {
    const int m = static_cast<int>(idx.size()), n = a->cols();
    for (int i : idx)
        if (i < 0 || i >= a->rows()) throw IndexError("gather_rows: row index out of range");
    DenseMatrix out(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = a->value(idx[i], j);
    auto res = make_result(std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, res, idx = std::move(idx), m, n] {
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) a->grad(idx[i], j) += res->grad(i, j);
        });
    }
    return res;
}

ParamPtr Tape::col_scale(const ParamPtr& a, const ParamPtr& s, std::vector<int> idx) {
    if (s->rows() != 1) throw DimensionError("col_scale: scaling vector must be 1xS");
    if (a->cols() != static_cast<int>(idx.size()))
        throw DimensionError("col_scale: index count must match columns of input");
    for (int j : idx)
        if (j < 0 || j >= s->cols()) throw IndexError("col_scale: scale index out of range");
    const int m = a->rows(), n = a->cols();
    DenseMatrix out(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out(i, j) = a->value(i, j) * s->value(0, idx[j]);
    const bool rg = a->requires_grad || s->requires_grad;
    auto res = make_result(std::move(out), rg);
    if (rg) {
        record([a, s, res, idx = std::move(idx), m, n] {
            if (a->requires_grad)
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j)
                        a->grad(i, j) += res->grad(i, j) * s->value(0, idx[j]);
            if (s->requires_grad)
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < m; ++i) acc += res->grad(i, j) * a->value(i, j);
                    s->grad(0, idx[j]) += acc;
                }
        });
    }
    return res;
}

ParamPtr Tape::row_broadcast_add(const ParamPtr& a, const ParamPtr& bias) {
    if (bias->rows() != 1 || bias->cols() != a->cols())
        throw DimensionError("row_broadcast_add: bias must be 1x" + std::to_string(a->cols()));
    const int m = a->rows(), n = a->cols();
    DenseMatrix out = a->value;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out(i, j) += bias->value(0, j);
    const bool rg = a->requires_grad || bias->requires_grad;
    auto res = make_result(std::move(out), rg);
    if (rg) {
        record([a, bias, res, m, n] {
            if (a->requires_grad)
                for (int i = 0; i < res->grad.size(); ++i) a->grad.data[i] += res->grad.data[i];
            if (bias->requires_grad)
                for (int j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < m; ++i) acc += res->grad(i, j);
                    bias->grad(0, j) += acc;
                }
        });
    }
    return res;
}

ParamPtr Tape::frobenius_sq(const ParamPtr& a) {
    double acc = 0.0;
    for (double v : a->value.data) acc += v * v;
    DenseMatrix out(1, 1);
    out(0, 0) = acc;
    auto res = make_result(std::move(out), a->requires_grad);
    if (a->requires_grad) {
        record([a, res] {
            const double g = res->grad(0, 0);
            const int n = a->value.size();
            for (int i = 0; i < n; ++i) a->grad.data[i] += 2.0 * a->value.data[i] * g;
        });
    }
    return res;
}

ParamPtr Tape::loss_mse(const ParamPtr& pred, const DenseMatrix& target) {
    if (!pred->value.same_shape(target))
        throw DimensionError("loss_mse: shape mismatch (" + pred->value.shape_str() + " vs " +
                             target.shape_str() + ")");
    const int n = pred->value.size();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = pred->value.data[i] - target.data[i];
        acc += d * d;
    }
    DenseMatrix out(1, 1);
    out(0, 0) = acc / n;
    auto res = make_result(std::move(out), pred->requires_grad);
    if (pred->requires_grad) {
        record([pred, res, target, n] {
            const double g = res->grad(0, 0);
            for (int i = 0; i < n; ++i)
                pred->grad.data[i] += g * 2.0 * (pred->value.data[i] - target.data[i]) / n;
        });
    }
    return res;
}

ParamPtr Tape::loss_softmax_ce(const ParamPtr& logits, std::vector<int> labels) {
    const int rows = logits->rows(), cols = logits->cols();
    if (static_cast<int>(labels.size()) != rows)
        throw DimensionError("loss_softmax_ce: need one label per row, got " +
                             std::to_string(labels.size()) + " for " + std::to_string(rows));
    for (int lbl : labels)
        if (lbl < 0 || lbl >= cols)
            throw IndexError("loss_softmax_ce: label " + std::to_string(lbl) +
                             " out of range [0, " + std::to_string(cols) + ")");
    double acc = 0.0;
    for (int i = 0; i < rows; ++i) {
        double mx = logits->value(i, 0);
        for (int j = 1; j < cols; ++j) mx = std::max(mx, logits->value(i, j));
        double se = 0.0;
        for (int j = 0; j < cols; ++j) se += std::exp(logits->value(i, j) - mx);
        acc += mx + std::log(se) - logits->value(i, labels[i]);
    }
    DenseMatrix out(1, 1);
    out(0, 0) = acc / rows;
    auto res = make_result(std::move(out), logits->requires_grad);
    if (logits->requires_grad) {
        record([logits, res, labels = std::move(labels), rows, cols] {
            const double g = res->grad(0, 0);
            for (int i = 0; i < rows; ++i) {
                double mx = logits->value(i, 0);
                for (int j = 1; j < cols; ++j) mx = std::max(mx, logits->value(i, j));
                double se = 0.0;
                for (int j = 0; j < cols; ++j) se += std::exp(logits->value(i, j) - mx);
                for (int j = 0; j < cols; ++j) {
                    const double soft = std::exp(logits->value(i, j) - mx) / se;
                    const double onehot = (j == labels[i]) ? 1.0 : 0.0;
                    logits->grad(i, j) += g * (soft - onehot) / rows;
                }
            }
        });
    }
    return res;
}

void Tape::backward(const ParamPtr& loss) {
    if (!loss->is_scalar())
        throw ContractError("backward: loss must be a 1x1 scalar, got " +
                            loss->value.shape_str());
    if (loss->producer_ != this)
        throw ContractError("backward: loss was not produced through this tape");
    for (auto& r : results_) r->grad.fill(0.0);
    loss->grad(0, 0) = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

void zero_grads(std::span<const ParamPtr> params) {
    for (const auto& p : params) p->zero_grad();
}

void sgd_step(std::span<const ParamPtr> params, double learning_rate) {
    for (const auto& p : params) {
        if (!p->trainable) continue;
        const int n = p->value.size();
        for (int i = 0; i < n; ++i) p->value.data[i] -= learning_rate * p->grad.data[i];
    }
}

}  // namespace elastic::ad
