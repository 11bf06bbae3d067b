#include "elastic/adapter.hpp"

#include <cmath>

#include "elastic/kernels.hpp"
#include "elastic/linalg.hpp"

namespace elastic {

namespace {

std::vector<double> column_of(const DenseMatrix& m, int j) {
    std::vector<double> v(m.rows);
    for (int i = 0; i < m.rows; ++i) v[i] = m(i, j);
    return v;
}

std::vector<double> row_of(const DenseMatrix& m, int i) {
    std::vector<double> v(m.cols);
    for (int j = 0; j < m.cols; ++j) v[j] = m(i, j);
    return v;
}

}  // namespace

std::vector<int> AdapterLayer::active_indices() const {
    std::vector<int> idx;
    idx.reserve(r_active);
    for (int i = 0; i < cap; ++i)
        if (active[i]) idx.push_back(i);
    return idx;
}

AdapterLayer make_adapter(DenseMatrix base, int r_init, int cap, int layer_id, int matrix_id,
                          Rng& rng) {
    const int d1 = base.rows, d2 = base.cols;
    if (r_init < 1) throw ConfigError("make_adapter: initial rank must be >= 1");
    if (cap < r_init || cap > std::min(d1, d2))
        throw ConfigError("make_adapter: capacity must satisfy r_init <= cap <= min(d1, d2)");
    AdapterLayer layer;
    layer.base = std::move(base);
    layer.cap = cap;
    layer.layer_id = layer_id;
    layer.matrix_id = matrix_id;
    layer.active.assign(cap, 0);
    for (int i = 0; i < r_init; ++i) layer.active[i] = 1;
    layer.r_active = r_init;

    const double stddev = std::sqrt(1.0 / std::max(d1, d2));
    DenseMatrix p(d1, cap), q(cap, d2), l(1, cap);
    // slot-major draw order: the initial factors of slot s depend only on
    // (seed, d1, d2, s), never on the capacity, so methods with different
    // capacities start from identical functions
    for (int s = 0; s < cap; ++s) {
        for (int i = 0; i < d1; ++i) p(i, s) = rng.gaussian(0.0, stddev);
        for (int j = 0; j < d2; ++j) q(s, j) = rng.gaussian(0.0, stddev);
    }
    layer.P = ad::make_param(std::move(p), true, "P");
    layer.Q = ad::make_param(std::move(q), true, "Q");
    layer.lambda = ad::make_param(std::move(l), true, "lambda");
    layer.base_param = ad::make_const(layer.base, "W0");
    return layer;
}

ad::ParamPtr adapter_forward(ad::Tape& tape, const AdapterLayer& layer, const ad::ParamPtr& x) {
    if (x->cols() != layer.d1())
        throw DimensionError("adapter_forward: input is " + x->value.shape_str() +
                             " but layer expects " + std::to_string(layer.d1()) + " columns");
    auto h0 = tape.matmul(x, layer.base_param);
    const auto act = layer.active_indices();
    auto pa = tape.gather_cols(layer.P, act);
    auto u = tape.matmul(x, pa);
    auto v = tape.col_scale(u, layer.lambda, act);
    auto qa = tape.gather_rows(layer.Q, act);
    auto delta = tape.matmul(v, qa);
    return tape.add(h0, delta);
}

ad::ParamPtr adapter_forward(ad::Tape& tape, const AdapterLayer& layer, const DenseMatrix& x) {
    return adapter_forward(tape, layer, ad::make_const(x, "x"));
}

ad::ParamPtr ortho_penalty(ad::Tape& tape, const AdapterLayer& layer) {
    const auto act = layer.active_indices();
    const auto eye = ad::make_const(DenseMatrix::identity(static_cast<int>(act.size())), "I");
    auto pa = tape.gather_cols(layer.P, act);
    auto p_term = tape.frobenius_sq(tape.sub(tape.matmul(tape.transpose(pa), pa), eye));
    auto qa = tape.gather_rows(layer.Q, act);
    auto q_term = tape.frobenius_sq(tape.sub(tape.matmul(qa, tape.transpose(qa)), eye));
    return tape.add(p_term, q_term);
}

void prune_rank(AdapterLayer& layer, int idx) {
    if (idx < 0 || idx >= layer.cap || !layer.active[idx])
        throw ContractError("prune_rank: slot " + std::to_string(idx) + " is not active");
    if (layer.r_active <= 1)
        throw FloorError("prune_rank: refusing to prune the last active rank of layer " +
                         std::to_string(layer.layer_id));
    layer.active[idx] = 0;
    layer.r_active -= 1;
    layer.lambda->value(0, idx) = 0.0;
    layer.lambda->grad(0, idx) = 0.0;
    for (int i = 0; i < layer.d1(); ++i) layer.P->grad(i, idx) = 0.0;
    for (int j = 0; j < layer.d2(); ++j) layer.Q->grad(idx, j) = 0.0;
}

int expand_rank(AdapterLayer& layer, Rng& rng) {
    int slot = -1;
    for (int i = 0; i < layer.cap; ++i)
        if (!layer.active[i]) {
            slot = i;
            break;
        }
    if (slot < 0)
        throw CapacityError("expand_rank: no free slot in layer " +
                            std::to_string(layer.layer_id));

    std::vector<std::vector<double>> p_cols, q_rows;
    for (int i = 0; i < layer.cap; ++i)
        if (layer.active[i]) {
            p_cols.push_back(column_of(layer.P->value, i));
            q_rows.push_back(row_of(layer.Q->value, i));
        }
    const auto p_new = fresh_orthogonal_direction(p_cols, layer.d1(), rng);
    const auto q_new = fresh_orthogonal_direction(q_rows, layer.d2(), rng);

    for (int i = 0; i < layer.d1(); ++i) {
        layer.P->value(i, slot) = p_new[i];
        layer.P->grad(i, slot) = 0.0;
    }
    for (int j = 0; j < layer.d2(); ++j) {
        layer.Q->value(slot, j) = q_new[j];
        layer.Q->grad(slot, j) = 0.0;
    }
    layer.lambda->value(0, slot) = 0.0;
    layer.lambda->grad(0, slot) = 0.0;
    layer.active[slot] = 1;
    layer.r_active += 1;
    return slot;
}

DenseMatrix adapter_eval(const AdapterLayer& layer, const DenseMatrix& x) {
    if (x.cols != layer.d1())
        throw DimensionError("adapter_eval: input is " + x.shape_str() + " but layer expects " +
                             std::to_string(layer.d1()) + " columns");
    const auto act = layer.active_indices();
    const int m = x.rows, r = static_cast<int>(act.size());
    DenseMatrix out(m, layer.d2());
    kernels::matmul_nn(x.data.data(), layer.base.data.data(), out.data.data(), m, layer.d1(),
                       layer.d2(), false);
    // same association order as the tape forward: ((x·Pa)·diag(λ))·Qa
    DenseMatrix pa(layer.d1(), r), qa(r, layer.d2());
    for (int i = 0; i < layer.d1(); ++i)
        for (int j = 0; j < r; ++j) pa(i, j) = layer.P->value(i, act[j]);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < layer.d2(); ++j) qa(i, j) = layer.Q->value(act[i], j);
    DenseMatrix u(m, r);
    kernels::matmul_nn(x.data.data(), pa.data.data(), u.data.data(), m, layer.d1(), r, false);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < r; ++j) u(i, j) *= layer.lambda->value(0, act[j]);
    kernels::matmul_nn(u.data.data(), qa.data.data(), out.data.data(), m, r, layer.d2(), true);
    return out;
}

}  // namespace elastic
