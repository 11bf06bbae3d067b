#pragma once

// SVD-parameterized low-rank adapter on a frozen base matrix:
//   W = W0 + P·diag(lambda)·Q, restricted to the active rank mask.
// Capacity is allocated once; ranks toggle via the mask, so prune/expand are
// O(1) bookkeeping and re-expanded slots get fresh Gram-Schmidt directions.

#include <vector>

#include "elastic/autodiff.hpp"
#include "elastic/matrix.hpp"

namespace elastic {

struct AdapterLayer {
    DenseMatrix base;      // W0, d1×d2, frozen
    ad::ParamPtr P;        // d1×cap
    ad::ParamPtr lambda;   // 1×cap singular values
    ad::ParamPtr Q;        // cap×d2
    std::vector<std::uint8_t> active;  // mask over capacity slots
    int r_active = 0;
    int cap = 0;
    int layer_id = 0;
    int matrix_id = 0;

    ad::ParamPtr base_param;  // cached non-trainable wrapper around base

    int d1() const { return base.rows; }
    int d2() const { return base.cols; }
    std::vector<int> active_indices() const;
};

/// Builds a layer with the first r_init slots active. P, Q entries are
/// Gaussian(0, 1/max(d1,d2)); lambda starts at zero so the initial forward
/// equals the frozen base exactly.
AdapterLayer make_adapter(DenseMatrix base, int r_init, int cap, int layer_id, int matrix_id,
                          Rng& rng);

/// x·W0 + x·P_act·diag(lambda_act)·Q_act recorded on the tape. Gradients
/// reach active factor slots only (and flow through x when x is itself a
/// tape node, so adapters stack).
ad::ParamPtr adapter_forward(ad::Tape& tape, const AdapterLayer& layer, const ad::ParamPtr& x);
ad::ParamPtr adapter_forward(ad::Tape& tape, const AdapterLayer& layer, const DenseMatrix& x);

/// ‖P_actᵀP_act − I‖_F² + ‖Q_act Q_actᵀ − I‖_F² with I of size r_active.
ad::ParamPtr ortho_penalty(ad::Tape& tape, const AdapterLayer& layer);

/// Deactivates slot idx and zeroes its singular value (and gradient slots).
/// Throws FloorError when only one rank is active, ContractError when idx is
/// not active.
void prune_rank(AdapterLayer& layer, int idx);

/// Activates the lowest-index inactive slot with a fresh unit direction
/// orthogonal to the span of the active P columns (and likewise for Q rows);
/// lambda stays 0 so forward outputs are unchanged. Returns the slot index.
/// Throws CapacityError when no slot is free.
int expand_rank(AdapterLayer& layer, Rng& rng);

/// Dense forward without the tape: x·(W0 + active update).
DenseMatrix adapter_eval(const AdapterLayer& layer, const DenseMatrix& x);

}  // namespace elastic
