#pragma once

// Gradient-sensitivity importance scoring. Per-entry sensitivities |w·g| are
// smoothed by two exponential moving averages (mean and uncertainty); the
// per-entry score is their product and per-rank scores aggregate the entry
// scores of a singular triplet.

#include <cstddef>
#include <vector>

#include "elastic/adapter.hpp"

namespace elastic {

/// First-order saliency of a single weight: |w·g|.
inline double sensitivity(double w, double g) { return std::abs(w * g); }

struct RankScore {
    int layer_id = 0;
    int matrix_id = 0;
    int rank_index = 0;
    double score = 0.0;
};

class ImportanceTracker {
public:
    enum class EntryKind { P, Lambda, Q };

    /// State mirrors the tracked parameters of every layer, zero-initialized.
    /// When uncertainty_uses_previous_mean is set, the uncertainty EMA
    /// deviates from the literal reading and measures |I_t − Ibar_{t-1}|.
    ImportanceTracker(const std::vector<AdapterLayer>& layers, double beta1, double beta2,
                      bool uncertainty_uses_previous_mean = false);

    /// One smoothing step over the active slots of every layer; call after
    /// backward and before zero_grads, once per optimizer step. Masked slots
    /// are left at exactly zero.
    void ema_update(const std::vector<AdapterLayer>& layers);

    /// Smoothed per-entry score Ibar·Ubar. For P, (i, j) = (row, slot); for
    /// Q, (i, j) = (slot, col); for Lambda, i is ignored and j is the slot.
    double entry_score(std::size_t layer_pos, EntryKind kind, int i, int j) const;
    double entry_mean(std::size_t layer_pos, EntryKind kind, int i, int j) const;
    double entry_uncertainty(std::size_t layer_pos, EntryKind kind, int i, int j) const;

    /// Test/restore hook: overwrite one entry's EMA state.
    void set_entry_state(std::size_t layer_pos, EntryKind kind, int i, int j, double ibar,
                         double ubar);

    /// One score per active rank of every layer,
    /// sorted by (layer_id, matrix_id, rank_index).
    std::vector<RankScore> rank_scores(const std::vector<AdapterLayer>& layers) const;

    /// Zeroes the EMA state of one rank slot (on prune; fresh slots inherit
    /// nothing on expansion).
    void reset_rank_state(std::size_t layer_pos, int slot);

    int step_count() const { return steps_; }
    double beta1() const { return beta1_; }
    double beta2() const { return beta2_; }

private:
    struct LayerState {
        int d1 = 0, d2 = 0, cap = 0;
        std::vector<double> p_mean, p_unc;  // d1×cap
        std::vector<double> l_mean, l_unc;  // cap
        std::vector<double> q_mean, q_unc;  // cap×d2
    };

    void check_layers(const std::vector<AdapterLayer>& layers) const;

    std::vector<LayerState> st_;
    double beta1_;
    double beta2_;
    bool u_prev_;
    int steps_ = 0;
};

}  // namespace elastic
