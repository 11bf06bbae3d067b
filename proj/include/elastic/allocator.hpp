#pragma once

// Dynamic rank learning: three-phase schedule (warm-up / adjustment /
// stabilization), cubic budget scheduler, candidate collection, and the
// prune/expand event executor with a per-matrix cap and a rank-1 floor.

#include <cstdint>
#include <vector>

#include "elastic/adapter.hpp"
#include "elastic/importance.hpp"

namespace elastic {

enum class Phase { Warmup, Adjusting, Stabilizing };

struct AllocatorConfig {
    int total_steps = 0;
    int t_warmup = 0;
    int t_stabilize = 0;
    int adjust_interval = 1;
    int k = 1;          // max ranks pruned AND expanded per matrix per event
    int b = 1;          // base budget: total ranks pruned (= expanded) per event
    int init_rank = 1;  // r
    bool use_scheduler = true;

    int adjust_window() const { return total_steps - t_stabilize - t_warmup; }

    /// Throws ConfigError on any violated invariant. Callers that need the
    /// degenerate b == 0 trainer (no adjustments) skip this.
    void validate() const;
};

Phase phase_of(int step, const AllocatorConfig& cfg);

/// True when an adjustment event fires at this step: Adjusting phase and
/// (step − t_warmup) a positive multiple of adjust_interval.
bool is_adjustment_step(int step, const AllocatorConfig& cfg);

/// Training progress through the adjustment window, clamped to [0, 1].
double progress(int step, const AllocatorConfig& cfg);

/// Cubic budget b_t = round(b · (1 − P³)), half away from zero; the base b
/// unchanged when the scheduler is off. Clamped to floor(k·n_matrices/2) so
/// the prune and expansion halves of the candidate pool stay disjoint.
int scheduled_budget(int step, const AllocatorConfig& cfg, int n_matrices);

/// Number of adjustment events a full schedule fires.
int count_adjustment_events(const AllocatorConfig& cfg);

/// Slot capacity per matrix: r + k · (scheduled events), clamped to
/// min(d1, d2); a legal schedule can never run out of free slots except at
/// the hard min(d1, d2) wall.
int capacity_for(const AllocatorConfig& cfg, int d1, int d2);

struct Candidate {
    int layer_id = 0;
    int matrix_id = 0;
    int rank_index = 0;
    double score = 0.0;
};

/// Per matrix, its min(k, r_active) lowest-scoring active ranks; globally
/// sorted ascending by score, ties by (layer_id, matrix_id, rank_index).
std::vector<Candidate> collect_candidates(const std::vector<RankScore>& scores, int k);

struct PrunedRank {
    int layer_id = 0;
    int matrix_id = 0;
    int rank_index = 0;
    double score = 0.0;
};

struct ExpandedRank {
    int layer_id = 0;
    int matrix_id = 0;
    int rank_index = 0;
};

struct AdjustmentEvent {
    int step = 0;
    int b_t = 0;  // realized budget: |pruned| (== |expanded| when expanding)
    std::vector<PrunedRank> pruned;
    std::vector<ExpandedRank> expanded;
    bool shrunk = false;  // budget was reduced to keep the event feasible
    bool empty() const { return pruned.empty() && expanded.empty(); }
};

/// Executes one adjustment event against the layers. Scores must cover
/// exactly the active ranks (rank_scores output). The tracker, when given,
/// has the EMA state of pruned and freshly expanded slots zeroed. With
/// allow_expansion false (prune-only baseline) the full candidate list is
/// prunable, no expansions happen, and pruning stops once the total active
/// rank reaches prune_target_total (pass a negative target for no stop).
AdjustmentEvent adjust(std::vector<AdapterLayer>& layers, ImportanceTracker* tracker,
                       const std::vector<RankScore>& scores, int step,
                       const AllocatorConfig& cfg, Rng& rng, bool allow_expansion = true,
                       int prune_target_total = -1);

/// Convenience overload: scores computed from the tracker.
AdjustmentEvent adjust(std::vector<AdapterLayer>& layers, ImportanceTracker& tracker, int step,
                       const AllocatorConfig& cfg, Rng& rng, bool allow_expansion = true,
                       int prune_target_total = -1);

}  // namespace elastic
