#include "elastic/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "elastic/logging.hpp"

namespace elastic {

void AllocatorConfig::validate() const {
    if (total_steps < 1) throw ConfigError("allocator: total_steps must be >= 1");
    if (t_warmup < 0 || t_stabilize < 0)
        throw ConfigError("allocator: warmup/stabilize steps must be >= 0");
    if (t_warmup + t_stabilize >= total_steps)
        throw ConfigError("allocator: t_warmup + t_stabilize must be < total_steps "
                          "(adjustment window would be empty)");
    if (adjust_interval < 1) throw ConfigError("allocator: adjust_interval must be >= 1");
    if (k < 1) throw ConfigError("allocator: k must be >= 1");
    if (b < 1) throw ConfigError("allocator: b must be >= 1");
    if (init_rank < 1) throw ConfigError("allocator: init_rank must be >= 1");
}

Phase phase_of(int step, const AllocatorConfig& cfg) {
    if (step < cfg.t_warmup) return Phase::Warmup;
    if (step >= cfg.total_steps - cfg.t_stabilize) return Phase::Stabilizing;
    return Phase::Adjusting;
}

bool is_adjustment_step(int step, const AllocatorConfig& cfg) {
    if (phase_of(step, cfg) != Phase::Adjusting) return false;
    const int offset = step - cfg.t_warmup;
    return offset > 0 && offset % cfg.adjust_interval == 0;
}

double progress(int step, const AllocatorConfig& cfg) {
    const int window = cfg.adjust_window();
    if (window <= 0) throw ConfigError("progress: adjustment window is empty");
    const double p = static_cast<double>(step - cfg.t_warmup) / window;
    return std::clamp(p, 0.0, 1.0);
}

int scheduled_budget(int step, const AllocatorConfig& cfg, int n_matrices) {
    int bt = cfg.b;
    if (cfg.use_scheduler) {
        const double p = progress(step, cfg);
        bt = static_cast<int>(std::llround(cfg.b * (1.0 - p * p * p)));
    }
    const int pool_cap = (cfg.k * n_matrices) / 2;
    return std::min(bt, pool_cap);
}

int count_adjustment_events(const AllocatorConfig& cfg) {
    const int window = cfg.adjust_window();
    if (window <= 1) return 0;
    // steps t_warmup + m·interval for m >= 1, strictly inside the window
    return (window - 1) / cfg.adjust_interval;
}

int capacity_for(const AllocatorConfig& cfg, int d1, int d2) {
    const long long cap = static_cast<long long>(cfg.init_rank) +
                          static_cast<long long>(cfg.k) * count_adjustment_events(cfg);
    return static_cast<int>(std::min<long long>(cap, std::min(d1, d2)));
}

std::vector<Candidate> collect_candidates(const std::vector<RankScore>& scores, int k) {
    std::map<std::pair<int, int>, std::vector<RankScore>> by_matrix;
    for (const auto& s : scores) by_matrix[{s.layer_id, s.matrix_id}].push_back(s);

    std::vector<Candidate> pool;
    for (auto& [key, ranks] : by_matrix) {
        std::sort(ranks.begin(), ranks.end(), [](const RankScore& a, const RankScore& b) {
            if (a.score != b.score) return a.score < b.score;
            return a.rank_index < b.rank_index;
        });
        const int take = std::min<int>(k, static_cast<int>(ranks.size()));
        for (int i = 0; i < take; ++i)
            pool.push_back({ranks[i].layer_id, ranks[i].matrix_id, ranks[i].rank_index,
                            ranks[i].score});
    }
    std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score < b.score;
        if (a.layer_id != b.layer_id) return a.layer_id < b.layer_id;
        if (a.matrix_id != b.matrix_id) return a.matrix_id < b.matrix_id;
        return a.rank_index < b.rank_index;
    });
    return pool;
}

namespace {

struct MatrixView {
    int layer_id, matrix_id, r_active, cap;
};

struct Plan {
    std::vector<int> prune_positions;   // indices into the candidate pool
    std::vector<int> expand_counts;     // aligned with the matrix views
    bool shrunk = false;
};

int view_of(const std::vector<MatrixView>& views, int layer_id, int matrix_id) {
    for (std::size_t i = 0; i < views.size(); ++i)
        if (views[i].layer_id == layer_id && views[i].matrix_id == matrix_id)
            return static_cast<int>(i);
    throw ContractError("adjust: candidate references an unknown matrix");
}

// Event planning. Prune candidates come from the low end of the pool,
// expansion credits from the high end; the two roles never share a pool
// entry. Floor-violating prunes are skipped in favor of the next entry;
// expansion credits skip matrices at the per-event cap k or out of capacity
// and roll to the next-highest entry. When expansions cannot absorb the
// realized prune count the event is re-planned with a smaller budget until
// both sides match.
Plan plan_event(const std::vector<MatrixView>& views, const std::vector<Candidate>& pool, int k,
                int b_sched, bool allow_expansion, int prune_target_total) {
    Plan plan;
    plan.expand_counts.assign(views.size(), 0);
    const int n = static_cast<int>(pool.size());

    if (!allow_expansion) {
        int budget = b_sched;
        if (prune_target_total >= 0) {
            int total = 0;
            for (const auto& v : views) total += v.r_active;
            budget = std::min(budget, std::max(0, total - prune_target_total));
        }
        std::vector<int> sim;
        for (const auto& v : views) sim.push_back(v.r_active);
        for (int i = 0; i < n && static_cast<int>(plan.prune_positions.size()) < budget; ++i) {
            const int m = view_of(views, pool[i].layer_id, pool[i].matrix_id);
            if (sim[m] > 1) {
                plan.prune_positions.push_back(i);
                sim[m] -= 1;
            }
        }
        plan.shrunk = static_cast<int>(plan.prune_positions.size()) < b_sched;
        return plan;
    }

    int budget = std::min(b_sched, n / 2);
    bool shrunk = budget < b_sched;
    while (budget > 0) {
        std::vector<int> sim;
        for (const auto& v : views) sim.push_back(v.r_active);

        std::vector<int> prune;
        for (int i = 0; i < n - budget && static_cast<int>(prune.size()) < budget; ++i) {
            const int m = view_of(views, pool[i].layer_id, pool[i].matrix_id);
            if (sim[m] > 1) {
                prune.push_back(i);
                sim[m] -= 1;
            }
        }
        const int pruned = static_cast<int>(prune.size());

        std::vector<int> expand(views.size(), 0);
        int placed = 0;
        for (int j = n - 1; j >= 0 && placed < pruned; --j) {
            if (std::find(prune.begin(), prune.end(), j) != prune.end()) continue;
            const int m = view_of(views, pool[j].layer_id, pool[j].matrix_id);
            if (expand[m] >= k) continue;
            if (sim[m] + expand[m] >= views[m].cap) continue;
            expand[m] += 1;
            placed += 1;
        }

        if (pruned == budget && placed == pruned) {
            plan.prune_positions = std::move(prune);
            plan.expand_counts = std::move(expand);
            plan.shrunk = shrunk;
            return plan;
        }
        budget = std::min(pruned, placed);
        shrunk = true;
    }
    plan.shrunk = shrunk;
    return plan;
}

}  // namespace

AdjustmentEvent adjust(std::vector<AdapterLayer>& layers, ImportanceTracker* tracker,
                       const std::vector<RankScore>& scores, int step,
                       const AllocatorConfig& cfg, Rng& rng, bool allow_expansion,
                       int prune_target_total) {
    AdjustmentEvent event;
    event.step = step;
    const int n_matrices = static_cast<int>(layers.size());
    const int b_sched = scheduled_budget(step, cfg, n_matrices);
    if (b_sched == 0) return event;

    const auto pool = collect_candidates(scores, cfg.k);

    std::vector<MatrixView> views;
    views.reserve(layers.size());
    for (const auto& l : layers)
        views.push_back({l.layer_id, l.matrix_id, l.r_active, l.cap});

    const auto plan = plan_event(views, pool, cfg.k, b_sched, allow_expansion,
                                 prune_target_total);
    event.shrunk = plan.shrunk;
    if (plan.shrunk)
        log_info("adjust: step " + std::to_string(step) + " budget shrunk from " +
                 std::to_string(b_sched) + " to " +
                 std::to_string(plan.prune_positions.size()));

    auto layer_at = [&](int layer_id, int matrix_id) -> std::size_t {
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].layer_id == layer_id && layers[i].matrix_id == matrix_id) return i;
        throw ContractError("adjust: unknown matrix in plan");
    };

    for (int pos : plan.prune_positions) {
        const Candidate& c = pool[pos];
        const std::size_t li = layer_at(c.layer_id, c.matrix_id);
        prune_rank(layers[li], c.rank_index);
        if (tracker) tracker->reset_rank_state(li, c.rank_index);
        event.pruned.push_back({c.layer_id, c.matrix_id, c.rank_index, c.score});
    }

    for (std::size_t vi = 0; vi < views.size(); ++vi) {
        for (int e = 0; e < plan.expand_counts[vi]; ++e) {
            const std::size_t li = layer_at(views[vi].layer_id, views[vi].matrix_id);
            const int slot = expand_rank(layers[li], rng);
            if (tracker) tracker->reset_rank_state(li, slot);
            event.expanded.push_back({views[vi].layer_id, views[vi].matrix_id, slot});
        }
    }

    event.b_t = static_cast<int>(event.pruned.size());
    return event;
}

AdjustmentEvent adjust(std::vector<AdapterLayer>& layers, ImportanceTracker& tracker, int step,
                       const AllocatorConfig& cfg, Rng& rng, bool allow_expansion,
                       int prune_target_total) {
    const auto scores = tracker.rank_scores(layers);
    return adjust(layers, &tracker, scores, step, cfg, rng, allow_expansion,
                  prune_target_total);
}

}  // namespace elastic
