#include "elastic/importance.hpp"

#include <algorithm>
#include <cmath>

namespace elastic {

namespace {

inline void ema_pair(double& mean, double& unc, double current, double beta1, double beta2,
                     bool use_previous_mean) {
    const double prev_mean = mean;
    mean = beta1 * mean + (1.0 - beta1) * current;
    const double ref = use_previous_mean ? prev_mean : mean;
    unc = beta2 * unc + (1.0 - beta2) * std::abs(current - ref);
}

}  // namespace

ImportanceTracker::ImportanceTracker(const std::vector<AdapterLayer>& layers, double beta1,
                                     double beta2, bool uncertainty_uses_previous_mean)
    : beta1_(beta1), beta2_(beta2), u_prev_(uncertainty_uses_previous_mean) {
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
        throw ConfigError("ImportanceTracker: smoothing constants must lie in (0, 1)");
    st_.reserve(layers.size());
    for (const auto& l : layers) {
        LayerState s;
        s.d1 = l.d1();
        s.d2 = l.d2();
        s.cap = l.cap;
        s.p_mean.assign(static_cast<std::size_t>(s.d1) * s.cap, 0.0);
        s.p_unc = s.p_mean;
        s.l_mean.assign(s.cap, 0.0);
        s.l_unc = s.l_mean;
        s.q_mean.assign(static_cast<std::size_t>(s.cap) * s.d2, 0.0);
        s.q_unc = s.q_mean;
        st_.push_back(std::move(s));
    }
}

void ImportanceTracker::check_layers(const std::vector<AdapterLayer>& layers) const {
    if (layers.size() != st_.size())
        throw DimensionError("ImportanceTracker: layer count changed since construction");
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto& l = layers[li];
        const auto& s = st_[li];
        if (l.d1() != s.d1 || l.d2() != s.d2 || l.cap != s.cap)
            throw DimensionError("ImportanceTracker: layer " + std::to_string(li) +
                                 " shape does not match tracked state");
    }
}

void ImportanceTracker::ema_update(const std::vector<AdapterLayer>& layers) {
    check_layers(layers);
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto& l = layers[li];
        auto& s = st_[li];
        for (int slot = 0; slot < l.cap; ++slot) {
            if (!l.active[slot]) continue;
            ema_pair(s.l_mean[slot], s.l_unc[slot],
                     sensitivity(l.lambda->value(0, slot), l.lambda->grad(0, slot)), beta1_,
                     beta2_, u_prev_);
            for (int i = 0; i < s.d1; ++i) {
                const std::size_t at = static_cast<std::size_t>(i) * s.cap + slot;
                ema_pair(s.p_mean[at], s.p_unc[at],
                         sensitivity(l.P->value(i, slot), l.P->grad(i, slot)), beta1_, beta2_,
                         u_prev_);
            }
            for (int j = 0; j < s.d2; ++j) {
                const std::size_t at = static_cast<std::size_t>(slot) * s.d2 + j;
                ema_pair(s.q_mean[at], s.q_unc[at],
                         sensitivity(l.Q->value(slot, j), l.Q->grad(slot, j)), beta1_, beta2_,
                         u_prev_);
            }
        }
    }
    ++steps_;
}

double ImportanceTracker::entry_mean(std::size_t layer_pos, EntryKind kind, int i, int j) const {
    const auto& s = st_.at(layer_pos);
    switch (kind) {
        case EntryKind::P: return s.p_mean[static_cast<std::size_t>(i) * s.cap + j];
        case EntryKind::Lambda: return s.l_mean[j];
        case EntryKind::Q: return s.q_mean[static_cast<std::size_t>(i) * s.d2 + j];
    }
    return 0.0;
}

double ImportanceTracker::entry_uncertainty(std::size_t layer_pos, EntryKind kind, int i,
                                            int j) const {
    const auto& s = st_.at(layer_pos);
    switch (kind) {
        case EntryKind::P: return s.p_unc[static_cast<std::size_t>(i) * s.cap + j];
        case EntryKind::Lambda: return s.l_unc[j];
        case EntryKind::Q: return s.q_unc[static_cast<std::size_t>(i) * s.d2 + j];
    }
    return 0.0;
}

double ImportanceTracker::entry_score(std::size_t layer_pos, EntryKind kind, int i, int j) const {
    return entry_mean(layer_pos, kind, i, j) * entry_uncertainty(layer_pos, kind, i, j);
}

void ImportanceTracker::set_entry_state(std::size_t layer_pos, EntryKind kind, int i, int j,
                                        double ibar, double ubar) {
    auto& s = st_.at(layer_pos);
    switch (kind) {
        case EntryKind::P: {
            const std::size_t at = static_cast<std::size_t>(i) * s.cap + j;
            s.p_mean[at] = ibar;
            s.p_unc[at] = ubar;
            break;
        }
        case EntryKind::Lambda:
            s.l_mean[j] = ibar;
            s.l_unc[j] = ubar;
            break;
        case EntryKind::Q: {
            const std::size_t at = static_cast<std::size_t>(i) * s.d2 + j;
            s.q_mean[at] = ibar;
            s.q_unc[at] = ubar;
            break;
        }
    }
}

std::vector<RankScore> ImportanceTracker::rank_scores(
    const std::vector<AdapterLayer>& layers) const {
    check_layers(layers);
    std::vector<RankScore> out;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto& l = layers[li];
        const auto& s = st_[li];
        for (int slot = 0; slot < l.cap; ++slot) {
            if (!l.active[slot]) continue;
            double score = s.l_mean[slot] * s.l_unc[slot];
            double p_sum = 0.0;
            for (int i = 0; i < s.d1; ++i) {
                const std::size_t at = static_cast<std::size_t>(i) * s.cap + slot;
                p_sum += s.p_mean[at] * s.p_unc[at];
            }
            double q_sum = 0.0;
            for (int j = 0; j < s.d2; ++j) {
                const std::size_t at = static_cast<std::size_t>(slot) * s.d2 + j;
                q_sum += s.q_mean[at] * s.q_unc[at];
            }
            score += p_sum / s.d1 + q_sum / s.d2;
            out.push_back({l.layer_id, l.matrix_id, slot, score});
        }
    }
    std::sort(out.begin(), out.end(), [](const RankScore& a, const RankScore& b) {
        if (a.layer_id != b.layer_id) return a.layer_id < b.layer_id;
        if (a.matrix_id != b.matrix_id) return a.matrix_id < b.matrix_id;
        return a.rank_index < b.rank_index;
    });
    return out;
}

void ImportanceTracker::reset_rank_state(std::size_t layer_pos, int slot) {
    auto& s = st_.at(layer_pos);
    s.l_mean[slot] = 0.0;
    s.l_unc[slot] = 0.0;
    for (int i = 0; i < s.d1; ++i) {
        const std::size_t at = static_cast<std::size_t>(i) * s.cap + slot;
        s.p_mean[at] = 0.0;
        s.p_unc[at] = 0.0;
    }
    for (int j = 0; j < s.d2; ++j) {
        const std::size_t at = static_cast<std::size_t>(slot) * s.d2 + j;
        s.q_mean[at] = 0.0;
        s.q_unc[at] = 0.0;
    }
}

}  // namespace elastic
