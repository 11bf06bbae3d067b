#include "oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace oracles {

using elastic::AdapterLayer;
using elastic::DenseMatrix;

std::vector<DenseMatrix> finite_difference_grads(
    const std::vector<elastic::ad::ParamPtr>& params, const std::function<double()>& loss,
    double h) {
    std::vector<DenseMatrix> grads;
    for (const auto& p : params) {
        DenseMatrix g(p->value.rows, p->value.cols);
        for (int i = 0; i < p->value.size(); ++i) {
            const double saved = p->value.data[i];
            p->value.data[i] = saved + h;
            const double up = loss();
            p->value.data[i] = saved - h;
            const double down = loss();
            p->value.data[i] = saved;
            g.data[i] = (up - down) / (2.0 * h);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

double max_grad_rel_err(const std::vector<elastic::ad::ParamPtr>& params,
                        const std::vector<DenseMatrix>& fd) {
    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const auto& g = params[pi]->grad;
        for (int i = 0; i < g.size(); ++i) {
            const double a = g.data[i], n = fd[pi].data[i];
            const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
            worst = std::max(worst, std::abs(a - n) / denom);
        }
    }
    return worst;
}

DenseMatrix dense_adapter_forward(const AdapterLayer& layer, const DenseMatrix& x) {
    const int d1 = layer.d1(), d2 = layer.d2();
    DenseMatrix w_eff = layer.base;
    for (int s = 0; s < layer.cap; ++s) {
        if (!layer.active[s]) continue;
        const double lam = layer.lambda->value(0, s);
        for (int i = 0; i < d1; ++i)
            for (int j = 0; j < d2; ++j)
                w_eff(i, j) += lam * layer.P->value(i, s) * layer.Q->value(s, j);
    }
    DenseMatrix out(x.rows, d2);
    for (int i = 0; i < x.rows; ++i)
        for (int j = 0; j < d2; ++j) {
            double acc = 0.0;
            for (int t = 0; t < d1; ++t) acc += x(i, t) * w_eff(t, j);
            out(i, j) = acc;
        }
    return out;
}

std::vector<ScoredRank> scalar_rank_scores(const std::vector<AdapterLayer>& layers,
                                           const elastic::ImportanceTracker& tracker) {
    using EK = elastic::ImportanceTracker::EntryKind;
    std::vector<ScoredRank> out;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const auto& l = layers[li];
        for (int s = 0; s < l.cap; ++s) {
            if (!l.active[s]) continue;
            double score = tracker.entry_mean(li, EK::Lambda, 0, s) *
                           tracker.entry_uncertainty(li, EK::Lambda, 0, s);
            double psum = 0.0;
            for (int i = 0; i < l.d1(); ++i)
                psum += tracker.entry_mean(li, EK::P, i, s) *
                        tracker.entry_uncertainty(li, EK::P, i, s);
            double qsum = 0.0;
            for (int j = 0; j < l.d2(); ++j)
                qsum += tracker.entry_mean(li, EK::Q, s, j) *
                        tracker.entry_uncertainty(li, EK::Q, s, j);
            score += psum / l.d1() + qsum / l.d2();
            out.push_back({l.layer_id, l.matrix_id, s, score});
        }
    }
    std::sort(out.begin(), out.end(), [](const ScoredRank& a, const ScoredRank& b) {
        return std::tie(a.layer_id, a.matrix_id, a.rank_index) <
               std::tie(b.layer_id, b.matrix_id, b.rank_index);
    });
    return out;
}

EmaState scalar_ema(const std::vector<double>& stream, double beta1, double beta2) {
    EmaState s;
    for (double x : stream) {
        s.mean = beta1 * s.mean + (1.0 - beta1) * x;
        s.unc = beta2 * s.unc + (1.0 - beta2) * std::abs(x - s.mean);
    }
    return s;
}

OracleEvent brute_force_adjust(std::vector<OracleMatrix> matrices,
                               const std::vector<elastic::RankScore>& scores, int k, int b_sched,
                               bool allow_expansion, int prune_target_total) {
    OracleEvent event;

    // Step 1: the k least important active ranks of each matrix.
    struct Entry {
        int layer_id, matrix_id, slot;
        double score;
    };
    std::vector<Entry> pool;
    for (const auto& m : matrices) {
        std::vector<Entry> mine;
        for (const auto& s : scores)
            if (s.layer_id == m.layer_id && s.matrix_id == m.matrix_id)
                mine.push_back({s.layer_id, s.matrix_id, s.rank_index, s.score});
        std::stable_sort(mine.begin(), mine.end(), [](const Entry& a, const Entry& b) {
            if (a.score != b.score) return a.score < b.score;
            return a.slot < b.slot;
        });
        for (int i = 0; i < static_cast<int>(mine.size()) && i < k; ++i) pool.push_back(mine[i]);
    }

    // Step 2: global ascending sort with the deterministic tie-break.
    std::stable_sort(pool.begin(), pool.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score < b.score;
        if (a.layer_id != b.layer_id) return a.layer_id < b.layer_id;
        if (a.matrix_id != b.matrix_id) return a.matrix_id < b.matrix_id;
        return a.slot < b.slot;
    });
    const int n = static_cast<int>(pool.size());

    auto find_matrix = [&](int layer_id, int matrix_id) -> OracleMatrix& {
        for (auto& m : matrices)
            if (m.layer_id == layer_id && m.matrix_id == matrix_id) return m;
        throw std::logic_error("oracle: matrix not found");
    };

    if (!allow_expansion) {
        int budget = std::min(b_sched, n);
        if (prune_target_total >= 0) {
            int total = 0;
            for (const auto& m : matrices) total += static_cast<int>(m.active_slots.size());
            budget = std::min(budget, std::max(0, total - prune_target_total));
        }
        std::vector<Entry> prunes;
        for (int i = 0; i < n && static_cast<int>(prunes.size()) < budget; ++i) {
            auto& m = find_matrix(pool[i].layer_id, pool[i].matrix_id);
            if (static_cast<int>(m.active_slots.size()) > 1) {
                m.active_slots.erase(
                    std::find(m.active_slots.begin(), m.active_slots.end(), pool[i].slot));
                prunes.push_back(pool[i]);
            }
        }
        for (const auto& p : prunes)
            event.pruned.push_back({p.layer_id, p.matrix_id, p.slot});
        return event;
    }

    // Steps 3 and 4, re-planned at shrinking budgets until prune and expand
    // counts agree. All state is recomputed from scratch per attempt.
    int budget = std::min(b_sched, n / 2);
    while (budget > 0) {
        std::vector<OracleMatrix> sim = matrices;
        auto sim_find = [&](int layer_id, int matrix_id) -> OracleMatrix& {
            for (auto& m : sim)
                if (m.layer_id == layer_id && m.matrix_id == matrix_id) return m;
            throw std::logic_error("oracle: matrix not found");
        };

        std::vector<int> prune_pos;
        for (int i = 0; i < n - budget && static_cast<int>(prune_pos.size()) < budget; ++i) {
            auto& m = sim_find(pool[i].layer_id, pool[i].matrix_id);
            if (static_cast<int>(m.active_slots.size()) > 1) {
                m.active_slots.erase(
                    std::find(m.active_slots.begin(), m.active_slots.end(), pool[i].slot));
                prune_pos.push_back(i);
            }
        }
        const int pruned = static_cast<int>(prune_pos.size());

        struct ExpCredit {
            int layer_id, matrix_id, count;
        };
        std::vector<ExpCredit> credits;
        int placed = 0;
        for (int j = n - 1; j >= 0 && placed < pruned; --j) {
            if (std::find(prune_pos.begin(), prune_pos.end(), j) != prune_pos.end()) continue;
            auto& m = sim_find(pool[j].layer_id, pool[j].matrix_id);
            int already = 0;
            for (const auto& c : credits)
                if (c.layer_id == m.layer_id && c.matrix_id == m.matrix_id) already = c.count;
            if (already >= k) continue;
            if (static_cast<int>(m.active_slots.size()) + already >= m.cap) continue;
            bool found = false;
            for (auto& c : credits)
                if (c.layer_id == m.layer_id && c.matrix_id == m.matrix_id) {
                    c.count += 1;
                    found = true;
                }
            if (!found) credits.push_back({m.layer_id, m.matrix_id, 1});
            placed += 1;
        }

        if (pruned == budget && placed == pruned) {
            // Execute: prunes free their slots, expansions re-activate the
            // lowest-index free slot of their matrix.
            for (int pos : prune_pos) {
                auto& m = find_matrix(pool[pos].layer_id, pool[pos].matrix_id);
                m.active_slots.erase(
                    std::find(m.active_slots.begin(), m.active_slots.end(), pool[pos].slot));
                event.pruned.push_back({pool[pos].layer_id, pool[pos].matrix_id, pool[pos].slot});
            }
            // expansion execution order: matrices in their given order
            for (const auto& m0 : matrices) {
                for (const auto& c : credits) {
                    if (c.layer_id != m0.layer_id || c.matrix_id != m0.matrix_id) continue;
                    auto& m = find_matrix(c.layer_id, c.matrix_id);
                    for (int e = 0; e < c.count; ++e) {
                        int slot = 0;
                        while (std::find(m.active_slots.begin(), m.active_slots.end(), slot) !=
                               m.active_slots.end())
                            ++slot;
                        if (slot >= m.cap) throw std::logic_error("oracle: no free slot");
                        m.active_slots.push_back(slot);
                        event.expanded.push_back({c.layer_id, c.matrix_id, slot});
                    }
                }
            }
            return event;
        }
        budget = std::min(pruned, placed);
    }
    return event;
}

std::vector<double> jacobi_singular_values(const DenseMatrix& m) {
    // One-sided Jacobi on the columns of A (work on the taller orientation).
    int rows = m.rows, cols = m.cols;
    std::vector<std::vector<double>> a(cols, std::vector<double>(rows));
    if (rows >= cols) {
        for (int j = 0; j < cols; ++j)
            for (int i = 0; i < rows; ++i) a[j][i] = m(i, j);
    } else {
        std::swap(rows, cols);
        a.assign(cols, std::vector<double>(rows));
        for (int j = 0; j < cols; ++j)
            for (int i = 0; i < rows; ++i) a[j][i] = m(j, i);
    }
    auto col_dot = [&](int p, int q) {
        double acc = 0.0;
        for (int i = 0; i < rows; ++i) acc += a[p][i] * a[q][i];
        return acc;
    };
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < cols - 1; ++p)
            for (int q = p + 1; q < cols; ++q) {
                const double apq = col_dot(p, q);
                const double app = col_dot(p, p), aqq = col_dot(q, q);
                off = std::max(off, std::abs(apq) / std::max(1e-300, std::sqrt(app * aqq)));
                if (std::abs(apq) < 1e-30) continue;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
                for (int i = 0; i < rows; ++i) {
                    const double vp = a[p][i], vq = a[q][i];
                    a[p][i] = c * vp - s * vq;
                    a[q][i] = s * vp + c * vq;
                }
            }
        if (off < 1e-14) break;
    }
    std::vector<double> sv(cols);
    for (int j = 0; j < cols; ++j) sv[j] = std::sqrt(col_dot(j, j));
    std::sort(sv.rbegin(), sv.rend());
    return sv;
}

std::vector<std::vector<double>> complement_basis(const std::vector<std::vector<double>>& cols,
                                                  int dim) {
    // Gram-Schmidt over [cols | e_0 .. e_{dim-1}]; vectors surviving from the
    // standard basis span the complement.
    std::vector<std::vector<double>> basis;
    auto project_off = [&](std::vector<double> v) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) {
                double c = 0.0;
                for (int i = 0; i < dim; ++i) c += v[i] * b[i];
                for (int i = 0; i < dim; ++i) v[i] -= c * b[i];
            }
        return v;
    };
    std::vector<std::vector<double>> complement;
    for (const auto& c : cols) {
        auto w = project_off(c);
        double n = 0.0;
        for (double x : w) n += x * x;
        n = std::sqrt(n);
        if (n > 1e-10) {
            for (double& x : w) x /= n;
            basis.push_back(std::move(w));
        }
    }
    for (int e = 0; e < dim; ++e) {
        std::vector<double> v(dim, 0.0);
        v[e] = 1.0;
        auto w = project_off(std::move(v));
        double n = 0.0;
        for (double x : w) n += x * x;
        n = std::sqrt(n);
        if (n > 1e-10) {
            for (double& x : w) x /= n;
            basis.push_back(w);
            complement.push_back(w);
        }
    }
    return complement;
}

namespace {

std::vector<double> tied_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = tied_ranks(a), rb = tied_ranks(b);
    const std::size_t n = a.size();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0 || vb == 0) return 0.0;
    return cov / std::sqrt(va * vb);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<int> scalar_classifier_argmax(const elastic::Model& model,
                                          const elastic::DenseMatrix& x) {
    std::vector<int> out(x.rows);
    for (int row = 0; row < x.rows; ++row) {
        std::vector<double> h(x.cols);
        for (int j = 0; j < x.cols; ++j) h[j] = x(row, j);
        for (int li = 0; li < model.n_layers(); ++li) {
            const auto& slot = model.stack[li];
            std::vector<double> next;
            if (slot.adapter_idx >= 0) {
                const auto& l = model.adapters[slot.adapter_idx];
                next.assign(l.d2(), 0.0);
                // x·W0 first ...
                for (int j = 0; j < l.d2(); ++j) {
                    double acc = 0.0;
                    for (int t = 0; t < l.d1(); ++t) acc += h[t] * l.base(t, j);
                    next[j] = acc;
                }
                // ... then ((x·Pa)·λ)·Qa accumulated in active-slot order
                const auto act = l.active_indices();
                std::vector<double> u(act.size());
                for (std::size_t s = 0; s < act.size(); ++s) {
                    double acc = 0.0;
                    for (int t = 0; t < l.d1(); ++t) acc += h[t] * l.P->value(t, act[s]);
                    u[s] = acc * l.lambda->value(0, act[s]);
                }
                for (std::size_t s = 0; s < act.size(); ++s)
                    for (int j = 0; j < l.d2(); ++j) next[j] += u[s] * l.Q->value(act[s], j);
            } else {
                next.assign(slot.frozen_w.cols, 0.0);
                for (int j = 0; j < slot.frozen_w.cols; ++j) {
                    double acc = 0.0;
                    for (int t = 0; t < slot.frozen_w.rows; ++t)
                        acc += h[t] * slot.frozen_w(t, j);
                    next[j] = acc;
                }
            }
            h = std::move(next);
            for (double& v : h) v = std::tanh(v);
        }
        std::vector<double> logits(model.head_w->value.cols);
        for (int j = 0; j < model.head_w->value.cols; ++j) {
            double acc = 0.0;
            for (int t = 0; t < model.head_w->value.rows; ++t)
                acc += h[t] * model.head_w->value(t, j);
            logits[j] = acc + model.head_b->value(0, j);
        }
        int arg = 0;
        for (int j = 1; j < static_cast<int>(logits.size()); ++j)
            if (logits[j] > logits[arg]) arg = j;
        out[row] = arg;
    }
    return out;
}

}  // namespace oracles
