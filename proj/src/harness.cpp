#include "elastic/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "elastic/kernels.hpp"
#include "elastic/linalg.hpp"
#include "elastic/logging.hpp"

namespace elastic {

namespace {

constexpr std::uint64_t kBaseStream = 10;
constexpr std::uint64_t kTeacherStream = 100;
constexpr std::uint64_t kAdapterStream = 200;
constexpr std::uint64_t kHeadStream = 300;
constexpr std::uint64_t kDataStream = 400;
constexpr std::uint64_t kExpandStream = 500;

DenseMatrix gaussian_matrix(int rows, int cols, double stddev, Rng& rng) {
    DenseMatrix m(rows, cols);
    for (double& v : m.data) v = rng.gaussian(0.0, stddev);
    return m;
}

// W0 + scale·Σ u_j v_jᵀ with orthonormal u's and v's: the perturbation has
// numerical rank exactly `rank`, every component carrying equal energy.
DenseMatrix planted_teacher(const DenseMatrix& w0, int rank, double scale, Rng& rng) {
    DenseMatrix t = w0;
    if (rank == 0) return t;
    const auto us = random_orthonormal_set(w0.rows, rank, rng);
    const auto vs = random_orthonormal_set(w0.cols, rank, rng);
    for (int r = 0; r < rank; ++r)
        for (int i = 0; i < w0.rows; ++i)
            for (int j = 0; j < w0.cols; ++j) t(i, j) += scale * us[r][i] * vs[r][j];
    return t;
}

DenseMatrix dense_matmul(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix c(a.rows, b.cols);
    kernels::matmul_nn(a.data.data(), b.data.data(), c.data.data(), a.rows, a.cols, b.cols,
                       false);
    return c;
}

DenseMatrix tanh_of(DenseMatrix m) {
    for (double& v : m.data) v = std::tanh(v);
    return m;
}

// Teacher forward for the planted task: linear last layer, tanh between.
DenseMatrix teacher_forward(const std::vector<DenseMatrix>& teacher, const DenseMatrix& x) {
    DenseMatrix h = x;
    for (std::size_t i = 0; i < teacher.size(); ++i) {
        h = dense_matmul(h, teacher[i]);
        if (i + 1 < teacher.size()) h = tanh_of(std::move(h));
    }
    return h;
}

int method_init_rank(const MethodSpec& method, const AllocatorConfig& alloc) {
    if (method.kind == MethodSpec::Kind::PruneOnly)
        return std::max<int>(1, static_cast<int>(std::llround(method.prune_only_init_mult *
                                                              alloc.init_rank)));
    return alloc.init_rank;
}

int method_capacity(const MethodSpec& method, const AllocatorConfig& alloc, int init_rank,
                    int d1, int d2) {
    switch (method.kind) {
        case MethodSpec::Kind::FixedRank:
        case MethodSpec::Kind::PruneOnly: return std::min(init_rank, std::min(d1, d2));
        case MethodSpec::Kind::Elastic: return std::max(init_rank, capacity_for(alloc, d1, d2));
    }
    return init_rank;
}

std::string layer_norms_json(const Model& model) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < model.adapters.size(); ++i) {
        const auto& l = model.adapters[i];
        double pn = 0.0, qn = 0.0, ln = 0.0;
        for (double v : l.P->value.data) pn += v * v;
        for (double v : l.Q->value.data) qn += v * v;
        for (double v : l.lambda->value.data) ln += v * v;
        if (i) os << ",";
        os << "{\"layer\":" << l.layer_id << ",\"matrix\":" << l.matrix_id
           << ",\"p_norm\":" << std::sqrt(pn) << ",\"lambda_norm\":" << std::sqrt(ln)
           << ",\"q_norm\":" << std::sqrt(qn) << "}";
    }
    os << "]";
    return os.str();
}

std::vector<ImportanceRow> snapshot_scores(const ImportanceTracker& tracker,
                                           const std::vector<AdapterLayer>& layers) {
    std::vector<ImportanceRow> rows;
    for (const auto& s : tracker.rank_scores(layers))
        rows.push_back({s.layer_id, s.matrix_id, s.rank_index, s.score});
    return rows;
}

}  // namespace

void TaskSpec::validate() const {
    if (kind == Kind::PlantedLowRank) {
        if (planted.dims.size() < 2)
            throw ConfigError("task: planted dims needs at least input and output widths");
        const std::size_t n_mats = planted.dims.size() - 1;
        if (planted.planted_ranks.size() != n_mats)
            throw ConfigError("task: planted_ranks must have one entry per layer (" +
                              std::to_string(n_mats) + ")");
        for (std::size_t i = 0; i < n_mats; ++i) {
            const int d1 = planted.dims[i], d2 = planted.dims[i + 1];
            if (d1 < 1 || d2 < 1) throw ConfigError("task: dims must be positive");
            if (planted.planted_ranks[i] < 0 ||
                planted.planted_ranks[i] > std::min(d1, d2))
                throw ConfigError("task: planted rank " + std::to_string(i) +
                                  " must lie in [0, min(d1, d2)]");
        }
        if (planted.noise < 0) throw ConfigError("task: noise must be >= 0");
        if (planted.samples < 4) throw ConfigError("task: samples must be >= 4");
    } else {
        if (csv.path.empty()) throw ConfigError("task: csv path is required");
        if (csv.features < 1) throw ConfigError("task: csv features must be >= 1");
        if (csv.classes < 2) throw ConfigError("task: csv classes must be >= 2");
        if (!(csv.split > 0.0 && csv.split < 1.0))
            throw ConfigError("task: csv split must lie in (0, 1)");
        if (csv.dims.size() < 2)
            throw ConfigError("task: csv dims needs the frozen width plus adapted widths");
    }
}

std::string MethodSpec::name() const {
    switch (kind) {
        case Kind::FixedRank: return "fixed";
        case Kind::PruneOnly: return "prune_only";
        case Kind::Elastic: return "elastic";
    }
    return "?";
}

int Model::total_active_rank() const {
    int total = 0;
    for (const auto& a : adapters) total += a.r_active;
    return total;
}

std::vector<ad::ParamPtr> Model::trainable_params() const {
    std::vector<ad::ParamPtr> params;
    for (const auto& a : adapters) {
        params.push_back(a.P);
        params.push_back(a.lambda);
        params.push_back(a.Q);
    }
    if (head_w) params.push_back(head_w);
    if (head_b) params.push_back(head_b);
    return params;
}

Model build_model(const TaskSpec& task, const TrainConfig& cfg, const MethodSpec& method,
                  std::uint64_t seed, const std::vector<int>& disabled_layers) {
    task.validate();
    Model model;
    auto disabled = [&](int layer) {
        return std::find(disabled_layers.begin(), disabled_layers.end(), layer) !=
               disabled_layers.end();
    };

    const bool planted = task.kind == TaskSpec::Kind::PlantedLowRank;
    std::vector<std::pair<int, int>> shapes;   // stack matrix shapes
    std::vector<bool> adaptable;
    if (planted) {
        for (std::size_t i = 0; i + 1 < task.planted.dims.size(); ++i) {
            shapes.emplace_back(task.planted.dims[i], task.planted.dims[i + 1]);
            adaptable.push_back(true);
        }
    } else {
        shapes.emplace_back(task.csv.features, task.csv.dims[0]);
        adaptable.push_back(false);  // frozen feature layer
        for (std::size_t i = 0; i + 1 < task.csv.dims.size(); ++i) {
            shapes.emplace_back(task.csv.dims[i], task.csv.dims[i + 1]);
            adaptable.push_back(true);
        }
    }

    for (std::size_t i = 0; i < shapes.size(); ++i) {
        const auto [d1, d2] = shapes[i];
        Rng rng_base(mix_seed(seed, kBaseStream + i));
        DenseMatrix w0 = gaussian_matrix(d1, d2, std::sqrt(1.0 / d1), rng_base);

        if (planted) {
            Rng rng_teacher(mix_seed(seed, kTeacherStream + i));
            model.teacher.push_back(planted_teacher(w0, task.planted.planted_ranks[i],
                                                    task.planted.scale, rng_teacher));
        }

        Model::Slot slot;
        if (adaptable[i] && !disabled(static_cast<int>(i))) {
            const int r0 = method_init_rank(method, cfg.alloc);
            const int r_init = std::min(r0, std::min(d1, d2));
            const int cap = method_capacity(method, cfg.alloc, r_init, d1, d2);
            Rng rng_adapter(mix_seed(seed, kAdapterStream + i));
            model.adapters.push_back(make_adapter(std::move(w0), r_init, cap,
                                                  static_cast<int>(i), 0, rng_adapter));
            slot.adapter_idx = static_cast<int>(model.adapters.size()) - 1;
        } else {
            slot.frozen_w = std::move(w0);
        }
        model.stack.push_back(std::move(slot));
    }

    if (!planted) {
        const int d_last = task.csv.dims.back();
        Rng rng_head(mix_seed(seed, kHeadStream));
        model.head_w = ad::make_param(
            gaussian_matrix(d_last, task.csv.classes, std::sqrt(1.0 / d_last), rng_head), true,
            "head_w");
        model.head_b = ad::make_param(DenseMatrix(1, task.csv.classes), true, "head_b");
    }
    return model;
}

namespace {

Dataset load_csv_dataset(const CsvSpec& spec) {
    std::ifstream in(spec.path);
    if (!in) throw ConfigError("csv: cannot open file: " + spec.path);
    std::string line;
    if (!std::getline(in, line)) throw CsvError("csv: missing header row in " + spec.path);

    std::vector<std::vector<double>> features;
    std::vector<int> labels;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (static_cast<int>(cells.size()) != spec.features + 1)
            throw CsvError("csv: line " + std::to_string(line_no) + ": expected " +
                           std::to_string(spec.features + 1) + " columns, got " +
                           std::to_string(cells.size()));
        std::vector<double> row(spec.features);
        try {
            std::size_t used = 0;
            for (int j = 0; j < spec.features; ++j) {
                row[j] = std::stod(cells[j], &used);
                if (used != cells[j].size())
                    throw CsvError("csv: line " + std::to_string(line_no) +
                                   ": bad numeric field '" + cells[j] + "'");
            }
            const int lbl = std::stoi(cells.back(), &used);
            if (used != cells.back().size())
                throw CsvError("csv: line " + std::to_string(line_no) + ": bad label field '" +
                               cells.back() + "'");
            if (lbl < 0 || lbl >= spec.classes)
                throw CsvError("csv: line " + std::to_string(line_no) + ": label " +
                               std::to_string(lbl) + " outside [0, " +
                               std::to_string(spec.classes) + ")");
            labels.push_back(lbl);
        } catch (const std::invalid_argument&) {
            throw CsvError("csv: line " + std::to_string(line_no) + ": malformed numeric field");
        } catch (const std::out_of_range&) {
            throw CsvError("csv: line " + std::to_string(line_no) + ": numeric field overflow");
        }
        features.push_back(std::move(row));
    }

    const int n = static_cast<int>(features.size());
    const int n_train = static_cast<int>(n * spec.split);
    const int n_eval = n - n_train;
    if (n_train < 1) throw ConfigError("csv: split leaves an empty training set");
    if (n_eval < 1) throw ConfigError("csv: split leaves an empty eval set");

    Dataset data;
    data.classification = true;
    data.x_train = DenseMatrix(n_train, spec.features);
    data.x_eval = DenseMatrix(n_eval, spec.features);
    for (int i = 0; i < n_train; ++i) {
        for (int j = 0; j < spec.features; ++j) data.x_train(i, j) = features[i][j];
        data.labels_train.push_back(labels[i]);
    }
    for (int i = 0; i < n_eval; ++i) {
        for (int j = 0; j < spec.features; ++j) data.x_eval(i, j) = features[n_train + i][j];
        data.labels_eval.push_back(labels[n_train + i]);
    }
    return data;
}

}  // namespace

Dataset make_dataset(const TaskSpec& task, const Model& model, std::uint64_t seed) {
    if (task.kind == TaskSpec::Kind::CsvClassification) return load_csv_dataset(task.csv);

    const auto& spec = task.planted;
    Rng rng(mix_seed(seed, kDataStream));
    const int d0 = spec.dims.front();
    const int n_train = spec.samples;
    const int n_eval = std::max(1, spec.samples / 4);

    Dataset data;
    data.x_train = gaussian_matrix(n_train, d0, 1.0, rng);
    data.x_eval = gaussian_matrix(n_eval, d0, 1.0, rng);
    data.y_train = teacher_forward(model.teacher, data.x_train);
    data.y_eval = teacher_forward(model.teacher, data.x_eval);
    for (double& v : data.y_train.data) v += rng.gaussian(0.0, spec.noise);
    for (double& v : data.y_eval.data) v += rng.gaussian(0.0, spec.noise);
    return data;
}

ad::ParamPtr model_forward(ad::Tape& tape, const Model& model, const DenseMatrix& x) {
    const bool classification = static_cast<bool>(model.head_w);
    ad::ParamPtr h = ad::make_const(x, "x");
    for (int i = 0; i < model.n_layers(); ++i) {
        const auto& slot = model.stack[i];
        if (slot.adapter_idx >= 0)
            h = adapter_forward(tape, model.adapters[slot.adapter_idx], h);
        else
            h = tape.matmul(h, ad::make_const(slot.frozen_w, "frozen"));
        const bool last = i + 1 == model.n_layers();
        if (!last || classification) h = tape.tanh(h);
    }
    if (classification) {
        h = tape.matmul(h, model.head_w);
        h = tape.row_broadcast_add(h, model.head_b);
    }
    return h;
}

DenseMatrix model_eval_forward(const Model& model, const DenseMatrix& x) {
    const bool classification = static_cast<bool>(model.head_w);
    DenseMatrix h = x;
    for (int i = 0; i < model.n_layers(); ++i) {
        const auto& slot = model.stack[i];
        if (slot.adapter_idx >= 0)
            h = adapter_eval(model.adapters[slot.adapter_idx], h);
        else
            h = dense_matmul(h, slot.frozen_w);
        const bool last = i + 1 == model.n_layers();
        if (!last || classification) h = tanh_of(std::move(h));
    }
    if (classification) {
        h = dense_matmul(h, model.head_w->value);
        for (int i = 0; i < h.rows; ++i)
            for (int j = 0; j < h.cols; ++j) h(i, j) += model.head_b->value(0, j);
    }
    return h;
}

MetricRecord evaluate(const Model& model, const Dataset& data) {
    if (data.x_eval.rows < 1) throw ConfigError("evaluate: empty eval split");
    const DenseMatrix pred = model_eval_forward(model, data.x_eval);
    if (data.classification) {
        int correct = 0;
        for (int i = 0; i < pred.rows; ++i) {
            int arg = 0;
            for (int j = 1; j < pred.cols; ++j)
                if (pred(i, j) > pred(i, arg)) arg = j;
            if (arg == data.labels_eval[i]) ++correct;
        }
        return {"accuracy", static_cast<double>(correct) / pred.rows};
    }
    double acc = 0.0;
    for (int i = 0; i < pred.size(); ++i) {
        const double d = pred.data[i] - data.y_eval.data[i];
        acc += d * d;
    }
    return {"mse", acc / pred.size()};
}

RunLog train(Model& model, const TaskSpec& task, const MethodSpec& method,
             const TrainConfig& cfg, std::uint64_t seed) {
    const auto& alloc = cfg.alloc;
    RunLog log;
    log.method = method.name();
    log.seed = seed;

    Dataset data = make_dataset(task, model, seed);
    Rng rng_expand(mix_seed(seed, kExpandStream));
    ImportanceTracker tracker(model.adapters, cfg.beta1, cfg.beta2);
    const auto params = model.trainable_params();

    const int n_train = data.x_train.rows;
    const int batch = std::min(cfg.batch_size, n_train);
    const int n_events = count_adjustment_events(alloc);
    const int snapshot_warm_step = alloc.t_warmup;
    const int snapshot_final_step =
        n_events > 0 ? alloc.t_warmup + n_events * alloc.adjust_interval : -1;

    for (int step = 0; step < alloc.total_steps; ++step) {
        DenseMatrix xb(batch, data.x_train.cols);
        for (int r = 0; r < batch; ++r) {
            const int src = (step * batch + r) % n_train;
            for (int j = 0; j < xb.cols; ++j) xb(r, j) = data.x_train(src, j);
        }

        ad::Tape tape;
        auto pred = model_forward(tape, model, xb);
        ad::ParamPtr task_loss;
        if (data.classification) {
            std::vector<int> yb(batch);
            for (int r = 0; r < batch; ++r) yb[r] = data.labels_train[(step * batch + r) % n_train];
            task_loss = tape.loss_softmax_ce(pred, std::move(yb));
        } else {
            DenseMatrix yb(batch, data.y_train.cols);
            for (int r = 0; r < batch; ++r) {
                const int src = (step * batch + r) % n_train;
                for (int j = 0; j < yb.cols; ++j) yb(r, j) = data.y_train(src, j);
            }
            task_loss = tape.loss_mse(pred, yb);
        }

        ad::ParamPtr loss = task_loss;
        double reg_value = 0.0;
        for (const auto& layer : model.adapters) {
            auto reg = tape.scale(ortho_penalty(tape, layer), cfg.ortho_weight);
            reg_value += reg->scalar();
            loss = tape.add(loss, reg);
        }

        if (!std::isfinite(loss->scalar())) {
            std::ostringstream diag;
            diag << "{\"step\":" << step << ",\"task_loss\":\"" << task_loss->scalar()
                 << "\",\"layer_norms\":" << layer_norms_json(model) << "}";
            throw TrainingAborted("train: non-finite loss at step " + std::to_string(step),
                                  diag.str());
        }

        tape.backward(loss);
        tracker.ema_update(model.adapters);
        ad::sgd_step(params, cfg.learning_rate);
        ad::zero_grads(params);

        if (step == snapshot_warm_step) {
            log.importance_post_warmup = snapshot_scores(tracker, model.adapters);
            log.has_post_warmup = true;
        }

        if (method.kind != MethodSpec::Kind::FixedRank && is_adjustment_step(step, alloc)) {
            const auto scores = tracker.rank_scores(model.adapters);
            // the prune-only comparator shrinks to the target budget, not the floor
            const int prune_target =
                method.kind == MethodSpec::Kind::PruneOnly
                    ? alloc.init_rank * static_cast<int>(model.adapters.size())
                    : -1;
            const auto event =
                adjust(model.adapters, &tracker, scores, step, alloc, rng_expand,
                       method.kind == MethodSpec::Kind::Elastic, prune_target);
            if (!event.empty()) {
                log.events.push_back(event);
                for (const auto& a : model.adapters)
                    log.rank_history.push_back({step, a.layer_id, a.matrix_id, a.r_active});
            }
        }

        if (step == snapshot_final_step) {
            log.importance_post_adjustment = snapshot_scores(tracker, model.adapters);
            log.has_post_adjustment = true;
        }

        log.steps.push_back(
            {step, task_loss->scalar(), reg_value, model.total_active_rank()});
    }

    for (const auto& a : model.adapters) {
        LayerStateRecord rec;
        rec.layer_id = a.layer_id;
        rec.matrix_id = a.matrix_id;
        rec.r_active = a.r_active;
        for (int i : a.active_indices()) rec.lambdas.push_back(a.lambda->value(0, i));
        log.final_layers.push_back(rec);
    }
    log.final_metric = evaluate(model, data);
    return log;
}

std::string probe_variant_name(ProbeVariant v) {
    switch (v) {
        case ProbeVariant::DropTopGroup: return "drop_top";
        case ProbeVariant::DropBottomGroup: return "drop_bottom";
        case ProbeVariant::OnlyTopGroup: return "only_top";
    }
    return "?";
}

RunLog rank_distribution_probe(const RunLog& full_run, const TaskSpec& task,
                               const TrainConfig& cfg, std::uint64_t seed,
                               ProbeVariant variant) {
    if (full_run.final_layers.size() < 2)
        throw ConfigError("probe: need at least 2 adapted layer groups");

    int top = 0, bottom = 0;
    for (std::size_t i = 1; i < full_run.final_layers.size(); ++i) {
        if (full_run.final_layers[i].r_active > full_run.final_layers[top].r_active)
            top = static_cast<int>(i);
        if (full_run.final_layers[i].r_active <= full_run.final_layers[bottom].r_active)
            bottom = static_cast<int>(i);
    }
    const int top_layer = full_run.final_layers[top].layer_id;
    const int bottom_layer = full_run.final_layers[bottom].layer_id;

    std::vector<int> disabled;
    TrainConfig probe_cfg = cfg;
    switch (variant) {
        case ProbeVariant::DropTopGroup: disabled = {top_layer}; break;
        case ProbeVariant::DropBottomGroup: disabled = {bottom_layer}; break;
        case ProbeVariant::OnlyTopGroup:
            for (const auto& l : full_run.final_layers)
                if (l.layer_id != top_layer) disabled.push_back(l.layer_id);
            // the full run's total rank budget concentrates on the kept group
            probe_cfg.alloc.init_rank =
                cfg.alloc.init_rank * static_cast<int>(full_run.final_layers.size());
            break;
    }

    Model model = build_model(task, probe_cfg, MethodSpec::elastic(), seed, disabled);
    RunLog log = train(model, task, MethodSpec::elastic(), probe_cfg, seed);
    log.method = "probe_" + probe_variant_name(variant);
    return log;
}

RunLog run_experiment(const TaskSpec& task, const MethodSpec& method, const TrainConfig& cfg,
                      std::uint64_t seed) {
    Model model = build_model(task, cfg, method, seed);
    return train(model, task, method, cfg, seed);
}

}  // namespace elastic
