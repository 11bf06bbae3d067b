#pragma once

// Desk-scale experiment driver: model assembly (frozen stack + adapters),
// synthetic planted-low-rank and CSV classification tasks, the three
// comparison methods (fixed rank, prune-only, elastic), and run logging.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "elastic/allocator.hpp"

namespace elastic {

struct PlantedSpec {
    std::vector<int> dims;          // d0, d1, ..., dL: L matrices
    std::vector<int> planted_ranks; // one per matrix
    double noise = 0.05;            // stddev of additive output noise
    int samples = 256;              // training rows; eval uses samples/4 held out
    double scale = 0.5;             // singular value of each planted component
};

struct CsvSpec {
    std::string path;
    int features = 0;
    int classes = 0;
    double split = 0.8;      // train fraction
    std::vector<int> dims;   // widths of the adapted stack after the input layer
};

struct TaskSpec {
    enum class Kind { PlantedLowRank, CsvClassification };
    Kind kind = Kind::PlantedLowRank;
    PlantedSpec planted;
    CsvSpec csv;
    void validate() const;
};

struct MethodSpec {
    enum class Kind { FixedRank, PruneOnly, Elastic };
    Kind kind = Kind::Elastic;
    // Prune-only comparators start above the target budget and shrink toward
    // it; 1.0 makes all three methods share one initial state.
    double prune_only_init_mult = 1.5;

    static MethodSpec fixed() { return {Kind::FixedRank, 1.0}; }
    static MethodSpec prune_only(double mult = 1.5) { return {Kind::PruneOnly, mult}; }
    static MethodSpec elastic() { return {Kind::Elastic, 1.0}; }
    std::string name() const;
};

struct TrainConfig {
    AllocatorConfig alloc;
    double learning_rate = 0.05;
    int batch_size = 16;
    double ortho_weight = 0.1;  // gamma
    double beta1 = 0.85;
    double beta2 = 0.85;
};

struct Model {
    struct Slot {
        int adapter_idx = -1;   // index into adapters, -1 = frozen passthrough
        DenseMatrix frozen_w;   // used only when adapter_idx < 0
    };
    std::vector<Slot> stack;
    std::vector<AdapterLayer> adapters;
    ad::ParamPtr head_w;  // classification head, null for regression tasks
    ad::ParamPtr head_b;
    std::vector<DenseMatrix> teacher;  // planted task ground-truth weights

    int n_layers() const { return static_cast<int>(stack.size()); }
    int total_active_rank() const;
    std::vector<ad::ParamPtr> trainable_params() const;
};

struct Dataset {
    DenseMatrix x_train, y_train;
    DenseMatrix x_eval, y_eval;
    std::vector<int> labels_train, labels_eval;
    bool classification = false;
};

struct StepRecord {
    int step = 0;
    double task_loss = 0.0;
    double reg_value = 0.0;  // gamma-weighted orthogonality penalty
    int total_rank = 0;
};

struct LayerStateRecord {
    int layer_id = 0;
    int matrix_id = 0;
    int r_active = 0;
    std::vector<double> lambdas;  // active singular values
};

struct RankHistoryRow {
    int step = 0;
    int layer_id = 0;
    int matrix_id = 0;
    int rank = 0;
};

struct ImportanceRow {
    int layer_id = 0;
    int matrix_id = 0;
    int rank_index = 0;
    double score = 0.0;
};

struct MetricRecord {
    std::string name;  // "mse" or "accuracy"
    double value = 0.0;
};

struct RunLog {
    std::string method;
    std::uint64_t seed = 0;
    std::vector<StepRecord> steps;
    std::vector<AdjustmentEvent> events;
    std::vector<RankHistoryRow> rank_history;    // post-event snapshots
    std::vector<LayerStateRecord> final_layers;
    std::vector<ImportanceRow> importance_post_warmup;
    std::vector<ImportanceRow> importance_post_adjustment;
    bool has_post_warmup = false;
    bool has_post_adjustment = false;
    MetricRecord final_metric;
};

/// Frozen stack plus adapters per the method's initial rank; deterministic
/// under seed. disabled_layers removes the adapter from those stack slots
/// (rank-distribution probes).
Model build_model(const TaskSpec& task, const TrainConfig& cfg, const MethodSpec& method,
                  std::uint64_t seed, const std::vector<int>& disabled_layers = {});

/// Training + eval data for a task. The planted task needs the model's
/// teacher weights; CSV tasks load and split the file.
Dataset make_dataset(const TaskSpec& task, const Model& model, std::uint64_t seed);

/// Tape forward through the stack (tanh between layers; classification adds
/// the softmax head, regression leaves the last layer linear).
ad::ParamPtr model_forward(ad::Tape& tape, const Model& model, const DenseMatrix& x);

/// Dense forward without the tape, same association order.
DenseMatrix model_eval_forward(const Model& model, const DenseMatrix& x);

/// Full training run; throws TrainingAborted when the loss goes non-finite.
RunLog train(Model& model, const TaskSpec& task, const MethodSpec& method,
             const TrainConfig& cfg, std::uint64_t seed);

MetricRecord evaluate(const Model& model, const Dataset& data);

enum class ProbeVariant { DropTopGroup, DropBottomGroup, OnlyTopGroup };

std::string probe_variant_name(ProbeVariant v);

/// Reruns training with adapters removed from the layer group the completed
/// elastic run ranked highest/lowest. Requires >= 2 adapted layers.
RunLog rank_distribution_probe(const RunLog& full_run, const TaskSpec& task,
                               const TrainConfig& cfg, std::uint64_t seed, ProbeVariant variant);

/// One-call convenience: build + train + evaluate.
RunLog run_experiment(const TaskSpec& task, const MethodSpec& method, const TrainConfig& cfg,
                      std::uint64_t seed);

}  // namespace elastic
