#pragma once

// Configuration ingestion, run-artifact export, and the CLI entry point.
// Step/event logs are JSON-lines, matrix-shaped exports are CSV; every
// export is a pure function of the RunLog so re-rendering is byte-stable.

#include <cstdint>
#include <string>

#include "elastic/harness.hpp"

namespace elastic {

struct RunConfig {
    TaskSpec task;
    MethodSpec method;
    TrainConfig train;
    std::uint64_t seed = 42;
    std::string output_dir = "out";
};

/// Parses and validates a JSON config file. Unknown keys are hard errors
/// that name the offending key path.
RunConfig load_config(const std::string& path);
RunConfig parse_config_json(const std::string& text, const std::string& origin);

enum class ImportanceStage { PostWarmup, PostAdjustment };

std::string render_metrics_jsonl(const RunLog& log);
std::string render_events_jsonl(const RunLog& log);
std::string render_ranks_csv(const RunLog& log, bool per_event = false);
std::string render_importance_csv(const RunLog& log);  // both stages, stage column
std::string render_importance_stage_csv(const RunLog& log, ImportanceStage stage);
std::string render_layer_state_csv(const RunLog& log);

std::string runlog_to_json(const RunLog& log);
RunLog runlog_from_json(const std::string& text);

/// Writes metrics.jsonl, events.jsonl, ranks.csv, importance.csv,
/// layer_state.csv and runlog.json under dir (created if needed).
void write_run_artifacts(const RunLog& log, const std::string& dir, bool per_event = false);

/// CLI: run | compare | ablate-scheduler | probe-ranks | export.
/// Returns the process exit code (0 ok, 2 config error, 3 runtime abort).
int cli_run(int argc, const char* const* argv);

}  // namespace elastic
