#pragma once

#include <stdexcept>
#include <string>

namespace elastic {

// Shape mismatches between matrices or tracked state.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid configuration (bad key, bad value, inconsistent schedule).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// expand_rank called with no free slot.
struct CapacityError : std::logic_error {
    using std::logic_error::logic_error;
};

// prune_rank would drop a matrix below one active rank.
struct FloorError : std::logic_error {
    using std::logic_error::logic_error;
};

// Out-of-range index (e.g. class label beyond logits columns).
struct IndexError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// API contract violation (non-scalar loss, foreign tape, inactive slot).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

// Malformed CSV input; message carries the line number.
struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when a training loss goes non-finite; carries a JSON diagnostic
// (step, per-layer norms) for the CLI to persist.
struct TrainingAborted : std::runtime_error {
    std::string diagnostic_json;
    TrainingAborted(const std::string& msg, std::string diag)
        : std::runtime_error(msg), diagnostic_json(std::move(diag)) {}
};

}  // namespace elastic
