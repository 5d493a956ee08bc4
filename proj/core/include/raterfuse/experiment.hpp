#pragma once
// Fold-by-fold comparison of the Final, LS and DC-LS label schemes:
// fuse -> split -> train -> evaluate, with every scheme scored against the
// same hard references (final decisions for screening, agreed features for
// the feature task) on the same validation folds.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "raterfuse/annotation.hpp"
#include "raterfuse/config_file.hpp"
#include "raterfuse/folds.hpp"
#include "raterfuse/metrics.hpp"
#include "raterfuse/trainer.hpp"

namespace raterfuse {

enum class Task { Screening, Features };
enum class ModelKind { Linear, Mlp };

std::optional<Task> parse_task(std::string_view s);
std::optional<ModelKind> parse_model_kind(std::string_view s);
std::string_view to_string(Task t);
std::string_view to_string(ModelKind m);

struct ExperimentOptions {
    Task task = Task::Screening;
    int k = 5;
    std::uint64_t seed = 0;
    ModelKind model = ModelKind::Linear;
    ToolkitConfig config;
    bool joint = false;  // one 11-output model per fold instead of a task-specific head
    HammingAverage hamming_average = HammingAverage::Micro;
    double spec_target = 0.95;
    std::optional<std::string> timestamp;  // recorded verbatim; omitted by default
};

struct ExperimentReport {
    std::string metric;  // "sens@95spec" or "hamming"
    Task task = Task::Screening;
    ModelKind model = ModelKind::Linear;
    int k = 5;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::optional<std::string> timestamp;
    std::vector<std::string> schemes;       // row labels
    std::vector<std::vector<double>> cells;  // [scheme][fold]; NaN when undefined
};

// First 16 hex digits of SHA-256 over the canonical option text (seed and
// timestamp excluded).
std::string config_digest(const ExperimentOptions& options);

struct TrainedCell {
    std::string scheme;
    int fold = 0;
    ModelSpec model;
    TrainingLog log;
};

// Optional by-products: the fold assignment and every trained model.
struct ExperimentArtifacts {
    std::vector<FoldAssignment> folds;
    std::vector<TrainedCell> cells;  // scheme-major, fold-minor
};

// Throws Error with scheme/fold context on failure.
ExperimentReport run_experiment(const std::vector<AnnotationRecord>& records, const ExperimentOptions& options,
                                ExperimentArtifacts* artifacts = nullptr);

std::string format_cell(const ExperimentReport& report, double value);
std::string report_csv(const ExperimentReport& report);
std::string report_text(const ExperimentReport& report);

}  // namespace raterfuse
