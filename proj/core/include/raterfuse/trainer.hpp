#pragma once
// Desk-scale classifier over embeddings: a linear or one-hidden-layer (tanh)
// network with a sigmoid per output, trained on soft targets with binary
// cross-entropy, mini-batch Adam, and validation-loss early stopping.
//
// Output layouts: 1 = screening head, 10 = feature head, 11 = joint
// (screening first, then the ten features).

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "raterfuse/folds.hpp"
#include "raterfuse/fusion.hpp"

namespace raterfuse {

inline constexpr double kProbabilityClamp = 1e-7;

struct ModelSpec {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;  // 0 = linear model
    std::size_t outputs = 1;
    // Row-major; hidden_w is hidden_dim x input_dim, out_w is
    // outputs x (hidden_dim ? hidden_dim : input_dim).
    std::vector<double> hidden_w, hidden_b, out_w, out_b;

    static ModelSpec zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t outputs);
    // N(0, (scale / sqrt(fan_in))^2) weights, zero biases.
    static ModelSpec random(std::size_t input_dim, std::size_t hidden_dim, std::size_t outputs, std::uint64_t seed,
                            double scale = 1.0);

    bool initialized() const { return !out_w.empty(); }
    std::size_t fan_in_out() const { return hidden_dim ? hidden_dim : input_dim; }
    std::size_t parameter_count() const;
    // Flat view order: hidden_w, hidden_b, out_w, out_b.
    double& parameter(std::size_t i);
    double parameter(std::size_t i) const;
    // Throws Error when weight shapes disagree with the dimensions.
    void check() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 8;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double init_scale = 1.0;  // 0 = zero initialization
    double min_delta = 0.0;   // required validation improvement

    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// One training example: targets in [0,1] and a per-output mask.
struct Sample {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<std::uint8_t> mask;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;

    friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

enum class StopReason { Patience, MaxEpochs };

struct TrainingLog {
    std::vector<EpochLog> epochs;
    std::size_t best_epoch = 0;
    StopReason stop = StopReason::MaxEpochs;

    friend bool operator==(const TrainingLog&, const TrainingLog&) = default;
};

struct TrainResult {
    ModelSpec model;
    TrainingLog log;
};

// -(y ln p + (1 - y) ln(1 - p)) with p clamped to [1e-7, 1 - 1e-7].
double soft_bce(double p, double y);
// d soft_bce / dp = (p - y) / (p (1 - p)), at the clamped p.
double soft_bce_derivative(double p, double y);

double sigmoid(double z);

std::vector<std::vector<double>> predict(const ModelSpec& model, std::span<const std::vector<double>> inputs);

// Mean over samples with at least one masked-in output of the mean masked
// soft-BCE. Samples with an all-false mask are ignored.
double mean_loss(const ModelSpec& model, std::span<const Sample> batch);
// Same loss, plus its gradient in the model's flat parameter order.
double loss_and_gradient(const ModelSpec& model, std::span<const Sample> batch, std::vector<double>& grad);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_parameter = 0;
    bool passed = false;
};

// Analytic gradient vs central differences over every weight. Relative error
// is |a - n| / max(|a|, |n|, 1e-4).
GradCheckResult grad_check(const ModelSpec& model, std::span<const Sample> batch, double tolerance, double step = 1e-5);

// Generic loop. An uninitialized model is initialized from cfg.seed. With an
// empty validation set the training loss is monitored instead.
TrainResult train_samples(ModelSpec model, std::span<const Sample> train, std::span<const Sample> val,
                          const TrainConfig& cfg);

// Samples for the model's output layout. Entries without a usable target for
// that layout are skipped; a missing embedding throws Error listing the ids.
std::vector<Sample> samples_from(std::size_t outputs, const std::vector<const FusedEntry*>& entries);

// Trains on entries outside `fold`, early-stops on entries inside it.
TrainResult train(const FusedDataset& dataset, const std::vector<FoldAssignment>& folds, int fold, ModelSpec model,
                  const TrainConfig& cfg);

void write_model_json(std::ostream& out, const ModelSpec& model, const TrainConfig& cfg);
ModelSpec read_model_json(std::istream& in);
// epoch,train_loss,val_loss
void write_training_log_csv(std::ostream& out, const TrainingLog& log);

}  // namespace raterfuse
