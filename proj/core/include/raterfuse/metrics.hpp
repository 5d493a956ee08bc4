#pragma once
// Screening metrics. The decision rule everywhere is "positive iff
// score > threshold"; tied scores move together, so every metric depends only
// on the ordering of the scores.

#include <cstddef>
#include <span>
#include <vector>

#include "raterfuse/annotation.hpp"

namespace raterfuse {

struct ScoredSet {
    std::vector<double> scores;  // higher = more RG-like
    std::vector<int> labels;     // 0 / 1
};

struct OperatingPoint {
    double threshold = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;

    friend bool operator==(const OperatingPoint&, const OperatingPoint&) = default;
};

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    friend bool operator==(const Confusion&, const Confusion&) = default;
};

Confusion confusion_at(const ScoredSet& set, double threshold);

// Thresholds +inf, every distinct score (descending), -inf. Throws Error on
// mismatched lengths, labels outside {0,1}, or a single-class set.
std::vector<OperatingPoint> roc_points(const ScoredSet& set);

// Highest sensitivity among points with specificity >= spec_target; ties go
// to the lower threshold. No interpolation between points.
OperatingPoint sens_at_spec(const ScoredSet& set, double spec_target = 0.95);

enum class HammingAverage {
    Micro,  // pooled over all masked-in entries
    Macro,  // mean of per-sample losses over samples with masked-in entries
};

struct HammingResult {
    double loss = 0.0;
    std::size_t counted = 0;  // masked-in entries
    bool empty = false;       // no masked-in entries; loss reported as 0
};

using FeatureScores = std::array<double, kNumFeatures>;

HammingResult hamming_loss(std::span<const FeatureScores> pred, std::span<const FeatureVector> truth,
                           std::span<const FeatureMask> mask, double threshold = 0.5,
                           HammingAverage average = HammingAverage::Micro);

}  // namespace raterfuse
