#include "raterfuse/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "raterfuse/errors.hpp"

namespace raterfuse {

namespace {

void check_shape(const ScoredSet& set) {
    if (set.scores.size() != set.labels.size())
        throw Error(fmt::format("scored set: {} scores but {} labels", set.scores.size(), set.labels.size()));
    for (int y : set.labels)
        if (y != 0 && y != 1) throw Error(fmt::format("scored set: label {} is not 0/1", y));
}

std::pair<std::size_t, std::size_t> class_counts(const ScoredSet& set) {
    const auto pos = static_cast<std::size_t>(std::count(set.labels.begin(), set.labels.end(), 1));
    const std::size_t neg = set.labels.size() - pos;
    if (pos == 0 || neg == 0) throw Error("undefined ROC: scored set needs both classes");
    return {pos, neg};
}

}  // namespace

Confusion confusion_at(const ScoredSet& set, double threshold) {
    check_shape(set);
    Confusion c;
    for (std::size_t i = 0; i < set.scores.size(); ++i) {
        const bool predicted = set.scores[i] > threshold;
        if (set.labels[i] == 1)
            ++(predicted ? c.tp : c.fn);
        else
            ++(predicted ? c.fp : c.tn);
    }
    return c;
}

std::vector<OperatingPoint> roc_points(const ScoredSet& set) {
    check_shape(set);
    const auto [n_pos, n_neg] = class_counts(set);
    for (double s : set.scores)
        if (std::isnan(s)) throw Error("scored set contains NaN");

    std::vector<std::size_t> order(set.scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return set.scores[a] > set.scores[b]; });

    const double inf = std::numeric_limits<double>::infinity();
    const auto point = [&](double t, std::size_t tp, std::size_t fp) {
        return OperatingPoint{t, static_cast<double>(tp) / static_cast<double>(n_pos),
                              static_cast<double>(n_neg - fp) / static_cast<double>(n_neg)};
    };

    std::vector<OperatingPoint> points;
    points.push_back(point(inf, 0, 0));
    // At threshold s, everything strictly above s is positive: the counts
    // accumulated before s's tie group.
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = set.scores[order[i]];
        points.push_back(point(s, tp, fp));
        while (i < order.size() && set.scores[order[i]] == s) {
            ++(set.labels[order[i]] == 1 ? tp : fp);
            ++i;
        }
    }
    points.push_back(point(-inf, tp, fp));
    return points;
}

OperatingPoint sens_at_spec(const ScoredSet& set, double spec_target) {
    if (!(spec_target > 0.0 && spec_target < 1.0))
        throw Error(fmt::format("spec_target must lie in (0, 1), got {}", spec_target));
    const auto points = roc_points(set);
    // Points run from high to low threshold; sensitivity never decreases along
    // the way, so the last qualifying point wins (lowest threshold on ties).
    const OperatingPoint* best = nullptr;
    for (const auto& p : points) {
        if (p.specificity < spec_target) continue;
        if (!best || p.sensitivity >= best->sensitivity) best = &p;
    }
    // The +inf point always has specificity 1.
    return *best;
}

HammingResult hamming_loss(std::span<const FeatureScores> pred, std::span<const FeatureVector> truth,
                           std::span<const FeatureMask> mask, double threshold, HammingAverage average) {
    if (pred.size() != truth.size() || pred.size() != mask.size())
        throw Error(fmt::format("hamming_loss: length mismatch (pred {}, truth {}, mask {})", pred.size(), truth.size(),
                                mask.size()));
    std::size_t wrong = 0, counted = 0;
    double macro_sum = 0.0;
    std::size_t macro_samples = 0;
    for (std::size_t s = 0; s < pred.size(); ++s) {
        std::size_t w = 0, c = 0;
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            if (!mask[s][i]) continue;
            if (truth[s][i] == FeatureValue::Missing)
                throw Error(fmt::format("hamming_loss: sample {} feature {} is masked in but has no truth", s, i + 1));
            const bool p = pred[s][i] > threshold;
            const bool t = truth[s][i] == FeatureValue::Present;
            w += p != t ? 1 : 0;
            ++c;
        }
        wrong += w;
        counted += c;
        if (c > 0) {
            macro_sum += static_cast<double>(w) / static_cast<double>(c);
            ++macro_samples;
        }
    }
    HammingResult r;
    r.counted = counted;
    if (counted == 0) {
        r.empty = true;
        return r;
    }
    r.loss = average == HammingAverage::Micro ? static_cast<double>(wrong) / static_cast<double>(counted)
                                              : macro_sum / static_cast<double>(macro_samples);
    return r;
}

}  // namespace raterfuse
