#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "raterfuse/annotation.hpp"
#include "raterfuse/fusion.hpp"
#include "raterfuse/rng.hpp"

namespace fixture {

using raterfuse::AnnotationRecord;
using raterfuse::FeatureValue;
using raterfuse::FeatureVector;
using raterfuse::FinalLabel;
using raterfuse::GraderLabel;

inline constexpr GraderLabel kAllVerdicts[] = {GraderLabel::RG, GraderLabel::NRG, GraderLabel::U,
                                               GraderLabel::Missing};

inline FeatureVector features(std::initializer_list<int> bits) {
    FeatureVector v;
    v.fill(FeatureValue::Absent);
    std::size_t i = 0;
    for (int b : bits) v[i++] = b == 1 ? FeatureValue::Present : (b == 0 ? FeatureValue::Absent : FeatureValue::Missing);
    return v;
}

inline FeatureVector random_features(raterfuse::Rng& rng, double missing_rate) {
    FeatureVector v;
    for (auto& f : v) {
        if (rng.bernoulli(missing_rate)) f = FeatureValue::Missing;
        else f = rng.bernoulli(0.5) ? FeatureValue::Present : FeatureValue::Absent;
    }
    return v;
}

inline FinalLabel published_final(const AnnotationRecord& r) {
    const auto d = raterfuse::final_decision(r);
    if (!d) return FinalLabel::Unresolved;
    return *d ? FinalLabel::RG : FinalLabel::NRG;
}

inline AnnotationRecord make(std::string id, GraderLabel g1, GraderLabel g2, GraderLabel g3) {
    AnnotationRecord r;
    r.image_id = std::move(id);
    r.g1 = g1;
    r.g2 = g2;
    r.g3 = g3;
    r.final_label = published_final(r);
    return r;
}

// Any verdict combination (g3 never U); RG graders carry a feature vector
// most of the time.
inline AnnotationRecord random_record(raterfuse::Rng& rng, std::size_t index, std::size_t embedding_dim = 0) {
    AnnotationRecord r;
    r.image_id = fmt::format("r{:06}", index);
    r.g1 = kAllVerdicts[rng.below(4)];
    r.g2 = kAllVerdicts[rng.below(4)];
    r.g3 = kAllVerdicts[rng.below(3) == 2 ? 3 : rng.below(2)];
    for (std::size_t k = 0; k < 3; ++k)
        if (r.grader(k) == GraderLabel::RG && rng.bernoulli(0.9)) r.features[k] = random_features(rng, 0.1);
    r.final_label = published_final(r);
    if (embedding_dim) {
        std::vector<double> e(embedding_dim);
        for (auto& x : e) x = rng.normal();
        r.embedding = std::move(e);
    }
    return r;
}

inline GraderLabel flip(GraderLabel g) {
    if (g == GraderLabel::RG) return GraderLabel::NRG;
    if (g == GraderLabel::NRG) return GraderLabel::RG;
    return g;
}

inline AnnotationRecord swapped(AnnotationRecord r) {
    std::swap(r.g1, r.g2);
    std::swap(r.features[0], r.features[1]);
    return r;
}

}  // namespace fixture
