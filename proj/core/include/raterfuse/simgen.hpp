#pragma once
// Synthetic rater panels with known ground truth. Each image gets a true
// state, true glaucomatous features (healthy images have none), an embedding
// whose coordinate 0 tracks the disease and coordinates 1..10 track the
// features, and a grading history that follows the two-grader protocol:
// independent g1/g2 verdicts, ungradable calls, at most one removed verdict
// per image, and an expert verdict only when g1 and g2 differ.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "raterfuse/annotation.hpp"

namespace raterfuse {

struct GraderSkill {
    double sensitivity = 0.85;
    double specificity = 0.9;
};

struct PanelConfig {
    std::size_t n_images = 2000;
    double disease_prevalence = 0.3;
    std::size_t embedding_dim = 16;
    double signal_strength = 1.5;
    GraderSkill g1{0.85, 0.9};
    GraderSkill g2{0.85, 0.9};
    GraderSkill g3{0.95, 0.97};
    double ungradable_rate = 0.05;
    // Per-verdict probability that g1 or g2 is removed (Missing). At most one
    // verdict per image is removed, so the rate must stay below 0.5.
    double dropout_rate = 0.03;
    std::array<double, kNumFeatures> feature_prevalence{0.6, 0.5, 0.45, 0.4, 0.35, 0.3, 0.3, 0.25, 0.2, 0.15};
    double feature_noise = 0.1;
    std::uint64_t seed = 7;

    // Throws ConfigError naming the offending field.
    void validate() const;
};

struct GroundTruthRow {
    std::string image_id;
    bool diseased = false;
    std::array<bool, kNumFeatures> features{};
};

struct Panel {
    std::vector<AnnotationRecord> records;
    std::vector<GroundTruthRow> truth;
};

struct PanelSummary {
    std::size_t images = 0;
    std::size_t agreements = 0;     // g1 = g2 in {RG, NRG}
    std::size_t disagreements = 0;  // g1, g2 in {RG, NRG}, different
    std::size_t ungradable = 0;     // U verdicts among g1/g2
    std::size_t missing = 0;        // Missing verdicts among g1/g2
    std::size_t adjudicated = 0;    // g3 present
};

Panel generate_panel(const PanelConfig& cfg);

PanelSummary summarize(const std::vector<AnnotationRecord>& records);
std::string format_summary(const PanelSummary& s);

// image_id,true_label,true_f1..true_f10
void write_groundtruth_csv(std::ostream& out, const std::vector<GroundTruthRow>& truth);

// Flat `key = value` files. Keys: n_images, disease_prevalence,
// embedding_dim, signal_strength, g{1,2,3}_sensitivity, g{1,2,3}_specificity,
// ungradable_rate, dropout_rate, feature_prevalence (ten comma-separated
// values), feature_noise, seed.
PanelConfig read_panel_config(std::istream& in);
void write_panel_config(std::ostream& out, const PanelConfig& cfg);

}  // namespace raterfuse
