#pragma once
// Compiles annotation records into training targets under three schemes:
//   Final - hard 0/1 from grader agreement or expert adjudication;
//   LS    - the Final decision mapped onto a fixed soft pair (0.1/0.9);
//   DCLS  - data-centric label smoothing, where the soft value depends on the
//           kind of disagreement and on who disagreed.
//
// Binary DC-LS rules, applied in this order (g3 = U is treated as Missing):
//   R0   g1,g2 in {U, Missing} and g3 Missing        -> excluded
//   R1   g1 = g2 in {RG, NRG}                        -> hard 1 / 0
//   R2   one grader U, the other gradable, g3 Missing or agreeing
//                                                    -> ungradable_soft
//   R2u  a U verdict where only g3 decides (g3 overrules the gradable
//        grader, or both graders are U)             -> ungradable_soft on g3's side
//   R3   a Missing grader, g3 gradable and not confirmed by the other grader
//                                                    -> missing_grader_soft on g3's side
//   R3b  a Missing grader, the other gradable and g3 Missing or agreeing
//                                                    -> hard label of the surviving opinion
//   R4   g1,g2 gradable and different, g3 gradable   -> adjudicated_soft on g3's side
//   R5   g1,g2 gradable and different, g3 Missing    -> excluded
// Exactly one rule fires for each of the 48 (g1, g2, g3) verdict combinations.

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raterfuse/annotation.hpp"

namespace raterfuse {

struct SoftPair {
    double lo = 0.0;
    double hi = 1.0;

    double pick(bool positive) const { return positive ? hi : lo; }
    bool symmetric() const { return hi == 1.0 - lo; }

    friend bool operator==(const SoftPair&, const SoftPair&) = default;
};

struct SmoothingConfig {
    SoftPair ungradable_soft{0.1, 0.9};
    SoftPair adjudicated_soft{0.15, 0.85};
    SoftPair missing_grader_soft{0.2, 0.8};
    SoftPair feature_favor_g3{0.1, 0.9};
    double feature_overruled_present = 0.25;
    double feature_peer_disagree = 0.5;
    SoftPair uniform_ls{0.1, 0.9};

    // Throws ConfigError naming the first out-of-range field.
    void validate() const;

    friend bool operator==(const SmoothingConfig&, const SmoothingConfig&) = default;
};

enum class Scheme { Final, LS, DCLS };

enum class BinaryRule {
    R0, R1, R2, R2u, R3, R3b, R4, R5,
    FinalAgreement, FinalAdjudicated, FinalUndecided,
};

enum class FeatureRule {
    F1Agree,       // peers agree
    F1Disagree,    // peers disagree -> feature_peer_disagree
    F2Agree,       // RG grader and expert agree
    F2FavorG3,     // disagree -> feature_favor_g3 on the expert's side
    F3Overruled,   // expert overruled the RG grader; Present -> feature_overruled_present
    F3Absent,      // expert overruled; Absent stays 0
    SingleSet,     // only one annotation available, taken as hard
    Agreed,        // baseline schemes: agreed value
    Masked,        // unusable for training
};

struct SoftLabel {
    double value = 0.0;
    BinaryRule rule = BinaryRule::R0;
    bool excluded = false;
    // The pair that produced value has hi != 1 - lo.
    bool asymmetric = false;
};

struct FeatureSoftLabels {
    std::array<double, kNumFeatures> values{};
    FeatureMask train_mask{};
    std::array<FeatureRule, kNumFeatures> rules{};
};

struct FusedEntry {
    std::string image_id;
    SoftLabel label;
    std::optional<FeatureSoftLabels> features;
    std::optional<std::vector<double>> embedding;
};

struct Exclusion {
    std::string image_id;
    std::string reason;
};

struct FusedDataset {
    Scheme scheme = Scheme::DCLS;
    SmoothingConfig config;
    std::vector<FusedEntry> entries;
    std::vector<Exclusion> exclusion_log;
};

std::string_view to_string(Scheme s);
std::string_view to_string(BinaryRule r);
std::string_view to_string(FeatureRule r);
std::optional<Scheme> parse_scheme(std::string_view s);

// Hard decision shared by Final and LS: agreement, else a gradable g3.
// nullopt when no final decision exists.
std::optional<bool> final_decision(const AnnotationRecord& record);

SoftLabel fuse_binary_dcls(const AnnotationRecord& record, const SmoothingConfig& config);
SoftLabel fuse_binary_final(const AnnotationRecord& record);
SoftLabel fuse_binary_uniform_ls(const AnnotationRecord& record, const SmoothingConfig& config);

// nullopt when the record contributes nothing to the feature task. Throws
// ValidationError for feature vectors attached to a non-RG verdict.
std::optional<FeatureSoftLabels> fuse_features_dcls(const AnnotationRecord& record, const SmoothingConfig& config);
// Baselines: only agreed features (the evaluation mask), hard or uniform_ls.
std::optional<FeatureSoftLabels> fuse_features_baseline(const AnnotationRecord& record, Scheme scheme,
                                                        const SmoothingConfig& config);

// Deterministic, preserves input order. Throws ValidationError (with the
// image id) on duplicate ids or structurally invalid records.
FusedDataset fuse_dataset(std::span<const AnnotationRecord> records, Scheme scheme, const SmoothingConfig& config);

// {image_id, y, rule, excluded, features, feature_mask, feature_rules[, asymmetric][, embedding]}
void write_fused_jsonl(std::ostream& out, const FusedDataset& dataset);
// image_id,reason
void write_exclusions_csv(std::ostream& out, const FusedDataset& dataset);

}  // namespace raterfuse
