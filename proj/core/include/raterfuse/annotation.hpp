#pragma once
// Annotation domain model: per-image verdicts of two graders plus an
// adjudicating expert, optional glaucomatous-feature vectors, and an optional
// numeric embedding used as a stand-in for image content.
//
// Canonical storage is JSONL. CSV is an adapter with the column map
//   image_id, g1, g2, g3, final, g{1,2,3}_f1..g{1,2,3}_f10, emb_0..emb_{D-1}
// where verdicts are RG / NRG / U / empty (Missing) and feature cells are
// 1 / 0 / empty. A grader whose ten feature cells are all empty has no vector.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace raterfuse {

inline constexpr std::size_t kNumFeatures = 10;
inline constexpr std::size_t kNumGraders = 3;

enum class GraderLabel { RG, NRG, U, Missing };
enum class FeatureValue { Absent, Present, Missing };
enum class FinalLabel { RG, NRG, Unresolved };
enum class RecordFormat { CSV, JSONL };

using FeatureVector = std::array<FeatureValue, kNumFeatures>;
using FeatureMask = std::array<bool, kNumFeatures>;

struct AnnotationRecord {
    std::string image_id;
    GraderLabel g1 = GraderLabel::Missing;
    GraderLabel g2 = GraderLabel::Missing;
    GraderLabel g3 = GraderLabel::Missing;
    FinalLabel final_label = FinalLabel::Unresolved;
    // Index 0..2 for g1..g3.
    std::array<std::optional<FeatureVector>, kNumGraders> features;
    std::optional<std::vector<double>> embedding;

    GraderLabel grader(std::size_t k) const { return k == 0 ? g1 : (k == 1 ? g2 : g3); }

    friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

enum class ViolationKind {
    FeaturesWithoutRg,
    NoUsableVerdict,
    FinalContradictsAgreement,
    FinalContradictsAdjudication,
    EmptyImageId,
    EmbeddingDimension,
    DuplicateImageId,
};

struct Violation {
    ViolationKind kind;
    std::string message;

    friend bool operator==(const Violation&, const Violation&) = default;
};

inline bool is_gradable(GraderLabel g) { return g == GraderLabel::RG || g == GraderLabel::NRG; }

std::string_view to_string(GraderLabel g);
std::string_view to_string(FinalLabel f);
std::string_view to_string(ViolationKind k);
// Accepts RG/NRG/U (case-insensitive); empty, "NaN" and "Missing" map to Missing.
std::optional<GraderLabel> parse_grader_label(std::string_view s);
std::optional<FinalLabel> parse_final_label(std::string_view s);

// Throws ParseError (line + column) on malformed input and ValidationError on
// duplicate image ids or inconsistent embedding dimensions.
std::vector<AnnotationRecord> parse_records(std::istream& in, RecordFormat format);
std::vector<AnnotationRecord> read_records_file(const std::string& path, RecordFormat format);

void write_records(std::ostream& out, std::span<const AnnotationRecord> records, RecordFormat format);

std::vector<Violation> validate_record(const AnnotationRecord& record);
// Per-record checks plus dataset-level ones (unique ids, shared embedding dim).
std::vector<std::pair<std::string, Violation>> validate_dataset(std::span<const AnnotationRecord> records);

// Evaluation mask: feature i is usable iff at least one grader annotated it
// and every non-missing annotation agrees.
FeatureMask eval_feature_mask(const AnnotationRecord& record);
// The agreed value per feature (Missing where the mask is false).
FeatureVector agreed_features(const AnnotationRecord& record);

}  // namespace raterfuse
