#include "raterfuse/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "raterfuse/csv.hpp"
#include "raterfuse/errors.hpp"

namespace raterfuse {

using nlohmann::json;

namespace {

std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<FeatureValue> parse_feature_cell(std::string_view s) {
    s = trim(s);
    if (s.empty()) return FeatureValue::Missing;
    if (s == "1") return FeatureValue::Present;
    if (s == "0") return FeatureValue::Absent;
    return std::nullopt;
}

std::string feature_cell(FeatureValue v) {
    switch (v) {
        case FeatureValue::Present: return "1";
        case FeatureValue::Absent: return "0";
        case FeatureValue::Missing: return "";
    }
    return "";
}

json feature_json(const FeatureVector& fv) {
    json arr = json::array();
    for (auto v : fv) {
        if (v == FeatureValue::Missing)
            arr.push_back(nullptr);
        else
            arr.push_back(v == FeatureValue::Present ? 1 : 0);
    }
    return arr;
}

void check_embedding_dims(std::span<const AnnotationRecord> records) {
    std::optional<std::size_t> dim;
    for (const auto& r : records) {
        if (!r.embedding) continue;
        if (!dim) dim = r.embedding->size();
        if (r.embedding->size() != *dim)
            throw ValidationError(fmt::format("image {}: embedding has dimension {}, dataset uses {}", r.image_id,
                                              r.embedding->size(), *dim));
    }
}

void check_unique_ids(std::span<const AnnotationRecord> records) {
    std::set<std::string> seen;
    std::set<std::string> dups;
    for (const auto& r : records)
        if (!seen.insert(r.image_id).second) dups.insert(r.image_id);
    if (!dups.empty()) {
        std::string list;
        for (const auto& d : dups) list += (list.empty() ? "" : ", ") + d;
        throw ValidationError("duplicate image_id: " + list);
    }
}

// ---- CSV ----

struct CsvLayout {
    std::size_t n_columns = 0;
    std::size_t image_id = 0;
    std::optional<std::size_t> verdict[3];
    std::optional<std::size_t> final_label;
    std::array<std::optional<std::array<std::size_t, kNumFeatures>>, kNumGraders> features;
    std::vector<std::size_t> embedding;
    std::vector<std::string> names;
};

CsvLayout read_layout(const std::vector<std::string>& header) {
    CsvLayout layout;
    layout.n_columns = header.size();
    layout.names = header;
    std::optional<std::size_t> id_col;
    std::array<std::map<int, std::size_t>, kNumGraders> feat_cols;
    std::map<int, std::size_t> emb_cols;

    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string name(trim(header[c]));
        auto index_after = [&](std::string_view prefix) -> std::optional<int> {
            if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
            int idx = 0;
            const char* b = name.data() + prefix.size();
            const char* e = name.data() + name.size();
            auto [p, ec] = std::from_chars(b, e, idx);
            if (ec != std::errc() || p != e) return std::nullopt;
            return idx;
        };
        if (name == "image_id") {
            id_col = c;
        } else if (name == "g1" || name == "g2" || name == "g3") {
            layout.verdict[name[1] - '1'] = c;
        } else if (name == "final") {
            layout.final_label = c;
        } else if (auto e = index_after("emb_")) {
            if (!emb_cols.emplace(*e, c).second)
                throw ParseError("duplicate embedding column " + name, 1, name);
        } else {
            for (std::size_t k = 0; k < kNumGraders; ++k) {
                if (auto f = index_after(fmt::format("g{}_f", k + 1))) {
                    if (!feat_cols[k].emplace(*f, c).second)
                        throw ParseError("duplicate feature column " + name, 1, name);
                }
            }
        }
    }
    if (!id_col) throw ParseError("header lacks image_id column", 1, "image_id");
    layout.image_id = *id_col;
    for (const char* req : {"g1", "g2"}) {
        if (!layout.verdict[req[1] - '1']) throw ParseError(fmt::format("header lacks {} column", req), 1, req);
    }

    for (std::size_t k = 0; k < kNumGraders; ++k) {
        if (feat_cols[k].empty()) continue;
        std::array<std::size_t, kNumFeatures> cols{};
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            auto it = feat_cols[k].find(static_cast<int>(i + 1));
            if (it == feat_cols[k].end())
                throw ParseError(fmt::format("feature vector for g{} has {} columns, expected {}: g{}_f{} missing",
                                             k + 1, feat_cols[k].size(), kNumFeatures, k + 1, i + 1),
                                 1, fmt::format("g{}_f{}", k + 1, i + 1));
            cols[i] = it->second;
        }
        if (feat_cols[k].size() != kNumFeatures) {
            const auto extra = std::find_if(feat_cols[k].begin(), feat_cols[k].end(),
                                            [](const auto& kv) { return kv.first < 1 || kv.first > static_cast<int>(kNumFeatures); });
            const std::string col = fmt::format("g{}_f{}", k + 1, extra->first);
            throw ParseError(fmt::format("feature vector for g{} has {} columns, expected {}: unexpected {}", k + 1,
                                         feat_cols[k].size(), kNumFeatures, col),
                             1, col);
        }
        layout.features[k] = cols;
    }
    int expect = 0;
    for (const auto& [idx, col] : emb_cols) {
        if (idx != expect) throw ParseError(fmt::format("embedding column emb_{} missing", expect), 1, fmt::format("emb_{}", expect));
        layout.embedding.push_back(col);
        ++expect;
    }
    return layout;
}

AnnotationRecord parse_csv_row(const CsvLayout& layout, const std::vector<std::string>& cells, std::size_t line_no) {
    if (cells.size() != layout.n_columns) {
        const std::string col = cells.size() < layout.n_columns ? layout.names[cells.size()] : std::string();
        throw ParseError(fmt::format("line {}: expected {} fields, found {}", line_no, layout.n_columns, cells.size()),
                         line_no, col);
    }
    auto fail = [&](std::size_t col, std::string_view what) {
        throw ParseError(fmt::format("line {}, column {}: {} '{}'", line_no, layout.names[col], what, cells[col]),
                         line_no, layout.names[col]);
    };

    AnnotationRecord r;
    r.image_id = std::string(trim(cells[layout.image_id]));
    for (std::size_t k = 0; k < kNumGraders; ++k) {
        GraderLabel g = GraderLabel::Missing;
        if (layout.verdict[k]) {
            auto parsed = parse_grader_label(cells[*layout.verdict[k]]);
            if (!parsed) fail(*layout.verdict[k], "invalid verdict");
            g = *parsed;
        }
        (k == 0 ? r.g1 : k == 1 ? r.g2 : r.g3) = g;
    }
    if (layout.final_label) {
        auto parsed = parse_final_label(cells[*layout.final_label]);
        if (!parsed) fail(*layout.final_label, "invalid final label");
        r.final_label = *parsed;
    }
    for (std::size_t k = 0; k < kNumGraders; ++k) {
        if (!layout.features[k]) continue;
        FeatureVector fv{};
        bool any = false;
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            const std::size_t col = (*layout.features[k])[i];
            auto v = parse_feature_cell(cells[col]);
            if (!v) fail(col, "invalid feature value");
            fv[i] = *v;
            any = any || *v != FeatureValue::Missing;
        }
        if (any) r.features[k] = fv;
    }
    if (!layout.embedding.empty()) {
        std::vector<double> emb;
        std::size_t empty = 0;
        for (std::size_t col : layout.embedding) {
            if (trim(cells[col]).empty()) {
                ++empty;
                continue;
            }
            auto v = parse_double(cells[col]);
            if (!v) fail(col, "invalid number");
            emb.push_back(*v);
        }
        if (empty != 0 && empty != layout.embedding.size())
            throw ParseError(fmt::format("line {}: embedding partially empty", line_no), line_no, "emb_*");
        if (empty == 0) r.embedding = std::move(emb);
    }
    return r;
}

std::vector<AnnotationRecord> parse_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::optional<CsvLayout> layout;
    std::vector<AnnotationRecord> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = csv::split_line(line, line_no);
        if (!layout) {
            layout = read_layout(cells);
            continue;
        }
        out.push_back(parse_csv_row(*layout, cells, line_no));
    }
    if (!layout) throw ParseError("CSV input has no header row", 1, "");
    return out;
}

// ---- JSONL ----

GraderLabel json_verdict(const json& obj, const char* key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return GraderLabel::Missing;
    if (!it->is_string()) throw ParseError(fmt::format("line {}: {} must be a string", line_no, key), line_no, key);
    auto g = parse_grader_label(it->get<std::string>());
    if (!g) throw ParseError(fmt::format("line {}: invalid verdict '{}' in {}", line_no, it->get<std::string>(), key),
                             line_no, key);
    return *g;
}

std::optional<FeatureVector> json_features(const json& obj, const std::string& key, std::size_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_array())
        throw ParseError(fmt::format("line {}: {} must be an array", line_no, key), line_no, key);
    if (it->size() != kNumFeatures)
        throw ParseError(fmt::format("line {}: {} has length {}, expected {}", line_no, key, it->size(), kNumFeatures),
                         line_no, key);
    FeatureVector fv{};
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const json& v = (*it)[i];
        if (v.is_null())
            fv[i] = FeatureValue::Missing;
        else if (v.is_boolean())
            fv[i] = v.get<bool>() ? FeatureValue::Present : FeatureValue::Absent;
        else if (v.is_number_integer() && (v.get<long long>() == 0 || v.get<long long>() == 1))
            fv[i] = v.get<long long>() == 1 ? FeatureValue::Present : FeatureValue::Absent;
        else
            throw ParseError(fmt::format("line {}: {}[{}] must be 0, 1 or null", line_no, key, i), line_no, key);
    }
    return fv;
}

AnnotationRecord parse_json_line(const std::string& line, std::size_t line_no) {
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(fmt::format("line {}: invalid JSON: {}", line_no, e.what()), line_no, "");
    }
    if (!obj.is_object()) throw ParseError(fmt::format("line {}: expected a JSON object", line_no), line_no, "");

    AnnotationRecord r;
    auto id = obj.find("image_id");
    if (id == obj.end() || !id->is_string())
        throw ParseError(fmt::format("line {}: image_id missing or not a string", line_no), line_no, "image_id");
    r.image_id = id->get<std::string>();
    r.g1 = json_verdict(obj, "g1", line_no);
    r.g2 = json_verdict(obj, "g2", line_no);
    r.g3 = json_verdict(obj, "g3", line_no);
    if (auto f = obj.find("final"); f != obj.end() && !f->is_null()) {
        std::optional<FinalLabel> parsed;
        if (f->is_string()) parsed = parse_final_label(f->get<std::string>());
        if (!parsed) throw ParseError(fmt::format("line {}: invalid final label", line_no), line_no, "final");
        r.final_label = *parsed;
    }
    for (std::size_t k = 0; k < kNumGraders; ++k)
        r.features[k] = json_features(obj, fmt::format("g{}_features", k + 1), line_no);
    if (auto e = obj.find("embedding"); e != obj.end() && !e->is_null()) {
        if (!e->is_array()) throw ParseError(fmt::format("line {}: embedding must be an array", line_no), line_no, "embedding");
        std::vector<double> emb;
        emb.reserve(e->size());
        for (const auto& v : *e) {
            if (!v.is_number())
                throw ParseError(fmt::format("line {}: embedding entries must be numbers", line_no), line_no, "embedding");
            emb.push_back(v.get<double>());
        }
        r.embedding = std::move(emb);
    }
    return r;
}

std::vector<AnnotationRecord> parse_jsonl(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<AnnotationRecord> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        out.push_back(parse_json_line(line, line_no));
    }
    return out;
}

}  // namespace

std::string_view to_string(GraderLabel g) {
    switch (g) {
        case GraderLabel::RG: return "RG";
        case GraderLabel::NRG: return "NRG";
        case GraderLabel::U: return "U";
        case GraderLabel::Missing: return "Missing";
    }
    return "?";
}

std::string_view to_string(FinalLabel f) {
    switch (f) {
        case FinalLabel::RG: return "RG";
        case FinalLabel::NRG: return "NRG";
        case FinalLabel::Unresolved: return "Unresolved";
    }
    return "?";
}

std::string_view to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::FeaturesWithoutRg: return "features_without_rg";
        case ViolationKind::NoUsableVerdict: return "no_usable_verdict";
        case ViolationKind::FinalContradictsAgreement: return "final_contradicts_agreement";
        case ViolationKind::FinalContradictsAdjudication: return "final_contradicts_adjudication";
        case ViolationKind::EmptyImageId: return "empty_image_id";
        case ViolationKind::EmbeddingDimension: return "embedding_dimension";
        case ViolationKind::DuplicateImageId: return "duplicate_image_id";
    }
    return "?";
}

std::optional<GraderLabel> parse_grader_label(std::string_view s) {
    const std::string u = upper(trim(s));
    if (u.empty() || u == "NAN" || u == "MISSING") return GraderLabel::Missing;
    if (u == "RG") return GraderLabel::RG;
    if (u == "NRG") return GraderLabel::NRG;
    if (u == "U") return GraderLabel::U;
    return std::nullopt;
}

std::optional<FinalLabel> parse_final_label(std::string_view s) {
    const std::string u = upper(trim(s));
    if (u.empty() || u == "UNRESOLVED" || u == "NAN") return FinalLabel::Unresolved;
    if (u == "RG") return FinalLabel::RG;
    if (u == "NRG") return FinalLabel::NRG;
    return std::nullopt;
}

std::vector<AnnotationRecord> parse_records(std::istream& in, RecordFormat format) {
    auto records = format == RecordFormat::CSV ? parse_csv(in) : parse_jsonl(in);
    check_unique_ids(records);
    check_embedding_dims(records);
    return records;
}

std::vector<AnnotationRecord> read_records_file(const std::string& path, RecordFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_records(in, format);
}

void write_records(std::ostream& out, std::span<const AnnotationRecord> records, RecordFormat format) {
    if (format == RecordFormat::JSONL) {
        for (const auto& r : records) {
            json obj;
            obj["image_id"] = r.image_id;
            for (std::size_t k = 0; k < kNumGraders; ++k) {
                const auto key = fmt::format("g{}", k + 1);
                if (r.grader(k) == GraderLabel::Missing)
                    obj[key] = nullptr;
                else
                    obj[key] = std::string(to_string(r.grader(k)));
            }
            if (r.final_label == FinalLabel::Unresolved)
                obj["final"] = nullptr;
            else
                obj["final"] = std::string(to_string(r.final_label));
            for (std::size_t k = 0; k < kNumGraders; ++k)
                if (r.features[k]) obj[fmt::format("g{}_features", k + 1)] = feature_json(*r.features[k]);
            if (r.embedding) obj["embedding"] = *r.embedding;
            out << obj.dump() << '\n';
        }
        return;
    }

    std::size_t dim = 0;
    for (const auto& r : records)
        if (r.embedding) dim = std::max(dim, r.embedding->size());
    std::vector<std::string> header = {"image_id", "g1", "g2", "g3", "final"};
    for (std::size_t k = 0; k < kNumGraders; ++k)
        for (std::size_t i = 0; i < kNumFeatures; ++i) header.push_back(fmt::format("g{}_f{}", k + 1, i + 1));
    for (std::size_t d = 0; d < dim; ++d) header.push_back(fmt::format("emb_{}", d));
    out << csv::join(header) << '\n';

    for (const auto& r : records) {
        std::vector<std::string> row;
        row.reserve(header.size());
        row.push_back(r.image_id);
        for (std::size_t k = 0; k < kNumGraders; ++k)
            row.emplace_back(r.grader(k) == GraderLabel::Missing ? "" : std::string(to_string(r.grader(k))));
        row.emplace_back(r.final_label == FinalLabel::Unresolved ? "" : std::string(to_string(r.final_label)));
        for (std::size_t k = 0; k < kNumGraders; ++k)
            for (std::size_t i = 0; i < kNumFeatures; ++i)
                row.push_back(r.features[k] ? feature_cell((*r.features[k])[i]) : "");
        for (std::size_t d = 0; d < dim; ++d)
            row.push_back(r.embedding && d < r.embedding->size() ? csv::format_double((*r.embedding)[d]) : "");
        out << csv::join(row) << '\n';
    }
}

std::vector<Violation> validate_record(const AnnotationRecord& r) {
    std::vector<Violation> out;
    if (r.image_id.empty()) out.push_back({ViolationKind::EmptyImageId, "empty image_id"});
    for (std::size_t k = 0; k < kNumGraders; ++k) {
        if (r.features[k] && r.grader(k) != GraderLabel::RG)
            out.push_back({ViolationKind::FeaturesWithoutRg, fmt::format("features without RG verdict (g{})", k + 1)});
    }
    if (r.g1 == GraderLabel::Missing && r.g2 == GraderLabel::Missing)
        out.push_back({ViolationKind::NoUsableVerdict, "no usable grader verdict"});

    auto as_final = [](GraderLabel g) { return g == GraderLabel::RG ? FinalLabel::RG : FinalLabel::NRG; };
    const bool agreement = r.g1 == r.g2 && is_gradable(r.g1);
    if (r.final_label != FinalLabel::Unresolved) {
        if (agreement && r.final_label != as_final(r.g1))
            out.push_back({ViolationKind::FinalContradictsAgreement, "final label contradicts grader agreement"});
        if (!agreement && is_gradable(r.g3) && r.final_label != as_final(r.g3))
            out.push_back({ViolationKind::FinalContradictsAdjudication, "final label contradicts adjudication"});
    }
    return out;
}

std::vector<std::pair<std::string, Violation>> validate_dataset(std::span<const AnnotationRecord> records) {
    std::vector<std::pair<std::string, Violation>> out;
    std::set<std::string> seen;
    std::optional<std::size_t> dim;
    for (const auto& r : records) {
        for (auto& v : validate_record(r)) out.emplace_back(r.image_id, std::move(v));
        if (!seen.insert(r.image_id).second)
            out.emplace_back(r.image_id, Violation{ViolationKind::DuplicateImageId, "duplicate image_id"});
        if (r.embedding) {
            if (!dim) dim = r.embedding->size();
            if (*dim != r.embedding->size())
                out.emplace_back(r.image_id, Violation{ViolationKind::EmbeddingDimension,
                                                       fmt::format("embedding dimension {} != {}", r.embedding->size(), *dim)});
        }
    }
    return out;
}

FeatureMask eval_feature_mask(const AnnotationRecord& r) {
    FeatureMask mask{};
    const FeatureVector agreed = agreed_features(r);
    for (std::size_t i = 0; i < kNumFeatures; ++i) mask[i] = agreed[i] != FeatureValue::Missing;
    return mask;
}

FeatureVector agreed_features(const AnnotationRecord& r) {
    FeatureVector out;
    out.fill(FeatureValue::Missing);
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        bool conflict = false;
        for (const auto& fv : r.features) {
            if (!fv || (*fv)[i] == FeatureValue::Missing) continue;
            if (out[i] == FeatureValue::Missing)
                out[i] = (*fv)[i];
            else if (out[i] != (*fv)[i])
                conflict = true;
        }
        if (conflict) out[i] = FeatureValue::Missing;
    }
    return out;
}

}  // namespace raterfuse
