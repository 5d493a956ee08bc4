#include "raterfuse/fusion.hpp"

#include <ostream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "raterfuse/csv.hpp"
#include "raterfuse/errors.hpp"

namespace raterfuse {

namespace {

using G = GraderLabel;

// The expert never issues an "ungradable" adjudication in the protocol; if
// one shows up in data it carries no decision.
G adjudicator(const AnnotationRecord& r) { return r.g3 == G::U ? G::Missing : r.g3; }

SoftLabel soft(const SoftPair& pair, bool positive, BinaryRule rule) {
    return SoftLabel{pair.pick(positive), rule, false, !pair.symmetric()};
}

SoftLabel hard(bool positive, BinaryRule rule) { return SoftLabel{positive ? 1.0 : 0.0, rule, false, false}; }

SoftLabel excluded(BinaryRule rule) { return SoftLabel{0.0, rule, true, false}; }

void check_pair(const char* name, const SoftPair& p) {
    if (!(p.lo > 0.0 && p.lo < 0.5 && p.hi > 0.5 && p.hi < 1.0))
        throw ConfigError(name, fmt::format("expected 0 < lo < 0.5 < hi < 1, got ({}, {})", p.lo, p.hi));
}

void require_structurally_valid(const AnnotationRecord& r) {
    for (std::size_t k = 0; k < kNumGraders; ++k) {
        if (r.features[k] && r.grader(k) != G::RG)
            throw ValidationError(fmt::format("image {}: features without RG verdict (g{})", r.image_id, k + 1));
    }
}

std::string exclusion_reason(const AnnotationRecord& r, const SoftLabel& label) {
    if (label.rule == BinaryRule::R0) return "ungradable/unannotated";
    if (label.rule == BinaryRule::R5) return "unadjudicated disagreement";
    // Final/LS without a decision.
    if (!is_gradable(r.g1) && !is_gradable(r.g2)) return "ungradable/unannotated";
    return "unadjudicated disagreement";
}

struct FeatureBuilder {
    FeatureSoftLabels out;

    FeatureBuilder() {
        out.values.fill(0.0);
        out.train_mask.fill(false);
        out.rules.fill(FeatureRule::Masked);
    }
    void set(std::size_t i, double v, FeatureRule rule) {
        out.values[i] = v;
        out.train_mask[i] = true;
        out.rules[i] = rule;
    }
};

FeatureValue entry(const std::optional<FeatureVector>& fv, std::size_t i) {
    return fv ? (*fv)[i] : FeatureValue::Missing;
}

double as_hard(FeatureValue v) { return v == FeatureValue::Present ? 1.0 : 0.0; }

// Two sets of annotations, a and b. Agreement is hard; disagreement is
// resolved by on_disagree(value of b). A single available entry is hard.
template <typename OnDisagree>
FeatureSoftLabels fuse_two_sets(const std::optional<FeatureVector>& a, const std::optional<FeatureVector>& b,
                                FeatureRule agree_rule, FeatureRule disagree_rule, OnDisagree on_disagree) {
    FeatureBuilder fb;
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const FeatureValue va = entry(a, i);
        const FeatureValue vb = entry(b, i);
        const bool has_a = va != FeatureValue::Missing;
        const bool has_b = vb != FeatureValue::Missing;
        if (has_a && has_b) {
            if (va == vb)
                fb.set(i, as_hard(va), agree_rule);
            else
                fb.set(i, on_disagree(vb), disagree_rule);
        } else if (has_a || has_b) {
            fb.set(i, as_hard(has_a ? va : vb), FeatureRule::SingleSet);
        }
    }
    return fb.out;
}

FeatureSoftLabels fuse_single_set(const std::optional<FeatureVector>& v) {
    FeatureBuilder fb;
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const FeatureValue x = entry(v, i);
        if (x != FeatureValue::Missing) fb.set(i, as_hard(x), FeatureRule::SingleSet);
    }
    return fb.out;
}

}  // namespace

void SmoothingConfig::validate() const {
    check_pair("ungradable_soft", ungradable_soft);
    check_pair("adjudicated_soft", adjudicated_soft);
    check_pair("missing_grader_soft", missing_grader_soft);
    check_pair("feature_favor_g3", feature_favor_g3);
    check_pair("uniform_ls", uniform_ls);
    if (!(feature_overruled_present > 0.0 && feature_overruled_present < 0.5))
        throw ConfigError("feature_overruled_present", fmt::format("expected value in (0, 0.5), got {}", feature_overruled_present));
    if (!(feature_peer_disagree > 0.0 && feature_peer_disagree < 1.0))
        throw ConfigError("feature_peer_disagree", fmt::format("expected value in (0, 1), got {}", feature_peer_disagree));
}

std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::Final: return "Final";
        case Scheme::LS: return "LS";
        case Scheme::DCLS: return "DC-LS";
    }
    return "?";
}

std::optional<Scheme> parse_scheme(std::string_view s) {
    if (s == "final" || s == "Final") return Scheme::Final;
    if (s == "ls" || s == "LS") return Scheme::LS;
    if (s == "dcls" || s == "DCLS" || s == "DC-LS" || s == "dc-ls") return Scheme::DCLS;
    return std::nullopt;
}

std::string_view to_string(BinaryRule r) {
    switch (r) {
        case BinaryRule::R0: return "R0";
        case BinaryRule::R1: return "R1";
        case BinaryRule::R2: return "R2";
        case BinaryRule::R2u: return "R2u";
        case BinaryRule::R3: return "R3";
        case BinaryRule::R3b: return "R3b";
        case BinaryRule::R4: return "R4";
        case BinaryRule::R5: return "R5";
        case BinaryRule::FinalAgreement: return "final-agreement";
        case BinaryRule::FinalAdjudicated: return "final-adjudicated";
        case BinaryRule::FinalUndecided: return "final-undecided";
    }
    return "?";
}

std::string_view to_string(FeatureRule r) {
    switch (r) {
        case FeatureRule::F1Agree: return "F1-agree";
        case FeatureRule::F1Disagree: return "F1-disagree";
        case FeatureRule::F2Agree: return "F2-agree";
        case FeatureRule::F2FavorG3: return "F2-favor-g3";
        case FeatureRule::F3Overruled: return "F3-overruled";
        case FeatureRule::F3Absent: return "F3-absent";
        case FeatureRule::SingleSet: return "single";
        case FeatureRule::Agreed: return "agreed";
        case FeatureRule::Masked: return "masked";
    }
    return "?";
}

std::optional<bool> final_decision(const AnnotationRecord& r) {
    if (r.g1 == r.g2 && is_gradable(r.g1)) return r.g1 == G::RG;
    const G g3 = adjudicator(r);
    if (is_gradable(g3)) return g3 == G::RG;
    return std::nullopt;
}

SoftLabel fuse_binary_dcls(const AnnotationRecord& r, const SmoothingConfig& cfg) {
    const G g1 = r.g1;
    const G g2 = r.g2;
    const G g3 = adjudicator(r);

    if (!is_gradable(g1) && !is_gradable(g2) && g3 == G::Missing) return excluded(BinaryRule::R0);
    if (g1 == g2 && is_gradable(g1)) return hard(g1 == G::RG, BinaryRule::R1);

    if (g1 == G::U || g2 == G::U) {
        const G other = g1 == G::U ? g2 : g1;
        if (is_gradable(other)) {
            if (g3 == G::Missing || g3 == other) return soft(cfg.ungradable_soft, other == G::RG, BinaryRule::R2);
            return soft(cfg.ungradable_soft, g3 == G::RG, BinaryRule::R2u);
        }
        if (other == G::U) return soft(cfg.ungradable_soft, g3 == G::RG, BinaryRule::R2u);
        // U next to a Missing grader: only the expert decided, handled as R3.
    }

    if (g1 == G::Missing || g2 == G::Missing) {
        const G other = g1 == G::Missing ? g2 : g1;
        if (is_gradable(g3) && other != g3) return soft(cfg.missing_grader_soft, g3 == G::RG, BinaryRule::R3);
        return hard(other == G::RG, BinaryRule::R3b);
    }

    if (is_gradable(g3)) return soft(cfg.adjudicated_soft, g3 == G::RG, BinaryRule::R4);
    return excluded(BinaryRule::R5);
}

SoftLabel fuse_binary_final(const AnnotationRecord& r) {
    const auto decision = final_decision(r);
    if (!decision) return excluded(BinaryRule::FinalUndecided);
    const bool agreement = r.g1 == r.g2 && is_gradable(r.g1);
    return hard(*decision, agreement ? BinaryRule::FinalAgreement : BinaryRule::FinalAdjudicated);
}

SoftLabel fuse_binary_uniform_ls(const AnnotationRecord& r, const SmoothingConfig& cfg) {
    SoftLabel label = fuse_binary_final(r);
    if (label.excluded) return label;
    return SoftLabel{cfg.uniform_ls.pick(label.value == 1.0), label.rule, false, !cfg.uniform_ls.symmetric()};
}

std::optional<FeatureSoftLabels> fuse_features_dcls(const AnnotationRecord& r, const SmoothingConfig& cfg) {
    require_structurally_valid(r);
    const G g3 = adjudicator(r);
    const bool rg1 = r.g1 == G::RG;
    const bool rg2 = r.g2 == G::RG;
    const auto& v1 = r.features[0];
    const auto& v2 = r.features[1];
    const auto& v3 = r.features[2];

    if (rg1 && rg2) {
        return fuse_two_sets(v1, v2, FeatureRule::F1Agree, FeatureRule::F1Disagree,
                             [&](FeatureValue) { return cfg.feature_peer_disagree; });
    }
    if (rg1 != rg2) {
        const auto& vi = rg1 ? v1 : v2;
        const G other = rg1 ? r.g2 : r.g1;
        if (g3 == G::RG) {
            return fuse_two_sets(vi, v3, FeatureRule::F2Agree, FeatureRule::F2FavorG3, [&](FeatureValue expert) {
                return cfg.feature_favor_g3.pick(expert == FeatureValue::Present);
            });
        }
        if (g3 == G::NRG) {
            FeatureBuilder fb;
            for (std::size_t i = 0; i < kNumFeatures; ++i) {
                const FeatureValue x = entry(vi, i);
                if (x == FeatureValue::Present)
                    fb.set(i, cfg.feature_overruled_present, FeatureRule::F3Overruled);
                else if (x == FeatureValue::Absent)
                    fb.set(i, 0.0, FeatureRule::F3Absent);
            }
            return fb.out;
        }
        // No expert: an unadjudicated RG/NRG split has no usable label; an RG
        // next to U or Missing is the only gradable opinion.
        if (other == G::NRG) return std::nullopt;
        return fuse_single_set(vi);
    }
    // Neither peer says RG. Peer agreement on NRG stands over a stray expert RG.
    if (g3 != G::RG || (r.g1 == G::NRG && r.g2 == G::NRG)) return std::nullopt;
    return fuse_single_set(v3);
}

std::optional<FeatureSoftLabels> fuse_features_baseline(const AnnotationRecord& r, Scheme scheme,
                                                        const SmoothingConfig& cfg) {
    require_structurally_valid(r);
    const auto decision = final_decision(r);
    if (!decision || !*decision) return std::nullopt;
    if (!r.features[0] && !r.features[1] && !r.features[2]) return std::nullopt;
    const FeatureVector agreed = agreed_features(r);
    FeatureBuilder fb;
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        if (agreed[i] == FeatureValue::Missing) continue;
        const bool present = agreed[i] == FeatureValue::Present;
        const double v = scheme == Scheme::LS ? cfg.uniform_ls.pick(present) : (present ? 1.0 : 0.0);
        fb.set(i, v, FeatureRule::Agreed);
    }
    return fb.out;
}

FusedDataset fuse_dataset(std::span<const AnnotationRecord> records, Scheme scheme, const SmoothingConfig& cfg) {
    FusedDataset ds;
    ds.scheme = scheme;
    ds.config = cfg;
    std::set<std::string_view> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.image_id).second) throw ValidationError("duplicate image_id: " + r.image_id);
    }
    ds.entries.reserve(records.size());
    for (const auto& r : records) {
        if (r.image_id.empty()) throw ValidationError("record with empty image_id");
        SoftLabel label;
        std::optional<FeatureSoftLabels> features;
        try {
            require_structurally_valid(r);
            switch (scheme) {
                case Scheme::Final: label = fuse_binary_final(r); break;
                case Scheme::LS: label = fuse_binary_uniform_ls(r, cfg); break;
                case Scheme::DCLS: label = fuse_binary_dcls(r, cfg); break;
            }
            if (!label.excluded)
                features = scheme == Scheme::DCLS ? fuse_features_dcls(r, cfg) : fuse_features_baseline(r, scheme, cfg);
        } catch (const ValidationError&) {
            throw;
        } catch (const Error& e) {
            throw ValidationError(fmt::format("image {}: {}", r.image_id, e.what()));
        }
        if (label.excluded) {
            ds.exclusion_log.push_back({r.image_id, exclusion_reason(r, label)});
            continue;
        }
        ds.entries.push_back({r.image_id, label, std::move(features), r.embedding});
    }
    return ds;
}

void write_fused_jsonl(std::ostream& out, const FusedDataset& ds) {
    using nlohmann::ordered_json;
    for (const auto& e : ds.entries) {
        ordered_json obj;
        obj["image_id"] = e.image_id;
        obj["y"] = e.label.value;
        obj["rule"] = std::string(to_string(e.label.rule));
        obj["excluded"] = e.label.excluded;
        if (e.features) {
            ordered_json vals = ordered_json::array(), mask = ordered_json::array(), rules = ordered_json::array();
            for (std::size_t i = 0; i < kNumFeatures; ++i) {
                vals.push_back(e.features->values[i]);
                mask.push_back(e.features->train_mask[i]);
                rules.push_back(std::string(to_string(e.features->rules[i])));
            }
            obj["features"] = std::move(vals);
            obj["feature_mask"] = std::move(mask);
            obj["feature_rules"] = std::move(rules);
        } else {
            obj["features"] = nullptr;
            obj["feature_mask"] = nullptr;
            obj["feature_rules"] = nullptr;
        }
        if (e.label.asymmetric) obj["asymmetric"] = true;
        if (e.embedding) obj["embedding"] = *e.embedding;
        out << obj.dump() << '\n';
    }
}

void write_exclusions_csv(std::ostream& out, const FusedDataset& ds) {
    out << "image_id,reason\n";
    for (const auto& x : ds.exclusion_log) out << csv::escape(x.image_id) << ',' << csv::escape(x.reason) << '\n';
}

}  // namespace raterfuse
