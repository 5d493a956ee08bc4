#include "raterfuse/simgen.hpp"

#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "raterfuse/config_file.hpp"
#include "raterfuse/csv.hpp"
#include "raterfuse/errors.hpp"
#include "raterfuse/rng.hpp"

namespace raterfuse {

namespace {

void require_probability(const std::string& field, double v, bool allow_one = true) {
    if (!(v >= 0.0 && (allow_one ? v <= 1.0 : v < 1.0)))
        throw ConfigError(field, fmt::format("expected a probability, got {}", v));
}

void check_skill(const std::string& name, const GraderSkill& s) {
    require_probability(name + "_sensitivity", s.sensitivity);
    require_probability(name + "_specificity", s.specificity);
}

GraderLabel draw_verdict(Rng& rng, const GraderSkill& skill, bool diseased, double ungradable_rate) {
    // Two draws per grader regardless of outcome keep the stream aligned.
    const double u_quality = rng.uniform();
    const double u_call = rng.uniform();
    if (u_quality < ungradable_rate) return GraderLabel::U;
    if (diseased) return u_call < skill.sensitivity ? GraderLabel::RG : GraderLabel::NRG;
    return u_call < skill.specificity ? GraderLabel::NRG : GraderLabel::RG;
}

FeatureVector noisy_report(Rng& rng, const std::array<bool, kNumFeatures>& truth, double noise) {
    FeatureVector fv{};
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        const bool flip = rng.bernoulli(noise);
        fv[i] = (truth[i] != flip) ? FeatureValue::Present : FeatureValue::Absent;
    }
    return fv;
}

GraderLabel& grader_ref(AnnotationRecord& r, std::size_t k) { return k == 0 ? r.g1 : (k == 1 ? r.g2 : r.g3); }

}  // namespace

void PanelConfig::validate() const {
    if (n_images == 0) throw ConfigError("n_images", "must be >= 1");
    if (!(disease_prevalence > 0.0 && disease_prevalence < 1.0))
        throw ConfigError("disease_prevalence", fmt::format("expected a value in (0, 1), got {}", disease_prevalence));
    if (embedding_dim < kNumFeatures + 1)
        throw ConfigError("embedding_dim", fmt::format("must be >= {} (disease + one coordinate per feature)", kNumFeatures + 1));
    if (!(signal_strength >= 0.0)) throw ConfigError("signal_strength", "must be >= 0");
    check_skill("g1", g1);
    check_skill("g2", g2);
    check_skill("g3", g3);
    if (!(g3.sensitivity + g3.specificity > 1.0))
        throw ConfigError("g3_sensitivity", "expert must beat chance (sensitivity + specificity > 1)");
    require_probability("ungradable_rate", ungradable_rate, false);
    if (!(dropout_rate >= 0.0 && dropout_rate < 0.5))
        throw ConfigError("dropout_rate", fmt::format("expected a value in [0, 0.5), got {}", dropout_rate));
    for (double p : feature_prevalence) require_probability("feature_prevalence", p);
    if (!(feature_noise >= 0.0 && feature_noise < 0.5))
        throw ConfigError("feature_noise", fmt::format("expected a value in [0, 0.5), got {}", feature_noise));
}

Panel generate_panel(const PanelConfig& cfg) {
    cfg.validate();
    Rng rng(mix_seed(cfg.seed, 0x5133));
    Panel panel;
    panel.records.reserve(cfg.n_images);
    panel.truth.reserve(cfg.n_images);
    const int width = static_cast<int>(fmt::formatted_size("{}", cfg.n_images));

    for (std::size_t n = 0; n < cfg.n_images; ++n) {
        GroundTruthRow truth;
        truth.image_id = fmt::format("img{:0{}}", n + 1, std::max(width, 5));
        truth.diseased = rng.bernoulli(cfg.disease_prevalence);
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            const bool present = rng.bernoulli(cfg.feature_prevalence[i]);
            truth.features[i] = truth.diseased && present;
        }

        AnnotationRecord r;
        r.image_id = truth.image_id;
        std::vector<double> emb(cfg.embedding_dim);
        for (auto& x : emb) x = rng.normal();
        if (truth.diseased) emb[0] += cfg.signal_strength;
        for (std::size_t i = 0; i < kNumFeatures; ++i)
            if (truth.features[i]) emb[1 + i] += cfg.signal_strength;
        r.embedding = std::move(emb);

        r.g1 = draw_verdict(rng, cfg.g1, truth.diseased, cfg.ungradable_rate);
        r.g2 = draw_verdict(rng, cfg.g2, truth.diseased, cfg.ungradable_rate);
        const double u_drop = rng.uniform();
        if (u_drop < cfg.dropout_rate)
            r.g1 = GraderLabel::Missing;
        else if (u_drop < 2.0 * cfg.dropout_rate)
            r.g2 = GraderLabel::Missing;

        if (r.g1 != r.g2) r.g3 = draw_verdict(rng, cfg.g3, truth.diseased, 0.0);

        if (r.g1 == r.g2 && is_gradable(r.g1))
            r.final_label = r.g1 == GraderLabel::RG ? FinalLabel::RG : FinalLabel::NRG;
        else if (is_gradable(r.g3))
            r.final_label = r.g3 == GraderLabel::RG ? FinalLabel::RG : FinalLabel::NRG;

        for (std::size_t k = 0; k < kNumGraders; ++k)
            if (grader_ref(r, k) == GraderLabel::RG) r.features[k] = noisy_report(rng, truth.features, cfg.feature_noise);

        panel.records.push_back(std::move(r));
        panel.truth.push_back(std::move(truth));
    }
    return panel;
}

PanelSummary summarize(const std::vector<AnnotationRecord>& records) {
    PanelSummary s;
    s.images = records.size();
    for (const auto& r : records) {
        if (is_gradable(r.g1) && is_gradable(r.g2)) ++(r.g1 == r.g2 ? s.agreements : s.disagreements);
        for (GraderLabel g : {r.g1, r.g2}) {
            if (g == GraderLabel::U) ++s.ungradable;
            if (g == GraderLabel::Missing) ++s.missing;
        }
        if (r.g3 != GraderLabel::Missing) ++s.adjudicated;
    }
    return s;
}

std::string format_summary(const PanelSummary& s) {
    return fmt::format("images={} agreements={} disagreements={} ungradable={} missing={} adjudicated={}", s.images,
                       s.agreements, s.disagreements, s.ungradable, s.missing, s.adjudicated);
}

void write_groundtruth_csv(std::ostream& out, const std::vector<GroundTruthRow>& truth) {
    out << "image_id,true_label";
    for (std::size_t i = 0; i < kNumFeatures; ++i) out << ",true_f" << i + 1;
    out << '\n';
    for (const auto& t : truth) {
        out << csv::escape(t.image_id) << ',' << (t.diseased ? 1 : 0);
        for (bool f : t.features) out << ',' << (f ? 1 : 0);
        out << '\n';
    }
}

PanelConfig read_panel_config(std::istream& in) {
    const auto kv = KeyValueConfig::parse(in);
    kv.reject_unknown({"n_images", "disease_prevalence", "embedding_dim", "signal_strength", "g1_sensitivity",
                       "g1_specificity", "g2_sensitivity", "g2_specificity", "g3_sensitivity", "g3_specificity",
                       "ungradable_rate", "dropout_rate", "feature_prevalence", "feature_noise", "seed"});
    PanelConfig cfg;
    if (kv.has("n_images")) cfg.n_images = kv.get_uint("n_images");
    if (kv.has("disease_prevalence")) cfg.disease_prevalence = kv.get_double("disease_prevalence");
    if (kv.has("embedding_dim")) cfg.embedding_dim = kv.get_uint("embedding_dim");
    if (kv.has("signal_strength")) cfg.signal_strength = kv.get_double("signal_strength");
    const std::pair<const char*, GraderSkill*> skills[] = {{"g1", &cfg.g1}, {"g2", &cfg.g2}, {"g3", &cfg.g3}};
    for (const auto& [name, skill] : skills) {
        const std::string sens = std::string(name) + "_sensitivity";
        const std::string spec = std::string(name) + "_specificity";
        if (kv.has(sens)) skill->sensitivity = kv.get_double(sens);
        if (kv.has(spec)) skill->specificity = kv.get_double(spec);
    }
    if (kv.has("ungradable_rate")) cfg.ungradable_rate = kv.get_double("ungradable_rate");
    if (kv.has("dropout_rate")) cfg.dropout_rate = kv.get_double("dropout_rate");
    if (kv.has("feature_prevalence")) {
        const auto v = kv.get_list("feature_prevalence");
        if (v.size() != kNumFeatures)
            throw ConfigError("feature_prevalence", fmt::format("expected {} values, got {}", kNumFeatures, v.size()));
        std::copy(v.begin(), v.end(), cfg.feature_prevalence.begin());
    }
    if (kv.has("feature_noise")) cfg.feature_noise = kv.get_double("feature_noise");
    if (kv.has("seed")) cfg.seed = kv.get_uint("seed");
    cfg.validate();
    return cfg;
}

void write_panel_config(std::ostream& out, const PanelConfig& cfg) {
    auto d = [](double v) { return csv::format_double(v); };
    out << "n_images = " << cfg.n_images << '\n';
    out << "disease_prevalence = " << d(cfg.disease_prevalence) << '\n';
    out << "embedding_dim = " << cfg.embedding_dim << '\n';
    out << "signal_strength = " << d(cfg.signal_strength) << '\n';
    out << "g1_sensitivity = " << d(cfg.g1.sensitivity) << '\n';
    out << "g1_specificity = " << d(cfg.g1.specificity) << '\n';
    out << "g2_sensitivity = " << d(cfg.g2.sensitivity) << '\n';
    out << "g2_specificity = " << d(cfg.g2.specificity) << '\n';
    out << "g3_sensitivity = " << d(cfg.g3.sensitivity) << '\n';
    out << "g3_specificity = " << d(cfg.g3.specificity) << '\n';
    out << "ungradable_rate = " << d(cfg.ungradable_rate) << '\n';
    out << "dropout_rate = " << d(cfg.dropout_rate) << '\n';
    out << "feature_prevalence = ";
    for (std::size_t i = 0; i < kNumFeatures; ++i) out << (i ? ", " : "") << d(cfg.feature_prevalence[i]);
    out << '\n';
    out << "feature_noise = " << d(cfg.feature_noise) << '\n';
    out << "seed = " << cfg.seed << '\n';
}

}  // namespace raterfuse
