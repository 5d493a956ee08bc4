#include "raterfuse/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "raterfuse/digest.hpp"
#include "raterfuse/errors.hpp"
#include "raterfuse/folds.hpp"
#include "raterfuse/fusion.hpp"
#include "raterfuse/rng.hpp"
#include "raterfuse/trainer.hpp"

namespace raterfuse {

namespace {

constexpr Scheme kSchemes[] = {Scheme::Final, Scheme::LS, Scheme::DCLS};

struct Reference {
    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;                 // screening
    std::vector<FeatureVector> features;     // feature task
    std::vector<FeatureMask> masks;
};

std::vector<Reference> build_references(const std::vector<AnnotationRecord>& records,
                                        const std::unordered_map<std::string, int>& fold_of, Task task, int k) {
    std::vector<Reference> refs(static_cast<std::size_t>(k));
    for (const auto& r : records) {
        auto it = fold_of.find(r.image_id);
        if (it == fold_of.end()) continue;
        const auto decision = final_decision(r);
        if (!decision) continue;
        if (!r.embedding) throw Error("record without embedding: " + r.image_id);
        Reference& ref = refs[static_cast<std::size_t>(it->second)];
        if (task == Task::Screening) {
            ref.inputs.push_back(*r.embedding);
            ref.labels.push_back(*decision ? 1 : 0);
        } else {
            if (!*decision) continue;
            const FeatureMask mask = eval_feature_mask(r);
            if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) continue;
            ref.inputs.push_back(*r.embedding);
            ref.features.push_back(agreed_features(r));
            ref.masks.push_back(mask);
        }
    }
    return refs;
}

double evaluate(const ModelSpec& model, const Reference& ref, const ExperimentOptions& opt) {
    const auto probs = predict(model, ref.inputs);
    if (opt.task == Task::Screening) {
        ScoredSet set;
        set.labels = ref.labels;
        set.scores.reserve(probs.size());
        for (const auto& p : probs) set.scores.push_back(p[0]);
        return 100.0 * sens_at_spec(set, opt.spec_target).sensitivity;
    }
    const std::size_t offset = model.outputs == kNumFeatures + 1 ? 1 : 0;
    std::vector<FeatureScores> pred(probs.size());
    for (std::size_t s = 0; s < probs.size(); ++s)
        for (std::size_t i = 0; i < kNumFeatures; ++i) pred[s][i] = probs[s][offset + i];
    const auto h = hamming_loss(pred, ref.features, ref.masks, 0.5, opt.hamming_average);
    return h.empty ? std::numeric_limits<double>::quiet_NaN() : h.loss;
}

}  // namespace

std::optional<Task> parse_task(std::string_view s) {
    if (s == "screening") return Task::Screening;
    if (s == "features") return Task::Features;
    return std::nullopt;
}

std::optional<ModelKind> parse_model_kind(std::string_view s) {
    if (s == "linear") return ModelKind::Linear;
    if (s == "mlp") return ModelKind::Mlp;
    return std::nullopt;
}

std::string_view to_string(Task t) { return t == Task::Screening ? "screening" : "features"; }
std::string_view to_string(ModelKind m) { return m == ModelKind::Linear ? "linear" : "mlp"; }

std::string config_digest(const ExperimentOptions& opt) {
    std::ostringstream ss;
    write_toolkit_config(ss, opt.config);
    ss << "task = " << to_string(opt.task) << '\n'
       << "k = " << opt.k << '\n'
       << "model = " << to_string(opt.model) << '\n'
       << "joint = " << (opt.joint ? 1 : 0) << '\n'
       << "hamming_average = " << (opt.hamming_average == HammingAverage::Micro ? "micro" : "macro") << '\n'
       << "spec_target = " << fmt::format("{}", opt.spec_target) << '\n';
    return sha256_hex(ss.str()).substr(0, 16);
}

ExperimentReport run_experiment(const std::vector<AnnotationRecord>& records, const ExperimentOptions& opt,
                                ExperimentArtifacts* artifacts) {
    opt.config.smoothing.validate();
    opt.config.training.validate();
    if (opt.k < 2) throw ConfigError("k", "must be >= 2");

    std::optional<std::size_t> dim;
    for (const auto& r : records)
        if (r.embedding) dim = r.embedding->size();
    if (!dim || *dim == 0) throw Error("experiment: records carry no embeddings");

    // One fold assignment for all schemes, stratified on the binarized DC-LS
    // label; DC-LS keeps a superset of the records the baselines keep.
    const FusedDataset dcls = fuse_dataset(records, Scheme::DCLS, opt.config.smoothing);
    std::vector<StratifiedEntry> strata;
    strata.reserve(dcls.entries.size());
    for (const auto& e : dcls.entries) strata.push_back({e.image_id, e.label.value > 0.5 ? 1 : 0});
    const auto folds = stratified_kfold(strata, opt.k, mix_seed(opt.seed, 0xF01D));
    const auto refs = build_references(records, fold_lookup(folds), opt.task, opt.k);

    const std::size_t outputs = opt.joint ? kNumFeatures + 1 : (opt.task == Task::Screening ? 1 : kNumFeatures);
    const std::size_t hidden = opt.model == ModelKind::Mlp ? opt.config.hidden_dim : 0;

    std::vector<FusedDataset> fused;
    for (Scheme s : kSchemes) fused.push_back(s == Scheme::DCLS ? dcls : fuse_dataset(records, s, opt.config.smoothing));

    ExperimentReport report;
    report.metric = opt.task == Task::Screening ? "sens@95spec" : "hamming";
    report.task = opt.task;
    report.model = opt.model;
    report.k = opt.k;
    report.seed = opt.seed;
    report.config_digest = config_digest(opt);
    report.timestamp = opt.timestamp;
    for (Scheme s : kSchemes) report.schemes.emplace_back(to_string(s));
    report.cells.assign(std::size(kSchemes), std::vector<double>(static_cast<std::size_t>(opt.k), 0.0));

    // Each (scheme, fold) cell is independent and seeded by fold only, so the
    // schemes share initial weights within a fold.
    struct CellResult {
        double value;
        TrainResult trained;
    };
    std::vector<std::future<CellResult>> jobs;
    for (std::size_t s = 0; s < std::size(kSchemes); ++s) {
        for (int f = 0; f < opt.k; ++f) {
            jobs.push_back(std::async(std::launch::async, [&, s, f]() {
                const std::string where = fmt::format("scheme {}, fold {}", to_string(kSchemes[s]), f + 1);
                try {
                    TrainConfig cfg = opt.config.training;
                    cfg.seed = mix_seed(opt.seed, 0x7000 + static_cast<std::uint64_t>(f));
                    ModelSpec model;
                    model.input_dim = *dim;
                    model.hidden_dim = hidden;
                    model.outputs = outputs;
                    auto result = train(fused[s], folds, f, model, cfg);
                    const double v = evaluate(result.model, refs[static_cast<std::size_t>(f)], opt);
                    return CellResult{v, std::move(result)};
                } catch (const Error& e) {
                    throw Error(where + ": " + e.what());
                }
            }));
        }
    }
    if (artifacts) {
        artifacts->folds = folds;
        artifacts->cells.clear();
    }
    std::size_t j = 0;
    for (std::size_t s = 0; s < std::size(kSchemes); ++s) {
        for (int f = 0; f < opt.k; ++f) {
            CellResult cell = jobs[j++].get();
            report.cells[s][static_cast<std::size_t>(f)] = cell.value;
            if (artifacts)
                artifacts->cells.push_back(
                    {std::string(to_string(kSchemes[s])), f, std::move(cell.trained.model), std::move(cell.trained.log)});
        }
    }
    return report;
}

std::string format_cell(const ExperimentReport& report, double v) {
    if (std::isnan(v)) return "n/a";
    return report.task == Task::Screening ? fmt::format("{:.2f}", v) : fmt::format("{:.4f}", v);
}

std::string report_csv(const ExperimentReport& r) {
    std::string out;
    out += fmt::format("# metric={}\n# task={}\n# model={}\n# k={}\n# seed={}\n# config_digest={}\n", r.metric,
                       to_string(r.task), to_string(r.model), r.k, r.seed, r.config_digest);
    if (r.timestamp) out += fmt::format("# timestamp={}\n", *r.timestamp);
    out += "scheme";
    for (int f = 0; f < r.k; ++f) out += fmt::format(",Fold {}", f + 1);
    out += '\n';
    for (std::size_t s = 0; s < r.schemes.size(); ++s) {
        out += r.schemes[s];
        for (double v : r.cells[s]) out += "," + format_cell(r, v);
        out += '\n';
    }
    return out;
}

std::string report_text(const ExperimentReport& r) {
    const std::string title = r.task == Task::Screening ? "Five fold sens@95spec for glaucoma screening"
                                                        : "Five fold Hamming loss for glaucoma feature prediction";
    std::string out = r.k == 5 ? title : fmt::format("{}-fold {}", r.k, title.substr(std::string("Five fold ").size()));
    out += fmt::format(" (model={}, seed={}, config={})\n", to_string(r.model), r.seed, r.config_digest);
    if (r.timestamp) out += fmt::format("generated {}\n", *r.timestamp);

    std::size_t width = 8;
    for (const auto& row : r.cells)
        for (double v : row) width = std::max(width, format_cell(r, v).size() + 2);
    std::size_t label_width = 6;
    for (const auto& s : r.schemes) label_width = std::max(label_width, s.size() + 1);

    out += fmt::format("{:<{}}", "", label_width);
    for (int f = 0; f < r.k; ++f) out += fmt::format("{:>{}}", fmt::format("Fold {}", f + 1), width);
    out += '\n';
    for (std::size_t s = 0; s < r.schemes.size(); ++s) {
        out += fmt::format("{:<{}}", r.schemes[s], label_width);
        for (double v : r.cells[s]) out += fmt::format("{:>{}}", format_cell(r, v), width);
        out += '\n';
    }
    return out;
}

}  // namespace raterfuse
