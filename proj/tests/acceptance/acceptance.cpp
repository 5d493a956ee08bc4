// Acceptance checks, one line per criterion. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cli.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "raterfuse/csv.hpp"
#include "raterfuse/experiment.hpp"
#include "raterfuse/fusion.hpp"
#include "raterfuse/metrics.hpp"
#include "raterfuse/rng.hpp"
#include "raterfuse/simgen.hpp"
#include "raterfuse/trainer.hpp"

#ifndef RATERFUSE_TEST_DATA_DIR
#define RATERFUSE_TEST_DATA_DIR "tests/data"
#endif

using namespace raterfuse;
namespace fs = std::filesystem;
using G = GraderLabel;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

G verdict_from(const std::string& s) {
    if (s == "Missing") return G::Missing;
    return *parse_grader_label(s);
}

// 1. Binary rule engine against the committed table.
Outcome truth_table() {
    const auto t0 = Clock::now();
    std::ifstream in(std::string(RATERFUSE_TEST_DATA_DIR) + "/dcls_binary_truth_table.csv");
    if (!in) return {false, "truth table file not found"};
    std::string line;
    std::getline(in, line);
    std::size_t rows = 0, matches = 0;
    std::set<std::tuple<G, G, G>> seen;
    std::string first_mismatch;
    const SmoothingConfig cfg;
    for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
        if (line.empty()) continue;
        const auto f = csv::split_line(line, line_no);
        const G g1 = verdict_from(f[0]), g2 = verdict_from(f[1]), g3 = verdict_from(f[2]);
        seen.insert({g1, g2, g3});
        ++rows;
        const auto got = fuse_binary_dcls(fixture::make("t", g1, g2, g3), cfg);
        bool ok = to_string(got.rule) == f[3] && got.excluded == (f[4] == "1");
        if (ok && !got.excluded) ok = got.value == std::stod(f[5]);
        if (ok) ++matches;
        else if (first_mismatch.empty())
            first_mismatch = fmt::format(" first mismatch {}: got {} {} {}", line, to_string(got.rule), got.excluded,
                                         got.value);
    }
    const double secs = seconds_since(t0);
    const bool pass = rows == 48 && seen.size() == 48 && matches == 48 && secs < 1.0;
    return {pass, fmt::format("{}/{} combinations match, {:.3f}s{}", matches, rows, secs, first_mismatch)};
}

// 2. Feature rules, every per-feature value pair in every branch.
double expected_feature(const std::string& branch, bool a, bool b) {
    if (branch == "F1") return a == b ? (a ? 1.0 : 0.0) : 0.5;
    if (branch == "F2") return a == b ? (a ? 1.0 : 0.0) : (b ? 0.9 : 0.1);  // b is the expert's entry
    return a ? 0.25 : 0.0;                                                   // F3: single overruled vector
}

Outcome feature_rules() {
    const SmoothingConfig cfg;
    std::size_t checked = 0, wrong = 0;
    std::string first;
    std::set<std::pair<std::string, int>> combos_seen;
    auto check = [&](const std::string& branch, AnnotationRecord r, std::array<bool, 10> a, std::array<bool, 10> b) {
        const auto got = fuse_features_dcls(r, cfg);
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            ++checked;
            combos_seen.insert({branch, a[i] * 2 + b[i]});
            const double want = expected_feature(branch, a[i], b[i]);
            if (!got || !got->train_mask[i] || got->values[i] != want) {
                ++wrong;
                if (first.empty())
                    first = fmt::format(" first mismatch {} {} feature {}: want {} got {}", branch, r.image_id, i + 1,
                                        want, got ? got->values[i] : -1.0);
            }
        }
    };
    auto vec = [](const std::array<bool, 10>& bits) {
        FeatureVector v;
        for (std::size_t i = 0; i < kNumFeatures; ++i) v[i] = bits[i] ? FeatureValue::Present : FeatureValue::Absent;
        return v;
    };
    for (int offset = 0; offset < 4; ++offset) {
        std::array<bool, 10> a{}, b{};
        for (std::size_t i = 0; i < kNumFeatures; ++i) {
            const int combo = static_cast<int>((i + static_cast<std::size_t>(offset)) % 4);
            a[i] = combo & 2;
            b[i] = combo & 1;
        }
        // F1: two peer vectors.
        {
            auto r = fixture::make("F1", G::RG, G::RG, G::Missing);
            r.features[0] = vec(a);
            r.features[1] = vec(b);
            check("F1", r, a, b);
        }
        for (G other : {G::NRG, G::U, G::Missing}) {
            for (int rg_slot = 0; rg_slot < 2; ++rg_slot) {
                const G g1 = rg_slot == 0 ? G::RG : other;
                const G g2 = rg_slot == 0 ? other : G::RG;
                // F2: RG grader and expert.
                auto r2 = fixture::make("F2", g1, g2, G::RG);
                r2.features[static_cast<std::size_t>(rg_slot)] = vec(a);
                r2.features[2] = vec(b);
                check("F2", r2, a, b);
                // F3: expert overruled the RG grader.
                auto r3 = fixture::make("F3", g1, g2, G::NRG);
                r3.features[static_cast<std::size_t>(rg_slot)] = vec(a);
                check("F3", r3, a, a);
            }
        }
    }
    const bool pass = wrong == 0 && combos_seen.size() == 4 + 4 + 2;
    return {pass, fmt::format("{} feature values checked, {} mismatches, {} branch/value combinations{}", checked,
                              wrong, combos_seen.size(), first)};
}

// 3. Metric oracles.
Outcome metric_oracles() {
    const auto t0 = Clock::now();
    Rng rng(303);
    std::size_t sets = 0, sens_ok = 0, ham_ok = 0;
    double worst_ham = 0.0;
    for (int trial = 0; trial < 120; ++trial) {
        const std::size_t n = 2 + rng.below(999);
        const std::size_t levels = trial % 3 == 0 ? 1 + rng.below(20) : 0;
        ScoredSet set;
        for (std::size_t i = 0; i < n; ++i) {
            const int y = rng.bernoulli(0.35) ? 1 : 0;
            const double s = levels ? static_cast<double>(rng.below(levels)) : rng.normal() + 1.2 * y;
            set.scores.push_back(s);
            set.labels.push_back(y);
        }
        set.labels[0] = 0;
        set.labels[1] = 1;
        const double target = trial % 2 ? 0.95 : 0.5 + 0.49 * rng.uniform();
        ++sets;
        if (sens_at_spec(set, target) == oracle::sens_at_spec(set.scores, set.labels, target)) ++sens_ok;

        const std::size_t m = 1 + rng.below(200);
        std::vector<FeatureScores> pred(m);
        std::vector<FeatureVector> truth(m);
        std::vector<FeatureMask> mask(m);
        for (std::size_t s = 0; s < m; ++s)
            for (std::size_t i = 0; i < kNumFeatures; ++i) {
                pred[s][i] = rng.uniform();
                truth[s][i] = rng.bernoulli(0.4) ? FeatureValue::Present : FeatureValue::Absent;
                mask[s][i] = rng.bernoulli(0.75);
            }
        const double micro = hamming_loss(pred, truth, mask).loss;
        const double macro = hamming_loss(pred, truth, mask, 0.5, HammingAverage::Macro).loss;
        const double err = std::max(std::abs(micro - oracle::hamming_micro(pred, truth, mask, 0.5)),
                                    std::abs(macro - oracle::hamming_macro(pred, truth, mask, 0.5)));
        worst_ham = std::max(worst_ham, err);
        if (err <= 1e-12) ++ham_ok;
    }
    const double secs = seconds_since(t0);
    const bool pass = sens_ok == sets && ham_ok == sets && sets >= 100 && secs < 10.0;
    return {pass, fmt::format("sens@spec {}/{} exact, hamming {}/{} within 1e-12 (worst {:.1e}), {:.2f}s", sens_ok,
                              sets, ham_ok, sets, worst_ham, secs)};
}

// 4. Analytic gradients against central differences.
Outcome gradient_check() {
    Rng rng(404);
    double worst_linear = 0.0, worst_hidden = 0.0;
    std::size_t models = 0;
    const std::size_t layouts[] = {1, 10, 11};
    for (int i = 0; i < 20; ++i) {
        const bool linear = i < 10;
        const std::size_t in = 2 + rng.below(8);
        const std::size_t hidden = linear ? 0 : 1 + rng.below(16);
        const std::size_t outputs = layouts[rng.below(3)];
        const auto model = ModelSpec::random(in, hidden, outputs, rng.below(1u << 30));
        std::vector<Sample> batch(1 + rng.below(8));
        for (auto& s : batch) {
            for (std::size_t d = 0; d < in; ++d) s.x.push_back(rng.normal());
            for (std::size_t o = 0; o < outputs; ++o) {
                s.y.push_back(rng.uniform());
                s.mask.push_back(rng.bernoulli(0.8));
            }
            s.mask[0] = 1;
        }
        std::vector<double> analytic;
        loss_and_gradient(model, batch, analytic);
        const auto numeric = oracle::numeric_gradient(model, batch, 1e-5);
        double worst = 0.0;
        for (std::size_t p = 0; p < analytic.size(); ++p) {
            const double denom = std::max({std::abs(analytic[p]), std::abs(numeric[p]), 1e-4});
            worst = std::max(worst, std::abs(analytic[p] - numeric[p]) / denom);
        }
        (linear ? worst_linear : worst_hidden) = std::max(linear ? worst_linear : worst_hidden, worst);
        ++models;
    }
    const bool pass = models == 20 && worst_linear < 1e-5 && worst_hidden < 1e-4;
    return {pass, fmt::format("{} models, max relative error linear {:.2e}, hidden {:.2e}", models, worst_linear,
                              worst_hidden)};
}

// 5. Soft-BCE arg-min over a p grid.
Outcome bce_argmin() {
    Rng rng(505);
    const double step = 1e-4;
    std::size_t ok = 0;
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const double y = rng.uniform();
        double best_p = 0.0, best = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= 10000; ++k) {
            const double p = k * step;
            const double l = soft_bce(p, y);
            if (l < best) {
                best = l;
                best_p = p;
            }
        }
        const double dist = std::abs(best_p - y);
        worst = std::max(worst, dist);
        if (dist <= step + 1e-12) ++ok;
    }
    return {ok == 1000, fmt::format("{}/1000 arg-mins within one grid step (worst distance {:.2e})", ok, worst)};
}

bool same_features(const std::optional<FeatureSoftLabels>& a, const std::optional<FeatureSoftLabels>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || (a->values == b->values && a->train_mask == b->train_mask && a->rules == b->rules);
}

bool same_label(const SoftLabel& a, const SoftLabel& b) {
    return a.excluded == b.excluded && a.rule == b.rule && (a.excluded || a.value == b.value);
}

// 6. Grader swap and RG/NRG complement.
Outcome symmetry() {
    Rng rng(606);
    const SmoothingConfig cfg;
    std::size_t swap_bad = 0, comp_bad = 0, compared = 0;
    for (std::size_t i = 0; i < 10000; ++i) {
        const auto r = fixture::random_record(rng, i);
        const auto s = fixture::swapped(r);
        if (!same_label(fuse_binary_dcls(r, cfg), fuse_binary_dcls(s, cfg)) ||
            !same_label(fuse_binary_final(r), fuse_binary_final(s)) ||
            !same_label(fuse_binary_uniform_ls(r, cfg), fuse_binary_uniform_ls(s, cfg)) ||
            !same_features(fuse_features_dcls(r, cfg), fuse_features_dcls(s, cfg)) ||
            !same_features(fuse_features_baseline(r, Scheme::Final, cfg), fuse_features_baseline(s, Scheme::Final, cfg)) ||
            !same_features(fuse_features_baseline(r, Scheme::LS, cfg), fuse_features_baseline(s, Scheme::LS, cfg)))
            ++swap_bad;

        // Feature vectors belong to the RG verdicts, so the flipped record carries none.
        AnnotationRecord plain = r;
        plain.features = {};
        AnnotationRecord flipped = plain;
        flipped.g1 = fixture::flip(r.g1);
        flipped.g2 = fixture::flip(r.g2);
        flipped.g3 = fixture::flip(r.g3);
        using Fuse = std::function<SoftLabel(const AnnotationRecord&)>;
        const Fuse fusers[] = {[&](const AnnotationRecord& x) { return fuse_binary_dcls(x, cfg); },
                               [&](const AnnotationRecord& x) { return fuse_binary_final(x); },
                               [&](const AnnotationRecord& x) { return fuse_binary_uniform_ls(x, cfg); }};
        for (const auto& fuse : fusers) {
            const auto a = fuse(plain), b = fuse(flipped);
            ++compared;
            if (a.excluded != b.excluded || a.rule != b.rule || (!a.excluded && std::abs(b.value - (1.0 - a.value)) > 1e-12))
                ++comp_bad;
        }
    }
    return {swap_bad == 0 && comp_bad == 0,
            fmt::format("10000 records: {} swap violations, {} complement violations over {} fused labels", swap_bad,
                        comp_bad, compared)};
}

struct Cli {
    int code;
    std::string out, err;
};

Cli cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// 7. End-to-end determinism through the CLI.
Outcome determinism(const fs::path& work) {
    const auto t0 = Clock::now();
    const auto panel_cfg = work / "panel.cfg";
    std::ofstream(panel_cfg) << "n_images = 2000\nseed = 7\n";
    const auto sim = cli({"simulate", "--config", panel_cfg.string(), "--out", (work / "panel").string()});
    if (sim.code != 0) return {false, "simulate failed: " + sim.err};
    const auto in = (work / "panel" / "annotations.jsonl").string();
    std::vector<std::string> reports;
    for (const char* task : {"screening", "features"}) {
        for (int run = 0; run < 2; ++run) {
            const auto out = work / fmt::format("report_{}_{}.csv", task, run);
            const auto r = cli({"experiment", "--in", in, "--task", task, "--k", "5", "--seed", "7", "--model",
                                "linear", "--out-report", out.string()});
            if (r.code != 0) return {false, fmt::format("experiment {} failed: {}", task, r.err)};
            reports.push_back(slurp(out) + "\n" + slurp(out.string() + ".txt"));
        }
    }
    const double secs = seconds_since(t0);
    const bool identical = reports[0] == reports[1] && reports[2] == reports[3];
    const bool shape = reports[0].find("DC-LS,") != std::string::npos &&
                       reports[0].find("scheme,Fold 1,Fold 2,Fold 3,Fold 4,Fold 5") != std::string::npos;
    return {identical && shape && secs < 60.0,
            fmt::format("n=2000 panel, screening and feature reports byte-identical across reruns: {}, {:.1f}s",
                        identical ? "yes" : "no", secs)};
}

// 8. Entries plus exclusions partition the input.
Outcome coverage() {
    Rng rng(808);
    std::vector<AnnotationRecord> records;
    for (std::size_t i = 0; i < 10000; ++i) records.push_back(fixture::random_record(rng, i));
    std::size_t violations = 0;
    std::string counts;
    for (auto scheme : {Scheme::Final, Scheme::LS, Scheme::DCLS}) {
        const auto ds = fuse_dataset(records, scheme, SmoothingConfig{});
        std::size_t e = 0, x = 0;
        for (const auto& r : records) {
            const bool in_entries = e < ds.entries.size() && ds.entries[e].image_id == r.image_id;
            const bool in_excl = x < ds.exclusion_log.size() && ds.exclusion_log[x].image_id == r.image_id;
            if (in_entries == in_excl) ++violations;
            if (in_entries) ++e;
            if (in_excl) ++x;
        }
        if (e != ds.entries.size() || x != ds.exclusion_log.size()) ++violations;
        counts += fmt::format(" {}={}+{}", to_string(scheme), ds.entries.size(), ds.exclusion_log.size());
    }
    return {violations == 0, fmt::format("10000 records, {} violations;{}", violations, counts)};
}

// 9. Perfect graders: all schemes select the same records. Final and DC-LS
// train on identical targets, so their cells coincide at any signal; LS trains
// on 0.1/0.9 and coincides once the classes are separable.
std::string row_text(const ExperimentReport& report) {
    std::string row;
    for (std::size_t s = 0; s < report.cells.size(); ++s) {
        row += fmt::format(" {}:", report.schemes[s]);
        for (double v : report.cells[s]) row += " " + format_cell(report, v);
    }
    return row;
}

Outcome noiseless() {
    PanelConfig cfg;
    cfg.g1 = cfg.g2 = cfg.g3 = {1.0, 1.0};
    cfg.ungradable_rate = 0.0;
    cfg.dropout_rate = 0.0;
    cfg.feature_noise = 0.0;

    bool same_sets = true;
    std::vector<ExperimentReport> reports;
    for (double signal : {cfg.signal_strength, 6.0}) {
        cfg.signal_strength = signal;
        const auto panel = generate_panel(cfg);
        std::vector<std::vector<std::string>> ids;
        for (auto scheme : {Scheme::Final, Scheme::LS, Scheme::DCLS}) {
            std::vector<std::string> v;
            for (const auto& e : fuse_dataset(panel.records, scheme, SmoothingConfig{}).entries)
                v.push_back(e.image_id);
            ids.push_back(std::move(v));
        }
        same_sets = same_sets && ids[0] == ids[1] && ids[1] == ids[2];
        ExperimentOptions opt;
        opt.seed = 7;
        reports.push_back(run_experiment(panel.records, opt));
    }
    const bool final_dcls = reports[0].cells[0] == reports[0].cells[2] && reports[1].cells[0] == reports[1].cells[2];
    const bool all_separable = reports[1].cells[0] == reports[1].cells[1] && reports[1].cells[1] == reports[1].cells[2];
    return {same_sets && final_dcls && all_separable,
            fmt::format("record sets identical: {}; Final = DC-LS at signal 1.5 and 6: {}; all schemes equal at "
                        "signal 6: {}; signal 1.5{}; signal 6{}",
                        same_sets ? "yes" : "no", final_dcls ? "yes" : "no", all_separable ? "yes" : "no",
                        row_text(reports[0]), row_text(reports[1]))};
}

}  // namespace

int main() {
    const fs::path work = fs::temp_directory_path() / "raterfuse_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"rule-engine truth table", truth_table},
        {"feature-rule oracle", feature_rules},
        {"metric oracles", metric_oracles},
        {"gradient check", gradient_check},
        {"soft-BCE minimum", bce_argmin},
        {"fusion symmetry", symmetry},
        {"end-to-end determinism", [&] { return determinism(work); }},
        {"coverage accounting", coverage},
        {"noiseless-limit equivalence", noiseless},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << fmt::format("[{}] {} {}: {}", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail)
                  << std::endl;
    }
    fs::remove_all(work);
    std::cout << fmt::format("{}/{} criteria passed", criteria.size() - static_cast<std::size_t>(failed),
                             criteria.size())
              << std::endl;
    return failed;
}
