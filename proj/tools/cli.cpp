#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "raterfuse/annotation.hpp"
#include "raterfuse/config_file.hpp"
#include "raterfuse/errors.hpp"
#include "raterfuse/experiment.hpp"
#include "raterfuse/fusion.hpp"
#include "raterfuse/simgen.hpp"

namespace raterfuse::cli {

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
}

RecordFormat resolve_format(const std::string& flag, const std::string& path) {
    if (flag == "csv") return RecordFormat::CSV;
    if (flag == "jsonl") return RecordFormat::JSONL;
    if (flag.empty() && fs::path(path).extension() == ".csv") return RecordFormat::CSV;
    return RecordFormat::JSONL;
}

// Reads and validates; prints every violation. Returns nullopt on violations.
std::optional<std::vector<AnnotationRecord>> load_records(const std::string& path, RecordFormat format,
                                                          std::ostream& err) {
    auto records = read_records_file(path, format);
    const auto violations = validate_dataset(records);
    if (violations.empty()) return records;
    for (const auto& [id, v] : violations) err << "invalid record " << id << ": " << v.message << '\n';
    err << violations.size() << " validation error(s) in " << path << '\n';
    return std::nullopt;
}

ToolkitConfig load_config(const std::string& path) {
    return path.empty() ? ToolkitConfig{} : read_toolkit_config_file(path);
}

struct FuseArgs {
    std::string in, format, scheme = "dcls", config, out, exclusions;
};

int cmd_fuse(const FuseArgs& a, std::ostream& out, std::ostream& err) {
    const auto scheme = parse_scheme(a.scheme);
    if (!scheme) {
        err << "unknown scheme '" << a.scheme << "' (expected final, ls or dcls)\n";
        return kValidationFailure;
    }
    const auto cfg = load_config(a.config);
    const auto records = load_records(a.in, resolve_format(a.format, a.in), err);
    if (!records) return kValidationFailure;
    const FusedDataset ds = fuse_dataset(*records, *scheme, cfg.smoothing);

    std::ostringstream fused, excl;
    write_fused_jsonl(fused, ds);
    write_exclusions_csv(excl, ds);
    write_file(a.out, fused.str());
    const std::string excl_path = a.exclusions.empty() ? a.out + ".exclusions.csv" : a.exclusions;
    write_file(excl_path, excl.str());
    out << fmt::format("{}: {} records -> {} entries, {} exclusions\n", to_string(*scheme), records->size(),
                       ds.entries.size(), ds.exclusion_log.size());
    return kOk;
}

struct ExperimentArgs {
    std::string in, format, task = "screening", model = "linear", out_report, config, hamming = "micro", timestamp,
                                    artifacts;
    int k = 5;
    std::uint64_t seed = 0;
    bool joint = false;
};

int cmd_experiment(const ExperimentArgs& a, std::ostream& out, std::ostream& err) {
    ExperimentOptions opt;
    const auto task = parse_task(a.task);
    const auto model = parse_model_kind(a.model);
    if (!task || !model) {
        err << "invalid --task or --model\n";
        return kValidationFailure;
    }
    opt.task = *task;
    opt.model = *model;
    opt.k = a.k;
    opt.seed = a.seed;
    opt.joint = a.joint;
    opt.hamming_average = a.hamming == "macro" ? HammingAverage::Macro : HammingAverage::Micro;
    if (!a.timestamp.empty()) opt.timestamp = a.timestamp;
    opt.config = load_config(a.config);

    const auto records = load_records(a.in, resolve_format(a.format, a.in), err);
    if (!records) return kValidationFailure;

    ExperimentArtifacts artifacts;
    const auto report = run_experiment(*records, opt, a.artifacts.empty() ? nullptr : &artifacts);
    const std::string text = report_text(report);
    write_file(a.out_report, report_csv(report));
    write_file(a.out_report + ".txt", text);
    if (!a.artifacts.empty()) {
        const fs::path dir(a.artifacts);
        std::ostringstream folds;
        write_folds_csv(folds, artifacts.folds);
        write_file(dir / "folds.csv", folds.str());
        for (const auto& cell : artifacts.cells) {
            const std::string stem = fmt::format("{}_fold{}", cell.scheme, cell.fold + 1);
            std::ostringstream model_json, log_csv;
            TrainConfig cfg = opt.config.training;
            cfg.seed = opt.seed;
            write_model_json(model_json, cell.model, cfg);
            write_training_log_csv(log_csv, cell.log);
            write_file(dir / ("model_" + stem + ".json"), model_json.str());
            write_file(dir / ("log_" + stem + ".csv"), log_csv.str());
        }
    }
    out << text;
    return kOk;
}

struct SimulateArgs {
    std::string config, out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    PanelConfig cfg;
    if (!a.config.empty()) {
        std::ifstream in(a.config);
        if (!in) throw IoError("cannot open config " + a.config);
        cfg = read_panel_config(in);
    }
    const Panel panel = generate_panel(cfg);
    const fs::path dir(a.out);
    std::ostringstream jsonl, csv_out, truth, echo;
    write_records(jsonl, panel.records, RecordFormat::JSONL);
    write_records(csv_out, panel.records, RecordFormat::CSV);
    write_groundtruth_csv(truth, panel.truth);
    write_panel_config(echo, cfg);
    write_file(dir / "annotations.jsonl", jsonl.str());
    write_file(dir / "annotations.csv", csv_out.str());
    write_file(dir / "groundtruth.csv", truth.str());
    write_file(dir / "panel.cfg", echo.str());
    out << format_summary(summarize(panel.records)) << '\n';
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-rater label fusion and screening evaluation"};
    app.name("raterfuse");
    app.require_subcommand(0, 1);
    bool dump_config = false;
    app.add_flag("--dump-default-config", dump_config, "Print the default smoothing/training config and exit");

    FuseArgs fuse;
    auto* fuse_cmd = app.add_subcommand("fuse", "Compile annotations into fused soft labels");
    fuse_cmd->add_option("--in", fuse.in, "Annotation table")->required();
    fuse_cmd->add_option("--format", fuse.format, "csv or jsonl (default: from extension)")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    fuse_cmd->add_option("--scheme", fuse.scheme, "final, ls or dcls")->capture_default_str();
    fuse_cmd->add_option("--config", fuse.config, "key = value config file");
    fuse_cmd->add_option("--out", fuse.out, "Fused JSONL output")->required();
    fuse_cmd->add_option("--exclusions", fuse.exclusions, "Exclusion CSV (default: <out>.exclusions.csv)");

    ExperimentArgs exp;
    auto* exp_cmd = app.add_subcommand("experiment", "Compare Final, LS and DC-LS across folds");
    exp_cmd->add_option("--in", exp.in, "Annotation table with embeddings")->required();
    exp_cmd->add_option("--format", exp.format, "csv or jsonl (default: from extension)")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    exp_cmd->add_option("--task", exp.task, "screening or features")
        ->check(CLI::IsMember({"screening", "features"}))
        ->capture_default_str();
    exp_cmd->add_option("--k", exp.k, "Number of folds")->capture_default_str();
    exp_cmd->add_option("--seed", exp.seed, "Global seed")->capture_default_str();
    exp_cmd->add_option("--model", exp.model, "linear or mlp")->check(CLI::IsMember({"linear", "mlp"}))->capture_default_str();
    exp_cmd->add_option("--out-report", exp.out_report, "Report CSV (text copy at <path>.txt)")->required();
    exp_cmd->add_option("--config", exp.config, "key = value config file");
    exp_cmd->add_flag("--joint", exp.joint, "Train one 11-output model (screening + features)");
    exp_cmd->add_option("--hamming-average", exp.hamming, "micro or macro")
        ->check(CLI::IsMember({"micro", "macro"}))
        ->capture_default_str();
    exp_cmd->add_option("--timestamp", exp.timestamp, "Timestamp recorded in the report");
    exp_cmd->add_option("--artifacts", exp.artifacts, "Directory for folds, model weights and training logs");

    SimulateArgs sim;
    bool dump_panel = false;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic rater panel");
    sim_cmd->add_option("--config", sim.config, "key = value panel config (defaults when omitted)");
    sim_cmd->add_option("--out", sim.out, "Output directory");
    sim_cmd->add_flag("--dump-default-config", dump_panel, "Print the default panel config and exit");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return kValidationFailure;
    }

    try {
        if (dump_config) {
            write_toolkit_config(out, ToolkitConfig{});
            return kOk;
        }
        if (*fuse_cmd) return cmd_fuse(fuse, out, err);
        if (*exp_cmd) return cmd_experiment(exp, out, err);
        if (*sim_cmd) {
            if (dump_panel) {
                write_panel_config(out, PanelConfig{});
                return kOk;
            }
            if (sim.out.empty()) {
                err << "simulate: --out is required\n";
                return kValidationFailure;
            }
            return cmd_simulate(sim, out);
        }
        out << app.help();
        return kOk;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIoFailure;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kValidationFailure;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kValidationFailure;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kValidationFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kIoFailure;
    }
}

}  // namespace raterfuse::cli
