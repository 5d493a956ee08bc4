#include "raterfuse/config_file.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

#include "raterfuse/csv.hpp"
#include "raterfuse/errors.hpp"

namespace raterfuse {

namespace {

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(',', start);
        out.push_back(trim(std::string_view(s).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string pair_text(const SoftPair& p) {
    return csv::format_double(p.lo) + ", " + csv::format_double(p.hi);
}

const std::vector<std::string> kToolkitKeys = {
    "ungradable_soft",  "adjudicated_soft", "missing_grader_soft", "feature_favor_g3", "feature_overruled_present",
    "feature_peer_disagree", "uniform_ls", "learning_rate", "batch_size", "max_epochs", "patience", "beta1", "beta2",
    "epsilon", "init_scale", "min_delta", "hidden_dim",
};

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError(fmt::format("config line {}: expected key = value", line_no), line_no, "");
        std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw ParseError(fmt::format("config line {}: empty key", line_no), line_no, "");
        if (!cfg.values_.emplace(key, trim(std::string_view(t).substr(eq + 1))).second)
            throw ParseError(fmt::format("config line {}: repeated key {}", line_no, key), line_no, key);
    }
    return cfg;
}

double KeyValueConfig::get_double(const std::string& key) const {
    const std::string& s = values_.at(key);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw ConfigError(key, fmt::format("expected a number, got '{}'", s));
    return v;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key) const {
    const std::string& s = values_.at(key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw ConfigError(key, fmt::format("expected a non-negative integer, got '{}'", s));
    return v;
}

std::vector<double> KeyValueConfig::get_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_commas(values_.at(key))) {
        double v = 0.0;
        auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || p != item.data() + item.size() || item.empty())
            throw ConfigError(key, fmt::format("expected a comma-separated list of numbers, got '{}'", values_.at(key)));
        out.push_back(v);
    }
    return out;
}

SoftPair KeyValueConfig::get_pair(const std::string& key) const {
    const auto v = get_list(key);
    if (v.size() != 2) throw ConfigError(key, "expected a pair 'lo, hi'");
    return SoftPair{v[0], v[1]};
}

void KeyValueConfig::reject_unknown(const std::vector<std::string>& known) const {
    for (const auto& [k, v] : values_)
        if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError(k, "unknown configuration key");
}

ToolkitConfig read_toolkit_config(std::istream& in) {
    const auto kv = KeyValueConfig::parse(in);
    kv.reject_unknown(kToolkitKeys);
    ToolkitConfig cfg;
    auto& s = cfg.smoothing;
    auto& t = cfg.training;
    if (kv.has("ungradable_soft")) s.ungradable_soft = kv.get_pair("ungradable_soft");
    if (kv.has("adjudicated_soft")) s.adjudicated_soft = kv.get_pair("adjudicated_soft");
    if (kv.has("missing_grader_soft")) s.missing_grader_soft = kv.get_pair("missing_grader_soft");
    if (kv.has("feature_favor_g3")) s.feature_favor_g3 = kv.get_pair("feature_favor_g3");
    if (kv.has("feature_overruled_present")) s.feature_overruled_present = kv.get_double("feature_overruled_present");
    if (kv.has("feature_peer_disagree")) s.feature_peer_disagree = kv.get_double("feature_peer_disagree");
    if (kv.has("uniform_ls")) s.uniform_ls = kv.get_pair("uniform_ls");
    if (kv.has("learning_rate")) t.learning_rate = kv.get_double("learning_rate");
    if (kv.has("batch_size")) t.batch_size = kv.get_uint("batch_size");
    if (kv.has("max_epochs")) t.max_epochs = kv.get_uint("max_epochs");
    if (kv.has("patience")) t.patience = kv.get_uint("patience");
    if (kv.has("beta1")) t.beta1 = kv.get_double("beta1");
    if (kv.has("beta2")) t.beta2 = kv.get_double("beta2");
    if (kv.has("epsilon")) t.epsilon = kv.get_double("epsilon");
    if (kv.has("init_scale")) t.init_scale = kv.get_double("init_scale");
    if (kv.has("min_delta")) t.min_delta = kv.get_double("min_delta");
    if (kv.has("hidden_dim")) cfg.hidden_dim = kv.get_uint("hidden_dim");
    s.validate();
    t.validate();
    if (cfg.hidden_dim == 0) throw ConfigError("hidden_dim", "must be >= 1");
    return cfg;
}

ToolkitConfig read_toolkit_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    return read_toolkit_config(in);
}

void write_toolkit_config(std::ostream& out, const ToolkitConfig& cfg) {
    const auto& s = cfg.smoothing;
    const auto& t = cfg.training;
    out << "# label smoothing\n";
    out << "ungradable_soft = " << pair_text(s.ungradable_soft) << '\n';
    out << "adjudicated_soft = " << pair_text(s.adjudicated_soft) << '\n';
    out << "missing_grader_soft = " << pair_text(s.missing_grader_soft) << '\n';
    out << "feature_favor_g3 = " << pair_text(s.feature_favor_g3) << '\n';
    out << "feature_overruled_present = " << csv::format_double(s.feature_overruled_present) << '\n';
    out << "feature_peer_disagree = " << csv::format_double(s.feature_peer_disagree) << '\n';
    out << "uniform_ls = " << pair_text(s.uniform_ls) << '\n';
    out << "# training\n";
    out << "learning_rate = " << csv::format_double(t.learning_rate) << '\n';
    out << "batch_size = " << t.batch_size << '\n';
    out << "max_epochs = " << t.max_epochs << '\n';
    out << "patience = " << t.patience << '\n';
    out << "beta1 = " << csv::format_double(t.beta1) << '\n';
    out << "beta2 = " << csv::format_double(t.beta2) << '\n';
    out << "epsilon = " << csv::format_double(t.epsilon) << '\n';
    out << "init_scale = " << csv::format_double(t.init_scale) << '\n';
    out << "min_delta = " << csv::format_double(t.min_delta) << '\n';
    out << "hidden_dim = " << cfg.hidden_dim << '\n';
}

}  // namespace raterfuse
