#pragma once
// Flat `key = value` configuration files. '#' starts a comment; pairs are
// written as "lo, hi".

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "raterfuse/fusion.hpp"
#include "raterfuse/trainer.hpp"

namespace raterfuse {

class KeyValueConfig {
public:
    // Throws ParseError on lines without '=' or repeated keys.
    static KeyValueConfig parse(std::istream& in);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& values() const { return values_; }

    // Each getter throws ConfigError(key, ...) on malformed values.
    double get_double(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    std::vector<double> get_list(const std::string& key) const;
    SoftPair get_pair(const std::string& key) const;

    // Throws ConfigError for the first key not in `known`.
    void reject_unknown(const std::vector<std::string>& known) const;

private:
    std::map<std::string, std::string> values_;
};

struct ToolkitConfig {
    SmoothingConfig smoothing;
    TrainConfig training;
    std::size_t hidden_dim = 16;  // width used by --model mlp

    friend bool operator==(const ToolkitConfig&, const ToolkitConfig&) = default;
};

// Missing keys keep their defaults; the result is validated.
ToolkitConfig read_toolkit_config(std::istream& in);
ToolkitConfig read_toolkit_config_file(const std::string& path);
void write_toolkit_config(std::ostream& out, const ToolkitConfig& cfg);

}  // namespace raterfuse
