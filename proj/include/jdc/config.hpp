#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jdc/coupling.hpp"
#include "jdc/model.hpp"

namespace jdc {

// INI text: [section] headers, key = value lines, '#' or ';' comments.
class IniFile {
public:
    static IniFile parse(const std::string& text, const std::string& source = "<config>");
    static IniFile load(const std::string& path);

    bool has(const std::string& section, const std::string& key) const;
    bool has_section(const std::string& section) const { return data_.count(section) > 0; }
    std::string get(const std::string& section, const std::string& key) const;
    std::string get_or(const std::string& section, const std::string& key, const std::string& fallback) const;
    double number(const std::string& section, const std::string& key) const;
    double number_or(const std::string& section, const std::string& key, double fallback) const;
    std::int64_t integer(const std::string& section, const std::string& key) const;
    std::int64_t integer_or(const std::string& section, const std::string& key, std::int64_t fallback) const;
    std::vector<double> numbers(const std::string& section, const std::string& key) const;
    void set(const std::string& section, const std::string& key, const std::string& value);

    // Rejects sections and keys outside the given schema.
    void check_schema(const std::map<std::string, std::vector<std::string>>& schema) const;

    // Sorted "section.key=value" lines.
    std::string canonical(const std::vector<std::string>& skip_sections = {}) const;
    const std::string& source() const { return source_; }

private:
    struct Entry {
        std::string value;
        int line = 0;
    };
    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& msg) const;

    std::string source_;
    std::map<std::string, std::map<std::string, Entry>> data_;
};

struct RunSettings {
    double T = 1.0;
    double dt = 1e-3;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 0;
    int workers = 0;
    std::vector<double> x0, y0;
    double burn_in = 0.0;
    std::size_t record_every = 100;
};

struct ExperimentConfig {
    IniFile ini;
    ModelSpec model;
    CouplingScheme scheme;
    RunSettings run;
    std::string out_dir = "out";
    std::vector<std::string> formats{"csv", "json"};
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out_dir;
};

ExperimentConfig build_config(const IniFile& ini, const Overrides& ov = {});
ModelSpec build_model(const IniFile& ini);
Curvature parse_kappa(const std::string& spec);

std::string hex64(std::uint64_t v);
std::uint64_t fnv1a(const std::string& s);

}  // namespace jdc
