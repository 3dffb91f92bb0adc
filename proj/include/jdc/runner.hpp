#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "jdc/config.hpp"

namespace jdc {

struct SeriesRow {
    double t = 0.0;
    double value = 0.0;
    double stderr = 0.0;
    double bound = 0.0;
};

struct ResultRecord {
    std::string experiment_id;
    std::string config_hash;
    std::map<std::string, double> metrics;
    std::map<std::string, std::string> notes;
    std::map<std::string, std::vector<SeriesRow>> series;
    std::vector<std::string> artifacts;
    double wall_time = 0.0;
    bool passed = true;

    std::string to_json() const;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailedCheck = 1;
inline constexpr int kExitConfig = 2;

const std::vector<std::string>& subcommands();

// Hash of the effective configuration; the worker count and output location do not enter.
std::string config_hash(const ExperimentConfig& cfg);

// Runs one pipeline, writes outputs under cfg.out_dir, returns the exit status.
int run(const std::string& subcommand, const ExperimentConfig& cfg, ResultRecord& rec, std::ostream& log);

// One CSV per series with columns t,value,stderr,bound. Returns the written paths.
std::vector<std::string> emit_plotdata(const ResultRecord& rec, const std::string& dir);

// Whole command: parse the config, apply overrides, run, map errors to exit codes.
int run_from_file(const std::string& subcommand, const std::string& config_path, const Overrides& ov,
                  std::ostream& out, std::ostream& err);

}  // namespace jdc
