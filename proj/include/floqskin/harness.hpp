#pragma once

#include "floqskin/dynamics.hpp"
#include "floqskin/gbz.hpp"

#include <filesystem>
#include <json.hpp>
#include <map>
#include <string>
#include <vector>

namespace floqskin {

inline constexpr const char* tool_version = "0.1.0";

const std::vector<std::string>& experiment_names();

struct ExperimentConfig {
    std::string experiment;
    ModelParams model;
    nlohmann::json knobs = nlohmann::json::object(); ///< after defaults are filled in
    std::uint64_t seed = 1;
    std::string tag; ///< file-name prefix, empty for single runs

    /// Range-checks the model and every knob; fills knob defaults.
    void validate();
    nlohmann::json to_json() const;
};

/// Top-level keys: experiment, model, knobs, seed, tag. Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Default knobs of an experiment.
nlohmann::json default_knobs(const std::string& experiment);

/// Set a dotted path ("model.omega", "knobs.n_steps") to a JSON-parsed value, or a string if it does not parse.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// FNV-1a over the canonical dump; object keys are sorted so key order does not matter.
std::string config_hash(const nlohmann::json& doc);

struct Preset {
    std::string name;
    std::string description;
    std::vector<ExperimentConfig> steps;
    std::string plot_script; ///< gnuplot source
};

const std::vector<Preset>& list_presets();
const Preset* find_preset(const std::string& name);

struct RunManifest {
    std::string config_hash;
    std::string tool_version = floqskin::tool_version;
    double wall_clock = 0.0;
    std::vector<std::string> files;
    std::map<std::string, std::string> convergence;
    nlohmann::json config;

    nlohmann::json to_json() const;
};

/// Runs one experiment into `out`; returns the files it wrote and fills convergence notes.
std::vector<std::string> run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                        std::map<std::string, std::string>& convergence);

/// Runs every step, writes the plot script if any, then manifest.json last.
RunManifest run(const std::vector<ExperimentConfig>& steps, const std::filesystem::path& out,
                const std::string& plot_script = {}, const std::string& plot_name = {});

} // namespace floqskin
