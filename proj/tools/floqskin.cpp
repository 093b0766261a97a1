#include "floqskin/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace floqskin;
using nlohmann::json;

namespace {

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("config " + path + " is not a JSON object");
    return j;
}

std::vector<ExperimentConfig> build_steps(const std::string& name, const json& file,
                                          const std::vector<std::string>& overrides) {
    std::vector<json> docs;
    if (const auto* preset = find_preset(name)) {
        if (file.contains("experiment")) throw ConfigError("config for preset '" + name + "' must not set 'experiment'");
        for (const auto& s : preset->steps) {
            json d = s.to_json();
            d.merge_patch(file);
            docs.push_back(std::move(d));
        }
    } else {
        json d = file;
        if (d.contains("experiment") && d["experiment"] != name)
            throw ConfigError("config names experiment " + d["experiment"].dump() + " but '" + name + "' was requested");
        d["experiment"] = name;
        docs.push_back(std::move(d));
    }
    std::vector<ExperimentConfig> steps;
    for (auto& d : docs) {
        for (const auto& o : overrides) apply_override(d, o);
        steps.push_back(config_from_json(d));
    }
    return steps;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Driven dissipative AAH chain: Floquet spectra, GBZ and wavepacket dynamics"};
    std::string name, config_path, out_dir;
    std::vector<std::string> overrides;
    bool list = false;
    app.add_option("name", name, "experiment or preset");
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_dir, "output directory (default out/<name>)");
    app.add_option("--override", overrides, "key=value, dotted path into the config")->take_all();
    app.add_flag("--list", list, "list experiments and presets");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    if (list) {
        std::cout << "experiments:\n";
        for (const auto& e : experiment_names()) std::cout << "  " << e << '\n';
        std::cout << "presets:\n";
        for (const auto& p : list_presets()) std::cout << "  " << p.name << "  " << p.description << '\n';
        return 0;
    }

    try {
        if (name.empty()) throw ConfigError("experiment or preset name is empty");
        const auto steps = build_steps(name, load_config(config_path), overrides);
        const auto* preset = find_preset(name);
        const auto out = out_dir.empty() ? "out/" + name : out_dir;
        const auto m = run(steps, out, preset ? preset->plot_script : std::string(), name);
        std::cout << "wrote " << m.files.size() << " files to " << out << " (config " << m.config_hash << ")\n";
        for (const auto& [key, note] : m.convergence) std::cout << "  " << key << ": " << note << '\n';
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
