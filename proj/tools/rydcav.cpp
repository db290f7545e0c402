// rydcav: regenerate the simulated data sets from a JSON config.

#include <fstream>
#include <iostream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "commands.hpp"

namespace fs = std::filesystem;
using namespace rydcav;

int main(int argc, char** argv) {
    CLI::App app{"Cavity-coupled Rydberg array simulation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string replay_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::string label;
    int threads = 0;

    std::vector<std::string> names = cli::command_names();
    names.push_back("all");
    for (const auto& name : names) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config (defaults when omitted)")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "override rng_seed");
        sub->add_option("--out", out_dir, "output root");
        sub->add_option("--label", label, "run directory name (default: UTC timestamp)");
        sub->add_option("--threads", threads, "cap on worker threads")->check(CLI::NonNegativeNumber);
    }
    auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    replay->add_option("manifest", replay_path)->required()->check(CLI::ExistingFile);
    replay->add_option("--out", out_dir);
    replay->add_option("--label", label);
    replay->add_option("--threads", threads)->check(CLI::NonNegativeNumber);
    auto* defaults = app.add_subcommand("defaults", "print the default config as JSON");
    auto* validate = app.add_subcommand("validate", "check a config and list applied defaults");
    validate->add_option("config", config_path)->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    if (defaults->parsed()) {
        std::cout << to_json(ExperimentConfig{}).dump(2) << '\n';
        return 0;
    }

    cli::RunRequest req;
    try {
        if (replay->parsed()) {
            std::ifstream in(replay_path);
            req = cli::request_from_manifest(nlohmann::json::parse(in));
        } else {
            nlohmann::json doc = nlohmann::json::object();
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                doc = nlohmann::json::parse(in);
            }
            auto parsed = parse_config(doc);
            if (!parsed.ok()) {
                for (const auto& e : parsed.errors) fmt::print(stderr, "config error at {}: {}\n", e.path, e.message);
                return 2;
            }
            if (validate->parsed()) {
                fmt::print("config ok; {} defaults applied\n", parsed.defaults_applied.size());
                for (const auto& d : parsed.defaults_applied) fmt::print("  default: {}\n", d);
                return 0;
            }
            req.config = *parsed.config;
            req.defaults_applied = parsed.defaults_applied;
            req.command = app.get_subcommands().front()->get_name();
        }
    } catch (const nlohmann::json::exception& ex) {
        fmt::print(stderr, "cannot read JSON: {}\n", ex.what());
        return 2;
    } catch (const std::exception& ex) {
        fmt::print(stderr, "{}\n", ex.what());
        return 2;
    }
    if (seed) req.config.rng_seed = *seed;
    req.out_root = out_dir;
    req.label = label;
    req.threads = threads;
    return cli::run_command(req).exit_code;
}
