// Command-line experiment runner: generate, train, evaluate, interpret, bench.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lavarnet/errors.hpp"
#include "lavarnet/experiment.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kTraining = 3 };

struct Flags {
    std::optional<std::filesystem::path> config;
    std::optional<std::string> preset;
    std::filesystem::path out = "out";
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    bool audit = false;
    bool quiet = false;
};

void add_common(CLI::App& cmd, Flags& f) {
    cmd.add_option("--config", f.config, "JSON experiment config (see docs/config.md)");
    cmd.add_option("--preset", f.preset, "base preset merged under --config")
        ->check(CLI::IsMember({"desk", "full"}));
    cmd.add_option("--out", f.out, "output directory")->capture_default_str();
    cmd.add_option("--seed", f.seed, "base seed, overrides the config");
    cmd.add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    cmd.add_flag("--quiet", f.quiet, "no progress lines on stderr");
}

int run(const std::string& command, const Flags& f) {
    if (!f.config && !f.preset) throw lavarnet::ConfigError("give --config, --preset or both");
    lavarnet::ExperimentConfig config = lavarnet::load_config(f.config, f.preset);
    if (f.seed) config.seed = *f.seed;
    lavarnet::RunOptions options;
    options.out = f.out;
    options.jobs = f.jobs;
    options.audit = f.audit;
    options.log = f.quiet ? nullptr : &std::cerr;

    if (command == "generate") lavarnet::cmd_generate(config, options);
    else if (command == "train") lavarnet::cmd_train(config, options);
    else if (command == "evaluate") lavarnet::cmd_evaluate(config, options);
    else if (command == "interpret") lavarnet::cmd_interpret(config, options);
    else if (command == "bench") lavarnet::cmd_bench(config, options);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LAVARNET experiment runner"};
    app.require_subcommand(1);
    Flags flags;
    const char* commands[][2] = {
        {"generate", "simulate series and ground-truth networks"},
        {"train", "train every model, repetition and grid candidate"},
        {"evaluate", "score checkpoints on the test split"},
        {"interpret", "score learned lagged-variable weights against the truth"},
        {"bench", "time training runs"},
    };
    for (auto& [name, help] : commands) {
        CLI::App* cmd = app.add_subcommand(name, help);
        add_common(*cmd, flags);
        if (std::string(name) == "train")
            cmd->add_flag("--audit", flags.audit, "poison test rows to prove training never reads them");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, flags);
    } catch (const lavarnet::ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfig;
    } catch (const lavarnet::ContractError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfig;
    } catch (const lavarnet::TrainingAbort& e) {
        fmt::print(stderr, "training aborted: {}\n", e.what());
        return kTraining;
    } catch (const lavarnet::DataError& e) {
        fmt::print(stderr, "data error: {}\n", e.what());
        return kData;
    } catch (const std::filesystem::filesystem_error& e) {
        fmt::print(stderr, "data error: {}\n", e.what());
        return kData;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kConfig;
    }
}
