#ifndef LAVARNET_EXPERIMENT_HPP
#define LAVARNET_EXPERIMENT_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lavarnet/dataio.hpp"
#include "lavarnet/datagen.hpp"
#include "lavarnet/models.hpp"
#include "lavarnet/training.hpp"

namespace lavarnet {

enum class DataSource { Henon, Var, Csv };

struct DataSpec {
    DataSource source = DataSource::Henon;
    std::vector<std::size_t> K{5};
    std::vector<std::size_t> L{2000};
    double coupling = 0.3;
    std::size_t P = 3;
    double density = 0.4;
    std::size_t burn_in = 1000;
    std::filesystem::path csv;
};

struct PreprocessSpec {
    bool interpolate = true;
    std::optional<std::size_t> max_zeros;
    bool drop_constant = false;
    std::size_t moving_average = 0;  // 0 disables the filter
    bool zscore = false;
};

struct SplitSpec {
    std::array<double, 3> fractions{0.6, 0.2, 0.2};
    std::optional<std::array<std::size_t, 3>> counts;
};

struct ModelSpec {
    Variant variant = Variant::Lavarnet;
    std::vector<std::size_t> grid;  // neuron candidates; unused for Knn
};

struct BenchSpec {
    std::size_t epochs = 70;
    std::size_t realizations = 10;
};

struct ExperimentConfig {
    std::string name = "experiment";
    DataSpec data;
    PreprocessSpec preprocess;
    SplitSpec split;
    std::vector<std::size_t> T{5};
    std::vector<std::string> targets;  // empty means every column
    std::vector<ModelSpec> models;
    TrainConfig training;  // variant, n, seed and candidates are set per run
    double baseline_lr = 0.001;
    std::size_t knn_neighbors = 5;
    std::size_t repetitions = 5;
    std::uint64_t seed = 1;
    BenchSpec bench;
};

// Parses and validates a JSON config. Unknown keys and bad values throw
// ConfigError naming the offending key.
ExperimentConfig parse_config(std::string_view json_text);
// Canonical JSON of a resolved config; parse_config accepts it back.
std::string config_to_json(const ExperimentConfig& config);
// JSON text of a named preset ("desk" or "full").
std::string preset_json(std::string_view name);
// Preset (if any) with the file's keys merged over it.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::optional<std::string>& preset);

struct Scenario {
    std::string name;
    std::size_t K = 0;  // 0 for CSV sources
    std::size_t T = 0;
    std::size_t L = 0;  // 0 for CSV sources
};

// Cartesian product of the K, T and L lists (T only for CSV sources).
std::vector<Scenario> expand_scenarios(const ExperimentConfig& config);

// Per-repetition seeds; every model and grid candidate of a repetition
// shares the training seed.
std::uint64_t data_seed(const ExperimentConfig& config, std::size_t rep);
std::uint64_t training_seed(const ExperimentConfig& config, std::size_t rep);

struct RunPaths {
    std::filesystem::path root;

    std::filesystem::path scenario(const Scenario& s) const { return root / s.name; }
    std::filesystem::path data_dir(const Scenario& s, std::size_t rep) const;
    std::filesystem::path series(const ExperimentConfig& c, const Scenario& s, std::size_t rep) const;
    std::filesystem::path truth(const Scenario& s, std::size_t rep) const;
    std::filesystem::path run_dir(const Scenario& s, Variant v, std::size_t rep) const;
    std::filesystem::path candidate_dir(const Scenario& s, Variant v, std::size_t rep, std::size_t n) const;
};

struct PreparedData {
    Dataset dataset;
    WindowedData windows;
    std::vector<std::string> target_names;
    std::vector<std::size_t> target_columns;
};

// Load, clean, split, normalize and window one repetition's series. With
// `audit`, every row from the test split on is overwritten with NaN after
// preprocessing, so any read of it during training poisons the loss.
PreparedData prepare_data(const ExperimentConfig& config, const Scenario& scenario,
                          std::size_t rep, const RunPaths& paths, bool audit = false);

struct RunOptions {
    std::filesystem::path out = "out";
    std::size_t jobs = 1;
    bool audit = false;
    std::ostream* log = nullptr;
};

// Runs task(0) .. task(count - 1) on up to `jobs` threads. After all tasks
// finish, rethrows the exception of the lowest failing index.
void run_parallel(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation; 0 for a single value
};
MeanStd mean_std(std::span<const double> values);

void cmd_generate(const ExperimentConfig& config, const RunOptions& options);
void cmd_train(const ExperimentConfig& config, const RunOptions& options);
void cmd_evaluate(const ExperimentConfig& config, const RunOptions& options);
void cmd_interpret(const ExperimentConfig& config, const RunOptions& options);
void cmd_bench(const ExperimentConfig& config, const RunOptions& options);

}  // namespace lavarnet

#endif  // LAVARNET_EXPERIMENT_HPP
