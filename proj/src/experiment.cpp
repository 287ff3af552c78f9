#include "lavarnet/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "lavarnet/checkpoint.hpp"
#include "lavarnet/errors.hpp"
#include "lavarnet/evaluation.hpp"
#include "lavarnet/random.hpp"

namespace lavarnet {

namespace fs = std::filesystem;

namespace {

using Json = nlohmann::ordered_json;

std::mutex log_mutex;

template <typename... Args>
void log(const RunOptions& options, fmt::format_string<Args...> format, Args&&... args) {
    if (!options.log) return;
    const std::string line = fmt::format(format, std::forward<Args>(args)...);
    std::lock_guard lock(log_mutex);
    *options.log << line << '\n' << std::flush;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out << text;
    if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

Json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw DataError(fmt::format("malformed '{}': {}", path.string(), e.what()));
    }
}

std::string rep_label(std::size_t rep) { return fmt::format("rep_{}", rep + 1); }

std::vector<std::string> generated_names(std::size_t K) {
    std::vector<std::string> names;
    for (std::size_t k = 1; k <= K; ++k) names.push_back(fmt::format("x{}", k));
    return names;
}

std::vector<std::size_t> resolve_targets(const ExperimentConfig& config,
                                         std::span<const std::string> names) {
    std::vector<std::size_t> cols;
    if (config.targets.empty()) {
        for (std::size_t c = 0; c < names.size(); ++c) cols.push_back(c);
        return cols;
    }
    for (const std::string& t : config.targets) {
        const auto it = std::find(names.begin(), names.end(), t);
        if (it == names.end()) throw ConfigError(fmt::format("target '{}' is not a column of the data", t));
        cols.push_back(static_cast<std::size_t>(it - names.begin()));
    }
    return cols;
}

bool trained(Variant v) { return v != Variant::Knn; }

void write_config_copy(const ExperimentConfig& config, const RunOptions& options) {
    write_text(options.out / "config.json", config_to_json(config));
}

std::vector<std::exception_ptr> collect_parallel(std::size_t count, std::size_t jobs,
                                                 const std::function<void(std::size_t)>& task) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                task(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, count));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    return errors;
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct BestRecord {
    std::size_t n = 0;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
};

BestRecord read_best(const fs::path& run_dir, Variant variant) {
    const Json j = read_json(run_dir / "best.json");
    try {
        if (j.at("variant").get<std::string>() != to_string(variant))
            throw DataError(fmt::format("'{}' belongs to another model", (run_dir / "best.json").string()));
        return {j.at("n").get<std::size_t>(), j.at("best_epoch").get<std::size_t>(),
                j.at("best_val_loss").get<double>()};
    } catch (const Json::exception& e) {
        throw DataError(fmt::format("malformed '{}': {}", (run_dir / "best.json").string(), e.what()));
    }
}

ModelParams load_best_params(const RunPaths& paths, const Scenario& s, Variant v, std::size_t rep,
                             const ModelDims& expect) {
    const BestRecord best = read_best(paths.run_dir(s, v, rep), v);
    const fs::path file = paths.candidate_dir(s, v, rep, best.n) / "checkpoint.txt";
    ModelParams params = load_checkpoint(file);
    const ModelDims want{best.n, expect.T, expect.K, expect.K_out};
    if (params.variant() != v || params.dims() != want)
        throw DataError(fmt::format("checkpoint '{}' holds {} n={} T={} K={} K_out={}, expected {} n={} T={} K={} K_out={}",
                                    file.string(), to_string(params.variant()), params.dims().n,
                                    params.dims().T, params.dims().K, params.dims().K_out,
                                    to_string(v), want.n, want.T, want.K, want.K_out));
    return params;
}

TrainConfig run_config(const ExperimentConfig& config, Variant v, std::size_t n, std::size_t rep) {
    TrainConfig tc = config.training;
    tc.variant = v;
    tc.n = n;
    tc.seed = training_seed(config, rep);
    tc.candidates.clear();
    if (v == Variant::Rnn || v == Variant::Lstm) tc.lr_max = tc.lr_min = config.baseline_lr;
    return tc;
}

std::string g17(double v) { return fmt::format("{:.17g}", v); }

}  // namespace

std::vector<Scenario> expand_scenarios(const ExperimentConfig& config) {
    std::vector<Scenario> out;
    if (config.data.source == DataSource::Csv) {
        for (std::size_t T : config.T) out.push_back({fmt::format("T{}", T), 0, T, 0});
        return out;
    }
    for (std::size_t K : config.data.K)
        for (std::size_t T : config.T)
            for (std::size_t L : config.data.L)
                out.push_back({fmt::format("K{}_T{}_L{}", K, T, L), K, T, L});
    return out;
}

std::uint64_t data_seed(const ExperimentConfig& config, std::size_t rep) {
    return derive_seed(derive_seed(config.seed, 1), rep);
}

std::uint64_t training_seed(const ExperimentConfig& config, std::size_t rep) {
    return derive_seed(derive_seed(config.seed, 2), rep);
}

fs::path RunPaths::data_dir(const Scenario& s, std::size_t rep) const {
    return scenario(s) / "data" / rep_label(rep);
}

fs::path RunPaths::series(const ExperimentConfig& c, const Scenario& s, std::size_t rep) const {
    return c.data.source == DataSource::Csv ? c.data.csv : data_dir(s, rep) / "series.csv";
}

fs::path RunPaths::truth(const Scenario& s, std::size_t rep) const {
    return data_dir(s, rep) / "truth.json";
}

fs::path RunPaths::run_dir(const Scenario& s, Variant v, std::size_t rep) const {
    return scenario(s) / "runs" / std::string(to_string(v)) / rep_label(rep);
}

fs::path RunPaths::candidate_dir(const Scenario& s, Variant v, std::size_t rep, std::size_t n) const {
    return run_dir(s, v, rep) / fmt::format("n_{}", n);
}

PreparedData prepare_data(const ExperimentConfig& config, const Scenario& scenario, std::size_t rep,
                          const RunPaths& paths, bool audit) {
    CsvTable table = load_csv(paths.series(config, scenario, rep));
    if (table.values.rows() == 0) throw DataError("data file has no rows");
    const PreprocessSpec& pre = config.preprocess;
    if (pre.interpolate) {
        table.values = linear_interpolate_missing(table.values);
    } else {
        for (double v : table.values.values())
            if (is_missing(v)) throw DataError("data has missing values and interpolation is disabled");
    }
    std::vector<std::size_t> targets = resolve_targets(config, table.names);
    if (pre.max_zeros || pre.drop_constant) {
        std::vector<std::string> target_names;
        for (std::size_t c : targets) target_names.push_back(table.names[c]);
        table = drop_sparse_or_constant(table, targets,
                                        pre.max_zeros.value_or(std::numeric_limits<std::size_t>::max()),
                                        pre.drop_constant);
        targets.clear();
        for (const std::string& name : target_names) targets.push_back(table.column_index(name));
    }
    if (pre.moving_average > 0) table.values = moving_average(table.values, pre.moving_average);

    const std::size_t L = table.values.rows();
    const SplitBounds split = config.split.counts
                                  ? split_by_counts(L, (*config.split.counts)[0], (*config.split.counts)[1],
                                                    (*config.split.counts)[2])
                                  : split_by_fractions(L, config.split.fractions[0], config.split.fractions[1],
                                                       config.split.fractions[2]);
    PreparedData out;
    for (std::size_t c : targets) out.target_names.push_back(table.names[c]);
    out.target_columns = targets;
    out.dataset = make_dataset(std::move(table.values), std::move(table.names), split);
    if (pre.zscore) out.dataset = zscore(out.dataset);
    if (audit)
        for (std::size_t r = split.val_end; r < split.total; ++r)
            for (double& v : out.dataset.series.row(r)) v = kMissing;
    out.windows = make_windows(out.dataset, scenario.T, out.target_columns);
    return out;
}

void run_parallel(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
    rethrow_first(collect_parallel(count, jobs, task));
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) throw ContractError("mean_std: no values");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

void cmd_generate(const ExperimentConfig& config, const RunOptions& options) {
    write_config_copy(config, options);
    if (config.data.source == DataSource::Csv) {
        load_csv(config.data.csv);
        log(options, "csv source {}: nothing to generate", config.data.csv.string());
        return;
    }
    const RunPaths paths{options.out};
    const auto scenarios = expand_scenarios(config);
    const std::size_t R = config.repetitions;
    run_parallel(scenarios.size() * R, options.jobs, [&](std::size_t i) {
        const Scenario& s = scenarios[i / R];
        const std::size_t rep = i % R;
        const std::uint64_t seed = data_seed(config, rep);
        SeriesMatrix series;
        CouplingNetwork truth;
        try {
            if (config.data.source == DataSource::Henon) {
                HenonChain chain = gen_henon_chain(s.K, s.L, config.data.coupling, config.data.burn_in, seed);
                series = std::move(chain.series);
                truth = std::move(chain.network);
            } else {
                truth = gen_er_network(s.K, config.data.P, config.data.density, derive_seed(seed, 1));
                series = gen_var(truth, s.L, config.data.burn_in, derive_seed(seed, 2));
            }
        } catch (const GenerationError& e) {
            throw GenerationError(fmt::format("{} {} (seed {}): {}", s.name, rep_label(rep), seed, e.what()));
        }
        fs::create_directories(paths.data_dir(s, rep));
        save_csv(paths.series(config, s, rep), {generated_names(s.K), std::move(series)});
        save_network(paths.truth(s, rep), truth);
        log(options, "generated {} {}", s.name, rep_label(rep));
    });
}

void cmd_train(const ExperimentConfig& config, const RunOptions& options) {
    write_config_copy(config, options);
    const RunPaths paths{options.out};
    const auto scenarios = expand_scenarios(config);

    struct Task {
        std::size_t scenario, rep, model, n;
    };
    struct Group {
        std::size_t scenario, rep, model;
        std::vector<std::size_t> tasks;
    };
    std::vector<Task> tasks;
    std::vector<Group> groups;
    for (std::size_t s = 0; s < scenarios.size(); ++s)
        for (std::size_t rep = 0; rep < config.repetitions; ++rep)
            for (std::size_t m = 0; m < config.models.size(); ++m) {
                if (!trained(config.models[m].variant)) continue;
                Group g{s, rep, m, {}};
                for (std::size_t n : config.models[m].grid) {
                    g.tasks.push_back(tasks.size());
                    tasks.push_back({s, rep, m, n});
                }
                groups.push_back(std::move(g));
            }

    std::vector<TrainHistory> results(tasks.size());
    const auto errors = collect_parallel(tasks.size(), options.jobs, [&](std::size_t i) {
        const Task& t = tasks[i];
        const Scenario& s = scenarios[t.scenario];
        const Variant v = config.models[t.model].variant;
        const PreparedData data = prepare_data(config, s, t.rep, paths, options.audit);
        TrainHistory h = train(data.windows, run_config(config, v, t.n, t.rep));
        const fs::path dir = paths.candidate_dir(s, v, t.rep, t.n);
        fs::create_directories(dir);
        save_checkpoint(dir / "checkpoint.txt", h.best_params);
        save_history(dir / "history.csv", h);
        log(options, "trained {} {} {} n={}: best validation MSE {:.6g} at epoch {}", s.name,
            to_string(v), rep_label(t.rep), t.n, h.best_val_loss, h.best_epoch);
        h.best_params = ModelParams();
        results[i] = std::move(h);
    });

    for (const Group& g : groups) {
        bool complete = true;
        std::vector<TrainHistory> runs;
        for (std::size_t i : g.tasks) {
            complete &= !errors[i];
            runs.push_back(results[i]);
        }
        if (!complete) continue;
        const TrainHistory& best = runs[select_best(runs)];
        const Variant v = config.models[g.model].variant;
        Json j;
        j["variant"] = std::string(to_string(v));
        j["n"] = best.n;
        j["best_epoch"] = best.best_epoch;
        j["best_val_loss"] = best.best_val_loss;
        j["seed"] = best.seed;
        write_text(paths.run_dir(scenarios[g.scenario], v, g.rep) / "best.json", j.dump(2) + "\n");
    }
    rethrow_first(errors);
}

void cmd_evaluate(const ExperimentConfig& config, const RunOptions& options) {
    write_config_copy(config, options);
    const RunPaths paths{options.out};
    const auto scenarios = expand_scenarios(config);
    const std::size_t M = config.models.size(), R = config.repetitions;

    std::vector<EvalReport> reports(scenarios.size() * R * M);
    run_parallel(reports.size(), options.jobs, [&](std::size_t i) {
        const Scenario& s = scenarios[i / (R * M)];
        const std::size_t rep = (i / M) % R;
        const Variant v = config.models[i % M].variant;
        const PreparedData data = prepare_data(config, s, rep, paths);
        const std::size_t K = data.dataset.series.cols();

        SeriesMatrix predictions;
        std::optional<ModelParams> params;
        if (trained(v)) {
            params = load_best_params(paths, s, v, rep, {0, s.T, K, data.target_columns.size()});
            predictions = forecast(*params, data.windows.test);
        } else {
            predictions = knn_forecast(data.windows.train, data.windows.test, config.knn_neighbors);
        }
        const RunInfo info{v, params ? params->dims().n : 0, s.T, training_seed(config, rep)};
        EvalReport report = score_forecasts(info, data.target_names, data.target_columns, predictions,
                                            data.windows.test, data.dataset.normalization);
        if (params && is_lavarnet_family(v)) {
            const fs::path truth_file = paths.truth(s, rep);
            std::optional<CouplingNetwork> truth;
            if (config.data.source != DataSource::Csv && fs::exists(truth_file)) truth = load_network(truth_file);
            attach_interpretation(report, attention_matrices(*params), truth ? &*truth : nullptr);
        }
        const fs::path dir = paths.run_dir(s, v, rep);
        fs::create_directories(dir);
        emit_report(report, dir / "report.json");

        std::vector<PredictionRow> rows;
        const auto& norm = data.dataset.normalization;
        for (std::size_t k = 0; k < data.windows.test.size(); ++k) {
            const WindowSample& sample = data.windows.test[k];
            for (std::size_t j = 0; j < data.target_columns.size(); ++j) {
                const std::size_t col = data.target_columns[j];
                const double actual = norm ? norm->inverse(col, sample.target[j]) : sample.target[j];
                const double pred = norm ? norm->inverse(col, predictions(k, j)) : predictions(k, j);
                rows.push_back({sample.target_row, data.target_names[j], actual, pred});
            }
        }
        save_predictions(dir / "predictions.csv", rows);
        log(options, "evaluated {} {} {}: MAE {:.6g}", s.name, to_string(v), rep_label(rep), report.avg_mae_orig);
        reports[i] = std::move(report);
    });

    std::string summary = "scenario,model,runs,mae_mean,mae_std,mae_norm_mean,mae_norm_std\n";
    for (std::size_t si = 0; si < scenarios.size(); ++si)
        for (std::size_t m = 0; m < M; ++m) {
            std::vector<double> orig, norm;
            for (std::size_t rep = 0; rep < R; ++rep) {
                const EvalReport& r = reports[(si * R + rep) * M + m];
                orig.push_back(r.avg_mae_orig);
                norm.push_back(r.avg_mae_norm);
            }
            const MeanStd a = mean_std(orig), b = mean_std(norm);
            summary += fmt::format("{},{},{},{},{},{},{}\n", scenarios[si].name,
                                   to_string(config.models[m].variant), R, g17(a.mean), g17(a.std),
                                   g17(b.mean), g17(b.std));
        }
    write_text(options.out / "summary.csv", summary);
}

void cmd_interpret(const ExperimentConfig& config, const RunOptions& options) {
    write_config_copy(config, options);
    std::vector<Variant> models;
    for (const ModelSpec& m : config.models)
        if (is_lavarnet_family(m.variant)) models.push_back(m.variant);
    if (models.empty()) throw ConfigError("interpret needs at least one LAVARNET-family model");
    if (config.data.source == DataSource::Csv) throw DataError("a csv source has no ground-truth network");

    const RunPaths paths{options.out};
    const auto scenarios = expand_scenarios(config);
    const std::size_t M = models.size(), R = config.repetitions;
    std::vector<InterpretScore> scores(scenarios.size() * R * M);
    run_parallel(scores.size(), options.jobs, [&](std::size_t i) {
        const Scenario& s = scenarios[i / (R * M)];
        const std::size_t rep = (i / M) % R;
        const Variant v = models[i % M];
        const fs::path truth_file = paths.truth(s, rep);
        if (!fs::exists(truth_file))
            throw DataError(fmt::format("missing ground-truth file '{}'", truth_file.string()));
        const CouplingNetwork truth = load_network(truth_file);
        const auto names = generated_names(truth.K());
        const std::vector<std::size_t> targets = resolve_targets(config, names);
        const ModelParams params = load_best_params(paths, s, v, rep, {0, s.T, truth.K(), targets.size()});
        const std::vector<Tensor> A = attention_matrices(params);
        scores[i] = score_interpretation(truth, A, targets);

        const fs::path dir = paths.run_dir(s, v, rep);
        for (std::size_t j = 0; j < A.size(); ++j) {
            std::string csv = "lag";
            for (const std::string& n : names) csv += "," + n;
            csv += "\n";
            for (std::size_t lag = 1; lag <= s.T; ++lag) {
                csv += std::to_string(lag);
                for (std::size_t k = 0; k < truth.K(); ++k) csv += "," + g17(A[j].at(s.T - lag, k));
                csv += "\n";
            }
            write_text(dir / fmt::format("A_{}.csv", names[targets[j]]), csv);
        }
        log(options, "interpreted {} {} {}: R_L {:.4f} R_V {:.4f}", s.name, to_string(v), rep_label(rep),
            scores[i].r_l, scores[i].r_v);
    });

    std::string runs = "scenario,model,rep,r_l,r_v\n";
    std::string summary = "scenario,model,runs,r_l_mean,r_l_std,r_v_mean,r_v_std\n";
    for (std::size_t si = 0; si < scenarios.size(); ++si)
        for (std::size_t m = 0; m < M; ++m) {
            std::vector<double> rl, rv;
            for (std::size_t rep = 0; rep < R; ++rep) {
                const InterpretScore& sc = scores[(si * R + rep) * M + m];
                rl.push_back(sc.r_l);
                rv.push_back(sc.r_v);
                runs += fmt::format("{},{},{},{},{}\n", scenarios[si].name, to_string(models[m]), rep + 1,
                                    g17(sc.r_l), g17(sc.r_v));
            }
            const MeanStd a = mean_std(rl), b = mean_std(rv);
            summary += fmt::format("{},{},{},{},{},{},{}\n", scenarios[si].name, to_string(models[m]), R,
                                   g17(a.mean), g17(a.std), g17(b.mean), g17(b.std));
        }
    write_text(options.out / "interpret.csv", runs);
    write_text(options.out / "interpret_summary.csv", summary);
}

void cmd_bench(const ExperimentConfig& config, const RunOptions& options) {
    write_config_copy(config, options);
    const RunPaths paths{options.out};
    std::string runs = "scenario,model,n,epochs,realization,seconds,best_val_loss\n";
    std::string summary = "scenario,model,n,epochs,realizations,mean_seconds,std_seconds\n";
    // Timed runs stay on one thread so they do not compete for cores.
    for (const Scenario& s : expand_scenarios(config)) {
        const PreparedData data = prepare_data(config, s, 0, paths);
        for (const ModelSpec& m : config.models) {
            if (!trained(m.variant)) continue;
            TrainConfig tc = run_config(config, m.variant, m.grid.front(), 0);
            tc.epochs = config.bench.epochs;
            std::vector<double> seconds;
            for (std::size_t r = 0; r < config.bench.realizations; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                const TrainHistory h = train(data.windows, tc);
                const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                seconds.push_back(dt);
                runs += fmt::format("{},{},{},{},{},{:.6f},{}\n", s.name, to_string(m.variant), tc.n, tc.epochs,
                                    r + 1, dt, g17(h.best_val_loss));
                log(options, "bench {} {} realization {}: {:.3f} s", s.name, to_string(m.variant), r + 1, dt);
            }
            const MeanStd ms = mean_std(seconds);
            summary += fmt::format("{},{},{},{},{},{:.6f},{:.6f}\n", s.name, to_string(m.variant), tc.n,
                                   tc.epochs, seconds.size(), ms.mean, ms.std);
        }
    }
    write_text(options.out / "bench_runs.csv", runs);
    write_text(options.out / "bench.csv", summary);
}

}  // namespace lavarnet
