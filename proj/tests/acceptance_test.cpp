// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "lavarnet/checkpoint.hpp"
#include "lavarnet/evaluation.hpp"
#include "lavarnet/experiment.hpp"
#include "lavarnet/training.hpp"
#include "test_support.hpp"

using namespace lavarnet;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = LAVARNET_FIXTURES;

int failures = 0;
int ran = 0;
std::vector<int> selected;  // empty = all

void report(int id, const char* title, bool pass, const std::string& detail, double seconds) {
    if (!pass) ++failures;
    std::printf("%s [%d] %s: %s (%.1f s)\n", pass ? "PASS" : "FAIL", id, title, detail.c_str(), seconds);
    std::fflush(stdout);
}

template <typename F>
void criterion(int id, const char* title, F&& body) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) return;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        pass = body(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    report(id, title, pass, detail, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

fs::path work_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "lavarnet_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunOptions options(const fs::path& out) {
    RunOptions o;
    o.out = out;
    o.jobs = std::max(1u, std::thread::hardware_concurrency());
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> read_rows(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

// Test-set MAE of every repetition, per model, from the written reports.
std::map<std::string, std::vector<double>> run_maes(const ExperimentConfig& c, const fs::path& out,
                                                    const Scenario& s) {
    std::map<std::string, std::vector<double>> maes;
    const RunPaths paths{out};
    for (const ModelSpec& m : c.models)
        for (std::size_t rep = 0; rep < c.repetitions; ++rep)
            maes[std::string(to_string(m.variant))].push_back(
                read_report(paths.run_dir(s, m.variant, rep) / "report.json").avg_mae_orig);
    return maes;
}

double mean(const std::vector<double>& v) { return mean_std(v).mean; }

bool gradients(std::string& detail) {
    const ModelDims dims{3, 4, 3, 2};
    Rng rng(2024);
    double worst = 0.0;
    std::string where;
    for (Variant v : {Variant::Lavarnet, Variant::RLavarnet, Variant::FRLavarnet, Variant::Rnn, Variant::Lstm}) {
        for (int instance = 0; instance < 20; ++instance) {
            const ModelParams p = testing::random_params(v, dims, rng, 1.0);
            const SeriesMatrix X = testing::random_window(rng, dims.T, dims.K);
            const std::vector<double> target{rng.uniform(-1, 1), rng.uniform(-1, 1)};
            const testing::GradientCheck g = testing::check_model_gradients(p, X, target);
            if (g.max_relative_error > worst) {
                worst = g.max_relative_error;
                where = fmt::format("{} instance {} {}", to_string(v), instance, g.worst);
            }
        }
    }
    detail = fmt::format("max relative error {:.3g} over 5 models x 20 instances (worst: {})", worst, where);
    return worst < 1e-4;
}

bool fixture_scores(std::string& detail) {
    const CouplingNetwork truth = load_network(kFixtures / "var6_target1_truth.json");
    const CsvTable table = load_csv(kFixtures / "var6_lag_weights.csv");
    Tensor A(Shape(3, 6));
    for (std::size_t lag = 1; lag <= 3; ++lag)
        for (std::size_t k = 0; k < 6; ++k) A.at(3 - lag, k) = table.values(lag - 1, k + 1);
    const std::vector<Tensor> weights{A};
    const std::vector<std::size_t> targets{0};
    const double rl = score_RL(truth, weights, targets), rv = score_RV(truth, weights, targets);
    detail = fmt::format("R_L = {:.17g}, R_V = {:.17g}", rl, rv);
    return rl == 10.0 / 12.0 && rv == 1.0;
}

bool henon_ordering(std::string& detail) {
    const fs::path out = work_dir("henon_desk");
    ExperimentConfig c = load_config(std::nullopt, "desk");
    c.models = {{Variant::Lavarnet, {20}}, {Variant::Rnn, {20}}, {Variant::Knn, {}}};
    c.training.epochs = 70;
    c.repetitions = 5;
    const RunOptions o = options(out);
    cmd_generate(c, o);
    cmd_train(c, o);
    cmd_evaluate(c, o);
    const auto maes = run_maes(c, out, expand_scenarios(c).front());
    const double lav = mean(maes.at("lavarnet")), rnn = mean(maes.at("rnn")), knn = mean(maes.at("knn"));
    detail = fmt::format("mean test MAE lavarnet {:.4f}, rnn {:.4f}, knn {:.4f}", lav, rnn, knn);
    return lav < rnn && lav < knn;
}

bool length_trend(std::string& detail) {
    const fs::path out = work_dir("henon_length");
    ExperimentConfig c = load_config(std::nullopt, "desk");
    c.data.L = {200, 1000, 5000};
    c.models = {{Variant::Lavarnet, {20}}};
    c.repetitions = 3;
    const RunOptions o = options(out);
    cmd_generate(c, o);
    cmd_train(c, o);
    cmd_evaluate(c, o);
    std::vector<std::vector<double>> by_length;
    for (const Scenario& s : expand_scenarios(c)) by_length.push_back(run_maes(c, out, s).at("lavarnet"));
    int violations = 0, seeds_over = 0;
    for (std::size_t rep = 0; rep < 3; ++rep) {
        const int v = (by_length[0][rep] <= by_length[1][rep]) + (by_length[1][rep] <= by_length[2][rep]);
        violations += v;
        seeds_over += v > 1;
    }
    const double m200 = mean(by_length[0]), m1000 = mean(by_length[1]), m5000 = mean(by_length[2]);
    detail = fmt::format("mean MAE L=200 {:.4f}, L=1000 {:.4f}, L=5000 {:.4f}; per-seed adjacent violations {}",
                         m200, m1000, m5000, violations);
    return m200 > m1000 && m1000 > m5000 && seeds_over == 0;
}

bool interpretability(std::string& detail) {
    const fs::path out = work_dir("var_interpret");
    ExperimentConfig c = parse_config(R"({"name": "var-interpret",
        "data": {"source": "var", "K": 6, "P": 3, "density": 0.4, "L": 5000},
        "preprocess": {"zscore": true}, "T": 3, "targets": "all",
        "models": [{"variant": "lavarnet", "grid": [20]}],
        "training": {"epochs": 70}, "repetitions": 10})");
    const RunOptions o = options(out);
    cmd_generate(c, o);
    cmd_train(c, o);
    cmd_interpret(c, o);
    const auto rows = read_rows(out / "interpret_summary.csv");
    const double rl = std::stod(rows.at(1).at(3)), rv = std::stod(rows.at(1).at(5));
    detail = fmt::format("mean R_L {:.4f} (need >= 0.60), mean R_V {:.4f} (need >= 0.85) over 10 runs", rl, rv);
    return rv >= 0.85 && rl >= 0.60;
}

bool cosine_endpoints(std::string& detail) {
    const double a = cosine_lr(0, 70, 1e-4, 0.01), b = cosine_lr(70, 70, 1e-4, 0.01);
    detail = fmt::format("eta(0) = {:.17g}, eta(E) = {:.17g}", a, b);
    return std::abs(a - 0.01) <= 1e-12 && std::abs(b - 1e-4) <= 1e-12;
}

bool adam_oracle(std::string& detail) {
    // f(x) = 0.5 x^T diag(a) x - c^T x, gradient a*x - c
    const std::vector<double> a{2.0, 0.5, 7.0, 1.0}, c{1.0, -3.0, 0.25, 0.0};
    auto grad = [&](const std::vector<double>& x) {
        std::vector<double> g(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = a[i] * x[i] - c[i];
        return g;
    };
    std::vector<double> x{0.3, -1.2, 2.0, 5.0}, y = x;
    std::vector<double> m(4, 0.0), v(4, 0.0);
    AdamState state;
    double worst = 0.0;
    for (int step = 1; step <= 10; ++step) {
        adam_step(x, grad(x), state, 0.01);
        const auto g = grad(y);
        for (std::size_t i = 0; i < 4; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            const double mh = m[i] / (1.0 - std::pow(0.9, step));
            const double vh = v[i] / (1.0 - std::pow(0.999, step));
            y[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        }
        for (std::size_t i = 0; i < 4; ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
    }
    detail = fmt::format("max coordinate difference {:.3g} over 10 steps", worst);
    return worst <= 1e-12;
}

bool knn_oracle(std::string& detail) {
    Rng rng(31337);
    const std::size_t N = 400, D = 15, Q = 100;
    std::vector<std::vector<double>> windows(N, std::vector<double>(D)), targets(N, std::vector<double>(2));
    for (std::size_t i = 0; i < N; ++i) {
        for (double& x : windows[i]) x = rng.uniform(-1, 1);
        for (double& y : targets[i]) y = rng.normal();
    }
    // a few duplicated windows force exact-distance ties
    windows[17] = windows[3];
    windows[250] = windows[3];
    std::size_t mismatches = 0;
    for (std::size_t q = 0; q < Q; ++q) {
        std::vector<double> query(D);
        if (q % 10 == 0) query = windows[3];
        else
            for (double& x : query) x = rng.uniform(-1, 1);
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t i = 0; i < N; ++i) {
            double d = 0.0;
            for (std::size_t j = 0; j < D; ++j) d += (query[j] - windows[i][j]) * (query[j] - windows[i][j]);
            all.emplace_back(d, i);
        }
        std::sort(all.begin(), all.end());
        std::vector<double> expect(2, 0.0);
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t j = 0; j < 2; ++j) expect[j] += targets[all[r].second][j];
        for (double& e : expect) e /= 5.0;
        mismatches += knn_predict(query, windows, targets, 5) != expect;
    }
    detail = fmt::format("{} of {} queries differ from brute force", mismatches, Q);
    return mismatches == 0;
}

// Full pipeline on a CSV fixture: rows at or after a cut are mutated and the
// run repeated.
bool leakage(std::string& detail) {
    const fs::path dir = work_dir("leakage");
    const CouplingNetwork net = gen_er_network(3, 2, 0.5, 7);
    const SeriesMatrix series = gen_var(net, 300, 1000, 8);
    const CsvTable fixture{{"a", "b", "c"}, series};
    save_csv(dir / "series.csv", fixture);
    const SplitBounds split = split_by_fractions(300);

    auto config_for = [&](const fs::path& csv) {
        return parse_config(fmt::format(R"({{"data": {{"source": "csv", "path": "{}"}},
            "preprocess": {{"zscore": true, "moving_average": 4}}, "T": 4,
            "models": [{{"variant": "rlavarnet", "grid": [3]}}, "knn"],
            "training": {{"epochs": 4, "batch_size": 16}}, "repetitions": 1}})", csv.string()));
    };
    auto pipeline = [&](const fs::path& csv, const fs::path& out, bool audit) {
        RunOptions o = options(out);
        o.audit = audit;
        const ExperimentConfig c = config_for(csv);
        cmd_train(c, o);
        cmd_evaluate(c, o);
    };
    const fs::path base = dir / "base";
    pipeline(dir / "series.csv", base, false);
    const std::string ckpt_rel = "T4/runs/rlavarnet/rep_1/n_3/checkpoint.txt";
    const std::string hist_rel = "T4/runs/rlavarnet/rep_1/n_3/history.csv";
    const std::string base_ckpt = slurp(base / ckpt_rel), base_hist = slurp(base / hist_rel);

    std::size_t changed = 0, checked = 0;
    // poisoned test rows during training
    pipeline(dir / "series.csv", dir / "audit", true);
    checked += 2;
    changed += slurp(dir / "audit" / ckpt_rel) != base_ckpt;
    changed += slurp(dir / "audit" / hist_rel) != base_hist;

    // mutate rows >= cut for cuts inside the test range; training must be
    // untouched and every prediction whose target row is <= cut unchanged
    Rng rng(99);
    for (std::size_t cut : {split.val_end, split.val_end + 5, split.val_end + 31, std::size_t{299}}) {
        CsvTable mutated = fixture;
        for (std::size_t r = cut; r < 300; ++r)
            for (double& v : mutated.values.row(r)) v = rng.uniform(-50, 50);
        const fs::path tag = dir / fmt::format("cut_{}", cut);
        fs::create_directories(tag);
        save_csv(tag / "series.csv", mutated);
        pipeline(tag / "series.csv", tag / "out", false);
        checked += 2;
        changed += slurp(tag / "out" / ckpt_rel) != base_ckpt;
        changed += slurp(tag / "out" / hist_rel) != base_hist;
        for (const char* model : {"rlavarnet", "knn"}) {
            const auto a = read_rows(base / "T4/runs" / model / "rep_1/predictions.csv");
            const auto b = read_rows(tag / "out/T4/runs" / model / "rep_1/predictions.csv");
            for (std::size_t i = 1; i < a.size(); ++i) {
                if (std::stoul(a[i][0]) > cut) continue;
                ++checked;
                changed += a[i][3] != b.at(i)[3];
            }
        }
    }

    // window level over the whole series (no normalization): every sample's
    // input is fixed once rows from its target on are mutated
    std::size_t window_checks = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t cut = 1 + rng.below(299);
        SeriesMatrix m = series;
        for (std::size_t r = cut; r < 300; ++r)
            for (double& v : m.row(r)) v = rng.normal() * 1e3;
        const std::vector<std::size_t> targets{0, 1, 2};
        auto windows = [&](const SeriesMatrix& s) {
            return make_windows(make_dataset(moving_average(s, 4), {"a", "b", "c"}, split), 4, targets);
        };
        const WindowedData wa = windows(series), wb = windows(m);
        const std::vector<WindowSample>* sa[] = {&wa.train, &wa.val, &wa.test};
        const std::vector<WindowSample>* sb[] = {&wb.train, &wb.val, &wb.test};
        for (int k = 0; k < 3; ++k)
            for (std::size_t i = 0; i < sa[k]->size(); ++i) {
                if ((*sa[k])[i].target_row > cut) continue;
                ++window_checks;
                changed += !((*sa[k])[i].input == (*sb[k])[i].input);
            }
    }
    detail = fmt::format("{} changed of {} pipeline comparisons and {} window comparisons", changed, checked,
                         window_checks);
    return changed == 0 && checked > 10 && window_checks > 100;
}

bool determinism(std::string& detail) {
    const fs::path dir = work_dir("determinism");
    const ExperimentConfig c = parse_config(R"({"name": "det", "data": {"source": "henon", "K": 3, "L": 400},
        "T": 4, "models": ["lavarnet", {"variant": "frlavarnet", "grid": [3, 5]}, "rnn", "lstm", "knn"],
        "training": {"epochs": 5, "grid": [4]}, "repetitions": 2, "seed": 77})");
    for (const char* run : {"one", "two"}) {
        RunOptions o = options(dir / run);
        o.jobs = std::string(run) == "one" ? 1 : 3;
        cmd_generate(c, o);
        cmd_train(c, o);
        cmd_evaluate(c, o);
    }
    std::size_t files = 0, differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(dir / "one")) {
        if (!e.is_regular_file()) continue;
        const fs::path rel = fs::relative(e.path(), dir / "one");
        ++files;
        differing += slurp(e.path()) != slurp(dir / "two" / rel);
    }
    detail = fmt::format("{} of {} output files differ between two pipeline runs", differing, files);
    return differing == 0 && files > 20;
}

bool parameter_law(std::string& detail) {
    std::size_t cases = 0, bad = 0;
    for (std::size_t n : {1, 2, 3, 5, 8, 20, 100})
        for (std::size_t K = 1; K <= 8; ++K)
            for (std::size_t T : {1, 3, 5})
                for (std::size_t K_out : {1, 2}) {
                    ++cases;
                    const std::size_t fr = param_count(Variant::FRLavarnet, n, T, K, K_out);
                    const std::size_t r = param_count(Variant::RLavarnet, n, T, K, K_out);
                    bad += fr - r != n * n * (K - 1);
                }
    std::size_t slot_bad = 0;
    for (Variant v : {Variant::Lavarnet, Variant::RLavarnet, Variant::FRLavarnet, Variant::Rnn, Variant::Lstm,
                      Variant::Knn}) {
        const ModelDims d{4, 3, 5, 2};
        const ModelParams p = init_params(v, d, 1);
        Graph g;
        const BoundParams bound(g, p, true);
        std::size_t slots = 0;
        if (v != Variant::Knn) {
            Rng rng(5);
            const Var loss = g.mse(forward(g, bound, testing::random_window(rng, d.T, d.K)),
                                   g.constant(std::vector<double>(d.K_out, 0.5)));
            g.backward(loss);
            for (Var var : g.parameters()) slots += g.grad(var).size();
        }
        slot_bad += slots != param_count(v, d.n, d.T, d.K, d.K_out);
    }
    detail = fmt::format("{} of {} (n, K, T, K_out) cases break the law; {} variants with slot mismatch", bad,
                         cases, slot_bad);
    return bad == 0 && slot_bad == 0;
}

}  // namespace

// Arguments optionally restrict the run to the given criterion numbers.
int main(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
    criterion(1, "gradient correctness", gradients);
    criterion(2, "lagged-weight fixture scores", fixture_scores);
    criterion(3, "Henon desk ordering", henon_ordering);
    criterion(4, "length trend", length_trend);
    criterion(5, "VAR interpretability levels", interpretability);
    criterion(6, "cosine schedule endpoints", cosine_endpoints);
    criterion(7, "Adam reference oracle", adam_oracle);
    criterion(8, "KNN brute-force oracle", knn_oracle);
    criterion(9, "leakage audit", leakage);
    criterion(10, "pipeline determinism", determinism);
    criterion(11, "parameter-count law", parameter_law);
    std::printf("%d of %d criteria failed\n", failures, ran);
    return failures == 0 ? 0 : 1;
}
