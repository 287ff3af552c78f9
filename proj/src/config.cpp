#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "lavarnet/errors.hpp"
#include "lavarnet/experiment.hpp"

namespace lavarnet {

namespace {

using Json = nlohmann::ordered_json;

// Walks one JSON object, remembering which keys were read so leftovers can
// be reported as unknown.
class ObjectReader {
public:
    ObjectReader(const Json& json, std::string path) : json_(json), path_(std::move(path)) {
        if (!json_.is_object()) throw ConfigError(fmt::format("{} must be an object", where()));
    }

    const Json* find(const std::string& key) {
        seen_.insert(key);
        const auto it = json_.find(key);
        return it == json_.end() || it->is_null() ? nullptr : &*it;
    }

    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    std::size_t count(const std::string& key, std::size_t fallback, std::size_t min = 0) {
        const Json* v = find(key);
        return v ? as_count(*v, key_path(key), min) : fallback;
    }

    double number(const std::string& key, double fallback) {
        const Json* v = find(key);
        if (!v) return fallback;
        if (!v->is_number()) throw ConfigError(fmt::format("{} must be a number", key_path(key)));
        return v->get<double>();
    }

    bool boolean(const std::string& key, bool fallback) {
        const Json* v = find(key);
        if (!v) return fallback;
        if (!v->is_boolean()) throw ConfigError(fmt::format("{} must be true or false", key_path(key)));
        return v->get<bool>();
    }

    std::string string(const std::string& key, const std::string& fallback) {
        const Json* v = find(key);
        if (!v) return fallback;
        if (!v->is_string()) throw ConfigError(fmt::format("{} must be a string", key_path(key)));
        return v->get<std::string>();
    }

    // A single count or a non-empty array of counts.
    std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback,
                                    std::size_t min = 0) {
        const Json* v = find(key);
        if (!v) return fallback;
        if (!v->is_array()) return {as_count(*v, key_path(key), min)};
        if (v->empty()) throw ConfigError(fmt::format("{} must not be empty", key_path(key)));
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < v->size(); ++i)
            out.push_back(as_count((*v)[i], fmt::format("{}[{}]", key_path(key), i), min));
        return out;
    }

    void finish() const {
        for (const auto& [key, value] : json_.items())
            if (!seen_.contains(key)) throw ConfigError(fmt::format("unknown key {}", key_path(key)));
    }

    static std::size_t as_count(const Json& v, const std::string& path, std::size_t min) {
        if (!v.is_number_unsigned())
            throw ConfigError(fmt::format("{} must be a non-negative integer", path));
        const auto n = v.get<std::uint64_t>();
        if (n < min) throw ConfigError(fmt::format("{} must be at least {}", path, min));
        return static_cast<std::size_t>(n);
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const Json& json_;
    std::string path_;
    std::set<std::string> seen_;
};

DataSource parse_source(const std::string& s) {
    if (s == "henon") return DataSource::Henon;
    if (s == "var") return DataSource::Var;
    if (s == "csv") return DataSource::Csv;
    throw ConfigError(fmt::format("data.source must be henon, var or csv, got '{}'", s));
}

const char* source_name(DataSource s) {
    switch (s) {
        case DataSource::Henon: return "henon";
        case DataSource::Var: return "var";
        case DataSource::Csv: return "csv";
    }
    return "?";
}

Variant parse_model_variant(const std::string& name, const std::string& path) {
    try {
        return parse_variant(name);
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("{}: unknown model '{}'", path, name));
    }
}

void read_data(ObjectReader& r, DataSpec& d) {
    d.source = parse_source(r.string("source", source_name(d.source)));
    d.K = r.counts("K", d.K, 1);
    d.L = r.counts("L", d.L, 1);
    d.coupling = r.number("coupling", d.coupling);
    d.P = r.count("P", d.P, 1);
    d.density = r.number("density", d.density);
    d.burn_in = r.count("burn_in", d.burn_in);
    d.csv = r.string("path", d.csv.string());
    if (d.density < 0.0 || d.density > 1.0) throw ConfigError("data.density must lie in [0, 1]");
    if (d.source == DataSource::Csv && d.csv.empty())
        throw ConfigError("data.path is required for a csv source");
}

void read_preprocess(ObjectReader& r, PreprocessSpec& p) {
    p.interpolate = r.boolean("interpolate", p.interpolate);
    if (const Json* v = r.find("max_zeros")) p.max_zeros = ObjectReader::as_count(*v, r.key_path("max_zeros"), 0);
    p.drop_constant = r.boolean("drop_constant", p.drop_constant);
    p.moving_average = r.count("moving_average", p.moving_average);
    p.zscore = r.boolean("zscore", p.zscore);
}

void read_split(ObjectReader& r, SplitSpec& s) {
    const Json* f = r.find("fractions");
    const Json* c = r.find("counts");
    if (f && c) throw ConfigError("split takes fractions or counts, not both");
    if (f) {
        if (!f->is_array() || f->size() != 3) throw ConfigError("split.fractions must hold three numbers");
        for (std::size_t i = 0; i < 3; ++i) {
            if (!(*f)[i].is_number()) throw ConfigError("split.fractions must hold three numbers");
            s.fractions[i] = (*f)[i].get<double>();
        }
        const double sum = s.fractions[0] + s.fractions[1] + s.fractions[2];
        if (std::abs(sum - 1.0) > 1e-9 || *std::min_element(s.fractions.begin(), s.fractions.end()) <= 0.0)
            throw ConfigError("split.fractions must be positive and sum to 1");
        s.counts.reset();
    }
    if (c) {
        if (!c->is_array() || c->size() != 3) throw ConfigError("split.counts must hold three integers");
        std::array<std::size_t, 3> counts{};
        for (std::size_t i = 0; i < 3; ++i)
            counts[i] = ObjectReader::as_count((*c)[i], fmt::format("split.counts[{}]", i), 1);
        s.counts = counts;
    }
}

void read_training(ObjectReader& r, ExperimentConfig& c, std::vector<std::size_t>& grid) {
    TrainConfig& t = c.training;
    t.epochs = r.count("epochs", t.epochs, 1);
    t.batch_size = r.count("batch_size", t.batch_size, 1);
    t.lr_max = r.number("lr_max", t.lr_max);
    t.lr_min = r.number("lr_min", t.lr_min);
    c.baseline_lr = r.number("baseline_lr", c.baseline_lr);
    grid = r.counts("grid", grid, 1);
    if (const Json* a = r.find("adam")) {
        ObjectReader ar(*a, r.key_path("adam"));
        t.adam.beta1 = ar.number("beta1", t.adam.beta1);
        t.adam.beta2 = ar.number("beta2", t.adam.beta2);
        t.adam.epsilon = ar.number("epsilon", t.adam.epsilon);
        ar.finish();
    }
    if (!(t.lr_min > 0.0) || !(t.lr_min <= t.lr_max))
        throw ConfigError("training needs 0 < lr_min <= lr_max");
    if (!(c.baseline_lr > 0.0)) throw ConfigError("training.baseline_lr must be positive");
    const AdamConfig& a = t.adam;
    if (!(a.beta1 >= 0.0 && a.beta1 < 1.0) || !(a.beta2 >= 0.0 && a.beta2 < 1.0) || !(a.epsilon > 0.0))
        throw ConfigError("training.adam needs beta1, beta2 in [0, 1) and epsilon > 0");
}

void read_models(const Json& models, ExperimentConfig& c, const std::vector<std::size_t>& grid) {
    if (!models.is_array() || models.empty()) throw ConfigError("models must be a non-empty array");
    c.models.clear();
    for (std::size_t i = 0; i < models.size(); ++i) {
        const std::string path = fmt::format("models[{}]", i);
        ModelSpec spec;
        if (models[i].is_string()) {
            spec.variant = parse_model_variant(models[i].get<std::string>(), path);
            spec.grid = grid;
        } else {
            ObjectReader mr(models[i], path);
            const std::string name = mr.string("variant", "");
            if (name.empty()) throw ConfigError(fmt::format("{}.variant is required", path));
            spec.variant = parse_model_variant(name, path);
            spec.grid = mr.counts("grid", grid, 1);
            mr.finish();
        }
        if (spec.variant == Variant::Knn) spec.grid.clear();
        for (const ModelSpec& other : c.models)
            if (other.variant == spec.variant)
                throw ConfigError(fmt::format("{}: model '{}' listed twice", path, to_string(spec.variant)));
        c.models.push_back(std::move(spec));
    }
}

void check_targets(const ExperimentConfig& c) {
    if (c.data.source == DataSource::Csv) return;  // checked against the file header
    for (std::size_t K : c.data.K)
        for (const std::string& t : c.targets) {
            bool found = false;
            for (std::size_t k = 1; k <= K; ++k) found |= t == fmt::format("x{}", k);
            if (!found) throw ConfigError(fmt::format("target '{}' does not exist for K = {}", t, K));
        }
}

Json parse_json(std::string_view text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(fmt::format("{}: {}", source, e.what()));
    }
}

ExperimentConfig config_from(const Json& json) {
    ExperimentConfig c;
    ObjectReader r(json, "");
    c.name = r.string("name", c.name);
    if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos)
        throw ConfigError("name must be a non-empty string without path separators");
    if (const Json* d = r.find("data")) {
        ObjectReader dr(*d, "data");
        read_data(dr, c.data);
        dr.finish();
    }
    if (const Json* p = r.find("preprocess")) {
        ObjectReader pr(*p, "preprocess");
        read_preprocess(pr, c.preprocess);
        pr.finish();
    }
    if (const Json* s = r.find("split")) {
        ObjectReader sr(*s, "split");
        read_split(sr, c.split);
        sr.finish();
    }
    c.T = r.counts("T", c.T, 1);
    if (const Json* t = r.find("targets")) {
        if (t->is_string() && t->get<std::string>() == "all") {
            c.targets.clear();
        } else if (t->is_array() && !t->empty()) {
            for (const Json& name : *t) {
                if (!name.is_string()) throw ConfigError("targets must be \"all\" or a list of column names");
                c.targets.push_back(name.get<std::string>());
            }
        } else {
            throw ConfigError("targets must be \"all\" or a non-empty list of column names");
        }
    }
    std::vector<std::size_t> grid{20};
    if (const Json* t = r.find("training")) {
        ObjectReader tr(*t, "training");
        read_training(tr, c, grid);
        tr.finish();
    }
    if (const Json* m = r.find("models")) {
        read_models(*m, c, grid);
    } else {
        read_models(Json::array({"lavarnet"}), c, grid);
    }
    c.knn_neighbors = r.count("knn_neighbors", c.knn_neighbors, 1);
    c.repetitions = r.count("repetitions", c.repetitions, 1);
    if (const Json* s = r.find("seed")) {
        if (!s->is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
        c.seed = s->get<std::uint64_t>();
    }
    if (const Json* b = r.find("bench")) {
        ObjectReader br(*b, "bench");
        c.bench.epochs = br.count("epochs", c.bench.epochs, 1);
        c.bench.realizations = br.count("realizations", c.bench.realizations, 1);
        br.finish();
    }
    r.finish();
    check_targets(c);
    return c;
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
    return config_from(parse_json(json_text, "config"));
}

std::string config_to_json(const ExperimentConfig& c) {
    Json j;
    j["name"] = c.name;
    Json d;
    d["source"] = source_name(c.data.source);
    d["K"] = c.data.K;
    d["L"] = c.data.L;
    d["coupling"] = c.data.coupling;
    d["P"] = c.data.P;
    d["density"] = c.data.density;
    d["burn_in"] = c.data.burn_in;
    if (!c.data.csv.empty()) d["path"] = c.data.csv.string();
    j["data"] = d;
    Json p;
    p["interpolate"] = c.preprocess.interpolate;
    p["max_zeros"] = c.preprocess.max_zeros ? Json(*c.preprocess.max_zeros) : Json(nullptr);
    p["drop_constant"] = c.preprocess.drop_constant;
    p["moving_average"] = c.preprocess.moving_average;
    p["zscore"] = c.preprocess.zscore;
    j["preprocess"] = p;
    if (c.split.counts)
        j["split"] = {{"counts", *c.split.counts}};
    else
        j["split"] = {{"fractions", c.split.fractions}};
    j["T"] = c.T;
    j["targets"] = c.targets.empty() ? Json("all") : Json(c.targets);
    Json t;
    t["epochs"] = c.training.epochs;
    t["batch_size"] = c.training.batch_size;
    t["lr_max"] = c.training.lr_max;
    t["lr_min"] = c.training.lr_min;
    t["baseline_lr"] = c.baseline_lr;
    t["adam"] = {{"beta1", c.training.adam.beta1},
                 {"beta2", c.training.adam.beta2},
                 {"epsilon", c.training.adam.epsilon}};
    j["training"] = t;
    Json models = Json::array();
    for (const ModelSpec& m : c.models) {
        Json e;
        e["variant"] = std::string(to_string(m.variant));
        if (m.variant != Variant::Knn) e["grid"] = m.grid;
        models.push_back(e);
    }
    j["models"] = models;
    j["knn_neighbors"] = c.knn_neighbors;
    j["repetitions"] = c.repetitions;
    j["seed"] = c.seed;
    j["bench"] = {{"epochs", c.bench.epochs}, {"realizations", c.bench.realizations}};
    return j.dump(2) + "\n";
}

std::string preset_json(std::string_view name) {
    if (name == "desk") {
        return R"({
  "name": "henon-desk",
  "data": {"source": "henon", "K": 5, "L": 2000, "coupling": 0.3},
  "T": 5,
  "targets": "all",
  "models": ["lavarnet", "rnn", "knn"],
  "training": {"epochs": 70, "batch_size": 64, "grid": [20]},
  "repetitions": 5,
  "bench": {"epochs": 70, "realizations": 3}
})";
    }
    if (name == "full") {
        return R"({
  "name": "henon-full",
  "data": {"source": "henon", "K": [5, 10, 15],
           "L": [200, 500, 1000, 2000, 3000, 4000, 5000, 6000, 7000, 8000, 9000, 10000],
           "coupling": 0.3},
  "T": [3, 5, 10, 15],
  "targets": "all",
  "models": ["lavarnet", "rlavarnet", "frlavarnet", "rnn", "lstm", "knn"],
  "training": {"epochs": 70, "batch_size": 64, "grid": [100]},
  "repetitions": 5,
  "bench": {"epochs": 70, "realizations": 10}
})";
    }
    throw ConfigError(fmt::format("unknown preset '{}' (expected desk or full)", name));
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& path,
                             const std::optional<std::string>& preset) {
    Json merged = preset ? parse_json(preset_json(*preset), "preset") : Json::object();
    if (path) {
        std::ifstream in(*path, std::ios::binary);
        if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path->string()));
        std::stringstream text;
        text << in.rdbuf();
        Json file = parse_json(text.str(), path->string());
        if (!file.is_object()) throw ConfigError(fmt::format("{}: top level must be an object", path->string()));
        // relative CSV paths are taken relative to the config file
        if (file.contains("data") && file["data"].is_object() && file["data"].contains("path") &&
            file["data"]["path"].is_string()) {
            const std::filesystem::path csv = file["data"]["path"].get<std::string>();
            if (csv.is_relative()) file["data"]["path"] = (path->parent_path() / csv).string();
        }
        merged.merge_patch(file);
    }
    return config_from(merged);
}

}  // namespace lavarnet
