#include "egcn/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace egcn {

using nlohmann::json;

void train_config::validate() const {
    if (batch_size < 1) throw parameter_error("config: batch_size must be >= 1");
    if (!(lr > 0.0)) throw parameter_error("config: lr must be positive");
    if (decay_rate <= 0.0 || decay_rate > 1.0) {
        throw parameter_error("config: decay_rate must lie in (0, 1]");
    }
    if (decay_every < 1) throw parameter_error("config: decay_every must be >= 1");
    if (max_epochs < 1) throw parameter_error("config: max_epochs must be >= 1");
    if (k_hops < 1) throw parameter_error("config: K must be >= 1");
    if (folds < 2) throw parameter_error("config: folds must be >= 2");
    if (val_fraction < 0.0 || val_fraction >= 1.0) {
        throw parameter_error("config: val_fraction must lie in [0, 1)");
    }
    for (double w : task_weights) {
        if (w < 0.0) throw parameter_error("config: task weights must be >= 0");
    }
}

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& key) {
    std::vector<double> out;
    for (const std::string& item : split_csv(s)) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw parameter_error("config override: bad number '" + item + "' for key '" + key + "'");
        }
    }
    return out;
}

/// Accepts either a scalar or an array for the per-layer metric knobs.
void read_scalar_or_list(const json& j, const char* key, double& scalar,
                         std::vector<double>& per_layer) {
    if (!j.contains(key)) return;
    if (j.at(key).is_array()) {
        per_layer = j.at(key).get<std::vector<double>>();
    } else {
        scalar = j.at(key).get<double>();
    }
}

} // namespace

train_config config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw parameter_error(std::string("config: malformed JSON: ") + e.what());
    }
    train_config cfg;
    try {
        if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<index_t>();
        if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
        if (j.contains("decay_rate")) cfg.decay_rate = j.at("decay_rate").get<double>();
        if (j.contains("decay_every")) cfg.decay_every = j.at("decay_every").get<index_t>();
        if (j.contains("max_epochs")) cfg.max_epochs = j.at("max_epochs").get<index_t>();
        if (j.contains("K")) cfg.k_hops = j.at("K").get<index_t>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("task_type")) {
            cfg.type = task_type_from_string(j.at("task_type").get<std::string>());
        }
        if (j.contains("architecture")) {
            cfg.architecture = j.at("architecture").get<std::vector<std::string>>();
        }
        read_scalar_or_list(j, "mix_sigma", cfg.mix_sigma, cfg.mix_sigma_per_layer);
        read_scalar_or_list(j, "gaussian_sigma", cfg.gaussian_sigma, cfg.gaussian_sigma_per_layer);
        read_scalar_or_list(j, "threshold", cfg.threshold, cfg.threshold_per_layer);
        if (j.contains("metric_rank")) cfg.metric_rank = j.at("metric_rank").get<index_t>();
        if (j.contains("folds")) cfg.folds = j.at("folds").get<index_t>();
        if (j.contains("freeze_metric")) cfg.freeze_metric = j.at("freeze_metric").get<bool>();
        if (j.contains("task_weights")) {
            cfg.task_weights = j.at("task_weights").get<std::vector<double>>();
        }
        if (j.contains("val_fraction")) cfg.val_fraction = j.at("val_fraction").get<double>();
        if (j.contains("dataset")) cfg.dataset_path = j.at("dataset").get<std::string>();
    } catch (const json::exception& e) {
        throw parameter_error(std::string("config: ") + e.what());
    } catch (const data_error& e) {
        throw parameter_error(e.what());
    }
    cfg.validate();
    return cfg;
}

train_config config_from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw parameter_error("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json_text(ss.str());
}

std::string config_to_json(const train_config& cfg) {
    json j;
    j["batch_size"] = cfg.batch_size;
    j["lr"] = cfg.lr;
    j["decay_rate"] = cfg.decay_rate;
    j["decay_every"] = cfg.decay_every;
    j["max_epochs"] = cfg.max_epochs;
    j["K"] = cfg.k_hops;
    j["seed"] = cfg.seed;
    j["task_type"] = to_string(cfg.type);
    j["architecture"] = cfg.architecture;
    if (cfg.mix_sigma_per_layer.empty()) j["mix_sigma"] = cfg.mix_sigma;
    else j["mix_sigma"] = cfg.mix_sigma_per_layer;
    if (cfg.gaussian_sigma_per_layer.empty()) j["gaussian_sigma"] = cfg.gaussian_sigma;
    else j["gaussian_sigma"] = cfg.gaussian_sigma_per_layer;
    if (cfg.threshold_per_layer.empty()) j["threshold"] = cfg.threshold;
    else j["threshold"] = cfg.threshold_per_layer;
    j["metric_rank"] = cfg.metric_rank;
    j["folds"] = cfg.folds;
    j["freeze_metric"] = cfg.freeze_metric;
    j["task_weights"] = cfg.task_weights;
    j["val_fraction"] = cfg.val_fraction;
    j["dataset"] = cfg.dataset_path;
    return j.dump(2);
}

void apply_override(train_config& cfg, const std::string& key_value) {
    const auto eq = key_value.find('=');
    if (eq == std::string::npos) {
        throw parameter_error("config override '" + key_value + "' is not key=value");
    }
    const std::string key = key_value.substr(0, eq);
    const std::string value = key_value.substr(eq + 1);
    auto as_int = [&]() -> index_t {
        try {
            return std::stoll(value);
        } catch (const std::exception&) {
            throw parameter_error("config override: bad integer '" + value + "' for key '" + key + "'");
        }
    };
    auto as_double = [&]() -> double {
        try {
            return std::stod(value);
        } catch (const std::exception&) {
            throw parameter_error("config override: bad number '" + value + "' for key '" + key + "'");
        }
    };
    if (key == "batch_size") cfg.batch_size = as_int();
    else if (key == "lr") cfg.lr = as_double();
    else if (key == "decay_rate") cfg.decay_rate = as_double();
    else if (key == "decay_every") cfg.decay_every = as_int();
    else if (key == "max_epochs") cfg.max_epochs = as_int();
    else if (key == "K") cfg.k_hops = as_int();
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(as_int());
    else if (key == "task_type") {
        try {
            cfg.type = task_type_from_string(value);
        } catch (const data_error& e) {
            throw parameter_error(e.what());
        }
    }
    else if (key == "architecture") cfg.architecture = split_csv(value);
    else if (key == "mix_sigma") cfg.mix_sigma = as_double(), cfg.mix_sigma_per_layer.clear();
    else if (key == "gaussian_sigma") cfg.gaussian_sigma = as_double(), cfg.gaussian_sigma_per_layer.clear();
    else if (key == "threshold") cfg.threshold = as_double(), cfg.threshold_per_layer.clear();
    else if (key == "mix_sigma_per_layer") cfg.mix_sigma_per_layer = parse_double_list(value, key);
    else if (key == "gaussian_sigma_per_layer") cfg.gaussian_sigma_per_layer = parse_double_list(value, key);
    else if (key == "threshold_per_layer") cfg.threshold_per_layer = parse_double_list(value, key);
    else if (key == "metric_rank") cfg.metric_rank = as_int();
    else if (key == "folds") cfg.folds = as_int();
    else if (key == "freeze_metric") cfg.freeze_metric = value == "true" || value == "1";
    else if (key == "task_weights") cfg.task_weights = parse_double_list(value, key);
    else if (key == "val_fraction") cfg.val_fraction = as_double();
    else if (key == "dataset") cfg.dataset_path = value;
    else throw parameter_error("config override: unknown key '" + key + "'");
    cfg.validate();
}

int worker_threads() {
    if (const char* env = std::getenv("EGCN_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
            // fall through to the default
        }
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

} // namespace egcn
