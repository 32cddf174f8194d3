#ifndef EGCN_CONFIG_HPP
#define EGCN_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egcn/dataset.hpp"

namespace egcn {

/// Everything a training run needs. Mirrors the JSON config file key for key.
struct train_config {
    index_t batch_size = 256;
    double lr = 0.005;
    double decay_rate = 0.9;      // applied every decay_every iterations
    index_t decay_every = 50;
    index_t max_epochs = 50;
    index_t k_hops = 3;           // JSON key "K"
    std::uint64_t seed = 0;
    task_type type = task_type::regression;
    std::vector<std::string> architecture = {"sgcll:12", "bn", "pool", "sgcll:12", "bn", "pool"};
    double mix_sigma = 1.0;
    double gaussian_sigma = 1.0;
    double threshold = 0.0;
    std::vector<double> mix_sigma_per_layer;
    std::vector<double> gaussian_sigma_per_layer;
    std::vector<double> threshold_per_layer;
    index_t metric_rank = 0;      // 0 = layer input dim
    index_t folds = 5;
    bool freeze_metric = false;
    std::vector<double> task_weights; // empty = all ones
    double val_fraction = 0.1;
    std::string dataset_path;     // JSON key "dataset"

    void validate() const;
};

train_config config_from_json_text(const std::string& text);
train_config config_from_json_file(const std::filesystem::path& path);
std::string config_to_json(const train_config& cfg);

/// Applies one "key=value" override (CLI wins over file). Array values are
/// comma-separated. Unknown keys raise parameter_error.
void apply_override(train_config& cfg, const std::string& key_value);

/// Worker cap from EGCN_THREADS (default: hardware concurrency, min 1).
int worker_threads();

} // namespace egcn

#endif // EGCN_CONFIG_HPP
