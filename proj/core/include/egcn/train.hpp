#ifndef EGCN_TRAIN_HPP
#define EGCN_TRAIN_HPP

#include <optional>

#include "egcn/config.hpp"
#include "egcn/dataset.hpp"
#include "egcn/metrics.hpp"
#include "egcn/model.hpp"
#include "egcn/writers.hpp"

namespace egcn {

/// Which sample/layer to snapshot and after which epochs (0 = before any
/// training step).
struct snapshot_plan {
    std::string sample_id;
    index_t layer = 0;
    std::vector<index_t> epochs;
};

struct snapshot_record {
    snapshot_meta meta;
    tensor matrix;
};

struct train_result {
    model net;
    std::vector<curve_record> curves;
    std::vector<snapshot_record> snapshots;
    double initial_train_loss = 0.0; // full-set eval-mode loss before training
    double final_train_loss = 0.0;   // same, after training
    std::vector<double> val_metric_per_epoch;
    double final_val_metric = std::numeric_limits<double>::quiet_NaN();
    std::string val_metric_name;
    /// Init-state copy of the model kept by frozen-metric runs, so fixed
    /// Laplacians for unseen samples come from the same parameters the run
    /// froze.
    std::optional<model> frozen_reference;
};

/// Full training run: seeded shuffling, padded batching, forward/backward,
/// Adam with the exponential step schedule, per-epoch curve records and
/// optional similarity snapshots. freeze_metric caches every sample's
/// per-layer Laplacian under the initial parameters and keeps it fixed.
/// Deterministic given config + seed. Loss divergence raises numerical_error
/// naming the last completed epoch.
train_result train(const dataset& data, const train_config& cfg,
                   const snapshot_plan* plan = nullptr);

/// Evaluation-mode predictions for a set of samples (chunked internally).
tensor predict(model& net, std::span<const graph> samples, index_t batch_size,
               const model::frozen_laplacians* frozen = nullptr);

/// Current learned similarity of one sample, tagged for writing.
snapshot_record take_similarity_snapshot(model& net, const graph& sample, index_t layer,
                                         index_t epoch);

struct cv_result {
    std::vector<double> fold_means;          // headline metric per fold
    std::vector<std::vector<double>> fold_per_task;
    std::vector<std::string> task_names;
    double mean = 0.0;
    double std_dev = 0.0;
    std::vector<double> per_task_mean;
    std::vector<double> per_task_std;
    std::string metric_name;
};

/// Seeded k-fold split (fold sizes differ by at most one), one training per
/// fold, held-out metric mean +/- sample standard deviation. Folds may run
/// in parallel (EGCN_THREADS caps the pool).
cv_result cross_validate(const dataset& data, const train_config& cfg);

struct ablate_row {
    std::uint64_t seed = 0;
    double val_metric_evolving = 0.0;
    double val_metric_frozen = 0.0;
    bool evolving_wins = false;
    index_t epochs_to_frozen_final = -1; // first epoch at or below the frozen final; -1 = never
    double epoch_fraction = -1.0;        // epochs_to_frozen_final / max_epochs
};

/// Paired evolving vs frozen-metric runs per seed on the same data and
/// split. The frozen arm differs from the evolving arm only in
/// freeze_metric.
std::vector<ablate_row> ablate(const dataset& data, const train_config& base,
                               const std::vector<std::uint64_t>& seeds);

} // namespace egcn

#endif // EGCN_TRAIN_HPP
