#include "egcn/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "egcn/losses.hpp"
#include "egcn/optimizer.hpp"
#include "egcn/rng.hpp"

namespace egcn {

namespace {

model_config make_model_config(const dataset& data, const train_config& cfg) {
    model_config mc;
    mc.input_dim = data.manifest.feature_dim;
    mc.num_tasks = static_cast<index_t>(data.manifest.task_names.size());
    mc.k_hops = cfg.k_hops;
    mc.metric_rank = cfg.metric_rank;
    mc.mix_sigma = cfg.mix_sigma;
    mc.gaussian_sigma = cfg.gaussian_sigma;
    mc.threshold = cfg.threshold;
    mc.mix_sigma_per_layer = cfg.mix_sigma_per_layer;
    mc.gaussian_sigma_per_layer = cfg.gaussian_sigma_per_layer;
    mc.threshold_per_layer = cfg.threshold_per_layer;
    mc.arch = parse_architecture(cfg.architecture);
    return mc;
}

tensor effective_task_weights(const dataset& data, const train_config& cfg) {
    const auto tasks = static_cast<index_t>(data.manifest.task_names.size());
    if (cfg.task_weights.empty()) return tensor::full({1, tasks}, 1.0);
    if (static_cast<index_t>(cfg.task_weights.size()) != tasks) {
        throw parameter_error("config: " + std::to_string(cfg.task_weights.size()) +
                              " task weights for " + std::to_string(tasks) + " tasks");
    }
    return tensor::row(cfg.task_weights);
}

void require_labels(const dataset& data) {
    for (const graph& g : data.samples) {
        if (!g.labels) {
            throw data_error("train: sample '" + g.id + "' has no labels");
        }
    }
}

graph_batch batch_positions(const dataset& data, std::span<const index_t> positions) {
    std::vector<graph> chunk;
    chunk.reserve(positions.size());
    index_t n_max = 1;
    for (index_t p : positions) {
        const graph& g = data.samples[static_cast<std::size_t>(p)];
        n_max = std::max(n_max, g.num_nodes());
        chunk.push_back(g);
    }
    return batch_graphs(chunk, n_max);
}

model::frozen_laplacians subcache(const model::frozen_laplacians& full,
                                  std::span<const index_t> positions) {
    model::frozen_laplacians out;
    out.laplacian.resize(full.laplacian.size());
    out.similarity.resize(full.similarity.size());
    for (std::size_t l = 0; l < full.laplacian.size(); ++l) {
        for (index_t p : positions) {
            out.laplacian[l].push_back(full.laplacian[l][static_cast<std::size_t>(p)]);
            out.similarity[l].push_back(full.similarity[l][static_cast<std::size_t>(p)]);
        }
    }
    return out;
}

node_id record_loss(tape& t, node_id scores, const graph_batch& batch, const tensor& weights,
                    task_type type) {
    if (type == task_type::regression) {
        return weighted_l2_loss(t, scores, batch.labels, batch.label_masks, weights);
    }
    return masked_logistic_loss(t, scores, batch.labels, batch.label_masks, weights);
}

double loss_value(const tensor& pred, const graph_batch& batch, const tensor& weights,
                  task_type type) {
    if (type == task_type::regression) {
        return weighted_l2_loss_value(pred, batch.labels, batch.label_masks, weights);
    }
    return masked_logistic_loss_value(pred, batch.labels, batch.label_masks, weights);
}

double batch_weight(const graph_batch& batch, const tensor& weights) {
    double s = 0.0;
    for (index_t i = 0; i < batch.label_masks.rows(); ++i) {
        for (index_t j = 0; j < batch.label_masks.cols(); ++j) {
            if (batch.label_masks.at(i, j) != 0.0) s += weights[j];
        }
    }
    return s;
}

/// Evaluation-mode scores for samples given by dataset positions.
tensor predict_positions(model& net, const dataset& data, std::span<const index_t> positions,
                         index_t batch_size, const model::frozen_laplacians* full_cache) {
    const auto tasks = static_cast<index_t>(data.manifest.task_names.size());
    tensor out({static_cast<index_t>(positions.size()), tasks});
    index_t row = 0;
    for (std::size_t start = 0; start < positions.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(positions.size(), start + static_cast<std::size_t>(batch_size));
        std::span<const index_t> chunk(positions.data() + start, end - start);
        graph_batch batch = batch_positions(data, chunk);
        model::frozen_laplacians sub;
        const model::frozen_laplacians* frozen = nullptr;
        if (full_cache) {
            sub = subcache(*full_cache, chunk);
            frozen = &sub;
        }
        tape t;
        auto fr = net.forward(t, batch, run_mode::eval, frozen);
        const tensor& scores = t.value(fr.scores);
        for (index_t b = 0; b < scores.rows(); ++b) {
            for (index_t j = 0; j < tasks; ++j) out.at(row + b, j) = scores.at(b, j);
        }
        row += scores.rows();
    }
    return out;
}

tensor stack_labels(const dataset& data, std::span<const index_t> positions, bool masks) {
    const auto tasks = static_cast<index_t>(data.manifest.task_names.size());
    tensor out({static_cast<index_t>(positions.size()), tasks});
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const graph& g = data.samples[static_cast<std::size_t>(positions[i])];
        for (index_t j = 0; j < tasks; ++j) {
            if (masks) {
                out.at(static_cast<index_t>(i), j) =
                    g.label_mask[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
            } else {
                out.at(static_cast<index_t>(i), j) = g.labels->at(0, j);
            }
        }
    }
    return out;
}

double full_set_loss(model& net, const dataset& data, std::span<const index_t> positions,
                     const train_config& cfg, const tensor& weights,
                     const model::frozen_laplacians* cache) {
    tensor pred = predict_positions(net, data, positions, cfg.batch_size, cache);
    graph_batch pseudo; // only labels/masks are needed by the loss helpers
    pseudo.labels = stack_labels(data, positions, false);
    pseudo.label_masks = stack_labels(data, positions, true);
    return loss_value(pred, pseudo, weights, cfg.type);
}

double headline_metric(const tensor& pred, const tensor& labels, const tensor& masks,
                       task_type type) {
    const metric_report r = type == task_type::regression ? rmse(pred, labels, masks)
                                                          : roc_auc(pred, labels, masks);
    return r.mean;
}

void run_jobs(std::vector<std::function<void()>> jobs, int workers) {
    if (workers <= 1 || jobs.size() <= 1) {
        for (auto& job : jobs) job();
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) break;
            try {
                jobs[i]();
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int n = std::min<int>(workers, static_cast<int>(jobs.size()));
    pool.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace

snapshot_record take_similarity_snapshot(model& net, const graph& sample, index_t layer,
                                         index_t epoch) {
    snapshot_record rec;
    rec.meta = {sample.id, layer, epoch};
    rec.matrix = net.similarity_snapshot(sample, layer);
    return rec;
}

tensor predict(model& net, std::span<const graph> samples, index_t batch_size,
               const model::frozen_laplacians* frozen) {
    dataset view;
    view.manifest.feature_dim = net.config().input_dim;
    view.manifest.task_names.resize(static_cast<std::size_t>(net.config().num_tasks));
    view.samples.assign(samples.begin(), samples.end());
    std::vector<index_t> positions(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) positions[i] = static_cast<index_t>(i);
    return predict_positions(net, view, positions, batch_size, frozen);
}

train_result train(const dataset& data, const train_config& cfg, const snapshot_plan* plan) {
    cfg.validate();
    require_labels(data);
    if (data.samples.empty()) throw data_error("train: empty dataset");
    const tensor weights = effective_task_weights(data, cfg);

    model net(make_model_config(data, cfg), cfg.seed);

    // Deterministic validation split.
    const auto n = static_cast<index_t>(data.samples.size());
    std::vector<index_t> order(static_cast<std::size_t>(n));
    for (index_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng split_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    split_rng.shuffle(order);
    const auto n_val = static_cast<index_t>(cfg.val_fraction * static_cast<double>(n));
    std::vector<index_t> val_positions(order.begin(), order.begin() + n_val);
    std::vector<index_t> train_positions(order.begin() + n_val, order.end());
    if (train_positions.empty()) throw data_error("train: validation split leaves no training data");

    // Frozen-metric runs pin every sample's Laplacians to the init state.
    model::frozen_laplacians cache;
    std::optional<model> frozen_reference;
    const model::frozen_laplacians* cache_ptr = nullptr;
    if (cfg.freeze_metric) {
        frozen_reference = net; // init-state copy, for caching unseen samples
        cache = net.compute_frozen_cache(data.samples);
        cache_ptr = &cache;
    }

    index_t plan_position = -1;
    if (plan) {
        for (index_t i = 0; i < n; ++i) {
            if (data.samples[static_cast<std::size_t>(i)].id == plan->sample_id) {
                plan_position = i;
                break;
            }
        }
        if (plan_position < 0) {
            throw parameter_error("snapshot plan: sample '" + plan->sample_id + "' not in dataset");
        }
        if (plan->layer < 0 || plan->layer >= net.config().num_sgcll_layers()) {
            throw parameter_error("snapshot plan: layer " + std::to_string(plan->layer) +
                                  " out of range");
        }
    }

    train_result res{std::move(net), {}, {},   0.0, 0.0, {},
                     std::numeric_limits<double>::quiet_NaN(), {}, std::move(frozen_reference)};
    res.val_metric_name = cfg.type == task_type::regression ? "rmse" : "roc_auc";

    auto snapshot_at = [&](index_t epoch) {
        if (!plan) return;
        if (std::find(plan->epochs.begin(), plan->epochs.end(), epoch) == plan->epochs.end()) return;
        const graph& sample = data.samples[static_cast<std::size_t>(plan_position)];
        snapshot_record rec;
        rec.meta = {sample.id, plan->layer, epoch};
        rec.matrix = cfg.freeze_metric
                         ? cache.similarity[static_cast<std::size_t>(plan->layer)]
                                           [static_cast<std::size_t>(plan_position)]
                         : res.net.similarity_snapshot(sample, plan->layer);
        res.snapshots.push_back(std::move(rec));
    };

    res.initial_train_loss = full_set_loss(res.net, data, train_positions, cfg, weights, cache_ptr);
    snapshot_at(0);

    adam_state adam;
    const std::vector<std::string> frozen_names =
        cfg.freeze_metric ? res.net.metric_param_names() : std::vector<std::string>{};
    rng epoch_rng(cfg.seed);
    index_t iteration = 0;
    for (index_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        epoch_rng.shuffle(train_positions);
        double loss_sum = 0.0, weight_sum = 0.0;
        for (std::size_t start = 0; start < train_positions.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(train_positions.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::span<const index_t> chunk(train_positions.data() + start, end - start);
            graph_batch batch = batch_positions(data, chunk);
            const double bw = batch_weight(batch, weights);
            if (bw == 0.0) continue; // every label masked: nothing to learn from
            model::frozen_laplacians sub;
            const model::frozen_laplacians* frozen = nullptr;
            if (cfg.freeze_metric) {
                sub = subcache(cache, chunk);
                frozen = &sub;
            }
            try {
                tape t;
                auto fr = res.net.forward(t, batch, run_mode::train, frozen);
                node_id loss = record_loss(t, fr.scores, batch, weights, cfg.type);
                const double lv = t.value(loss)[0];
                loss_sum += lv * bw;
                weight_sum += bw;
                res.net.store().zero_grads();
                t.backward(loss);
                const double lr_t =
                    decayed_learning_rate(cfg.lr, cfg.decay_rate, cfg.decay_every, iteration);
                adam_step(res.net.store(), adam, lr_t, frozen_names);
            } catch (const numerical_error& e) {
                throw numerical_error("training diverged at epoch " + std::to_string(epoch) +
                                      ", iteration " + std::to_string(iteration) +
                                      " (last good checkpoint: end of epoch " +
                                      std::to_string(epoch - 1) + "): " + e.what());
            }
            ++iteration;
        }
        res.curves.push_back({epoch, "train", "loss", loss_sum / weight_sum});

        if (!val_positions.empty()) {
            tensor pred =
                predict_positions(res.net, data, val_positions, cfg.batch_size, cache_ptr);
            const double metric = headline_metric(pred, stack_labels(data, val_positions, false),
                                                  stack_labels(data, val_positions, true), cfg.type);
            res.val_metric_per_epoch.push_back(metric);
            res.curves.push_back({epoch, "val", res.val_metric_name, metric});
        }
        snapshot_at(epoch);
    }

    res.final_train_loss = full_set_loss(res.net, data, train_positions, cfg, weights, cache_ptr);
    if (!res.val_metric_per_epoch.empty()) res.final_val_metric = res.val_metric_per_epoch.back();
    return res;
}

cv_result cross_validate(const dataset& data, const train_config& cfg) {
    cfg.validate();
    require_labels(data);
    const auto n = static_cast<index_t>(data.samples.size());
    if (n < cfg.folds) throw data_error("cross_validate: fewer samples than folds");

    std::vector<index_t> order(static_cast<std::size_t>(n));
    for (index_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng fold_rng(cfg.seed ^ 0x0f01d5a17ULL);
    fold_rng.shuffle(order);
    std::vector<std::vector<index_t>> folds(static_cast<std::size_t>(cfg.folds));
    for (index_t i = 0; i < n; ++i) {
        folds[static_cast<std::size_t>(i % cfg.folds)].push_back(order[static_cast<std::size_t>(i)]);
    }

    const auto tasks = static_cast<index_t>(data.manifest.task_names.size());
    cv_result res;
    res.task_names = data.manifest.task_names;
    res.metric_name = cfg.type == task_type::regression ? "rmse" : "roc_auc";
    res.fold_means.resize(static_cast<std::size_t>(cfg.folds));
    res.fold_per_task.assign(static_cast<std::size_t>(cfg.folds),
                             std::vector<double>(static_cast<std::size_t>(tasks)));

    std::vector<std::function<void()>> jobs;
    for (index_t f = 0; f < cfg.folds; ++f) {
        jobs.push_back([&, f] {
            dataset train_data;
            train_data.manifest = data.manifest;
            for (index_t g = 0; g < cfg.folds; ++g) {
                if (g == f) continue;
                for (index_t p : folds[static_cast<std::size_t>(g)]) {
                    train_data.samples.push_back(data.samples[static_cast<std::size_t>(p)]);
                }
            }
            train_data.manifest.num_samples = static_cast<index_t>(train_data.samples.size());
            train_result tr = train(train_data, cfg);

            const auto& held_out = folds[static_cast<std::size_t>(f)];
            model::frozen_laplacians held_cache;
            const model::frozen_laplacians* cache_ptr = nullptr;
            if (cfg.freeze_metric) {
                std::vector<graph> held_graphs;
                for (index_t p : held_out) held_graphs.push_back(data.samples[static_cast<std::size_t>(p)]);
                // Unseen samples get their fixed Laplacians from the same
                // init-state parameters the training run froze.
                held_cache = tr.frozen_reference->compute_frozen_cache(held_graphs);
                cache_ptr = &held_cache;
            }
            tensor pred = predict_positions(tr.net, data, held_out, cfg.batch_size, cache_ptr);
            const tensor labels = stack_labels(data, held_out, false);
            const tensor masks = stack_labels(data, held_out, true);
            const metric_report report = cfg.type == task_type::regression
                                             ? rmse(pred, labels, masks)
                                             : roc_auc(pred, labels, masks);
            res.fold_means[static_cast<std::size_t>(f)] = report.mean;
            for (index_t j = 0; j < tasks; ++j) {
                res.fold_per_task[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)] =
                    report.per_task[static_cast<std::size_t>(j)];
            }
        });
    }
    run_jobs(std::move(jobs), worker_threads());

    auto mean_std = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
        return std::pair<double, double>(mean, sd);
    };
    auto [m, s] = mean_std(res.fold_means);
    res.mean = m;
    res.std_dev = s;
    for (index_t j = 0; j < tasks; ++j) {
        std::vector<double> xs;
        for (index_t f = 0; f < cfg.folds; ++f) {
            xs.push_back(res.fold_per_task[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)]);
        }
        auto [tm, ts] = mean_std(xs);
        res.per_task_mean.push_back(tm);
        res.per_task_std.push_back(ts);
    }
    return res;
}

std::vector<ablate_row> ablate(const dataset& data, const train_config& base,
                               const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw parameter_error("ablate: needs at least one seed");
    if (base.val_fraction <= 0.0) {
        throw parameter_error("ablate: val_fraction must be positive (the comparison is on validation metric)");
    }
    struct arm_result {
        double final_val = 0.0;
        std::vector<double> val_curve;
    };
    std::vector<arm_result> evolving(seeds.size()), frozen(seeds.size());

    std::vector<std::function<void()>> jobs;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        jobs.push_back([&, i] {
            train_config cfg = base;
            cfg.seed = seeds[i];
            cfg.freeze_metric = false;
            train_result tr = train(data, cfg);
            evolving[i] = {tr.final_val_metric, tr.val_metric_per_epoch};
        });
        jobs.push_back([&, i] {
            train_config cfg = base;
            cfg.seed = seeds[i];
            cfg.freeze_metric = true;
            train_result tr = train(data, cfg);
            frozen[i] = {tr.final_val_metric, tr.val_metric_per_epoch};
        });
    }
    run_jobs(std::move(jobs), worker_threads());

    const bool lower_is_better = base.type == task_type::regression;
    std::vector<ablate_row> rows;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        ablate_row row;
        row.seed = seeds[i];
        row.val_metric_evolving = evolving[i].final_val;
        row.val_metric_frozen = frozen[i].final_val;
        row.evolving_wins = lower_is_better
                                ? row.val_metric_evolving < row.val_metric_frozen
                                : row.val_metric_evolving > row.val_metric_frozen;
        row.epochs_to_frozen_final = -1;
        for (std::size_t e = 0; e < evolving[i].val_curve.size(); ++e) {
            const bool reached = lower_is_better ? evolving[i].val_curve[e] <= frozen[i].final_val
                                                 : evolving[i].val_curve[e] >= frozen[i].final_val;
            if (reached) {
                row.epochs_to_frozen_final = static_cast<index_t>(e + 1);
                break;
            }
        }
        row.epoch_fraction =
            row.epochs_to_frozen_final < 0
                ? -1.0
                : static_cast<double>(row.epochs_to_frozen_final) / static_cast<double>(base.max_epochs);
        rows.push_back(row);
    }
    return rows;
}

} // namespace egcn
