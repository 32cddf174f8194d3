#include "egcn/model.hpp"

#include <cmath>

#include "egcn/rng.hpp"

namespace egcn {

std::vector<layer_spec> parse_architecture(const std::vector<std::string>& tokens) {
    std::vector<layer_spec> arch;
    for (const std::string& tok : tokens) {
        if (tok == "bn") {
            arch.push_back({layer_spec::kind::bn, 0});
        } else if (tok == "pool") {
            arch.push_back({layer_spec::kind::pool, 0});
        } else if (tok.rfind("sgcll:", 0) == 0) {
            index_t dim = 0;
            try {
                dim = std::stoll(tok.substr(6));
            } catch (const std::exception&) {
                throw parameter_error("architecture: bad layer width in '" + tok + "'");
            }
            if (dim < 1) throw parameter_error("architecture: layer width must be >= 1 in '" + tok + "'");
            arch.push_back({layer_spec::kind::sgcll, dim});
        } else {
            throw parameter_error("architecture: unknown layer token '" + tok + "'");
        }
    }
    return arch;
}

void model_config::validate() const {
    if (input_dim < 1) throw parameter_error("model_config: input_dim must be >= 1");
    if (num_tasks < 1) throw parameter_error("model_config: num_tasks must be >= 1");
    if (k_hops < 1) throw parameter_error("model_config: K must be >= 1");
    if (metric_rank < 0) throw parameter_error("model_config: metric_rank must be >= 0");
    if (arch.empty()) throw parameter_error("model_config: empty architecture");
    auto check_per_layer = [&](const std::vector<double>& v, const char* what) {
        if (!v.empty() && static_cast<index_t>(v.size()) != num_sgcll_layers()) {
            throw parameter_error(std::string("model_config: per-layer ") + what + " list has " +
                                  std::to_string(v.size()) + " entries for " +
                                  std::to_string(num_sgcll_layers()) + " SGC-LL layers");
        }
    };
    check_per_layer(mix_sigma_per_layer, "mix_sigma");
    check_per_layer(gaussian_sigma_per_layer, "gaussian_sigma");
    check_per_layer(threshold_per_layer, "threshold");
}

index_t model_config::num_sgcll_layers() const {
    index_t n = 0;
    for (const layer_spec& l : arch) {
        if (l.k == layer_spec::kind::sgcll) ++n;
    }
    return n;
}

index_t model_config::output_dim() const {
    index_t width = input_dim;
    for (const layer_spec& l : arch) {
        if (l.k == layer_spec::kind::sgcll) width = l.out_dim;
    }
    return width;
}

metric_params model::metric_hyper(index_t sgcll_index, index_t input_dim) const {
    metric_params p;
    const auto i = static_cast<std::size_t>(sgcll_index);
    p.gaussian_sigma = cfg_.gaussian_sigma_per_layer.empty() ? cfg_.gaussian_sigma
                                                             : cfg_.gaussian_sigma_per_layer[i];
    p.mix_sigma = cfg_.mix_sigma_per_layer.empty() ? cfg_.mix_sigma : cfg_.mix_sigma_per_layer[i];
    p.threshold = cfg_.threshold_per_layer.empty() ? cfg_.threshold : cfg_.threshold_per_layer[i];
    const index_t m = cfg_.metric_rank == 0 ? input_dim : std::min(cfg_.metric_rank, input_dim);
    p.w_d = tensor({input_dim, m}); // placeholder shape; value lives in the store
    return p;
}

model::model(model_config cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    rng r(seed);
    index_t width = cfg_.input_dim;
    index_t sgcll_idx = 0, bn_idx = 0;
    for (std::size_t pos = 0; pos < cfg_.arch.size(); ++pos) {
        layer_input_dims_.push_back(width);
        const layer_spec& l = cfg_.arch[pos];
        const std::string prefix = "layer" + std::to_string(pos);
        switch (l.k) {
        case layer_spec::kind::sgcll: {
            tensor theta({cfg_.k_hops, 1});
            for (index_t k = 0; k < cfg_.k_hops; ++k) {
                theta.at(k, 0) = 1.0 / static_cast<double>(cfg_.k_hops) +
                                 r.normal(0.0, 0.1 / static_cast<double>(cfg_.k_hops));
            }
            store_.add(prefix + ".sgcll.theta", std::move(theta));

            tensor w_k({width, l.out_dim});
            const double std_wk = std::sqrt(2.0 / static_cast<double>(width + l.out_dim));
            for (index_t i = 0; i < w_k.size(); ++i) w_k[i] = r.normal(0.0, std_wk);
            store_.add(prefix + ".sgcll.w_k", std::move(w_k));
            store_.add(prefix + ".sgcll.b_k", tensor({1, l.out_dim}));

            const index_t m = cfg_.metric_rank == 0 ? width : std::min(cfg_.metric_rank, width);
            store_.add(prefix + ".sgcll.w_d", metric_params::near_identity_init(width, m, r.next()));
            width = l.out_dim;
            ++sgcll_idx;
            break;
        }
        case layer_spec::kind::bn: {
            store_.add(prefix + ".bn.scale", tensor::full({1, width}, 1.0));
            store_.add(prefix + ".bn.shift", tensor({1, width}));
            bn_states_.push_back(batch_norm_state::init(width));
            ++bn_idx;
            break;
        }
        case layer_spec::kind::pool:
            break;
        }
    }
    for (index_t task = 0; task < cfg_.num_tasks; ++task) {
        tensor w({width, 1});
        const double std_h = 1.0 / std::sqrt(static_cast<double>(width));
        for (index_t i = 0; i < w.size(); ++i) w[i] = r.normal(0.0, std_h);
        store_.add("head.t" + std::to_string(task) + ".w", std::move(w));
        store_.add("head.t" + std::to_string(task) + ".b", tensor({1, 1}));
    }
}

std::vector<std::string> model::metric_param_names() const {
    std::vector<std::string> out;
    for (const std::string& name : store_.names()) {
        if (name.size() >= 4 && name.compare(name.size() - 4, 4, ".w_d") == 0) {
            out.push_back(name);
        }
    }
    return out;
}

model::forward_result model::forward(tape& t, const graph_batch& batch, run_mode mode,
                                     const frozen_laplacians* frozen) {
    if (batch.feature_dim() != cfg_.input_dim) {
        throw structural_error("model: batch feature dim " + std::to_string(batch.feature_dim()) +
                               " does not match configured input dim " +
                               std::to_string(cfg_.input_dim));
    }
    const index_t bsz = batch.batch_size();
    forward_result res;

    // Per-sample constants: valid-node features, intrinsic Laplacians,
    // pooling neighborhoods.
    std::vector<node_id> xs;
    std::vector<tensor> intrinsic;
    std::vector<std::vector<std::vector<index_t>>> hoods;
    xs.reserve(static_cast<std::size_t>(bsz));
    for (index_t b = 0; b < bsz; ++b) {
        xs.push_back(t.constant(batch.sample_features(b)));
        const tensor adj = batch.sample_adjacency(b);
        intrinsic.push_back(normalized_laplacian(adj));
        hoods.push_back(closed_neighborhoods(adj));
    }

    index_t width = cfg_.input_dim;
    index_t sgcll_idx = 0, bn_idx = 0;
    for (std::size_t pos = 0; pos < cfg_.arch.size(); ++pos) {
        const layer_spec& l = cfg_.arch[pos];
        const std::string prefix = "layer" + std::to_string(pos);
        switch (l.k) {
        case layer_spec::kind::sgcll: {
            node_id theta = t.param(store_, prefix + ".sgcll.theta");
            node_id w_k = t.param(store_, prefix + ".sgcll.w_k");
            node_id b_k = t.param(store_, prefix + ".sgcll.b_k");
            node_id w_d = t.param(store_, prefix + ".sgcll.w_d");
            const metric_params hyper = [&] {
                metric_params p = metric_hyper(sgcll_idx, width);
                p.w_d = store_.value(prefix + ".sgcll.w_d");
                return p;
            }();
            std::vector<tensor> layer_evolved, layer_similarity;
            for (index_t b = 0; b < bsz; ++b) {
                const tensor* frozen_lap = nullptr;
                if (frozen) {
                    frozen_lap = &frozen->laplacian[static_cast<std::size_t>(sgcll_idx)]
                                                   [static_cast<std::size_t>(b)];
                }
                auto nodes = record_sgc_ll_sample(t, xs[static_cast<std::size_t>(b)],
                                                  intrinsic[static_cast<std::size_t>(b)], theta,
                                                  w_k, b_k, w_d, hyper, cfg_.act, frozen_lap);
                xs[static_cast<std::size_t>(b)] = nodes.output;
                layer_evolved.push_back(t.value(nodes.evolved));
                layer_similarity.push_back(
                    frozen ? frozen->similarity[static_cast<std::size_t>(sgcll_idx)]
                                               [static_cast<std::size_t>(b)]
                           : t.value(nodes.similarity));
            }
            res.evolved.push_back(std::move(layer_evolved));
            res.similarity.push_back(std::move(layer_similarity));
            width = l.out_dim;
            ++sgcll_idx;
            break;
        }
        case layer_spec::kind::bn: {
            node_id scale = t.param(store_, prefix + ".bn.scale");
            node_id shift = t.param(store_, prefix + ".bn.shift");
            batch_norm_state& state = bn_states_[static_cast<std::size_t>(bn_idx)];
            node_id stacked = t.concat_rows(xs);
            node_id normed;
            if (mode == run_mode::train) {
                tensor bm, bv;
                normed = t.batch_norm_train(stacked, scale, shift, state.eps, &bm, &bv);
                state.update_running(bm, bv);
            } else {
                normed = t.batch_norm_eval(stacked, scale, shift, state.running_mean,
                                           state.running_var, state.eps);
            }
            index_t row = 0;
            for (index_t b = 0; b < bsz; ++b) {
                const index_t n = batch.node_counts[static_cast<std::size_t>(b)];
                xs[static_cast<std::size_t>(b)] = t.slice(normed, row, row + n, 0, width);
                row += n;
            }
            ++bn_idx;
            break;
        }
        case layer_spec::kind::pool: {
            for (index_t b = 0; b < bsz; ++b) {
                xs[static_cast<std::size_t>(b)] = record_graph_max_pool(
                    t, xs[static_cast<std::size_t>(b)], hoods[static_cast<std::size_t>(b)]);
            }
            break;
        }
        }
    }

    std::vector<node_id> gathered_rows;
    gathered_rows.reserve(static_cast<std::size_t>(bsz));
    for (index_t b = 0; b < bsz; ++b) {
        gathered_rows.push_back(record_gather_sample(t, xs[static_cast<std::size_t>(b)]));
    }
    node_id gathered = t.concat_rows(gathered_rows); // B x width

    std::vector<node_id> cols;
    for (index_t task = 0; task < cfg_.num_tasks; ++task) {
        const std::string hp = "head.t" + std::to_string(task);
        node_id w = t.param(store_, hp + ".w");
        node_id b = t.param(store_, hp + ".b");
        node_id scores = t.matmul(gathered, w);
        node_id bias_col = t.matmul(t.constant(tensor::full({bsz, 1}, 1.0)), b);
        cols.push_back(t.add(scores, bias_col));
    }
    res.scores = t.concat_cols(cols);
    return res;
}

model::frozen_laplacians model::compute_frozen_cache(std::span<const graph> samples) {
    frozen_laplacians cache;
    const index_t layers = cfg_.num_sgcll_layers();
    cache.laplacian.resize(static_cast<std::size_t>(layers));
    cache.similarity.resize(static_cast<std::size_t>(layers));
    for (const graph& g : samples) {
        tape t;
        graph_batch single = batch_graphs(std::span<const graph>(&g, 1), g.num_nodes());
        forward_result fr = forward(t, single, run_mode::eval);
        for (index_t l = 0; l < layers; ++l) {
            cache.laplacian[static_cast<std::size_t>(l)].push_back(
                fr.evolved[static_cast<std::size_t>(l)][0]);
            cache.similarity[static_cast<std::size_t>(l)].push_back(
                fr.similarity[static_cast<std::size_t>(l)][0]);
        }
    }
    return cache;
}

tensor model::similarity_snapshot(const graph& sample, index_t sgcll_layer) {
    if (sgcll_layer < 0 || sgcll_layer >= cfg_.num_sgcll_layers()) {
        throw parameter_error("similarity_snapshot: SGC-LL layer index " +
                              std::to_string(sgcll_layer) + " out of range");
    }
    tape t;
    graph_batch single = batch_graphs(std::span<const graph>(&sample, 1), sample.num_nodes());
    forward_result fr = forward(t, single, run_mode::eval);
    return fr.similarity[static_cast<std::size_t>(sgcll_layer)][0];
}

} // namespace egcn
