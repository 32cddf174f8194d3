#include "egcn/layers.hpp"

namespace egcn {

void sgc_layer_params::validate() const {
    theta.validate();
    metric.validate();
    if (w_k.rank() != 2 || b_k.rank() != 2 || b_k.rows() != 1 || b_k.cols() != w_k.cols()) {
        throw structural_error("sgc_layer_params: feature map " + w_k.shape_str() +
                               " and bias " + b_k.shape_str() + " are inconsistent");
    }
    if (metric.w_d.rows() != w_k.rows()) {
        throw structural_error("sgc_layer_params: metric W_d " + metric.w_d.shape_str() +
                               " does not match layer input dim " + std::to_string(w_k.rows()));
    }
}

index_t sgc_layer_params::param_count() const {
    return theta.order() + w_k.size() + b_k.size() + metric.w_d.size();
}

void head_params::validate() const {
    if (weights.size() != biases.size() || weights.empty()) {
        throw structural_error("head_params: weights/biases leaf counts differ or are empty");
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i].cols() != 1 || biases[i].size() != 1) {
            throw structural_error("head_params: task " + std::to_string(i) +
                                   " leaf must be h x 1 with scalar bias");
        }
    }
}

batch_norm_state batch_norm_state::init(index_t width) {
    batch_norm_state s;
    s.scale = tensor::full({1, width}, 1.0);
    s.shift = tensor({1, width});
    s.running_mean = tensor({1, width});
    s.running_var = tensor::full({1, width}, 1.0);
    return s;
}

void batch_norm_state::update_running(const tensor& batch_mean, const tensor& batch_var) {
    for (index_t j = 0; j < running_mean.size(); ++j) {
        running_mean[j] = momentum * running_mean[j] + (1.0 - momentum) * batch_mean[j];
        running_var[j] = momentum * running_var[j] + (1.0 - momentum) * batch_var[j];
    }
}

std::vector<std::vector<index_t>> closed_neighborhoods(const tensor& adjacency) {
    const index_t n = adjacency.rows();
    std::vector<std::vector<index_t>> sets(static_cast<std::size_t>(n));
    for (index_t i = 0; i < n; ++i) {
        auto& set = sets[static_cast<std::size_t>(i)];
        set.push_back(i);
        for (index_t j = 0; j < n; ++j) {
            if (j != i && adjacency.at(i, j) > 0.0) set.push_back(j);
        }
    }
    return sets;
}

node_id record_chebyshev_filter(tape& t, node_id laplacian, node_id x, node_id theta) {
    const index_t n = t.value(laplacian).rows();
    const index_t k_max = t.value(theta).rows();

    node_id lam = t.lambda_max(laplacian);
    if (t.value(lam)[0] <= 0.0) {
        throw parameter_error("record_chebyshev_filter: lambda_max is not positive");
    }
    node_id scale = t.scalar_mul(t.reciprocal(lam), 2.0);
    node_id l_tilde = t.sub(t.mul_scalar_node(laplacian, scale), t.constant(tensor::identity(n)));

    node_id t_prev2 = x;
    node_id out = t.mul_scalar_node(x, t.slice(theta, 0, 1, 0, 1));
    if (k_max == 1) return out;

    node_id t_prev1 = t.matmul(l_tilde, x);
    out = t.add(out, t.mul_scalar_node(t_prev1, t.slice(theta, 1, 2, 0, 1)));
    for (index_t k = 2; k < k_max; ++k) {
        node_id t_cur = t.sub(t.scalar_mul(t.matmul(l_tilde, t_prev1), 2.0), t_prev2);
        out = t.add(out, t.mul_scalar_node(t_cur, t.slice(theta, k, k + 1, 0, 1)));
        t_prev2 = t_prev1;
        t_prev1 = t_cur;
    }
    return out;
}

sgc_ll_sample_nodes record_sgc_ll_sample(tape& t, node_id x, const tensor& l_orig,
                                         node_id theta, node_id w_k, node_id b_k, node_id w_d,
                                         const metric_params& metric_hyper, activation act,
                                         const tensor* frozen_laplacian) {
    sgc_ll_sample_nodes nodes{};
    if (frozen_laplacian) {
        nodes.evolved = t.constant(*frozen_laplacian);
        nodes.similarity = -1;
    } else {
        auto rec = record_evolved_laplacian(t, x, w_d, l_orig, metric_hyper);
        nodes.evolved = rec.laplacian;
        nodes.similarity = rec.similarity;
    }
    node_id filtered = record_chebyshev_filter(t, nodes.evolved, x, theta);
    node_id mapped = t.add_row_vector(t.matmul(filtered, w_k), b_k);
    nodes.output = act == activation::relu ? t.relu(mapped) : mapped;
    return nodes;
}

node_id record_graph_max_pool(tape& t, node_id x,
                              const std::vector<std::vector<index_t>>& neighborhoods) {
    if (static_cast<index_t>(neighborhoods.size()) != t.value(x).rows()) {
        throw structural_error("record_graph_max_pool: neighborhood count mismatch");
    }
    return t.max_over_set(x, neighborhoods);
}

node_id record_gather_sample(tape& t, node_id x) {
    const index_t n = t.value(x).rows();
    return t.matmul(t.constant(tensor::full({1, n}, 1.0)), x);
}

sgc_ll_result sgc_ll_forward(const graph_batch& batch, const laplacian_set& intrinsic,
                             const sgc_layer_params& params, tape& t) {
    params.validate();
    if (batch.feature_dim() != params.w_k.rows()) {
        throw structural_error("sgc_ll_forward: batch feature dim " +
                               std::to_string(batch.feature_dim()) +
                               " does not match layer input dim " +
                               std::to_string(params.w_k.rows()));
    }
    if (intrinsic.intrinsic.size() != static_cast<std::size_t>(batch.batch_size())) {
        throw structural_error("sgc_ll_forward: intrinsic Laplacian count mismatch");
    }
    sgc_ll_result res;
    res.theta = t.leaf(params.theta.theta);
    res.w_k = t.leaf(params.w_k);
    res.b_k = t.leaf(params.b_k);
    res.w_d = t.leaf(params.metric.w_d);
    res.output = graph_batch::like(batch, params.w_k.cols());
    for (index_t b = 0; b < batch.batch_size(); ++b) {
        node_id x = t.constant(batch.sample_features(b));
        auto nodes = record_sgc_ll_sample(t, x, intrinsic.intrinsic[static_cast<std::size_t>(b)],
                                          res.theta, res.w_k, res.b_k, res.w_d, params.metric,
                                          params.act);
        res.outputs.push_back(nodes.output);
        res.evolved.push_back(t.value(nodes.evolved));
        res.similarity.push_back(t.value(nodes.similarity));
        res.output.set_sample_features(b, t.value(nodes.output));
    }
    return res;
}

graph_batch graph_max_pool(const graph_batch& batch) {
    graph_batch out = batch;
    for (index_t b = 0; b < batch.batch_size(); ++b) {
        const tensor adj = batch.sample_adjacency(b);
        const tensor x = batch.sample_features(b);
        const auto sets = closed_neighborhoods(adj);
        const index_t n = x.rows(), f = x.cols();
        tensor pooled({n, f});
        for (index_t i = 0; i < n; ++i) {
            for (index_t j = 0; j < f; ++j) {
                double best = x.at(sets[static_cast<std::size_t>(i)][0], j);
                for (index_t r : sets[static_cast<std::size_t>(i)]) {
                    if (x.at(r, j) > best) best = x.at(r, j);
                }
                pooled.at(i, j) = best;
            }
        }
        out.set_sample_features(b, pooled);
    }
    return out;
}

tensor graph_gather(const graph_batch& batch) {
    const index_t bsz = batch.batch_size(), f = batch.feature_dim();
    tensor out({bsz, f});
    for (index_t b = 0; b < bsz; ++b) {
        const index_t n = batch.node_counts[static_cast<std::size_t>(b)];
        for (index_t i = 0; i < n; ++i) {
            for (index_t j = 0; j < f; ++j) out.at(b, j) += batch.features.at3(b, i, j);
        }
    }
    return out;
}

batch_norm_result batch_norm_forward(const graph_batch& batch, batch_norm_state& state,
                                     run_mode mode, tape& t) {
    const index_t bsz = batch.batch_size();
    std::vector<node_id> xs;
    xs.reserve(static_cast<std::size_t>(bsz));
    for (index_t b = 0; b < bsz; ++b) xs.push_back(t.leaf(batch.sample_features(b)));

    batch_norm_result res;
    res.scale = t.leaf(state.scale);
    res.shift = t.leaf(state.shift);
    node_id stacked = t.concat_rows(xs);
    node_id normed;
    if (mode == run_mode::train) {
        tensor bm, bv;
        normed = t.batch_norm_train(stacked, res.scale, res.shift, state.eps, &bm, &bv);
        state.update_running(bm, bv);
    } else {
        normed = t.batch_norm_eval(stacked, res.scale, res.shift, state.running_mean,
                                   state.running_var, state.eps);
    }
    res.output = batch;
    index_t row = 0;
    for (index_t b = 0; b < bsz; ++b) {
        const index_t n = batch.node_counts[static_cast<std::size_t>(b)];
        node_id part = t.slice(normed, row, row + n, 0, batch.feature_dim());
        res.outputs.push_back(part);
        res.output.set_sample_features(b, t.value(part));
        row += n;
    }
    return res;
}

head_result multitask_head_forward(const tensor& gathered, const head_params& params, tape& t) {
    params.validate();
    for (const tensor& w : params.weights) {
        if (w.rows() != gathered.cols()) {
            throw structural_error("multitask_head_forward: head weight " + w.shape_str() +
                                   " does not match gathered width " +
                                   std::to_string(gathered.cols()));
        }
    }
    head_result res;
    node_id g = t.leaf(gathered);
    std::vector<node_id> cols;
    for (std::size_t task = 0; task < params.weights.size(); ++task) {
        node_id w = t.leaf(params.weights[task]);
        node_id b = t.leaf(params.biases[task]);
        res.weight_nodes.push_back(w);
        res.bias_nodes.push_back(b);
        node_id scores = t.matmul(g, w); // B x 1
        const index_t bsz = gathered.rows();
        node_id bias_col = t.matmul(t.constant(tensor::full({bsz, 1}, 1.0)), b);
        cols.push_back(t.add(scores, bias_col));
    }
    res.scores_node = t.concat_cols(cols);
    res.scores = t.value(res.scores_node);
    return res;
}

} // namespace egcn
