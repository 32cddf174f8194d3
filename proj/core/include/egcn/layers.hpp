#ifndef EGCN_LAYERS_HPP
#define EGCN_LAYERS_HPP

#include <vector>

#include "egcn/graph.hpp"
#include "egcn/metric.hpp"
#include "egcn/spectral.hpp"
#include "egcn/tape.hpp"

namespace egcn {

enum class activation { relu, identity };
enum class run_mode { train, eval };

/// Parameters of one SGC-LL layer: spectral coefficients, the feature-domain
/// map, and the trainable metric.
struct sgc_layer_params {
    chebyshev_coeffs theta;
    tensor w_k; // f_in x f_out
    tensor b_k; // 1 x f_out
    metric_params metric;
    activation act = activation::relu;

    void validate() const;
    /// K + f_in * f_out + f_out + d * m
    index_t param_count() const;
};

/// Per-task affine heads (one dense leaf per task).
struct head_params {
    std::vector<tensor> weights; // each h x 1
    std::vector<tensor> biases;  // each 1 x 1

    index_t num_tasks() const { return static_cast<index_t>(weights.size()); }
    void validate() const;
};

/// Batch-normalization scale/shift plus running statistics.
struct batch_norm_state {
    tensor scale;        // 1 x f
    tensor shift;        // 1 x f
    tensor running_mean; // 1 x f
    tensor running_var;  // 1 x f
    double eps = 1e-5;
    double momentum = 0.9;

    static batch_norm_state init(index_t width);
    void update_running(const tensor& batch_mean, const tensor& batch_var);
};

/// Closed neighborhoods ({v} plus every j with adjacency(v, j) > 0).
std::vector<std::vector<index_t>> closed_neighborhoods(const tensor& adjacency);

// ---------------------------------------------------------------------------
// Tape builders (per-sample, valid nodes only). These are what the model and
// the contract-level wrappers below share.
// ---------------------------------------------------------------------------

/// Chebyshev filter against a tape-recorded Laplacian; rescaling runs through
/// a lambda_max node so the gradient sees the full chain.
node_id record_chebyshev_filter(tape& t, node_id laplacian, node_id x, node_id theta);

/// One SGC-LL application for a single sample: evolved Laplacian, rescale,
/// filter, feature map, activation.
struct sgc_ll_sample_nodes {
    node_id output;
    node_id evolved;
    node_id similarity; // -1 when a frozen Laplacian was supplied
};
sgc_ll_sample_nodes record_sgc_ll_sample(tape& t, node_id x, const tensor& l_orig,
                                         node_id theta, node_id w_k, node_id b_k, node_id w_d,
                                         const metric_params& metric_hyper, activation act,
                                         const tensor* frozen_laplacian = nullptr);

node_id record_graph_max_pool(tape& t, node_id x, const std::vector<std::vector<index_t>>& neighborhoods);

/// 1 x f sum of all rows.
node_id record_gather_sample(tape& t, node_id x);

// ---------------------------------------------------------------------------
// Contract-level layer operations on padded batches. Padded rows never enter
// the math and stay zero in the outputs.
// ---------------------------------------------------------------------------

struct sgc_ll_result {
    graph_batch output;
    std::vector<tensor> evolved;    // per sample
    std::vector<tensor> similarity; // per sample
    node_id theta, w_k, b_k, w_d;   // parameter leaves, for gradient queries
    std::vector<node_id> outputs;   // per-sample output nodes
};
sgc_ll_result sgc_ll_forward(const graph_batch& batch, const laplacian_set& intrinsic,
                             const sgc_layer_params& params, tape& t);

/// Per-feature max over each node's closed intrinsic neighborhood.
graph_batch graph_max_pool(const graph_batch& batch);

/// Per-sample sum of valid node features: B x f.
tensor graph_gather(const graph_batch& batch);

struct batch_norm_result {
    graph_batch output;
    node_id scale, shift;
    std::vector<node_id> outputs;
};
batch_norm_result batch_norm_forward(const graph_batch& batch, batch_norm_state& state,
                                     run_mode mode, tape& t);

struct head_result {
    tensor scores; // B x T logits
    node_id scores_node;
    std::vector<node_id> weight_nodes, bias_nodes;
};
head_result multitask_head_forward(const tensor& gathered, const head_params& params, tape& t);

} // namespace egcn

#endif // EGCN_LAYERS_HPP
