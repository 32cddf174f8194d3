#ifndef EGCN_MODEL_HPP
#define EGCN_MODEL_HPP

#include <string>
#include <vector>

#include "egcn/layers.hpp"
#include "egcn/param_store.hpp"

namespace egcn {

struct layer_spec {
    enum class kind { sgcll, bn, pool };
    kind k = kind::sgcll;
    index_t out_dim = 0; // sgcll only
};

/// Parses tokens like "sgcll:16", "bn", "pool".
std::vector<layer_spec> parse_architecture(const std::vector<std::string>& tokens);

struct model_config {
    index_t input_dim = 0;
    index_t num_tasks = 1;
    index_t k_hops = 3;      // Chebyshev order K
    index_t metric_rank = 0; // 0 = match the layer input dim
    double mix_sigma = 1.0;
    double gaussian_sigma = 1.0;
    double threshold = 0.0;
    activation act = activation::relu;
    std::vector<layer_spec> arch;
    // Optional per-SGC-LL-layer overrides (indexed by SGC-LL position).
    std::vector<double> mix_sigma_per_layer;
    std::vector<double> gaussian_sigma_per_layer;
    std::vector<double> threshold_per_layer;

    void validate() const;
    index_t num_sgcll_layers() const;
    /// Feature width entering the heads.
    index_t output_dim() const;
};

/// The full evolving graph convolutional network: SGC-LL blocks, pooling,
/// batch normalization, graph gather and multi-task heads, with all
/// trainable tensors in a param_store.
class model {
public:
    model(model_config cfg, std::uint64_t seed);

    param_store& store() { return store_; }
    const param_store& store() const { return store_; }
    const model_config& config() const { return cfg_; }

    /// Cached per-sample Laplacians/similarities for frozen-metric runs.
    struct frozen_laplacians {
        // [sgcll layer][sample in batch order]
        std::vector<std::vector<tensor>> laplacian;
        std::vector<std::vector<tensor>> similarity;
    };

    struct forward_result {
        node_id scores = -1; // B x T logits
        std::vector<std::vector<tensor>> evolved;    // [sgcll layer][sample]
        std::vector<std::vector<tensor>> similarity; // [sgcll layer][sample]
    };

    /// Records the whole network on the tape. When frozen is supplied, the
    /// metric pipeline is skipped and the cached Laplacians are used as
    /// constants (so the metric weights receive zero gradient).
    forward_result forward(tape& t, const graph_batch& batch, run_mode mode,
                           const frozen_laplacians* frozen = nullptr);

    /// Computes the frozen-metric cache: each sample is run alone in eval
    /// mode under the current parameters and its per-layer Laplacian and
    /// similarity are captured. Batch composition cannot leak in because
    /// eval-mode normalization uses running statistics only.
    frozen_laplacians compute_frozen_cache(std::span<const graph> samples);

    /// Current learned similarity of one sample at one SGC-LL layer.
    tensor similarity_snapshot(const graph& sample, index_t sgcll_layer);

    std::vector<batch_norm_state>& bn_states() { return bn_states_; }
    const std::vector<batch_norm_state>& bn_states() const { return bn_states_; }

    /// Parameter names of the metric weights (the freeze_metric targets).
    std::vector<std::string> metric_param_names() const;

private:
    metric_params metric_hyper(index_t sgcll_index, index_t input_dim) const;

    model_config cfg_;
    param_store store_;
    std::vector<batch_norm_state> bn_states_;
    std::vector<index_t> layer_input_dims_; // input width per arch position
};

} // namespace egcn

#endif // EGCN_MODEL_HPP
