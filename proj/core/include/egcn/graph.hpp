#ifndef EGCN_GRAPH_HPP
#define EGCN_GRAPH_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egcn/tensor.hpp"

namespace egcn {

/// One sample: node features, intrinsic adjacency, optional multi-task
/// labels with a validity mask. Immutable after construction.
struct graph {
    tensor node_features;               // N x d
    tensor adjacency;                   // N x N, symmetric, zero diagonal
    std::optional<tensor> labels;       // 1 x T
    std::vector<std::uint8_t> label_mask; // T entries, 1 = labeled
    std::string id;

    index_t num_nodes() const { return node_features.rows(); }
    index_t feature_dim() const { return node_features.cols(); }
    index_t num_tasks() const { return labels ? labels->cols() : 0; }

    /// Checks all structural invariants (symmetry within 1e-12, exactly zero
    /// diagonal, nonnegative weights, finite features, mask length).
    void validate() const;

    static graph make(tensor node_features, tensor adjacency,
                      std::optional<tensor> labels = std::nullopt,
                      std::vector<std::uint8_t> label_mask = {},
                      std::string id = {});
};

/// Zero-padded stack of graphs. Rows/columns at and beyond a sample's node
/// count are exactly zero, so slicing recovers the originals bit-exactly.
struct graph_batch {
    tensor features;     // B x N_max x d
    tensor adjacencies;  // B x N_max x N_max
    std::vector<index_t> node_counts;
    tensor node_mask;    // B x N_max, 1.0 iff i < node_counts[b]
    tensor labels;       // B x T (zeros where unlabeled)
    tensor label_masks;  // B x T
    std::vector<std::string> ids;

    index_t batch_size() const { return static_cast<index_t>(node_counts.size()); }
    index_t n_max() const { return features.shape()[1]; }
    index_t feature_dim() const { return features.shape()[2]; }
    index_t num_tasks() const { return labels.cols(); }

    /// Valid (unpadded) rows of sample b.
    tensor sample_features(index_t b) const;
    tensor sample_adjacency(index_t b) const;

    /// Writes an N_b x d block back into the padded feature tensor of
    /// sample b (used by layers to rebuild a batch from per-sample outputs).
    void set_sample_features(index_t b, const tensor& values);

    /// Replaces the feature tensor with a zero-padded one of a new width.
    static graph_batch like(const graph_batch& other, index_t new_feature_dim);
};

/// Intrinsic Laplacian per sample plus evolved Laplacians per layer.
struct laplacian_set {
    std::vector<tensor> intrinsic;              // per sample
    std::vector<std::vector<tensor>> evolved;   // [layer][sample]
};

/// Row sums of the adjacency.
tensor degree_vector(const tensor& adjacency);

/// I - D^{-1/2} A D^{-1/2} with the isolated-node convention: a zero-degree
/// row keeps L_ii = 1 and zero off-diagonals.
tensor normalized_laplacian(const tensor& adjacency);

/// Pads a list of graphs to a shared node capacity.
graph_batch batch_graphs(std::span<const graph> samples, index_t n_max);

} // namespace egcn

#endif // EGCN_GRAPH_HPP
