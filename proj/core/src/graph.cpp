#include "egcn/graph.hpp"

#include <cmath>

namespace egcn {

void graph::validate() const {
    const index_t n = node_features.rows();
    const index_t d = node_features.cols();
    if (n < 1) throw structural_error("graph '" + id + "': needs at least one node");
    if (d < 1) throw structural_error("graph '" + id + "': needs at least one feature");
    if (node_features.rank() != 2) {
        throw structural_error("graph '" + id + "': features must be rank 2");
    }
    if (adjacency.rank() != 2 || adjacency.rows() != n || adjacency.cols() != n) {
        throw structural_error("graph '" + id + "': adjacency " + adjacency.shape_str() +
                               " does not match " + std::to_string(n) + " nodes");
    }
    node_features.check_finite("graph '" + id + "' features");
    adjacency.check_finite("graph '" + id + "' adjacency");
    for (index_t i = 0; i < n; ++i) {
        if (adjacency.at(i, i) != 0.0) {
            throw structural_error("graph '" + id + "': nonzero diagonal at node " + std::to_string(i));
        }
        for (index_t j = 0; j < n; ++j) {
            if (adjacency.at(i, j) < 0.0) {
                throw structural_error("graph '" + id + "': negative adjacency entry at (" +
                                       std::to_string(i) + "," + std::to_string(j) + ")");
            }
            if (std::abs(adjacency.at(i, j) - adjacency.at(j, i)) > 1e-12) {
                throw structural_error("graph '" + id + "': adjacency not symmetric at (" +
                                       std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
    if (labels) {
        if (labels->rank() != 2 || labels->rows() != 1) {
            throw structural_error("graph '" + id + "': labels must be a 1 x T row");
        }
        if (static_cast<index_t>(label_mask.size()) != labels->cols()) {
            throw structural_error("graph '" + id + "': label mask length " +
                                   std::to_string(label_mask.size()) + " != " +
                                   std::to_string(labels->cols()) + " tasks");
        }
        labels->check_finite("graph '" + id + "' labels");
    } else if (!label_mask.empty()) {
        throw structural_error("graph '" + id + "': label mask without labels");
    }
}

graph graph::make(tensor node_features, tensor adjacency, std::optional<tensor> labels,
                  std::vector<std::uint8_t> label_mask, std::string id) {
    graph g;
    g.node_features = std::move(node_features);
    g.adjacency = std::move(adjacency);
    g.labels = std::move(labels);
    g.label_mask = std::move(label_mask);
    g.id = std::move(id);
    g.validate();
    return g;
}

tensor degree_vector(const tensor& adjacency) {
    if (adjacency.rank() != 2 || adjacency.rows() != adjacency.cols()) {
        throw structural_error("degree_vector: adjacency must be square, got " + adjacency.shape_str());
    }
    const index_t n = adjacency.rows();
    tensor deg({n, 1});
    for (index_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (index_t j = 0; j < n; ++j) s += adjacency.at(i, j);
        deg.at(i, 0) = s;
    }
    return deg;
}

tensor normalized_laplacian(const tensor& adjacency) {
    if (adjacency.rank() != 2 || adjacency.rows() != adjacency.cols()) {
        throw structural_error("normalized_laplacian: adjacency must be square, got " +
                               adjacency.shape_str());
    }
    const index_t n = adjacency.rows();
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < n; ++j) {
            if (adjacency.at(i, j) < 0.0) {
                throw structural_error("normalized_laplacian: negative entry at (" +
                                       std::to_string(i) + "," + std::to_string(j) + ")");
            }
            if (std::abs(adjacency.at(i, j) - adjacency.at(j, i)) > 1e-12) {
                throw structural_error("normalized_laplacian: adjacency not symmetric at (" +
                                       std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
    tensor deg = degree_vector(adjacency);
    tensor s({n, 1});
    for (index_t i = 0; i < n; ++i) {
        s.at(i, 0) = deg.at(i, 0) == 0.0 ? 0.0 : 1.0 / std::sqrt(deg.at(i, 0));
    }
    tensor lap({n, n});
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < n; ++j) {
            const double v = (s.at(i, 0) * s.at(j, 0)) * adjacency.at(i, j);
            lap.at(i, j) = i == j ? 1.0 - v : -v;
        }
    }
    return lap;
}

tensor graph_batch::sample_features(index_t b) const {
    const index_t n = node_counts[static_cast<std::size_t>(b)];
    const index_t d = feature_dim();
    tensor out({n, d});
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < d; ++j) out.at(i, j) = features.at3(b, i, j);
    }
    return out;
}

tensor graph_batch::sample_adjacency(index_t b) const {
    const index_t n = node_counts[static_cast<std::size_t>(b)];
    tensor out({n, n});
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < n; ++j) out.at(i, j) = adjacencies.at3(b, i, j);
    }
    return out;
}

void graph_batch::set_sample_features(index_t b, const tensor& values) {
    const index_t n = node_counts[static_cast<std::size_t>(b)];
    if (values.rows() != n || values.cols() != feature_dim()) {
        throw structural_error("graph_batch: sample block " + values.shape_str() +
                               " does not fit sample " + std::to_string(b));
    }
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < values.cols(); ++j) features.at3(b, i, j) = values.at(i, j);
    }
}

graph_batch graph_batch::like(const graph_batch& other, index_t new_feature_dim) {
    graph_batch out = other;
    out.features = tensor({other.batch_size(), other.n_max(), new_feature_dim});
    return out;
}

graph_batch batch_graphs(std::span<const graph> samples, index_t n_max) {
    if (samples.empty()) throw data_error("batch_graphs: empty batch");
    const index_t b = static_cast<index_t>(samples.size());
    const index_t d = samples[0].feature_dim();
    const index_t t = samples[0].num_tasks();
    for (const graph& g : samples) {
        if (g.num_nodes() > n_max) {
            throw capacity_error("batch_graphs: sample '" + g.id + "' has " +
                                 std::to_string(g.num_nodes()) + " nodes, capacity is " +
                                 std::to_string(n_max));
        }
        if (g.feature_dim() != d) {
            throw structural_error("batch_graphs: sample '" + g.id + "' feature dim " +
                                   std::to_string(g.feature_dim()) + " != " + std::to_string(d));
        }
        if (g.num_tasks() != t) {
            throw structural_error("batch_graphs: sample '" + g.id + "' task count " +
                                   std::to_string(g.num_tasks()) + " != " + std::to_string(t));
        }
    }
    graph_batch out;
    out.features = tensor({b, n_max, d});
    out.adjacencies = tensor({b, n_max, n_max});
    out.node_mask = tensor({b, n_max});
    out.labels = tensor({b, t});
    out.label_masks = tensor({b, t});
    out.node_counts.resize(static_cast<std::size_t>(b));
    out.ids.resize(static_cast<std::size_t>(b));
    for (index_t k = 0; k < b; ++k) {
        const graph& g = samples[static_cast<std::size_t>(k)];
        const index_t n = g.num_nodes();
        out.node_counts[static_cast<std::size_t>(k)] = n;
        out.ids[static_cast<std::size_t>(k)] = g.id;
        for (index_t i = 0; i < n; ++i) {
            out.node_mask.at(k, i) = 1.0;
            for (index_t j = 0; j < d; ++j) out.features.at3(k, i, j) = g.node_features.at(i, j);
            for (index_t j = 0; j < n; ++j) out.adjacencies.at3(k, i, j) = g.adjacency.at(i, j);
        }
        if (g.labels) {
            for (index_t j = 0; j < t; ++j) {
                out.labels.at(k, j) = g.labels->at(0, j);
                out.label_masks.at(k, j) = g.label_mask[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
            }
        }
    }
    return out;
}

} // namespace egcn
