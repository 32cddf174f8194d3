#include "egcn/metric.hpp"

#include <cmath>

#include "egcn/graph.hpp"
#include "egcn/linalg.hpp"
#include "egcn/rng.hpp"

namespace egcn {

void metric_params::validate() const {
    if (w_d.rank() != 2 || w_d.rows() < 1 || w_d.cols() < 1) {
        throw structural_error("metric_params: W_d must be d x m with m >= 1, got " + w_d.shape_str());
    }
    if (w_d.cols() > w_d.rows()) {
        throw structural_error("metric_params: W_d rank m must not exceed d, got " + w_d.shape_str());
    }
    if (!(gaussian_sigma > 0.0)) {
        throw parameter_error("metric_params: gaussian_sigma must be positive");
    }
    if (mix_sigma < 0.0 || mix_sigma > 1.0) {
        throw parameter_error("metric_params: mix_sigma must lie in [0, 1]");
    }
    if (threshold < 0.0 || threshold >= 1.0) {
        throw parameter_error("metric_params: threshold must lie in [0, 1)");
    }
    w_d.check_finite("metric_params W_d");
}

tensor metric_params::near_identity_init(index_t d, index_t m, std::uint64_t seed) {
    rng r(seed);
    tensor w({d, m});
    for (index_t i = 0; i < d; ++i) {
        for (index_t j = 0; j < m; ++j) {
            w.at(i, j) = (i == j ? 1.0 : 0.0) + r.normal(0.0, 1e-3);
        }
    }
    return w;
}

tensor mahalanobis_distances(const tensor& x, const tensor& w_d) {
    if (x.rank() != 2 || w_d.rank() != 2 || x.cols() != w_d.rows()) {
        throw structural_error("mahalanobis_distances: features " + x.shape_str() +
                               " incompatible with W_d " + w_d.shape_str());
    }
    x.check_finite("mahalanobis_distances features");
    w_d.check_finite("mahalanobis_distances W_d");
    const tensor z = lin::matmul(x, w_d);
    const index_t n = z.rows(), m = z.cols();
    tensor dist({n, n});
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (index_t k = 0; k < m; ++k) {
                const double diff = z.at(i, k) - z.at(j, k);
                s += diff * diff;
            }
            // Guards the sqrt against tiny negative rounding; the pairwise
            // form keeps s >= 0 already.
            if (s < 0.0) {
                if (s < -1e-12) {
                    throw numerical_error("mahalanobis_distances: squared distance " +
                                          std::to_string(s) + " below clamp window");
                }
                s = 0.0;
            }
            const double v = std::sqrt(s);
            dist.at(i, j) = v;
            dist.at(j, i) = v;
        }
    }
    return dist;
}

tensor gaussian_similarity(const tensor& distances, double sigma) {
    if (!(sigma > 0.0)) {
        throw parameter_error("gaussian_similarity: sigma must be positive, got " +
                              std::to_string(sigma));
    }
    if (distances.rank() != 2 || distances.rows() != distances.cols()) {
        throw structural_error("gaussian_similarity: distances must be square, got " +
                               distances.shape_str());
    }
    const index_t n = distances.rows();
    const double scale = -1.0 / (2.0 * sigma * sigma);
    tensor sim({n, n});
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < n; ++j) {
            sim.at(i, j) = std::exp(scale * distances.at(i, j));
        }
    }
    return sim;
}

tensor similarity_to_adjacency(const tensor& similarity, double threshold) {
    if (similarity.rank() != 2 || similarity.rows() != similarity.cols()) {
        throw structural_error("similarity_to_adjacency: similarity must be square, got " +
                               similarity.shape_str());
    }
    const index_t n = similarity.rows();
    tensor adj = similarity;
    for (index_t i = 0; i < n; ++i) adj.at(i, i) = 0.0;
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < n; ++j) {
            if (adj.at(i, j) < threshold) adj.at(i, j) = 0.0;
        }
    }
    return adj;
}

tensor evolved_laplacian(const tensor& x, const tensor& l_orig, const metric_params& params) {
    params.validate();
    if (l_orig.rank() != 2 || l_orig.rows() != x.rows() || l_orig.cols() != x.rows()) {
        throw structural_error("evolved_laplacian: intrinsic Laplacian " + l_orig.shape_str() +
                               " does not match " + std::to_string(x.rows()) + " nodes");
    }
    const tensor dist = mahalanobis_distances(x, params.w_d);
    const tensor sim = gaussian_similarity(dist, params.gaussian_sigma);
    const tensor adj = similarity_to_adjacency(sim, params.threshold);
    tensor lap = normalized_laplacian(adj);
    const double keep = 1.0 - params.mix_sigma;
    for (index_t i = 0; i < lap.size(); ++i) lap[i] += keep * l_orig[i];
    return lap;
}

node_id record_normalized_laplacian(tape& t, node_id adjacency) {
    const index_t n = t.value(adjacency).rows();
    node_id deg = t.sum_rows(adjacency);
    node_id inv_sqrt = t.rsqrt_or_zero(deg);
    node_id outer = t.matmul(inv_sqrt, t.transpose(inv_sqrt));
    node_id scaled = t.elementwise_mul(outer, adjacency);
    return t.sub(t.constant(tensor::identity(n)), scaled);
}

evolved_laplacian_nodes record_evolved_laplacian(tape& t, node_id x, node_id w_d,
                                                 const tensor& l_orig, const metric_params& params) {
    params.validate();
    node_id z = t.matmul(x, w_d);
    node_id sq = t.pairwise_sq_dists(z);
    node_id dist = t.sqrt(sq);
    const double scale = -1.0 / (2.0 * params.gaussian_sigma * params.gaussian_sigma);
    node_id sim = t.exp(t.scalar_mul(dist, scale));
    node_id adj = t.threshold_keep(t.zero_diag(sim), params.threshold);
    node_id lap = record_normalized_laplacian(t, adj);
    const double keep = 1.0 - params.mix_sigma;
    node_id evolved = lap;
    if (keep != 0.0) {
        tensor scaled_orig = l_orig;
        for (index_t i = 0; i < scaled_orig.size(); ++i) scaled_orig[i] *= keep;
        evolved = t.add(lap, t.constant(std::move(scaled_orig)));
    }
    return {evolved, sim};
}

} // namespace egcn
