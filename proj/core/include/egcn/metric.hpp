#ifndef EGCN_METRIC_HPP
#define EGCN_METRIC_HPP

#include "egcn/tape.hpp"
#include "egcn/tensor.hpp"

namespace egcn {

/// Trainable metric of one SGC-LL layer. The PSD metric matrix is
/// M = W_d W_d^T; mix_sigma weighs the intrinsic Laplacian inside the
/// residual composition and gaussian_sigma is the (fixed) kernel bandwidth.
struct metric_params {
    tensor w_d;                  // d x m, m <= d
    double gaussian_sigma = 1.0; // kernel bandwidth, > 0
    double mix_sigma = 1.0;      // residual mixing weight, in [0, 1]
    double threshold = 0.0;      // similarity-to-adjacency cutoff, in [0, 1)

    void validate() const;

    /// Identity truncated to d x m plus Gaussian noise (std 1e-3), so the
    /// initial metric is near-Euclidean and the initial residual is small.
    static tensor near_identity_init(index_t d, index_t m, std::uint64_t seed);
};

/// Pairwise D(i,j) = || (x_i - x_j) W_d ||_2, i.e. Euclidean distances of the
/// projected rows. Symmetric, exactly zero diagonal, nonnegative.
tensor mahalanobis_distances(const tensor& x, const tensor& w_d);

/// G(i,j) = exp(-D(i,j) / (2 sigma^2)); the exponent uses the distance, not
/// its square. Unit diagonal, entries in (0, 1].
tensor gaussian_similarity(const tensor& distances, double sigma);

/// Zeroes the diagonal and every entry below the threshold.
tensor similarity_to_adjacency(const tensor& similarity, double threshold);

/// Full residual composition: F is the normalized Laplacian of the learned
/// graph and L_e = F + (1 - mix_sigma) * l_orig.
tensor evolved_laplacian(const tensor& x, const tensor& l_orig, const metric_params& params);

/// Tape-recorded evolved Laplacian for training. Returns the L_e node plus
/// the pre-threshold similarity node (what snapshot inspection records).
struct evolved_laplacian_nodes {
    node_id laplacian;
    node_id similarity;
};
evolved_laplacian_nodes record_evolved_laplacian(tape& t, node_id x, node_id w_d,
                                                 const tensor& l_orig, const metric_params& params);

/// Normalized Laplacian recorded on the tape; the degree is differentiated
/// as a function of the adjacency (full chain rule through the row sums).
node_id record_normalized_laplacian(tape& t, node_id adjacency);

} // namespace egcn

#endif // EGCN_METRIC_HPP
