#ifndef EGCN_SPECTRAL_HPP
#define EGCN_SPECTRAL_HPP

#include "egcn/tensor.hpp"

namespace egcn {

/// Polynomial filter coefficients theta_0..theta_{K-1}.
struct chebyshev_coeffs {
    tensor theta; // K x 1

    index_t order() const { return theta.rows(); }
    void validate() const;

    static chebyshev_coeffs from(std::vector<double> values);
};

/// L_tilde = (2 / lambda_max) * L - I.
tensor scale_laplacian(const tensor& laplacian, double lambda_max);

/// sum_k theta_k T_k(L_tilde) x via the three-term recursion. Only two
/// N x d panels are alive at a time; no polynomial of L_tilde is formed.
tensor chebyshev_filter(const tensor& l_tilde, const tensor& x, const chebyshev_coeffs& coeffs);

/// Dense graph-Fourier reference: eigendecomposes L, applies the polynomial
/// to the rescaled eigenvalues, reconstructs. Test oracle, not a fast path.
tensor spectral_oracle(const tensor& laplacian, const tensor& x, const chebyshev_coeffs& coeffs,
                       double lambda_max);

enum class lambda_max_mode {
    fixed_bound, ///< returns 2.0, valid for normalized Laplacians
    exact        ///< power iteration on the given matrix
};

/// Largest eigenvalue estimate used to rescale a Laplacian before filtering.
double estimate_lambda_max(const tensor& laplacian,
                           lambda_max_mode mode = lambda_max_mode::fixed_bound,
                           double rel_tol = 1e-8, int max_iters = 1000);

} // namespace egcn

#endif // EGCN_SPECTRAL_HPP
