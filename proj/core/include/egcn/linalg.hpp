#ifndef EGCN_LINALG_HPP
#define EGCN_LINALG_HPP

#include "egcn/tensor.hpp"

namespace egcn::lin {

/// Dense matrix product of rank-2 tensors.
tensor matmul(const tensor& a, const tensor& b);

tensor transpose(const tensor& a);

/// Eigendecomposition of a symmetric matrix.
struct eig_result {
    tensor eigenvalues;  // n x 1, ascending
    tensor eigenvectors; // n x n, column k pairs with eigenvalue k
};
eig_result sym_eig(const tensor& a);

/// Power iteration for the dominant eigenvalue of a symmetric PSD matrix.
/// Stops when the Rayleigh quotient changes by <= rel_tol relative.
struct power_iteration_result {
    double lambda = 0.0;
    tensor eigvec;        // n x 1, unit norm
    bool converged = false;
    double rq_prev = 0.0; // last two Rayleigh quotients, for diagnostics
    double rq_last = 0.0;
    int iters = 0;
};
power_iteration_result power_iteration(const tensor& a, double rel_tol, int max_iters);

} // namespace egcn::lin

#endif // EGCN_LINALG_HPP
