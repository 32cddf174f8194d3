#include "egcn/spectral.hpp"

#include <cmath>

#include "egcn/linalg.hpp"

namespace egcn {

void chebyshev_coeffs::validate() const {
    if (theta.rank() != 2 || theta.cols() != 1 || theta.rows() < 1) {
        throw structural_error("chebyshev_coeffs: theta must be K x 1 with K >= 1, got " +
                               theta.shape_str());
    }
    theta.check_finite("chebyshev_coeffs");
}

chebyshev_coeffs chebyshev_coeffs::from(std::vector<double> values) {
    chebyshev_coeffs c{tensor::column(std::move(values))};
    c.validate();
    return c;
}

tensor scale_laplacian(const tensor& laplacian, double lambda_max) {
    if (laplacian.rank() != 2 || laplacian.rows() != laplacian.cols()) {
        throw structural_error("scale_laplacian: matrix must be square, got " + laplacian.shape_str());
    }
    if (!(lambda_max > 0.0)) {
        throw parameter_error("scale_laplacian: lambda_max must be positive, got " +
                              std::to_string(lambda_max));
    }
    const index_t n = laplacian.rows();
    const double s = 2.0 / lambda_max;
    tensor out({n, n});
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < n; ++j) {
            out.at(i, j) = s * laplacian.at(i, j) - (i == j ? 1.0 : 0.0);
        }
    }
    return out;
}

tensor chebyshev_filter(const tensor& l_tilde, const tensor& x, const chebyshev_coeffs& coeffs) {
    coeffs.validate();
    if (l_tilde.rank() != 2 || l_tilde.rows() != l_tilde.cols()) {
        throw structural_error("chebyshev_filter: L_tilde must be square, got " + l_tilde.shape_str());
    }
    if (x.rank() != 2 || x.rows() != l_tilde.rows()) {
        throw structural_error("chebyshev_filter: signal " + x.shape_str() +
                               " does not match operator " + l_tilde.shape_str());
    }
    const index_t k_max = coeffs.order();
    tensor t_prev2 = x; // T_0 x
    tensor out = x;
    for (index_t i = 0; i < out.size(); ++i) out[i] *= coeffs.theta.at(0, 0);
    if (k_max == 1) return out;

    tensor t_prev1 = lin::matmul(l_tilde, x); // T_1 x
    for (index_t i = 0; i < out.size(); ++i) out[i] += coeffs.theta.at(1, 0) * t_prev1[i];
    for (index_t k = 2; k < k_max; ++k) {
        tensor t_cur = lin::matmul(l_tilde, t_prev1);
        for (index_t i = 0; i < t_cur.size(); ++i) t_cur[i] = 2.0 * t_cur[i] - t_prev2[i];
        for (index_t i = 0; i < out.size(); ++i) out[i] += coeffs.theta.at(k, 0) * t_cur[i];
        t_prev2 = std::move(t_prev1);
        t_prev1 = std::move(t_cur);
    }
    return out;
}

tensor spectral_oracle(const tensor& laplacian, const tensor& x, const chebyshev_coeffs& coeffs,
                       double lambda_max) {
    coeffs.validate();
    if (!(lambda_max > 0.0)) {
        throw parameter_error("spectral_oracle: lambda_max must be positive");
    }
    lin::eig_result eig = lin::sym_eig(laplacian);
    const index_t n = laplacian.rows();
    const index_t k_max = coeffs.order();

    // g(lambda) = sum_k theta_k T_k(2 lambda / lambda_max - 1) per eigenvalue.
    tensor filtered({n, 1});
    for (index_t i = 0; i < n; ++i) {
        const double lt = 2.0 * eig.eigenvalues.at(i, 0) / lambda_max - 1.0;
        double tk_prev2 = 1.0, tk_prev1 = lt;
        double g = coeffs.theta.at(0, 0);
        if (k_max > 1) g += coeffs.theta.at(1, 0) * lt;
        for (index_t k = 2; k < k_max; ++k) {
            const double tk = 2.0 * lt * tk_prev1 - tk_prev2;
            g += coeffs.theta.at(k, 0) * tk;
            tk_prev2 = tk_prev1;
            tk_prev1 = tk;
        }
        filtered.at(i, 0) = g;
    }

    // U diag(g) U^T x
    tensor ut_x = lin::matmul(lin::transpose(eig.eigenvectors), x);
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < x.cols(); ++j) ut_x.at(i, j) *= filtered.at(i, 0);
    }
    return lin::matmul(eig.eigenvectors, ut_x);
}

double estimate_lambda_max(const tensor& laplacian, lambda_max_mode mode, double rel_tol,
                           int max_iters) {
    if (laplacian.rank() != 2 || laplacian.rows() != laplacian.cols()) {
        throw structural_error("estimate_lambda_max: matrix must be square, got " +
                               laplacian.shape_str());
    }
    if (mode == lambda_max_mode::fixed_bound) return 2.0;
    auto pi = lin::power_iteration(laplacian, rel_tol, max_iters);
    if (!pi.converged) {
        throw numerical_error("estimate_lambda_max: power iteration did not converge after " +
                              std::to_string(pi.iters) + " iterations; last Rayleigh quotients " +
                              std::to_string(pi.rq_prev) + ", " + std::to_string(pi.rq_last));
    }
    return pi.lambda;
}

} // namespace egcn
