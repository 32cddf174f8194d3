#include "egcn/linalg.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace egcn::lin {

namespace {

using emat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using emap = Eigen::Map<const emat>;

emap as_eigen(const tensor& t) { return emap(t.data(), t.rows(), t.cols()); }

} // namespace

tensor matmul(const tensor& a, const tensor& b) {
    if (a.cols() != b.rows()) {
        throw structural_error("matmul: inner dimensions differ, " + a.shape_str() + " x " + b.shape_str());
    }
    tensor out({a.rows(), b.cols()});
    Eigen::Map<emat>(out.data(), out.rows(), out.cols()).noalias() = as_eigen(a) * as_eigen(b);
    return out;
}

tensor transpose(const tensor& a) {
    tensor out({a.cols(), a.rows()});
    for (index_t i = 0; i < a.rows(); ++i) {
        for (index_t j = 0; j < a.cols(); ++j) {
            out.at(j, i) = a.at(i, j);
        }
    }
    return out;
}

eig_result sym_eig(const tensor& a) {
    if (a.rows() != a.cols()) {
        throw structural_error("sym_eig: matrix is not square, " + a.shape_str());
    }
    Eigen::SelfAdjointEigenSolver<emat> solver(as_eigen(a));
    if (solver.info() != Eigen::Success) {
        throw numerical_error("sym_eig: eigendecomposition failed on " + a.shape_str() + " matrix");
    }
    eig_result r;
    const index_t n = a.rows();
    r.eigenvalues = tensor({n, 1});
    r.eigenvectors = tensor({n, n});
    for (index_t i = 0; i < n; ++i) {
        r.eigenvalues.at(i, 0) = solver.eigenvalues()(i);
        for (index_t j = 0; j < n; ++j) {
            r.eigenvectors.at(i, j) = solver.eigenvectors()(i, j);
        }
    }
    return r;
}

power_iteration_result power_iteration(const tensor& a, double rel_tol, int max_iters) {
    if (a.rows() != a.cols()) {
        throw structural_error("power_iteration: matrix is not square, " + a.shape_str());
    }
    const index_t n = a.rows();
    power_iteration_result r;
    r.eigvec = tensor({n, 1});

    // Deterministic start with a small index tilt so structured graphs
    // (e.g. bipartite, whose top eigenvector is orthogonal to all-ones)
    // still have a component along the dominant eigenspace.
    Eigen::VectorXd q(n);
    for (index_t i = 0; i < n; ++i) q(i) = 1.0 + 0.618 * static_cast<double>(i + 1) / static_cast<double>(n);
    q.normalize();

    emap m = as_eigen(a);
    double rq_prev = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= max_iters; ++it) {
        Eigen::VectorXd z = m * q;
        const double rq = q.dot(z);
        const double nz = z.norm();
        r.iters = it;
        r.rq_prev = rq_prev;
        r.rq_last = rq;
        if (std::isfinite(rq_prev) &&
            std::abs(rq - rq_prev) <= rel_tol * std::max(std::abs(rq), 1e-300)) {
            r.lambda = rq;
            r.converged = true;
            for (index_t i = 0; i < n; ++i) r.eigvec.at(i, 0) = q(i);
            return r;
        }
        rq_prev = rq;
        if (nz <= 1e-300) {
            // q landed in the kernel; nudge it deterministically and continue.
            for (index_t i = 0; i < n; ++i) q(i) += 1e-3 * static_cast<double>(i + 1);
            q.normalize();
            continue;
        }
        q = z / nz;
    }
    r.lambda = r.rq_last;
    for (index_t i = 0; i < n; ++i) r.eigvec.at(i, 0) = q(i);
    return r;
}

} // namespace egcn::lin
