#include <doctest.h>

#include "egcn/graph.hpp"
#include "egcn/spectral.hpp"
#include "test_util.hpp"

using namespace egcn;
using namespace egcn::test;

TEST_CASE("scale_laplacian examples") {
    CHECK(max_abs_diff(scale_laplacian(tensor::identity(3), 2.0), tensor({3, 3})) == 0.0);
    tensor lap = tensor::matrix({{1, -1}, {-1, 1}});
    CHECK(max_abs_diff(scale_laplacian(lap, 2.0), tensor::matrix({{0, -1}, {-1, 0}})) == 0.0);
    CHECK_THROWS_AS(scale_laplacian(lap, 0.0), parameter_error);
    CHECK_THROWS_AS(scale_laplacian(lap, -1.0), parameter_error);
}

TEST_CASE("scaled spectrum lands in [-1, 1]") {
    rng r(21);
    tensor lap = normalized_laplacian(random_adjacency(r, 6));
    auto eigs = eigenvalues_of(lap);
    const double lam_max = eigs.back();
    auto scaled = eigenvalues_of(scale_laplacian(lap, lam_max));
    CHECK(scaled.front() >= -1.0 - 1e-10);
    CHECK(scaled.back() <= 1.0 + 1e-10);
}

TEST_CASE("chebyshev_filter low-order identities") {
    rng r(8);
    tensor lt = scale_laplacian(normalized_laplacian(random_adjacency(r, 5)), 2.0);
    tensor x = random_tensor(r, {5, 3});
    CHECK(max_abs_diff(chebyshev_filter(lt, x, chebyshev_coeffs::from({1.0})), x) == 0.0);
    tensor ltx = lin::matmul(lt, x);
    CHECK(max_abs_diff(chebyshev_filter(lt, x, chebyshev_coeffs::from({0.0, 1.0})), ltx) <= 1e-15);
    CHECK_THROWS_AS(chebyshev_filter(lt, tensor({4, 3}), chebyshev_coeffs::from({1.0})),
                    structural_error);
}

TEST_CASE("chebyshev_filter matches the dense spectral oracle") {
    rng r(77);
    tensor lap = normalized_laplacian(random_adjacency(r, 8));
    tensor x = random_tensor(r, {8, 4});
    chebyshev_coeffs theta = chebyshev_coeffs::from({0.7, -0.3, 0.5, 0.2});
    const double lam = eigenvalues_of(lap).back();
    tensor fast = chebyshev_filter(scale_laplacian(lap, lam), x, theta);
    tensor exact = spectral_oracle(lap, x, theta, lam);
    double scale = 0.0;
    for (index_t i = 0; i < exact.size(); ++i) scale = std::max(scale, std::abs(exact[i]));
    CHECK(max_abs_diff(fast, exact) <= 1e-10 * std::max(1.0, scale));
}

TEST_CASE("spectral_oracle identities") {
    rng r(13);
    tensor x = random_tensor(r, {4, 2});
    // L = I: the filter is the scalar polynomial value at 2/lambda_max - 1.
    chebyshev_coeffs theta = chebyshev_coeffs::from({0.4, 0.25, -0.6});
    const double lam = 1.7;
    tensor out = spectral_oracle(tensor::identity(4), x, theta, lam);
    const double lt = 2.0 / lam - 1.0;
    const double g = 0.4 + 0.25 * lt + (-0.6) * (2.0 * lt * lt - 1.0);
    tensor expected = x;
    for (index_t i = 0; i < expected.size(); ++i) expected[i] *= g;
    CHECK(max_abs_diff(out, expected) <= 1e-12);

    // theta = [1, 0, 0] reproduces x for any symmetric PSD L.
    tensor lap = normalized_laplacian(random_adjacency(r, 4));
    tensor same = spectral_oracle(lap, x, chebyshev_coeffs::from({1.0, 0.0, 0.0}), 2.0);
    CHECK(max_abs_diff(same, x) <= 1e-12);
}

TEST_CASE("estimate_lambda_max modes") {
    tensor edge = normalized_laplacian(tensor::matrix({{0, 1}, {1, 0}}));
    CHECK(estimate_lambda_max(edge) == 2.0); // fixed bound
    CHECK(estimate_lambda_max(edge, lambda_max_mode::exact) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(estimate_lambda_max(tensor::identity(5), lambda_max_mode::exact) ==
          doctest::Approx(1.0).epsilon(1e-8));
    rng r(5);
    CHECK(estimate_lambda_max(random_tensor(r, {4, 4})) == 2.0); // fixed mode is constant
}

TEST_CASE("filter is linear in the signal and the coefficients") {
    rng r(119);
    tensor lt = scale_laplacian(normalized_laplacian(random_adjacency(r, 7)), 2.0);
    tensor x1 = random_tensor(r, {7, 3});
    tensor x2 = random_tensor(r, {7, 3});
    chebyshev_coeffs t1 = chebyshev_coeffs::from({0.3, 0.2, -0.4});
    chebyshev_coeffs t2 = chebyshev_coeffs::from({-0.1, 0.6, 0.25});

    tensor sum_x = x1;
    for (index_t i = 0; i < sum_x.size(); ++i) sum_x[i] += x2[i];
    tensor lhs = chebyshev_filter(lt, sum_x, t1);
    tensor rhs = chebyshev_filter(lt, x1, t1);
    tensor rhs2 = chebyshev_filter(lt, x2, t1);
    for (index_t i = 0; i < rhs.size(); ++i) rhs[i] += rhs2[i];
    CHECK(max_abs_diff(lhs, rhs) <= 1e-10);

    chebyshev_coeffs t_sum = chebyshev_coeffs::from(
        {t1.theta[0] + t2.theta[0], t1.theta[1] + t2.theta[1], t1.theta[2] + t2.theta[2]});
    tensor lhs_t = chebyshev_filter(lt, x1, t_sum);
    tensor rhs_t = chebyshev_filter(lt, x1, t1);
    tensor rhs_t2 = chebyshev_filter(lt, x1, t2);
    for (index_t i = 0; i < rhs_t.size(); ++i) rhs_t[i] += rhs_t2[i];
    CHECK(max_abs_diff(lhs_t, rhs_t) <= 1e-10);
}

TEST_CASE("filter is permutation equivariant") {
    rng r(211);
    for (int trial = 0; trial < 10; ++trial) {
        const index_t n = 4 + static_cast<index_t>(r.below(5));
        tensor lt = scale_laplacian(normalized_laplacian(random_adjacency(r, n)), 2.0);
        tensor x = random_tensor(r, {n, 2});
        chebyshev_coeffs theta = chebyshev_coeffs::from({0.5, -0.2, 0.3, 0.1});
        tensor p = permutation_matrix(random_permutation(r, n));
        tensor p_lt = lin::matmul(lin::matmul(p, lt), lin::transpose(p));
        tensor p_x = lin::matmul(p, x);
        tensor lhs = chebyshev_filter(p_lt, p_x, theta);
        tensor rhs = lin::matmul(p, chebyshev_filter(lt, x, theta));
        CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
    }
}

TEST_CASE("power iteration reports the last Rayleigh quotients on failure") {
    rng r(6);
    tensor lap = normalized_laplacian(random_adjacency(r, 6));
    // One iteration can never satisfy the stopping rule.
    CHECK_THROWS_AS(estimate_lambda_max(lap, lambda_max_mode::exact, 1e-8, 1), numerical_error);
    try {
        estimate_lambda_max(lap, lambda_max_mode::exact, 1e-8, 1);
    } catch (const numerical_error& e) {
        CHECK(std::string(e.what()).find("Rayleigh") != std::string::npos);
    }
}

TEST_CASE("chebyshev_coeffs validation") {
    CHECK_THROWS_AS(chebyshev_coeffs{tensor({0, 1})}.validate(), structural_error);
    CHECK_THROWS_AS(chebyshev_coeffs{tensor({2, 2})}.validate(), structural_error);
    CHECK_NOTHROW(chebyshev_coeffs::from({1.0, 2.0}));
}
