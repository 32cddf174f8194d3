#include <doctest.h>

#include "egcn/graph.hpp"
#include "egcn/metric.hpp"
#include "test_util.hpp"

using namespace egcn;
using namespace egcn::test;

TEST_CASE("mahalanobis with identity W_d is plain Euclidean distance") {
    rng r(41);
    tensor x = random_tensor(r, {5, 3});
    tensor dist = mahalanobis_distances(x, tensor::identity(3));
    for (index_t i = 0; i < 5; ++i) {
        for (index_t j = 0; j < 5; ++j) {
            double s = 0.0;
            for (index_t k = 0; k < 3; ++k) {
                const double d = x.at(i, k) - x.at(j, k);
                s += d * d;
            }
            CHECK(dist.at(i, j) == doctest::Approx(std::sqrt(s)).epsilon(1e-12));
        }
    }
}

TEST_CASE("identical rows have exactly zero distance") {
    tensor x = tensor::matrix({{1.5, -2.0}, {1.5, -2.0}, {0.0, 1.0}});
    tensor dist = mahalanobis_distances(x, tensor::identity(2));
    CHECK(dist.at(0, 1) == 0.0);
    CHECK(dist.at(0, 0) == 0.0);
    CHECK(dist.at(2, 2) == 0.0);
}

TEST_CASE("1-d projection hand example") {
    tensor x = tensor::matrix({{0.0}, {3.0}});
    tensor w = tensor::matrix({{2.0}});
    tensor dist = mahalanobis_distances(x, w);
    CHECK(dist.at(0, 1) == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("gaussian_similarity examples") {
    tensor zeros({3, 3});
    tensor ones = gaussian_similarity(zeros, 1.3);
    CHECK(max_abs_diff(ones, tensor::full({3, 3}, 1.0)) == 0.0);

    const double sigma = 0.8;
    tensor d({2, 2});
    d.at(0, 1) = 2.0 * sigma * sigma;
    d.at(1, 0) = d.at(0, 1);
    tensor sim = gaussian_similarity(d, sigma);
    CHECK(sim.at(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    CHECK(sim.at(0, 0) == 1.0);
    CHECK_THROWS_AS(gaussian_similarity(d, 0.0), parameter_error);
}

TEST_CASE("gaussian_similarity of a symmetric distance matrix is exactly symmetric") {
    rng r(42);
    tensor x = random_tensor(r, {6, 4});
    tensor dist = mahalanobis_distances(x, random_tensor(r, {4, 4}));
    tensor sim = gaussian_similarity(dist, 1.0);
    CHECK(max_abs_diff(sim, lin::transpose(sim)) == 0.0);
}

TEST_CASE("similarity_to_adjacency examples") {
    rng r(43);
    tensor sim = gaussian_similarity(mahalanobis_distances(random_tensor(r, {4, 2}),
                                                           tensor::identity(2)), 1.0);
    tensor adj0 = similarity_to_adjacency(sim, 0.0);
    for (index_t i = 0; i < 4; ++i) CHECK(adj0.at(i, i) == 0.0);
    for (index_t i = 0; i < 4; ++i) {
        for (index_t j = 0; j < 4; ++j) {
            if (i != j) CHECK(adj0.at(i, j) == sim.at(i, j));
        }
    }

    tensor all_ones = tensor::full({3, 3}, 1.0);
    tensor nearly_complete = similarity_to_adjacency(all_ones, 1.0 - 1e-9);
    for (index_t i = 0; i < 3; ++i) {
        for (index_t j = 0; j < 3; ++j) {
            CHECK(nearly_complete.at(i, j) == (i == j ? 0.0 : 1.0));
        }
    }

    // Threshold above every off-diagonal entry isolates all nodes.
    double max_off = 0.0;
    for (index_t i = 0; i < 4; ++i) {
        for (index_t j = 0; j < 4; ++j) {
            if (i != j) max_off = std::max(max_off, sim.at(i, j));
        }
    }
    tensor isolated = similarity_to_adjacency(sim, std::min(0.999999, max_off + 1e-6));
    CHECK(max_abs_diff(isolated, tensor({4, 4})) == 0.0);
    CHECK(max_abs_diff(normalized_laplacian(isolated), tensor::identity(4)) == 0.0);
}

TEST_CASE("evolved_laplacian composition identities") {
    rng r(51);
    tensor x = random_tensor(r, {5, 3});
    tensor l_orig = normalized_laplacian(random_adjacency(r, 5));

    metric_params p;
    p.w_d = metric_params::near_identity_init(3, 3, 7);
    p.gaussian_sigma = 1.0;

    // mix_sigma = 1: the learned Laplacian fully replaces the intrinsic term.
    p.mix_sigma = 1.0;
    tensor f = normalized_laplacian(similarity_to_adjacency(
        gaussian_similarity(mahalanobis_distances(x, p.w_d), p.gaussian_sigma), p.threshold));
    CHECK(max_abs_diff(evolved_laplacian(x, l_orig, p), f) == 0.0);

    // mix_sigma = 0: sum of the two constituent matrices.
    p.mix_sigma = 0.0;
    tensor expected = f;
    for (index_t i = 0; i < expected.size(); ++i) expected[i] += l_orig[i];
    CHECK(max_abs_diff(evolved_laplacian(x, l_orig, p), expected) <= 1e-15);
}

TEST_CASE("evolved_laplacian fixed point when F equals the intrinsic Laplacian") {
    // A single isolated pair with identical learned and intrinsic graphs:
    // the residual is zero and L_e = l_orig.
    tensor x = tensor::matrix({{0.0, 0.0}, {1.0, 0.0}});
    metric_params p;
    p.w_d = tensor::identity(2);
    p.gaussian_sigma = 1.0;
    p.mix_sigma = 1.0;
    const double w = std::exp(-0.5); // similarity of the pair at distance 1
    tensor intrinsic_adj = tensor::matrix({{0, w}, {w, 0}});
    tensor l_orig = normalized_laplacian(intrinsic_adj);
    tensor evolved = evolved_laplacian(x, l_orig, p);
    CHECK(max_abs_diff(evolved, l_orig) <= 1e-15);
}

TEST_CASE("metric matrix W_d W_d^T is PSD for random draws") {
    rng r(61);
    for (int trial = 0; trial < 30; ++trial) {
        const index_t d = 2 + static_cast<index_t>(r.below(5));
        const index_t m = 1 + static_cast<index_t>(r.below(static_cast<std::uint64_t>(d)));
        tensor w = random_tensor(r, {d, m});
        tensor metric = lin::matmul(w, lin::transpose(w));
        CHECK(eigenvalues_of(metric).front() >= -1e-10);
    }
}

TEST_CASE("mahalanobis distances form a pseudo-metric") {
    rng r(71);
    for (int trial = 0; trial < 50; ++trial) {
        const index_t d = 2 + static_cast<index_t>(r.below(4));
        tensor x = random_tensor(r, {3, d});
        tensor w = random_tensor(r, {d, 1 + static_cast<index_t>(r.below(static_cast<std::uint64_t>(d)))});
        tensor dist = mahalanobis_distances(x, w);
        CHECK(max_abs_diff(dist, lin::transpose(dist)) == 0.0);
        for (index_t i = 0; i < 3; ++i) CHECK(dist.at(i, i) == 0.0);
        for (index_t i = 0; i < dist.size(); ++i) CHECK(dist[i] >= 0.0);
        CHECK(dist.at(0, 2) <= dist.at(0, 1) + dist.at(1, 2) + 1e-9);
        CHECK(dist.at(0, 1) <= dist.at(0, 2) + dist.at(2, 1) + 1e-9);
    }
}

TEST_CASE("evolved_laplacian is jointly permutation equivariant") {
    rng r(81);
    for (int trial = 0; trial < 10; ++trial) {
        const index_t n = 4 + static_cast<index_t>(r.below(4));
        tensor x = random_tensor(r, {n, 3});
        tensor l_orig = normalized_laplacian(random_adjacency(r, n));
        metric_params p;
        p.w_d = metric_params::near_identity_init(3, 3, r.next());
        p.mix_sigma = 0.4;
        tensor perm = permutation_matrix(random_permutation(r, n));
        tensor lhs = evolved_laplacian(lin::matmul(perm, x),
                                       lin::matmul(lin::matmul(perm, l_orig), lin::transpose(perm)), p);
        tensor rhs = lin::matmul(lin::matmul(perm, evolved_laplacian(x, l_orig, p)),
                                 lin::transpose(perm));
        CHECK(max_abs_diff(lhs, rhs) <= 1e-10);
    }
}

TEST_CASE("evolved Laplacian gradient w.r.t. W_d matches finite differences") {
    rng r(91);
    for (int trial = 0; trial < 8; ++trial) {
        const index_t n = 3 + static_cast<index_t>(r.below(3));
        const index_t d = 2 + static_cast<index_t>(r.below(3));
        tensor x = random_tensor(r, {n, d});
        tensor l_orig = normalized_laplacian(random_adjacency(r, n));
        tensor w0 = metric_params::near_identity_init(d, d, r.next());
        tensor weights = random_tensor(r, {n, n});
        metric_params hyper;
        hyper.w_d = w0;
        hyper.mix_sigma = 0.5;
        hyper.gaussian_sigma = 1.1;
        hyper.threshold = 0.0; // dense graph: no threshold boundary in play

        // Distinct rows keep every pairwise distance away from the sqrt kink.
        tensor dist = mahalanobis_distances(x, w0);
        double min_off = 1e9;
        for (index_t i = 0; i < n; ++i) {
            for (index_t j = 0; j < n; ++j) {
                if (i != j) min_off = std::min(min_off, dist.at(i, j));
            }
        }
        if (min_off < 1e-3) continue;

        auto loss_fn = [&](const tensor& w) {
            metric_params p = hyper;
            p.w_d = w;
            tensor le = evolved_laplacian(x, l_orig, p);
            double s = 0.0;
            for (index_t i = 0; i < le.size(); ++i) s += le[i] * weights[i];
            return s;
        };

        tape t;
        node_id xn = t.constant(x);
        node_id wn = t.leaf(w0);
        auto rec = record_evolved_laplacian(t, xn, wn, l_orig, hyper);
        node_id loss = t.sum_all(t.elementwise_mul(rec.laplacian, t.constant(weights)));
        CHECK(t.value(loss).item() == doctest::Approx(loss_fn(w0)).epsilon(1e-12));
        t.backward(loss);
        tensor analytic = t.grad(wn);
        tensor numeric = fd_gradient(loss_fn, w0, 1e-5);
        CHECK(grad_rel_err(analytic, numeric) <= 1e-4);
    }
}

TEST_CASE("metric_params validation") {
    metric_params p;
    p.w_d = tensor::identity(2);
    CHECK_NOTHROW(p.validate());
    p.gaussian_sigma = 0.0;
    CHECK_THROWS_AS(p.validate(), parameter_error);
    p.gaussian_sigma = 1.0;
    p.mix_sigma = 1.5;
    CHECK_THROWS_AS(p.validate(), parameter_error);
    p.mix_sigma = 1.0;
    p.w_d = tensor({2, 3});
    CHECK_THROWS_AS(p.validate(), structural_error);
}
