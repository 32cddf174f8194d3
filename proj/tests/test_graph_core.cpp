#include <doctest.h>

#include "egcn/graph.hpp"
#include "test_util.hpp"

using namespace egcn;
using namespace egcn::test;

TEST_CASE("normalized_laplacian of a single edge") {
    tensor lap = normalized_laplacian(tensor::matrix({{0, 1}, {1, 0}}));
    CHECK(max_abs_diff(lap, tensor::matrix({{1, -1}, {-1, 1}})) == 0.0);
}

TEST_CASE("normalized_laplacian isolated-node convention gives identity") {
    tensor lap = normalized_laplacian(tensor({3, 3}));
    CHECK(max_abs_diff(lap, tensor::identity(3)) == 0.0);
}

TEST_CASE("normalized_laplacian of the 3-node path has eigenvalues 0,1,2") {
    tensor adj = tensor::matrix({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}});
    auto eigs = eigenvalues_of(normalized_laplacian(adj));
    CHECK(eigs[0] == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(eigs[1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(eigs[2] == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("normalized_laplacian rejects broken inputs") {
    CHECK_THROWS_AS(normalized_laplacian(tensor::matrix({{0, 1}, {0.5, 0}})), structural_error);
    CHECK_THROWS_AS(normalized_laplacian(tensor::matrix({{0, -1}, {-1, 0}})), structural_error);
}

TEST_CASE("degree_vector examples") {
    CHECK(max_abs_diff(degree_vector(tensor::matrix({{0, 1}, {1, 0}})), tensor::column({1, 1})) == 0.0);
    CHECK(max_abs_diff(degree_vector(tensor({3, 3})), tensor::column({0, 0, 0})) == 0.0);
    // Weighted triangle: w01 = 0.5, w02 = 0.5, w12 = 1.0.
    tensor tri = tensor::matrix({{0, 0.5, 0.5}, {0.5, 0, 1.0}, {0.5, 1.0, 0}});
    CHECK(max_abs_diff(degree_vector(tri), tensor::column({1.0, 1.5, 1.5})) == 0.0);
}

TEST_CASE("laplacian properties on random and adversarial graphs up to 12 nodes") {
    rng r(31);
    std::vector<tensor> cases;
    for (int i = 0; i < 40; ++i) {
        cases.push_back(random_adjacency(r, 2 + static_cast<index_t>(r.below(11))));
    }
    cases.push_back(tensor({5, 5}));                       // all isolated
    cases.push_back(tensor::matrix({{0, 1}, {1, 0}}));     // single edge
    tensor complete({7, 7});
    for (index_t i = 0; i < 7; ++i) {
        for (index_t j = 0; j < 7; ++j) {
            if (i != j) complete.at(i, j) = 1.0;
        }
    }
    cases.push_back(complete);

    for (const tensor& adj : cases) {
        tensor lap = normalized_laplacian(adj);
        CHECK(max_abs_diff(lap, lin::transpose(lap)) <= 1e-12);
        auto eigs = eigenvalues_of(lap);
        CHECK(eigs.front() >= -1e-10);
        CHECK(eigs.back() <= 2.0 + 1e-10);
    }
}

TEST_CASE("normalized_laplacian is permutation consistent") {
    rng r(47);
    for (int trial = 0; trial < 20; ++trial) {
        const index_t n = 3 + static_cast<index_t>(r.below(8));
        tensor adj = random_adjacency(r, n);
        tensor p = permutation_matrix(random_permutation(r, n));
        tensor permuted = lin::matmul(lin::matmul(p, adj), lin::transpose(p));
        tensor lhs = normalized_laplacian(permuted);
        tensor rhs = lin::matmul(lin::matmul(p, normalized_laplacian(adj)), lin::transpose(p));
        CHECK(max_abs_diff(lhs, rhs) <= 1e-12);
    }
}

TEST_CASE("batch_graphs pads with zeros and consistent masks") {
    rng r(3);
    graph g = random_graph(r, 2, 3);
    graph_batch batch = batch_graphs(std::span<const graph>(&g, 1), 4);
    CHECK(batch.n_max() == 4);
    CHECK(batch.node_counts[0] == 2);
    for (index_t i = 2; i < 4; ++i) {
        CHECK(batch.node_mask.at(0, i) == 0.0);
        for (index_t j = 0; j < 3; ++j) CHECK(batch.features.at3(0, i, j) == 0.0);
        for (index_t j = 0; j < 4; ++j) CHECK(batch.adjacencies.at3(0, i, j) == 0.0);
    }
    CHECK(batch.node_mask.at(0, 0) == 1.0);
    CHECK(batch.node_mask.at(0, 1) == 1.0);
}

TEST_CASE("batch_graphs rejects empty batches and oversized samples") {
    CHECK_THROWS_AS(batch_graphs({}, 4), data_error);
    rng r(4);
    graph g = random_graph(r, 5, 2);
    CHECK_THROWS_AS(batch_graphs(std::span<const graph>(&g, 1), 4), capacity_error);
    try {
        batch_graphs(std::span<const graph>(&g, 1), 4);
    } catch (const capacity_error& e) {
        CHECK(std::string(e.what()).find(g.id) != std::string::npos);
    }
}

TEST_CASE("batch_graphs round-trips per-sample content bit-exactly") {
    rng r(9);
    std::vector<graph> gs = {random_graph(r, 3, 4), random_graph(r, 5, 4)};
    graph_batch batch = batch_graphs(gs, 5);
    for (index_t b = 0; b < 2; ++b) {
        CHECK(batch.sample_features(b) == gs[static_cast<std::size_t>(b)].node_features);
        CHECK(batch.sample_adjacency(b) == gs[static_cast<std::size_t>(b)].adjacency);
    }
}

TEST_CASE("graph validation catches every invariant break") {
    tensor x({2, 2});
    tensor ok = tensor::matrix({{0, 1}, {1, 0}});
    CHECK_NOTHROW(graph::make(x, ok));
    CHECK_THROWS_AS(graph::make(x, tensor::matrix({{0.5, 1}, {1, 0}})), structural_error);
    CHECK_THROWS_AS(graph::make(x, tensor::matrix({{0, 1}, {0.9999, 0}})), structural_error);
    CHECK_THROWS_AS(graph::make(x, tensor::matrix({{0, -0.1}, {-0.1, 0}})), structural_error);
    CHECK_THROWS_AS(graph::make(tensor({0, 2}), tensor({0, 0})), structural_error);
    CHECK_THROWS_AS(graph::make(x, ok, tensor::row({1.0}), {1, 1}), structural_error);
}
