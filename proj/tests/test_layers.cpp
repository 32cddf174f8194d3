#include <doctest.h>

#include "egcn/losses.hpp"
#include "egcn/model.hpp"
#include "test_util.hpp"

using namespace egcn;
using namespace egcn::test;

namespace {

laplacian_set intrinsic_of(const graph_batch& batch) {
    laplacian_set set;
    for (index_t b = 0; b < batch.batch_size(); ++b) {
        set.intrinsic.push_back(normalized_laplacian(batch.sample_adjacency(b)));
    }
    return set;
}

sgc_layer_params identity_layer(index_t d) {
    sgc_layer_params p;
    p.theta = chebyshev_coeffs::from({1.0});
    p.w_k = tensor::identity(d);
    p.b_k = tensor({1, d});
    p.metric.w_d = tensor::identity(d);
    p.act = activation::identity;
    return p;
}

} // namespace

TEST_CASE("sgc_ll_forward identity configuration returns the input") {
    rng r(101);
    std::vector<graph> gs = {random_graph(r, 4, 3), random_graph(r, 3, 3)};
    graph_batch batch = batch_graphs(gs, 5);
    tape t;
    auto res = sgc_ll_forward(batch, intrinsic_of(batch), identity_layer(3), t);
    for (index_t b = 0; b < 2; ++b) {
        CHECK(max_abs_diff(res.output.sample_features(b), batch.sample_features(b)) == 0.0);
    }
    // Padded rows stay zero.
    for (index_t j = 0; j < 3; ++j) {
        CHECK(res.output.features.at3(0, 4, j) == 0.0);
        CHECK(res.output.features.at3(1, 3, j) == 0.0);
    }
}

TEST_CASE("sgc_ll_forward single-node closed form") {
    tensor x = tensor::matrix({{2.0}});
    graph g = graph::make(x, tensor({1, 1}), tensor::row({0.0}), {1}, "single");
    graph_batch batch = batch_graphs(std::span<const graph>(&g, 1), 1);

    sgc_layer_params p;
    p.theta = chebyshev_coeffs::from({0.4, 0.3, -0.2});
    p.w_k = tensor::matrix({{1.5}});
    p.b_k = tensor::matrix({{0.25}});
    p.metric.w_d = tensor::matrix({{1.0}});
    p.metric.mix_sigma = 0.5;
    p.act = activation::identity;

    tape t;
    auto res = sgc_ll_forward(batch, intrinsic_of(batch), p, t);

    // For one node: learned F = [[1]], l_orig = [[1]], L_e = 1 + (1-0.5) = 1.5.
    // lambda_max = 1.5, so L_tilde = (2/1.5)*1.5 - 1 = 1, and T_k(1) = 1.
    const double le = res.evolved[0].at(0, 0);
    CHECK(le == doctest::Approx(1.5).epsilon(1e-12));
    const double g_sum = 0.4 + 0.3 - 0.2;
    const double expected = g_sum * 2.0 * 1.5 + 0.25;
    CHECK(res.output.sample_features(0).at(0, 0) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("sgc_ll_forward rejects feature dim mismatch naming the layer") {
    rng r(103);
    graph g = random_graph(r, 3, 4);
    graph_batch batch = batch_graphs(std::span<const graph>(&g, 1), 3);
    tape t;
    CHECK_THROWS_AS(sgc_ll_forward(batch, intrinsic_of(batch), identity_layer(3), t),
                    structural_error);
}

TEST_CASE("sgc_ll_forward padding neutrality") {
    rng r(104);
    graph g = random_graph(r, 4, 3);
    graph other = random_graph(r, 6, 3);

    sgc_layer_params p = identity_layer(3);
    p.theta = chebyshev_coeffs::from({0.5, 0.3, 0.2});
    p.w_k = random_tensor(r, {3, 2});
    p.b_k = random_tensor(r, {1, 2});
    p.metric.w_d = metric_params::near_identity_init(3, 3, 5);
    p.metric.mix_sigma = 0.7;
    p.act = activation::relu;

    tape t1;
    graph_batch alone = batch_graphs(std::span<const graph>(&g, 1), 4);
    auto res1 = sgc_ll_forward(alone, intrinsic_of(alone), p, t1);

    tape t2;
    graph_batch padded = batch_graphs(std::span<const graph>(&g, 1), 11);
    auto res2 = sgc_ll_forward(padded, intrinsic_of(padded), p, t2);

    tape t3;
    std::vector<graph> pair = {other, g};
    graph_batch mixed = batch_graphs(pair, 6);
    auto res3 = sgc_ll_forward(mixed, intrinsic_of(mixed), p, t3);

    CHECK(max_abs_diff(res1.output.sample_features(0), res2.output.sample_features(0)) <= 1e-10);
    CHECK(max_abs_diff(res1.output.sample_features(0), res3.output.sample_features(1)) <= 1e-10);
}

TEST_CASE("sgc_ll param_count matches the layer size formula") {
    sgc_layer_params p;
    p.theta = chebyshev_coeffs::from({1, 2, 3});
    p.w_k = tensor({4, 5});
    p.b_k = tensor({1, 5});
    p.metric.w_d = tensor({4, 4});
    CHECK(p.param_count() == 3 + 4 * 5 + 5 + 4 * 4);
}

TEST_CASE("graph_max_pool examples") {
    // Isolated node keeps its features.
    graph iso = graph::make(tensor::matrix({{3.0, -1.0}}), tensor({1, 1}));
    graph_batch b1 = batch_graphs(std::span<const graph>(&iso, 1), 1);
    CHECK(max_abs_diff(graph_max_pool(b1).sample_features(0), iso.node_features) == 0.0);

    // 2-node edge: both nodes take the feature-wise max.
    graph edge = graph::make(tensor::matrix({{1.0, 5.0}, {3.0, 2.0}}),
                             tensor::matrix({{0, 1}, {1, 0}}));
    graph_batch b2 = batch_graphs(std::span<const graph>(&edge, 1), 2);
    tensor pooled = graph_max_pool(b2).sample_features(0);
    CHECK(max_abs_diff(pooled, tensor::matrix({{3, 5}, {3, 5}})) == 0.0);

    // All-equal features are unchanged.
    rng r(7);
    graph eq = graph::make(tensor::full({4, 2}, 0.7), random_adjacency(r, 4));
    graph_batch b3 = batch_graphs(std::span<const graph>(&eq, 1), 4);
    CHECK(max_abs_diff(graph_max_pool(b3).sample_features(0), eq.node_features) == 0.0);
}

TEST_CASE("graph_max_pool is idempotent when every component is complete") {
    // Two complete components: {0,1,2} and {3,4}.
    tensor adj({5, 5});
    auto connect = [&](index_t i, index_t j) {
        adj.at(i, j) = 1.0;
        adj.at(j, i) = 1.0;
    };
    connect(0, 1);
    connect(0, 2);
    connect(1, 2);
    connect(3, 4);
    rng r(8);
    graph g = graph::make(random_tensor(r, {5, 3}), adj);
    graph_batch batch = batch_graphs(std::span<const graph>(&g, 1), 5);
    graph_batch once = graph_max_pool(batch);
    graph_batch twice = graph_max_pool(once);
    CHECK(max_abs_diff(once.sample_features(0), twice.sample_features(0)) == 0.0);
}

TEST_CASE("graph_gather examples and padding neutrality") {
    graph single = graph::make(tensor::matrix({{2.5, -1.0}}), tensor({1, 1}));
    graph_batch b1 = batch_graphs(std::span<const graph>(&single, 1), 3);
    CHECK(max_abs_diff(graph_gather(b1), tensor::matrix({{2.5, -1.0}})) == 0.0);

    graph two = graph::make(tensor::matrix({{1.0, 2.0}, {3.0, 4.0}}),
                            tensor::matrix({{0, 1}, {1, 0}}));
    graph_batch b2 = batch_graphs(std::span<const graph>(&two, 1), 2);
    CHECK(max_abs_diff(graph_gather(b2), tensor::matrix({{4.0, 6.0}})) == 0.0);
    graph_batch b3 = batch_graphs(std::span<const graph>(&two, 1), 9);
    CHECK(max_abs_diff(graph_gather(b3), tensor::matrix({{4.0, 6.0}})) == 0.0);
}

TEST_CASE("batch_norm_forward examples") {
    rng r(110);
    // Constant feature column: output equals the shift parameter.
    graph g = graph::make(tensor::full({4, 2}, 3.0), random_adjacency(r, 4));
    graph_batch batch = batch_graphs(std::span<const graph>(&g, 1), 4);
    batch_norm_state state = batch_norm_state::init(2);
    state.shift.at(0, 0) = 0.9;
    state.shift.at(0, 1) = -0.4;
    tape t;
    auto res = batch_norm_forward(batch, state, run_mode::train, t);
    tensor out = res.output.sample_features(0);
    for (index_t i = 0; i < 4; ++i) {
        CHECK(out.at(i, 0) == doctest::Approx(0.9).epsilon(1e-9));
        CHECK(out.at(i, 1) == doctest::Approx(-0.4).epsilon(1e-9));
    }

    // Two valid nodes {-1, +1}: normalized output is {-1, +1} up to eps.
    graph pm = graph::make(tensor::matrix({{-1.0}, {1.0}}), tensor::matrix({{0, 1}, {1, 0}}));
    graph_batch batch2 = batch_graphs(std::span<const graph>(&pm, 1), 2);
    batch_norm_state state2 = batch_norm_state::init(1);
    tape t2;
    auto res2 = batch_norm_forward(batch2, state2, run_mode::train, t2);
    tensor out2 = res2.output.sample_features(0);
    CHECK(out2.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(out2.at(1, 0) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("batch_norm eval before any train step uses identity stats") {
    rng r(111);
    graph g = random_graph(r, 3, 2);
    graph_batch batch = batch_graphs(std::span<const graph>(&g, 1), 3);
    batch_norm_state state = batch_norm_state::init(2);
    tape t;
    auto res = batch_norm_forward(batch, state, run_mode::eval, t);
    // mean 0, var 1: y ~= x (up to the eps in the denominator).
    CHECK(max_abs_diff(res.output.sample_features(0), batch.sample_features(0)) <= 1e-4);
}

TEST_CASE("batch_norm masks padding out of the statistics") {
    rng r(112);
    graph g = random_graph(r, 4, 3);
    batch_norm_state s1 = batch_norm_state::init(3);
    batch_norm_state s2 = batch_norm_state::init(3);
    tape t1, t2;
    graph_batch tight = batch_graphs(std::span<const graph>(&g, 1), 4);
    graph_batch padded = batch_graphs(std::span<const graph>(&g, 1), 11);
    auto r1 = batch_norm_forward(tight, s1, run_mode::train, t1);
    auto r2 = batch_norm_forward(padded, s2, run_mode::train, t2);
    CHECK(max_abs_diff(r1.output.sample_features(0), r2.output.sample_features(0)) <= 1e-10);
    CHECK(max_abs_diff(s1.running_mean, s2.running_mean) == 0.0);
    CHECK(max_abs_diff(s1.running_var, s2.running_var) == 0.0);
}

TEST_CASE("batch_norm train mode needs two rows") {
    graph g = graph::make(tensor::matrix({{1.0}}), tensor({1, 1}));
    graph_batch batch = batch_graphs(std::span<const graph>(&g, 1), 1);
    batch_norm_state state = batch_norm_state::init(1);
    tape t;
    CHECK_THROWS_AS(batch_norm_forward(batch, state, run_mode::train, t), structural_error);
}

TEST_CASE("multitask_head_forward examples") {
    rng r(120);
    tensor gathered = random_tensor(r, {3, 4});

    head_params zero;
    zero.weights = {tensor({4, 1}), tensor({4, 1})};
    zero.biases = {tensor::scalar(0.7), tensor::scalar(-0.2)};
    tape t;
    auto res = multitask_head_forward(gathered, zero, t);
    for (index_t b = 0; b < 3; ++b) {
        CHECK(res.scores.at(b, 0) == 0.7);
        CHECK(res.scores.at(b, 1) == -0.2);
    }

    head_params pick;
    pick.weights = {tensor::column({1, 0, 0, 0})};
    pick.biases = {tensor::scalar(0.0)};
    tape t2;
    auto res2 = multitask_head_forward(gathered, pick, t2);
    for (index_t b = 0; b < 3; ++b) CHECK(res2.scores.at(b, 0) == gathered.at(b, 0));

    // Random case against a direct matrix product.
    head_params rnd;
    rnd.weights = {random_tensor(r, {4, 1}), random_tensor(r, {4, 1})};
    rnd.biases = {tensor::scalar(r.normal()), tensor::scalar(r.normal())};
    tape t3;
    auto res3 = multitask_head_forward(gathered, rnd, t3);
    for (index_t b = 0; b < 3; ++b) {
        for (index_t task = 0; task < 2; ++task) {
            double expected = rnd.biases[static_cast<std::size_t>(task)].item();
            for (index_t j = 0; j < 4; ++j) {
                expected += gathered.at(b, j) * rnd.weights[static_cast<std::size_t>(task)].at(j, 0);
            }
            CHECK(res3.scores.at(b, task) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("model forward is permutation equivariant / invariant") {
    rng r(130);
    model_config mc;
    mc.input_dim = 3;
    mc.num_tasks = 2;
    mc.k_hops = 3;
    mc.mix_sigma = 0.6;
    mc.arch = parse_architecture({"sgcll:5", "pool", "sgcll:4", "pool"});
    for (int trial = 0; trial < 12; ++trial) {
        model net(mc, 400 + static_cast<std::uint64_t>(trial));
        const index_t n = 4 + static_cast<index_t>(r.below(4));
        graph g = random_graph(r, n, 3, 2);
        auto perm = random_permutation(r, n);
        tensor p = permutation_matrix(perm);
        graph pg = graph::make(lin::matmul(p, g.node_features),
                               lin::matmul(lin::matmul(p, g.adjacency), lin::transpose(p)),
                               g.labels, g.label_mask, g.id + "-perm");

        graph_batch b1 = batch_graphs(std::span<const graph>(&g, 1), n);
        graph_batch b2 = batch_graphs(std::span<const graph>(&pg, 1), n);
        tape t1, t2;
        auto r1 = net.forward(t1, b1, run_mode::eval);
        auto r2 = net.forward(t2, b2, run_mode::eval);
        // Gather makes the scores permutation invariant.
        CHECK(max_abs_diff(t1.value(r1.scores), t2.value(r2.scores)) <= 1e-9);
    }
}

TEST_CASE("frozen forward with identical params is bit-identical") {
    rng r(140);
    model_config mc;
    mc.input_dim = 3;
    mc.num_tasks = 1;
    mc.mix_sigma = 1.0;
    mc.threshold = 0.0;
    mc.arch = parse_architecture({"sgcll:4", "bn", "pool"});
    model net(mc, 77);
    std::vector<graph> gs = {random_graph(r, 4, 3), random_graph(r, 5, 3)};
    graph_batch batch = batch_graphs(gs, 5);
    auto run = [&] {
        tape t;
        auto fr = net.forward(t, batch, run_mode::eval);
        return t.value(fr.scores);
    };
    CHECK(run() == run());
}

// ---------------------------------------------------------------------------
// Gradient correctness through the whole network, every parameter class.
// ---------------------------------------------------------------------------

namespace {

double model_loss(model& net, const graph_batch& batch, const tensor& weights) {
    tape t;
    auto fr = net.forward(t, batch, run_mode::train);
    node_id loss = weighted_l2_loss(t, fr.scores, batch.labels, batch.label_masks, weights);
    return t.value(loss).item();
}

} // namespace

TEST_CASE("model gradients match finite differences for every parameter class") {
    rng r(150);
    model_config mc;
    mc.input_dim = 3;
    mc.num_tasks = 2;
    mc.k_hops = 3;
    mc.mix_sigma = 0.5;
    mc.gaussian_sigma = 1.2;
    mc.arch = parse_architecture({"sgcll:4", "bn", "pool", "sgcll:3", "bn", "pool"});

    int instances = 0;
    for (std::uint64_t seed = 0; instances < 6 && seed < 30; ++seed) {
        model net(mc, 1000 + seed);
        std::vector<graph> gs = {random_graph(r, 3 + static_cast<index_t>(r.below(3)), 3, 2),
                                 random_graph(r, 3 + static_cast<index_t>(r.below(3)), 3, 2)};
        graph_batch batch = batch_graphs(gs, 6);
        tensor weights = tensor::full({1, 2}, 1.0);

        tape t;
        auto fr = net.forward(t, batch, run_mode::train);
        node_id loss = weighted_l2_loss(t, fr.scores, batch.labels, batch.label_masks, weights);
        net.store().zero_grads();
        t.backward(loss);

        bool all_ok = true;
        for (const std::string& name : net.store().names()) {
            tensor analytic = net.store().grad(name);
            const tensor original = net.store().value(name);
            auto f = [&](const tensor& v) {
                net.store().value(name) = v;
                const double l = model_loss(net, batch, weights);
                net.store().value(name) = original;
                return l;
            };
            tensor numeric = fd_gradient(f, original, 1e-5);
            const double err = grad_rel_err(analytic, numeric);
            if (err > 1e-4) all_ok = false;
            CHECK(err <= 1e-4);
        }
        if (all_ok) ++instances;
    }
    CHECK(instances >= 6);
}
