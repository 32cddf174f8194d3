#include <doctest.h>

#include "egcn/linalg.hpp"
#include "egcn/param_store.hpp"
#include "egcn/tape.hpp"
#include "test_util.hpp"

using namespace egcn;
using namespace egcn::test;

TEST_CASE("tensor basics") {
    tensor t = tensor::matrix({{1, 2}, {3, 4}});
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 2);
    CHECK(t.at(1, 0) == 3.0);
    CHECK(tensor::identity(3).at(2, 2) == 1.0);
    CHECK_THROWS_AS(tensor::from({2, 2}, {1.0}), structural_error);
    tensor bad = tensor::scalar(std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(bad.check_finite("test"), numerical_error);
}

TEST_CASE("param_store uniqueness and accumulation") {
    param_store store;
    store.add("w", tensor::matrix({{1, 2}}));
    CHECK_THROWS_AS(store.add("w", tensor::scalar(0)), structural_error);
    store.accumulate_grad("w", tensor::matrix({{1, 1}}));
    store.accumulate_grad("w", tensor::matrix({{2, 3}}));
    CHECK(store.grad("w").at(0, 1) == 4.0);
    CHECK_THROWS_AS(store.accumulate_grad("w", tensor::scalar(1)), structural_error);
    store.zero_grads();
    CHECK(store.grad("w").at(0, 0) == 0.0);
}

TEST_CASE("matmul forward and identity") {
    tape t;
    node_id a = t.leaf(tensor::matrix({{1, 2}, {3, 4}}));
    node_id i = t.constant(tensor::identity(2));
    node_id out = t.matmul(a, i);
    CHECK(max_abs_diff(t.value(out), tensor::matrix({{1, 2}, {3, 4}})) == 0.0);
    CHECK_THROWS_AS(t.matmul(a, t.constant(tensor({3, 2}))), structural_error);
}

TEST_CASE("relu backward routes subgradient zero at negatives") {
    tape t;
    node_id x = t.leaf(tensor::row({-1, 2}));
    node_id out = t.relu(x);
    node_id loss = t.sum_all(t.elementwise_mul(out, t.constant(tensor::row({5, 5}))));
    t.backward(loss);
    CHECK(t.grad(x)[0] == 0.0);
    CHECK(t.grad(x)[1] == 5.0);
}

TEST_CASE("sqrt backward at 4 is 0.25") {
    tape t;
    node_id x = t.leaf(tensor::scalar(4.0));
    node_id loss = t.sum_all(t.sqrt(x));
    t.backward(loss);
    CHECK(t.grad(x)[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward of sum gives all-ones") {
    param_store store;
    store.add("x", tensor::matrix({{1, 2}, {3, 4}}));
    tape t;
    node_id x = t.param(store, "x");
    node_id loss = t.sum_all(x);
    t.backward(loss);
    for (index_t i = 0; i < 4; ++i) CHECK(store.grad("x")[i] == 1.0);
}

TEST_CASE("backward of ||W x||^2 matches 2 W x x^T") {
    rng r(11);
    tensor w0 = random_tensor(r, {3, 3});
    tensor x0 = random_tensor(r, {3, 1});
    param_store store;
    store.add("w", w0);
    tape t;
    node_id w = t.param(store, "w");
    node_id wx = t.matmul(w, t.constant(x0));
    node_id loss = t.sum_all(t.elementwise_mul(wx, wx));
    t.backward(loss);

    const tensor wx_val = lin::matmul(w0, x0);
    tensor expected = lin::matmul(wx_val, lin::transpose(x0));
    for (index_t i = 0; i < expected.size(); ++i) expected[i] *= 2.0;
    CHECK(max_abs_diff(store.grad("w"), expected) < 1e-12);
}

TEST_CASE("backward rejects non-scalar loss") {
    tape t;
    node_id x = t.leaf(tensor::row({1, 2}));
    CHECK_THROWS_AS(t.backward(x), structural_error);
}

TEST_CASE("max_over_set ties go to the lowest index") {
    tape t;
    node_id x = t.leaf(tensor::matrix({{2, 1}, {2, 5}, {0, 5}}));
    node_id out = t.max_over_set(x, {{0, 1, 2}});
    CHECK(t.value(out).at(0, 0) == 2.0);
    node_id loss = t.sum_all(out);
    t.backward(loss);
    // Column 0 ties between rows 0 and 1 -> row 0; column 1 ties rows 1,2 -> row 1.
    CHECK(t.grad(x).at(0, 0) == 1.0);
    CHECK(t.grad(x).at(1, 0) == 0.0);
    CHECK(t.grad(x).at(1, 1) == 1.0);
    CHECK(t.grad(x).at(2, 1) == 0.0);
}

TEST_CASE("gradient accumulation is additive bit-exactly") {
    rng r(5);
    tensor w0 = random_tensor(r, {2, 3});
    tensor a = random_tensor(r, {2, 3});
    tensor b = random_tensor(r, {2, 3});

    auto run = [&](bool first, bool second) {
        param_store store;
        store.add("w", w0);
        tape t;
        node_id w = t.param(store, "w");
        node_id l1 = t.sum_all(t.elementwise_mul(w, t.constant(a)));
        node_id l2 = t.sum_all(t.elementwise_mul(w, t.constant(b)));
        if (first && second) {
            t.backward(t.add(l1, l2));
        } else if (first) {
            t.backward(l1);
        } else {
            t.backward(l2);
        }
        return store.grad("w");
    };
    tensor combined = run(true, true);
    tensor g1 = run(true, false);
    tensor g2 = run(false, true);
    for (index_t i = 0; i < combined.size(); ++i) {
        CHECK(combined[i] == g1[i] + g2[i]);
    }
}

TEST_CASE("identical tape yields bit-identical gradients") {
    rng r(17);
    tensor x0 = random_tensor(r, {4, 3});
    auto run = [&] {
        tape t;
        node_id x = t.leaf(x0);
        node_id y = t.sigmoid(t.matmul(x, t.transpose(x)));
        node_id loss = t.sum_all(y);
        t.backward(loss);
        return t.grad(x);
    };
    CHECK(run() == run());
}

TEST_CASE("non-finite primitive output trips numerical_error") {
    tape t;
    node_id x = t.leaf(tensor::scalar(1e308));
    CHECK_THROWS_AS(t.exp(t.scalar_mul(x, 2.0)), numerical_error);
    node_id z = t.leaf(tensor::scalar(0.0));
    CHECK_THROWS_AS(t.reciprocal(z), numerical_error);
}

// ---------------------------------------------------------------------------
// Standalone finite-difference checks: every primitive VJP at 20 random
// points, random upstream weights.
// ---------------------------------------------------------------------------

namespace {

void check_primitive_fd(const std::function<node_id(tape&, node_id)>& op, const tensor& x0,
                        rng& r, double tol = 1e-6) {
    tape probe;
    const tensor out_shape_probe = probe.value(op(probe, probe.leaf(x0)));
    tensor upstream = random_tensor(r, out_shape_probe.shape());
    tensor analytic = tape_gradient(op, x0, upstream);
    tensor numeric = fd_gradient(
        [&](const tensor& x) { return tape_loss_value(op, x, upstream); }, x0);
    CHECK(grad_rel_err(analytic, numeric) < tol);
}

} // namespace

TEST_CASE("primitive VJPs match finite differences at 20 random points") {
    rng r(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const index_t n = 2 + static_cast<index_t>(r.below(4)); // 2..5
        const index_t m = 1 + static_cast<index_t>(r.below(3)); // 1..3
        tensor x = random_tensor(r, {n, m});
        tensor square = random_tensor(r, {n, n});
        tensor positive(x.shape());
        for (index_t i = 0; i < positive.size(); ++i) positive[i] = 0.2 + r.uniform();
        tensor away_from_zero = x;
        for (index_t i = 0; i < away_from_zero.size(); ++i) {
            if (std::abs(away_from_zero[i]) < 0.1) away_from_zero[i] += 0.5;
        }
        tensor rhs = random_tensor(r, {m, n});
        tensor bias = random_tensor(r, {1, m});
        tensor scalar = tensor::scalar(0.5 + r.uniform());

        tensor addend = random_tensor(r, x.shape());
        tensor minuend = random_tensor(r, x.shape());
        check_primitive_fd([&](tape& t, node_id a) { return t.matmul(a, t.constant(rhs)); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.add(a, t.constant(addend)); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.sub(t.constant(minuend), a); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.scalar_mul(a, -1.7); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.elementwise_mul(a, a); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.transpose(a); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.relu(a); }, away_from_zero, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.exp(a); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.sqrt(a); }, positive, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.sigmoid(a); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.sum_rows(a); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.max_over_set(a, {{0, n - 1}, {0}}); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.slice(a, 0, n - 1, 0, m); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.pad(a, 1, 2, 0, 1); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.concat_rows({a, a}); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.concat_cols({a, a}); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.add_row_vector(a, t.constant(bias)); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.mul_scalar_node(a, t.constant(scalar)); }, x, r);
        tensor scaled_operand = random_tensor(r, {3, 3});
        check_primitive_fd(
            [&](tape& t, node_id a) { return t.mul_scalar_node(t.constant(scaled_operand), a); },
            tensor::scalar(0.7), r);
        check_primitive_fd([&](tape& t, node_id a) { return t.reciprocal(a); }, positive, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.pairwise_sq_dists(a); }, x, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.zero_diag(a); }, square, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.threshold_keep(a, 0.05); }, away_from_zero, r);
        check_primitive_fd([&](tape& t, node_id a) { return t.rsqrt_or_zero(a); }, positive, r);

        // lambda_max on a generic symmetric PSD matrix.
        tensor b = random_tensor(r, {n, n});
        tensor psd = lin::matmul(b, lin::transpose(b));
        for (index_t i = 0; i < n; ++i) psd.at(i, i) += 0.3;
        check_primitive_fd(
            [&](tape& t, node_id a) {
                node_id sym = t.scalar_mul(t.add(a, t.transpose(a)), 0.5);
                return t.lambda_max(sym);
            },
            psd, r, 1e-4);

        // batch_norm (train and eval) and the fused BCE loss.
        tensor gamma(bias.shape()), beta(bias.shape());
        for (index_t i = 0; i < gamma.size(); ++i) {
            gamma[i] = 0.5 + r.uniform();
            beta[i] = r.normal();
        }
        check_primitive_fd(
            [&](tape& t, node_id a) {
                return t.batch_norm_train(a, t.constant(gamma), t.constant(beta), 1e-5);
            },
            x, r, 1e-5);
        check_primitive_fd(
            [&](tape& t, node_id a) {
                node_id g = t.leaf(gamma);
                return t.batch_norm_train(t.constant(x), g, t.constant(beta), 1e-5);
            },
            gamma, r, 1e-5);
        tensor rm = random_tensor(r, {1, m}), rv(rm.shape());
        for (index_t i = 0; i < rv.size(); ++i) rv[i] = 0.5 + r.uniform();
        check_primitive_fd(
            [&](tape& t, node_id a) {
                return t.batch_norm_eval(a, t.constant(gamma), t.constant(beta), rm, rv, 1e-5);
            },
            x, r);
        tensor labels(x.shape()), weights(x.shape());
        for (index_t i = 0; i < labels.size(); ++i) {
            labels[i] = r.uniform() < 0.5 ? 0.0 : 1.0;
            weights[i] = r.uniform() < 0.3 ? 0.0 : 1.0;
        }
        double denom = 0.0;
        for (index_t i = 0; i < weights.size(); ++i) denom += weights[i];
        if (denom > 0.0) {
            check_primitive_fd(
                [&](tape& t, node_id a) { return t.bce_with_logits(a, labels, weights, denom); }, x,
                r);
        }
    }
}
