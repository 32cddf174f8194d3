#include "egcn/tape.hpp"

#include <algorithm>
#include <cmath>

#include "egcn/linalg.hpp"

namespace egcn {

namespace {

void require_rank2(const tensor& t, const char* op) {
    if (t.rank() > 2) {
        throw structural_error(std::string(op) + ": expected rank <= 2, got " + t.shape_str());
    }
}

void require_same_shape(const tensor& a, const tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw structural_error(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

void require_square(const tensor& t, const char* op) {
    if (t.rank() != 2 || t.rows() != t.cols()) {
        throw structural_error(std::string(op) + ": expected square matrix, got " + t.shape_str());
    }
}

} // namespace

node_id tape::push(const char* op, tensor value, bool track_out) {
    value.check_finite(op);
    auto id = static_cast<node_id>(nodes_.size());
    nodes_.push_back({std::move(value), track_out, -1});
    grads_.emplace_back();
    grad_set_.push_back(0);
    return id;
}

void tape::check_node(node_id id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw structural_error("tape: invalid node id " + std::to_string(id));
    }
}

tensor& tape::grad_buf(node_id id) {
    auto i = static_cast<std::size_t>(id);
    if (!grad_set_[i]) {
        grads_[i] = tensor(nodes_[i].value.shape());
        grad_set_[i] = 1;
    }
    return grads_[i];
}

void tape::add_into(node_id id, const tensor& g) {
    tensor& buf = grad_buf(id);
    for (index_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

node_id tape::constant(tensor value) { return push("constant", std::move(value), false); }

node_id tape::leaf(tensor value) { return push("leaf", std::move(value), true); }

node_id tape::param(param_store& store, const std::string& name) {
    node_id id = push("param", store.value(name), true);
    nodes_[static_cast<std::size_t>(id)].param_binding = static_cast<std::int32_t>(bindings_.size());
    bindings_.push_back({&store, name, id});
    return id;
}

const tensor& tape::value(node_id id) const {
    check_node(id);
    return nodes_[static_cast<std::size_t>(id)].value;
}

tensor tape::grad(node_id id) const {
    check_node(id);
    if (has_grad(id)) return grads_[static_cast<std::size_t>(id)];
    return tensor(nodes_[static_cast<std::size_t>(id)].value.shape());
}

bool tape::requires_grad(node_id id) const {
    check_node(id);
    return track(id);
}

void tape::backward(node_id loss) {
    check_node(loss);
    if (val(loss).size() != 1) {
        throw structural_error("backward: loss node is not scalar, shape " + val(loss).shape_str());
    }
    std::fill(grad_set_.begin(), grad_set_.end(), 0);
    grad_buf(loss)[0] = 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        if (has_grad(it->out)) {
            it->backward_fn(*this);
        }
    }
    for (const binding& b : bindings_) {
        if (has_grad(b.id)) {
            b.store->accumulate_grad(b.name, grads_[static_cast<std::size_t>(b.id)]);
        }
    }
}

// ---------------------------------------------------------------------------
// primitives
// ---------------------------------------------------------------------------

node_id tape::matmul(node_id a, node_id b) {
    check_node(a);
    check_node(b);
    const tensor& va = val(a);
    const tensor& vb = val(b);
    if (va.cols() != vb.rows()) {
        throw structural_error("matmul: inner dimensions differ, " + va.shape_str() + " x " + vb.shape_str());
    }
    tensor out = lin::matmul(va, vb);
    bool tr = track(a) || track(b);
    node_id id = push("matmul", std::move(out), tr);
    if (tr) {
        records_.push_back({"matmul", id, [a, b, id](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            if (t.track(a)) {
                tensor ga = lin::matmul(g, lin::transpose(t.val(b)));
                t.add_into(a, ga);
            }
            if (t.track(b)) {
                tensor gb = lin::matmul(lin::transpose(t.val(a)), g);
                t.add_into(b, gb);
            }
        }});
    }
    return id;
}

node_id tape::add(node_id a, node_id b) {
    check_node(a);
    check_node(b);
    require_same_shape(val(a), val(b), "add");
    tensor out = val(a);
    const tensor& vb = val(b);
    for (index_t i = 0; i < out.size(); ++i) out[i] += vb[i];
    bool tr = track(a) || track(b);
    node_id id = push("add", std::move(out), tr);
    if (tr) {
        records_.push_back({"add", id, [a, b, id](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            if (t.track(a)) t.add_into(a, g);
            if (t.track(b)) t.add_into(b, g);
        }});
    }
    return id;
}

node_id tape::sub(node_id a, node_id b) {
    check_node(a);
    check_node(b);
    require_same_shape(val(a), val(b), "sub");
    tensor out = val(a);
    const tensor& vb = val(b);
    for (index_t i = 0; i < out.size(); ++i) out[i] -= vb[i];
    bool tr = track(a) || track(b);
    node_id id = push("sub", std::move(out), tr);
    if (tr) {
        records_.push_back({"sub", id, [a, b, id](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            if (t.track(a)) t.add_into(a, g);
            if (t.track(b)) {
                tensor& gb = t.grad_buf(b);
                for (index_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        }});
    }
    return id;
}

node_id tape::scalar_mul(node_id a, double c) {
    check_node(a);
    tensor out = val(a);
    for (index_t i = 0; i < out.size(); ++i) out[i] *= c;
    bool tr = track(a);
    node_id id = push("scalar_mul", std::move(out), tr);
    if (tr) {
        records_.push_back({"scalar_mul", id, [a, c, id](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            tensor& ga = t.grad_buf(a);
            for (index_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
        }});
    }
    return id;
}

node_id tape::elementwise_mul(node_id a, node_id b) {
    check_node(a);
    check_node(b);
    require_same_shape(val(a), val(b), "elementwise_mul");
    tensor out = val(a);
    const tensor& vb = val(b);
    for (index_t i = 0; i < out.size(); ++i) out[i] *= vb[i];
    bool tr = track(a) || track(b);
    node_id id = push("elementwise_mul", std::move(out), tr);
    if (tr) {
        records_.push_back({"elementwise_mul", id, [a, b, id](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            if (t.track(a)) {
                const tensor& vb2 = t.val(b);
                tensor& ga = t.grad_buf(a);
                for (index_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb2[i];
            }
            if (t.track(b)) {
                const tensor& va2 = t.val(a);
                tensor& gb = t.grad_buf(b);
                for (index_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va2[i];
            }
        }});
    }
    return id;
}

node_id tape::transpose(node_id a) {
    check_node(a);
    require_rank2(val(a), "transpose");
    tensor out = lin::transpose(val(a));
    bool tr = track(a);
    node_id id = push("transpose", std::move(out), tr);
    if (tr) {
        records_.push_back({"transpose", id, [a, id](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            tensor gt = lin::transpose(g);
            t.add_into(a, gt);
        }});
    }
    return id;
}

node_id tape::relu(node_id a) {
    check_node(a);
    tensor out = val(a);
    for (index_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    bool tr = track(a);
    node_id id = push("relu", std::move(out), tr);
    if (tr) {
        records_.push_back({"relu", id, [a, id](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            const tensor& va = t.val(a);
            tensor& ga = t.grad_buf(a);
            for (index_t i = 0; i < g.size(); ++i) {
                if (va[i] > 0.0) ga[i] += g[i];
            }
        }});
    }
    return id;
}

node_id tape::exp(node_id a) {
    check_node(a);
    tensor out = val(a);
    for (index_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
    bool tr = track(a);
    node_id id = push("exp", out, tr);
    if (tr) {
        records_.push_back({"exp", id, [a, id, saved = std::move(out)](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            tensor& ga = t.grad_buf(a);
            for (index_t i = 0; i < g.size(); ++i) ga[i] += g[i] * saved[i];
        }});
    }
    return id;
}

node_id tape::sqrt(node_id a) {
    check_node(a);
    const tensor& va = val(a);
    tensor out = va;
    for (index_t i = 0; i < out.size(); ++i) {
        if (out[i] < 0.0) {
            throw numerical_error("sqrt: negative input " + std::to_string(out[i]));
        }
        out[i] = std::sqrt(out[i]);
    }
    bool tr = track(a);
    node_id id = push("sqrt", out, tr);
    if (tr) {
        // Subgradient 0 at the kink x = 0.
        records_.push_back({"sqrt", id, [a, id, saved = std::move(out)](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            tensor& ga = t.grad_buf(a);
            for (index_t i = 0; i < g.size(); ++i) {
                if (saved[i] > 0.0) ga[i] += g[i] / (2.0 * saved[i]);
            }
        }});
    }
    return id;
}

node_id tape::sigmoid(node_id a) {
    check_node(a);
    tensor out = val(a);
    for (index_t i = 0; i < out.size(); ++i) {
        const double z = out[i];
        out[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    }
    bool tr = track(a);
    node_id id = push("sigmoid", out, tr);
    if (tr) {
        records_.push_back({"sigmoid", id, [a, id, saved = std::move(out)](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            tensor& ga = t.grad_buf(a);
            for (index_t i = 0; i < g.size(); ++i) ga[i] += g[i] * saved[i] * (1.0 - saved[i]);
        }});
    }
    return id;
}

node_id tape::sum_rows(node_id a) {
    check_node(a);
    require_rank2(val(a), "sum_rows");
    const tensor& va = val(a);
    const index_t n = va.rows(), m = va.cols();
    tensor out({n, 1});
    for (index_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (index_t j = 0; j < m; ++j) s += va.at(i, j);
        out.at(i, 0) = s;
    }
    bool tr = track(a);
    node_id id = push("sum_rows", std::move(out), tr);
    if (tr) {
        records_.push_back({"sum_rows", id, [a, id, n, m](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            tensor& ga = t.grad_buf(a);
            for (index_t i = 0; i < n; ++i) {
                for (index_t j = 0; j < m; ++j) ga.at(i, j) += g.at(i, 0);
            }
        }});
    }
    return id;
}

node_id tape::sum_all(node_id a) {
    check_node(a);
    const tensor& va = val(a);
    double s = 0.0;
    for (index_t i = 0; i < va.size(); ++i) s += va[i];
    bool tr = track(a);
    node_id id = push("sum_all", tensor::scalar(s), tr);
    if (tr) {
        records_.push_back({"sum_all", id, [a, id](tape& t) {
            const double g = t.grads_[static_cast<std::size_t>(id)][0];
            tensor& ga = t.grad_buf(a);
            for (index_t i = 0; i < ga.size(); ++i) ga[i] += g;
        }});
    }
    return id;
}

node_id tape::max_over_set(node_id a, std::vector<std::vector<index_t>> sets) {
    check_node(a);
    require_rank2(val(a), "max_over_set");
    const tensor& va = val(a);
    const index_t n = va.rows(), m = va.cols();
    const auto s = static_cast<index_t>(sets.size());
    tensor out({s, m});
    std::vector<index_t> winners(static_cast<std::size_t>(s * m));
    for (index_t k = 0; k < s; ++k) {
        if (sets[static_cast<std::size_t>(k)].empty()) {
            throw structural_error("max_over_set: empty index set at position " + std::to_string(k));
        }
        for (index_t r : sets[static_cast<std::size_t>(k)]) {
            if (r < 0 || r >= n) {
                throw structural_error("max_over_set: row index " + std::to_string(r) + " out of range");
            }
        }
        for (index_t j = 0; j < m; ++j) {
            index_t best = sets[static_cast<std::size_t>(k)][0];
            double bv = va.at(best, j);
            for (index_t r : sets[static_cast<std::size_t>(k)]) {
                if (va.at(r, j) > bv) { // strict: ties keep the lowest index
                    bv = va.at(r, j);
                    best = r;
                }
            }
            out.at(k, j) = bv;
            winners[static_cast<std::size_t>(k * m + j)] = best;
        }
    }
    bool tr = track(a);
    node_id id = push("max_over_set", std::move(out), tr);
    if (tr) {
        records_.push_back({"max_over_set", id, [a, id, s, m, winners = std::move(winners)](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            tensor& ga = t.grad_buf(a);
            for (index_t k = 0; k < s; ++k) {
                for (index_t j = 0; j < m; ++j) {
                    ga.at(winners[static_cast<std::size_t>(k * m + j)], j) += g.at(k, j);
                }
            }
        }});
    }
    return id;
}

node_id tape::slice(node_id a, index_t r0, index_t r1, index_t c0, index_t c1) {
    check_node(a);
    tensor out = val(a).block(r0, r1, c0, c1);
    bool tr = track(a);
    node_id id = push("slice", std::move(out), tr);
    if (tr) {
        records_.push_back({"slice", id, [a, id, r0, r1, c0, c1](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            tensor& ga = t.grad_buf(a);
            for (index_t i = r0; i < r1; ++i) {
                for (index_t j = c0; j < c1; ++j) {
                    ga.at(i, j) += g.at(i - r0, j - c0);
                }
            }
        }});
    }
    return id;
}

node_id tape::pad(node_id a, index_t top, index_t bottom, index_t left, index_t right) {
    check_node(a);
    require_rank2(val(a), "pad");
    if (top < 0 || bottom < 0 || left < 0 || right < 0) {
        throw structural_error("pad: negative padding");
    }
    const tensor& va = val(a);
    const index_t n = va.rows(), m = va.cols();
    tensor out({n + top + bottom, m + left + right});
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < m; ++j) {
            out.at(i + top, j + left) = va.at(i, j);
        }
    }
    bool tr = track(a);
    node_id id = push("pad", std::move(out), tr);
    if (tr) {
        records_.push_back({"pad", id, [a, id, top, left, n, m](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            tensor& ga = t.grad_buf(a);
            for (index_t i = 0; i < n; ++i) {
                for (index_t j = 0; j < m; ++j) {
                    ga.at(i, j) += g.at(i + top, j + left);
                }
            }
        }});
    }
    return id;
}

node_id tape::concat_rows(const std::vector<node_id>& parts) {
    if (parts.empty()) throw structural_error("concat_rows: no parts");
    index_t total = 0;
    const index_t m = val(parts[0]).cols();
    bool tr = false;
    for (node_id p : parts) {
        check_node(p);
        require_rank2(val(p), "concat_rows");
        if (val(p).cols() != m) {
            throw structural_error("concat_rows: column mismatch " + val(p).shape_str());
        }
        total += val(p).rows();
        tr = tr || track(p);
    }
    tensor out({total, m});
    index_t r = 0;
    for (node_id p : parts) {
        const tensor& vp = val(p);
        for (index_t i = 0; i < vp.rows(); ++i) {
            for (index_t j = 0; j < m; ++j) out.at(r + i, j) = vp.at(i, j);
        }
        r += vp.rows();
    }
    node_id id = push("concat_rows", std::move(out), tr);
    if (tr) {
        records_.push_back({"concat_rows", id, [parts, id, m](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            index_t r2 = 0;
            for (node_id p : parts) {
                const index_t pr = t.val(p).rows();
                if (t.track(p)) {
                    tensor& gp = t.grad_buf(p);
                    for (index_t i = 0; i < pr; ++i) {
                        for (index_t j = 0; j < m; ++j) gp.at(i, j) += g.at(r2 + i, j);
                    }
                }
                r2 += pr;
            }
        }});
    }
    return id;
}

node_id tape::concat_cols(const std::vector<node_id>& parts) {
    if (parts.empty()) throw structural_error("concat_cols: no parts");
    index_t total = 0;
    const index_t n = val(parts[0]).rows();
    bool tr = false;
    for (node_id p : parts) {
        check_node(p);
        require_rank2(val(p), "concat_cols");
        if (val(p).rows() != n) {
            throw structural_error("concat_cols: row mismatch " + val(p).shape_str());
        }
        total += val(p).cols();
        tr = tr || track(p);
    }
    tensor out({n, total});
    index_t c = 0;
    for (node_id p : parts) {
        const tensor& vp = val(p);
        for (index_t i = 0; i < n; ++i) {
            for (index_t j = 0; j < vp.cols(); ++j) out.at(i, c + j) = vp.at(i, j);
        }
        c += vp.cols();
    }
    node_id id = push("concat_cols", std::move(out), tr);
    if (tr) {
        records_.push_back({"concat_cols", id, [parts, id, n](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            index_t c2 = 0;
            for (node_id p : parts) {
                const index_t pc = t.val(p).cols();
                if (t.track(p)) {
                    tensor& gp = t.grad_buf(p);
                    for (index_t i = 0; i < n; ++i) {
                        for (index_t j = 0; j < pc; ++j) gp.at(i, j) += g.at(i, c2 + j);
                    }
                }
                c2 += pc;
            }
        }});
    }
    return id;
}

node_id tape::add_row_vector(node_id x, node_id b) {
    check_node(x);
    check_node(b);
    const tensor& vx = val(x);
    const tensor& vb = val(b);
    if (vb.rows() != 1 || vb.cols() != vx.cols()) {
        throw structural_error("add_row_vector: bias " + vb.shape_str() + " does not broadcast over " + vx.shape_str());
    }
    tensor out = vx;
    for (index_t i = 0; i < vx.rows(); ++i) {
        for (index_t j = 0; j < vx.cols(); ++j) out.at(i, j) += vb.at(0, j);
    }
    bool tr = track(x) || track(b);
    node_id id = push("add_row_vector", std::move(out), tr);
    if (tr) {
        records_.push_back({"add_row_vector", id, [x, b, id](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            if (t.track(x)) t.add_into(x, g);
            if (t.track(b)) {
                tensor& gb = t.grad_buf(b);
                for (index_t i = 0; i < g.rows(); ++i) {
                    for (index_t j = 0; j < g.cols(); ++j) gb.at(0, j) += g.at(i, j);
                }
            }
        }});
    }
    return id;
}

node_id tape::mul_scalar_node(node_id x, node_id s) {
    check_node(x);
    check_node(s);
    if (val(s).size() != 1) {
        throw structural_error("mul_scalar_node: scale is not scalar, " + val(s).shape_str());
    }
    const double sv = val(s)[0];
    tensor out = val(x);
    for (index_t i = 0; i < out.size(); ++i) out[i] *= sv;
    bool tr = track(x) || track(s);
    node_id id = push("mul_scalar_node", std::move(out), tr);
    if (tr) {
        records_.push_back({"mul_scalar_node", id, [x, s, id, sv](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            if (t.track(x)) {
                tensor& gx = t.grad_buf(x);
                for (index_t i = 0; i < g.size(); ++i) gx[i] += sv * g[i];
            }
            if (t.track(s)) {
                const tensor& vx = t.val(x);
                double acc = 0.0;
                for (index_t i = 0; i < g.size(); ++i) acc += g[i] * vx[i];
                t.grad_buf(s)[0] += acc;
            }
        }});
    }
    return id;
}

node_id tape::reciprocal(node_id a) {
    check_node(a);
    tensor out = val(a);
    for (index_t i = 0; i < out.size(); ++i) out[i] = 1.0 / out[i];
    bool tr = track(a);
    node_id id = push("reciprocal", out, tr);
    if (tr) {
        records_.push_back({"reciprocal", id, [a, id, saved = std::move(out)](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            tensor& ga = t.grad_buf(a);
            for (index_t i = 0; i < g.size(); ++i) ga[i] -= g[i] * saved[i] * saved[i];
        }});
    }
    return id;
}

node_id tape::pairwise_sq_dists(node_id z) {
    check_node(z);
    require_rank2(val(z), "pairwise_sq_dists");
    const tensor& vz = val(z);
    const index_t n = vz.rows(), d = vz.cols();
    tensor out({n, n});
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = i + 1; j < n; ++j) {
            double s = 0.0;
            for (index_t k = 0; k < d; ++k) {
                const double diff = vz.at(i, k) - vz.at(j, k);
                s += diff * diff;
            }
            out.at(i, j) = s;
            out.at(j, i) = s;
        }
    }
    bool tr = track(z);
    node_id id = push("pairwise_sq_dists", std::move(out), tr);
    if (tr) {
        records_.push_back({"pairwise_sq_dists", id, [z, id, n, d](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            const tensor& vz2 = t.val(z);
            tensor& gz = t.grad_buf(z);
            for (index_t i = 0; i < n; ++i) {
                for (index_t j = 0; j < n; ++j) {
                    if (i == j) continue;
                    const double w = 2.0 * (g.at(i, j) + g.at(j, i));
                    if (w == 0.0) continue;
                    for (index_t k = 0; k < d; ++k) {
                        gz.at(i, k) += w * (vz2.at(i, k) - vz2.at(j, k));
                    }
                }
            }
        }});
    }
    return id;
}

node_id tape::zero_diag(node_id a) {
    check_node(a);
    require_square(val(a), "zero_diag");
    tensor out = val(a);
    const index_t n = out.rows();
    for (index_t i = 0; i < n; ++i) out.at(i, i) = 0.0;
    bool tr = track(a);
    node_id id = push("zero_diag", std::move(out), tr);
    if (tr) {
        records_.push_back({"zero_diag", id, [a, id, n](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            tensor& ga = t.grad_buf(a);
            for (index_t i = 0; i < n; ++i) {
                for (index_t j = 0; j < n; ++j) {
                    if (i != j) ga.at(i, j) += g.at(i, j);
                }
            }
        }});
    }
    return id;
}

node_id tape::threshold_keep(node_id a, double tau) {
    check_node(a);
    const tensor& va = val(a);
    tensor out = va;
    for (index_t i = 0; i < out.size(); ++i) {
        if (out[i] < tau) out[i] = 0.0;
    }
    bool tr = track(a);
    node_id id = push("threshold_keep", std::move(out), tr);
    if (tr) {
        records_.push_back({"threshold_keep", id, [a, id, tau](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            const tensor& va2 = t.val(a);
            tensor& ga = t.grad_buf(a);
            for (index_t i = 0; i < g.size(); ++i) {
                if (va2[i] >= tau) ga[i] += g[i];
            }
        }});
    }
    return id;
}

node_id tape::rsqrt_or_zero(node_id a) {
    check_node(a);
    const tensor& va = val(a);
    tensor out = va;
    for (index_t i = 0; i < out.size(); ++i) {
        if (out[i] < 0.0) {
            throw numerical_error("rsqrt_or_zero: negative input " + std::to_string(out[i]));
        }
        out[i] = out[i] == 0.0 ? 0.0 : 1.0 / std::sqrt(out[i]);
    }
    bool tr = track(a);
    node_id id = push("rsqrt_or_zero", out, tr);
    if (tr) {
        records_.push_back({"rsqrt_or_zero", id, [a, id, saved = std::move(out)](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            tensor& ga = t.grad_buf(a);
            // d(x^{-1/2})/dx = -x^{-3/2}/2 = -(x^{-1/2})^3 / 2
            for (index_t i = 0; i < g.size(); ++i) {
                ga[i] += -0.5 * saved[i] * saved[i] * saved[i] * g[i];
            }
        }});
    }
    return id;
}

node_id tape::lambda_max(node_id a, double rel_tol, int max_iters, double accept_tol) {
    check_node(a);
    require_square(val(a), "lambda_max");
    auto pi = lin::power_iteration(val(a), rel_tol, max_iters);
    if (!pi.converged) {
        const double delta = std::abs(pi.rq_last - pi.rq_prev);
        if (delta > accept_tol * std::max(std::abs(pi.rq_last), 1e-300)) {
            throw numerical_error("lambda_max: power iteration did not converge after " +
                                  std::to_string(pi.iters) + " iterations; last Rayleigh quotients " +
                                  std::to_string(pi.rq_prev) + ", " + std::to_string(pi.rq_last));
        }
    }
    bool tr = track(a);
    node_id id = push("lambda_max", tensor::scalar(pi.lambda), tr);
    if (tr) {
        records_.push_back({"lambda_max", id, [a, id, v = std::move(pi.eigvec)](tape& t) {
            const double g = t.grads_[static_cast<std::size_t>(id)][0];
            tensor& ga = t.grad_buf(a);
            const index_t n = v.rows();
            for (index_t i = 0; i < n; ++i) {
                for (index_t j = 0; j < n; ++j) {
                    ga.at(i, j) += g * v.at(i, 0) * v.at(j, 0);
                }
            }
        }});
    }
    return id;
}

node_id tape::batch_norm_train(node_id x, node_id gamma, node_id beta, double eps,
                               tensor* batch_mean, tensor* batch_var) {
    check_node(x);
    check_node(gamma);
    check_node(beta);
    const tensor& vx = val(x);
    require_rank2(vx, "batch_norm_train");
    const index_t n = vx.rows(), f = vx.cols();
    if (n < 2) {
        throw structural_error("batch_norm_train: needs >= 2 rows, got " + std::to_string(n));
    }
    if (val(gamma).cols() != f || val(beta).cols() != f) {
        throw structural_error("batch_norm_train: scale/shift width mismatch");
    }
    tensor mean({1, f}), var({1, f}), invstd({1, f});
    for (index_t j = 0; j < f; ++j) {
        double s = 0.0;
        for (index_t i = 0; i < n; ++i) s += vx.at(i, j);
        mean.at(0, j) = s / static_cast<double>(n);
    }
    for (index_t j = 0; j < f; ++j) {
        double s = 0.0;
        for (index_t i = 0; i < n; ++i) {
            const double d = vx.at(i, j) - mean.at(0, j);
            s += d * d;
        }
        var.at(0, j) = s / static_cast<double>(n);
        invstd.at(0, j) = 1.0 / std::sqrt(var.at(0, j) + eps);
    }
    tensor xhat({n, f});
    tensor out({n, f});
    const tensor& vg = val(gamma);
    const tensor& vb = val(beta);
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < f; ++j) {
            xhat.at(i, j) = (vx.at(i, j) - mean.at(0, j)) * invstd.at(0, j);
            out.at(i, j) = vg.at(0, j) * xhat.at(i, j) + vb.at(0, j);
        }
    }
    if (batch_mean) *batch_mean = mean;
    if (batch_var) *batch_var = var;
    bool tr = track(x) || track(gamma) || track(beta);
    node_id id = push("batch_norm_train", std::move(out), tr);
    if (tr) {
        records_.push_back({"batch_norm_train", id,
                            [x, gamma, beta, id, n, f, xhat = std::move(xhat),
                             invstd = std::move(invstd)](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            const tensor& vg2 = t.val(gamma);
            if (t.track(gamma)) {
                tensor& gg = t.grad_buf(gamma);
                for (index_t j = 0; j < f; ++j) {
                    double s = 0.0;
                    for (index_t i = 0; i < n; ++i) s += g.at(i, j) * xhat.at(i, j);
                    gg.at(0, j) += s;
                }
            }
            if (t.track(beta)) {
                tensor& gb = t.grad_buf(beta);
                for (index_t j = 0; j < f; ++j) {
                    double s = 0.0;
                    for (index_t i = 0; i < n; ++i) s += g.at(i, j);
                    gb.at(0, j) += s;
                }
            }
            if (t.track(x)) {
                tensor& gx = t.grad_buf(x);
                for (index_t j = 0; j < f; ++j) {
                    double mean_g = 0.0, mean_gx = 0.0;
                    for (index_t i = 0; i < n; ++i) {
                        mean_g += g.at(i, j);
                        mean_gx += g.at(i, j) * xhat.at(i, j);
                    }
                    mean_g /= static_cast<double>(n);
                    mean_gx /= static_cast<double>(n);
                    const double c = vg2.at(0, j) * invstd.at(0, j);
                    for (index_t i = 0; i < n; ++i) {
                        gx.at(i, j) += c * (g.at(i, j) - mean_g - xhat.at(i, j) * mean_gx);
                    }
                }
            }
        }});
    }
    return id;
}

node_id tape::batch_norm_eval(node_id x, node_id gamma, node_id beta,
                              const tensor& running_mean, const tensor& running_var, double eps) {
    check_node(x);
    check_node(gamma);
    check_node(beta);
    const tensor& vx = val(x);
    require_rank2(vx, "batch_norm_eval");
    const index_t n = vx.rows(), f = vx.cols();
    if (running_mean.cols() != f || running_var.cols() != f) {
        throw structural_error("batch_norm_eval: running stats width mismatch");
    }
    tensor invstd({1, f});
    for (index_t j = 0; j < f; ++j) invstd.at(0, j) = 1.0 / std::sqrt(running_var.at(0, j) + eps);
    tensor xhat({n, f});
    tensor out({n, f});
    const tensor& vg = val(gamma);
    const tensor& vb = val(beta);
    for (index_t i = 0; i < n; ++i) {
        for (index_t j = 0; j < f; ++j) {
            xhat.at(i, j) = (vx.at(i, j) - running_mean.at(0, j)) * invstd.at(0, j);
            out.at(i, j) = vg.at(0, j) * xhat.at(i, j) + vb.at(0, j);
        }
    }
    bool tr = track(x) || track(gamma) || track(beta);
    node_id id = push("batch_norm_eval", std::move(out), tr);
    if (tr) {
        records_.push_back({"batch_norm_eval", id,
                            [x, gamma, beta, id, n, f, xhat = std::move(xhat),
                             invstd = std::move(invstd)](tape& t) {
            const tensor& g = t.grads_[static_cast<std::size_t>(id)];
            const tensor& vg2 = t.val(gamma);
            if (t.track(gamma)) {
                tensor& gg = t.grad_buf(gamma);
                for (index_t j = 0; j < f; ++j) {
                    double s = 0.0;
                    for (index_t i = 0; i < n; ++i) s += g.at(i, j) * xhat.at(i, j);
                    gg.at(0, j) += s;
                }
            }
            if (t.track(beta)) {
                tensor& gb = t.grad_buf(beta);
                for (index_t j = 0; j < f; ++j) {
                    double s = 0.0;
                    for (index_t i = 0; i < n; ++i) s += g.at(i, j);
                    gb.at(0, j) += s;
                }
            }
            if (t.track(x)) {
                tensor& gx = t.grad_buf(x);
                for (index_t j = 0; j < f; ++j) {
                    const double c = vg2.at(0, j) * invstd.at(0, j);
                    for (index_t i = 0; i < n; ++i) gx.at(i, j) += c * g.at(i, j);
                }
            }
        }});
    }
    return id;
}

node_id tape::bce_with_logits(node_id logits, tensor labels, tensor weights, double denom) {
    check_node(logits);
    const tensor& vz = val(logits);
    require_same_shape(vz, labels, "bce_with_logits");
    require_same_shape(vz, weights, "bce_with_logits");
    if (denom <= 0.0) {
        throw parameter_error("bce_with_logits: denominator must be positive");
    }
    double total = 0.0;
    for (index_t i = 0; i < vz.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const double z = vz[i];
        const double y = labels[i];
        // max(z,0) - z*y + log(1 + exp(-|z|)) is the overflow-free form.
        const double l = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
        total += weights[i] * l;
    }
    bool tr = track(logits);
    node_id id = push("bce_with_logits", tensor::scalar(total / denom), tr);
    if (tr) {
        records_.push_back({"bce_with_logits", id,
                            [logits, id, labels = std::move(labels), weights = std::move(weights),
                             denom](tape& t) {
            const double g = t.grads_[static_cast<std::size_t>(id)][0];
            const tensor& vz2 = t.val(logits);
            tensor& gz = t.grad_buf(logits);
            for (index_t i = 0; i < vz2.size(); ++i) {
                if (weights[i] == 0.0) continue;
                const double z = vz2[i];
                const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
                gz[i] += g * weights[i] * (sig - labels[i]) / denom;
            }
        }});
    }
    return id;
}

} // namespace egcn
