#ifndef EGCN_TAPE_HPP
#define EGCN_TAPE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "egcn/param_store.hpp"
#include "egcn/tensor.hpp"

namespace egcn {

using node_id = std::int32_t;

/// Recorded forward computation. Every primitive appends one node (its output
/// value) and one record (how to push gradients back to its inputs), so the
/// record list is in topological order by construction and each node is
/// produced exactly once. backward() runs a reverse sweep and accumulates
/// parameter gradients into the bound param_store entries.
class tape {
public:
    // ---- leaves ----
    node_id constant(tensor value);                  // no gradient tracking
    node_id leaf(tensor value);                      // gradient-tracked input
    node_id param(param_store& store, const std::string& name);

    // ---- primitives ----
    node_id matmul(node_id a, node_id b);
    node_id add(node_id a, node_id b);
    node_id sub(node_id a, node_id b);
    node_id scalar_mul(node_id a, double c);
    node_id elementwise_mul(node_id a, node_id b);
    node_id transpose(node_id a);
    node_id relu(node_id a);
    node_id exp(node_id a);
    node_id sqrt(node_id a);
    node_id sigmoid(node_id a);
    node_id sum_rows(node_id a);                     // n x m -> n x 1
    node_id sum_all(node_id a);                      // -> 1 x 1
    /// Per output row s and feature j: max over rows in sets[s] of a(., j).
    /// Gradient routes to the single argmax row; ties go to the lowest index.
    node_id max_over_set(node_id a, std::vector<std::vector<index_t>> sets);
    node_id slice(node_id a, index_t r0, index_t r1, index_t c0, index_t c1);
    /// Zero padding around a rank-2 tensor.
    node_id pad(node_id a, index_t top, index_t bottom, index_t left, index_t right);
    node_id concat_rows(const std::vector<node_id>& parts);
    node_id concat_cols(const std::vector<node_id>& parts);
    /// x (n x m) + b (1 x m), broadcast over rows.
    node_id add_row_vector(node_id x, node_id b);
    /// x * s with s a 1x1 node (gradient flows to both).
    node_id mul_scalar_node(node_id x, node_id s);
    node_id reciprocal(node_id a);
    /// z (n x d) -> n x n matrix of squared Euclidean row distances.
    node_id pairwise_sq_dists(node_id z);
    node_id zero_diag(node_id a);
    /// Keeps entries >= tau, zeroes the rest; straight-through gradient on
    /// the survivors.
    node_id threshold_keep(node_id a, double tau);
    /// Elementwise d^{-1/2} with 0 mapped to 0 (isolated-node convention).
    node_id rsqrt_or_zero(node_id a);
    /// Dominant eigenvalue of a symmetric PSD matrix via power iteration.
    /// Gradient is g * v v^T with v the converged eigenvector. A stagnating
    /// Rayleigh quotient (near-degenerate top pair) is accepted once its
    /// relative change is below accept_tol: the quotient is then pinched
    /// between the two top eigenvalues, so the value is still accurate.
    /// Throws numerical_error (reporting the last two Rayleigh quotients)
    /// only when it stays above accept_tol after max_iters.
    node_id lambda_max(node_id a, double rel_tol = 1e-13, int max_iters = 4000,
                       double accept_tol = 1e-4);
    /// Batch normalization over rows (train statistics). Optionally reports
    /// the batch mean/variance for running-stat updates.
    node_id batch_norm_train(node_id x, node_id gamma, node_id beta, double eps,
                             tensor* batch_mean = nullptr, tensor* batch_var = nullptr);
    node_id batch_norm_eval(node_id x, node_id gamma, node_id beta,
                            const tensor& running_mean, const tensor& running_var, double eps);
    /// Weighted binary cross-entropy on logits, numerically stable; value is
    /// sum(w * bce) / denom. Gradient: w * (sigmoid(z) - y) / denom.
    node_id bce_with_logits(node_id logits, tensor labels, tensor weights, double denom);

    // ---- access ----
    const tensor& value(node_id id) const;
    /// Gradient of the last backward() target w.r.t. this node (zeros if the
    /// node did not participate).
    tensor grad(node_id id) const;
    bool requires_grad(node_id id) const;
    std::size_t num_nodes() const { return nodes_.size(); }
    std::size_t num_records() const { return records_.size(); }

    /// Reverse-mode sweep from a scalar loss node; accumulates into every
    /// bound param_store.
    void backward(node_id loss);

private:
    struct node {
        tensor value;
        bool track = false;
        std::int32_t param_binding = -1; // index into bindings_
    };
    struct binding {
        param_store* store;
        std::string name;
        node_id id;
    };
    struct record {
        const char* op;
        node_id out;
        std::function<void(tape&)> backward_fn;
    };

    node_id push(const char* op, tensor value, bool track);
    const tensor& val(node_id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    bool track(node_id id) const { return nodes_[static_cast<std::size_t>(id)].track; }
    /// Gradient buffer for a node, allocated on first touch.
    tensor& grad_buf(node_id id);
    bool has_grad(node_id id) const { return grad_set_[static_cast<std::size_t>(id)] != 0; }
    void add_into(node_id id, const tensor& g);
    void check_node(node_id id) const;

    std::vector<node> nodes_;
    std::vector<binding> bindings_;
    std::vector<record> records_;
    std::vector<tensor> grads_;
    std::vector<char> grad_set_;
};

/// Free-function form of the reverse sweep.
inline void backward(tape& t, node_id loss) { t.backward(loss); }

} // namespace egcn

#endif // EGCN_TAPE_HPP
