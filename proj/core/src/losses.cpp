#include "egcn/losses.hpp"

#include <cmath>

namespace egcn {

namespace {

/// mask (B x T) times task weight (T), validated; also returns the
/// normalizer sum(mask * w).
tensor masked_weights(const tensor& pred_shape_ref, const tensor& labels, const tensor& masks,
                      const tensor& task_weights, double* denom_out) {
    if (!pred_shape_ref.same_shape(labels) || !pred_shape_ref.same_shape(masks)) {
        throw structural_error("loss: predictions " + pred_shape_ref.shape_str() +
                               ", labels " + labels.shape_str() + " and masks " +
                               masks.shape_str() + " must agree");
    }
    const index_t tasks = pred_shape_ref.cols();
    if (task_weights.size() != tasks) {
        throw structural_error("loss: task weight count " + std::to_string(task_weights.size()) +
                               " != " + std::to_string(tasks) + " tasks");
    }
    for (index_t j = 0; j < tasks; ++j) {
        if (task_weights[j] < 0.0) throw parameter_error("loss: negative task weight");
    }
    tensor w(pred_shape_ref.shape());
    double denom = 0.0;
    for (index_t i = 0; i < pred_shape_ref.rows(); ++i) {
        for (index_t j = 0; j < tasks; ++j) {
            const double v = masks.at(i, j) != 0.0 ? task_weights[j] : 0.0;
            w.at(i, j) = v;
            denom += v;
        }
    }
    if (denom == 0.0) throw data_error("loss: no supervised signal (all entries masked)");
    *denom_out = denom;
    return w;
}

void check_binary_labels(const tensor& labels, const tensor& masks) {
    for (index_t i = 0; i < labels.size(); ++i) {
        if (masks[i] != 0.0 && labels[i] != 0.0 && labels[i] != 1.0) {
            throw data_error("masked_logistic_loss: label " + std::to_string(labels[i]) +
                             " outside {0,1} on an unmasked entry");
        }
    }
}

} // namespace

node_id weighted_l2_loss(tape& t, node_id pred, const tensor& labels, const tensor& masks,
                         const tensor& task_weights) {
    double denom = 0.0;
    tensor w = masked_weights(t.value(pred), labels, masks, task_weights, &denom);
    node_id diff = t.sub(pred, t.constant(labels));
    node_id sq = t.elementwise_mul(diff, diff);
    node_id weighted = t.elementwise_mul(sq, t.constant(std::move(w)));
    return t.scalar_mul(t.sum_all(weighted), 1.0 / denom);
}

node_id masked_logistic_loss(tape& t, node_id logits, const tensor& labels, const tensor& masks,
                             const tensor& task_weights) {
    double denom = 0.0;
    tensor w = masked_weights(t.value(logits), labels, masks, task_weights, &denom);
    check_binary_labels(labels, masks);
    return t.bce_with_logits(logits, labels, std::move(w), denom);
}

double weighted_l2_loss_value(const tensor& pred, const tensor& labels, const tensor& masks,
                              const tensor& task_weights) {
    double denom = 0.0;
    tensor w = masked_weights(pred, labels, masks, task_weights, &denom);
    double total = 0.0;
    for (index_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - labels[i];
        total += w[i] * d * d;
    }
    return total / denom;
}

double masked_logistic_loss_value(const tensor& logits, const tensor& labels, const tensor& masks,
                                  const tensor& task_weights) {
    double denom = 0.0;
    tensor w = masked_weights(logits, labels, masks, task_weights, &denom);
    check_binary_labels(labels, masks);
    double total = 0.0;
    for (index_t i = 0; i < logits.size(); ++i) {
        if (w[i] == 0.0) continue;
        const double z = logits[i];
        total += w[i] * (std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z))));
    }
    return total / denom;
}

} // namespace egcn
