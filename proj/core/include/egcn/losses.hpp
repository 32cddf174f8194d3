#ifndef EGCN_LOSSES_HPP
#define EGCN_LOSSES_HPP

#include "egcn/tape.hpp"
#include "egcn/tensor.hpp"

namespace egcn {

/// Masked weighted mean squared error:
/// sum_{b,t} mask * w_t * (pred - label)^2 / sum_{b,t} mask * w_t.
/// Masked entries contribute exactly zero to the value and the gradient.
node_id weighted_l2_loss(tape& t, node_id pred, const tensor& labels, const tensor& masks,
                         const tensor& task_weights);

/// Masked weighted binary cross-entropy on logits (stable log-sum-exp form).
node_id masked_logistic_loss(tape& t, node_id logits, const tensor& labels, const tensor& masks,
                             const tensor& task_weights);

/// Plain (non-tape) values, for evaluation passes.
double weighted_l2_loss_value(const tensor& pred, const tensor& labels, const tensor& masks,
                              const tensor& task_weights);
double masked_logistic_loss_value(const tensor& logits, const tensor& labels, const tensor& masks,
                                  const tensor& task_weights);

} // namespace egcn

#endif // EGCN_LOSSES_HPP
