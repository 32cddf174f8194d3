#ifndef EGCN_METRICS_HPP
#define EGCN_METRICS_HPP

#include <vector>

#include "egcn/tensor.hpp"

namespace egcn {

/// Per-task metric values; tasks without enough unmasked labels are excluded
/// from the mean and flagged.
struct metric_report {
    std::vector<double> per_task;      // NaN for excluded tasks
    std::vector<bool> evaluated;       // false = excluded
    double mean = 0.0;                 // over evaluated tasks
    index_t num_evaluated = 0;
};

/// Masked root-mean-square error per task plus the unweighted mean.
metric_report rmse(const tensor& pred, const tensor& labels, const tensor& masks);

/// Probability that a random positive outranks a random negative, ties 0.5,
/// computed by the midrank statistic. Single-class tasks are excluded.
metric_report roc_auc(const tensor& scores, const tensor& labels, const tensor& masks);

} // namespace egcn

#endif // EGCN_METRICS_HPP
