#include "egcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace egcn {

namespace {

void check_shapes(const tensor& a, const tensor& labels, const tensor& masks, const char* op) {
    if (!a.same_shape(labels) || !a.same_shape(masks)) {
        throw structural_error(std::string(op) + ": shapes disagree, " + a.shape_str() + " / " +
                               labels.shape_str() + " / " + masks.shape_str());
    }
}

void finalize(metric_report& r) {
    double sum = 0.0;
    for (std::size_t t = 0; t < r.per_task.size(); ++t) {
        if (r.evaluated[t]) {
            sum += r.per_task[t];
            ++r.num_evaluated;
        }
    }
    r.mean = r.num_evaluated > 0 ? sum / static_cast<double>(r.num_evaluated)
                                 : std::numeric_limits<double>::quiet_NaN();
}

} // namespace

metric_report rmse(const tensor& pred, const tensor& labels, const tensor& masks) {
    check_shapes(pred, labels, masks, "rmse");
    const index_t rows = pred.rows(), tasks = pred.cols();
    metric_report r;
    for (index_t t = 0; t < tasks; ++t) {
        double ss = 0.0;
        index_t count = 0;
        for (index_t i = 0; i < rows; ++i) {
            if (masks.at(i, t) != 0.0) {
                const double d = pred.at(i, t) - labels.at(i, t);
                ss += d * d;
                ++count;
            }
        }
        if (count == 0) {
            r.per_task.push_back(std::numeric_limits<double>::quiet_NaN());
            r.evaluated.push_back(false);
        } else {
            r.per_task.push_back(std::sqrt(ss / static_cast<double>(count)));
            r.evaluated.push_back(true);
        }
    }
    finalize(r);
    return r;
}

metric_report roc_auc(const tensor& scores, const tensor& labels, const tensor& masks) {
    check_shapes(scores, labels, masks, "roc_auc");
    const index_t rows = scores.rows(), tasks = scores.cols();
    metric_report r;
    for (index_t t = 0; t < tasks; ++t) {
        std::vector<std::pair<double, double>> pts; // (score, label)
        for (index_t i = 0; i < rows; ++i) {
            if (masks.at(i, t) != 0.0) {
                const double y = labels.at(i, t);
                if (y != 0.0 && y != 1.0) {
                    throw data_error("roc_auc: label " + std::to_string(y) + " outside {0,1}");
                }
                pts.emplace_back(scores.at(i, t), y);
            }
        }
        index_t pos = 0, neg = 0;
        for (const auto& [s, y] : pts) {
            if (y == 1.0) ++pos;
            else ++neg;
        }
        if (pos == 0 || neg == 0) {
            r.per_task.push_back(std::numeric_limits<double>::quiet_NaN());
            r.evaluated.push_back(false);
            continue;
        }
        std::sort(pts.begin(), pts.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        // Midranks: tied scores share the average of their rank range.
        double rank_sum_pos = 0.0;
        std::size_t i = 0;
        while (i < pts.size()) {
            std::size_t j = i;
            while (j < pts.size() && pts[j].first == pts[i].first) ++j;
            const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
            for (std::size_t k = i; k < j; ++k) {
                if (pts[k].second == 1.0) rank_sum_pos += midrank;
            }
            i = j;
        }
        const double p = static_cast<double>(pos);
        const double u = rank_sum_pos - p * (p + 1.0) / 2.0;
        r.per_task.push_back(u / (p * static_cast<double>(neg)));
        r.evaluated.push_back(true);
    }
    finalize(r);
    return r;
}

} // namespace egcn
