#ifndef EGCN_WRITERS_HPP
#define EGCN_WRITERS_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "egcn/tensor.hpp"

namespace egcn {

struct curve_record {
    index_t epoch = 0;
    std::string split;  // "train" or "val"
    std::string metric; // "loss", "rmse", "roc_auc", ...
    double value = 0.0;
};

struct snapshot_meta {
    std::string sample_id;
    index_t layer = 0;
    index_t epoch = 0;
};

struct result_row {
    std::string dataset;
    std::string method;
    std::string task; // task name or "ALL"
    double mean = 0.0;
    double std_dev = 0.0;
};

/// CSV with header epoch,split,metric_name,value. Byte-stable.
void write_curves(const std::vector<curve_record>& records, const std::filesystem::path& path);

/// Square numeric CSV (one row per line) plus a sidecar "<path>.meta" line
/// carrying sample id, layer and epoch.
void write_snapshot(const tensor& matrix, const snapshot_meta& meta,
                    const std::filesystem::path& path);

/// CSV with header dataset,method,task,mean,std.
void write_results(const std::vector<result_row>& rows, const std::filesystem::path& path);

/// Shortest round-trip decimal form used by every writer.
std::string format_double(double v);

} // namespace egcn

#endif // EGCN_WRITERS_HPP
