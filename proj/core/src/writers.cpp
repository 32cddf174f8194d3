#include "egcn/writers.hpp"

#include <cstdio>
#include <fstream>

namespace egcn {

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path);
    if (!out) throw data_error("cannot write file '" + path.string() + "'");
    return out;
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // Trim to the shortest form that still round-trips.
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[40];
        std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
        double parsed = 0.0;
        std::sscanf(shorter, "%lf", &parsed);
        if (parsed == v) return shorter;
    }
    return buf;
}

void write_curves(const std::vector<curve_record>& records, const std::filesystem::path& path) {
    std::ofstream out = open_for_write(path);
    out << "epoch,split,metric_name,value\n";
    for (const curve_record& r : records) {
        out << r.epoch << "," << r.split << "," << r.metric << "," << format_double(r.value) << "\n";
    }
}

void write_snapshot(const tensor& matrix, const snapshot_meta& meta,
                    const std::filesystem::path& path) {
    if (matrix.rank() != 2 || matrix.rows() != matrix.cols()) {
        throw structural_error("write_snapshot: matrix must be square, got " + matrix.shape_str());
    }
    std::ofstream out = open_for_write(path);
    for (index_t i = 0; i < matrix.rows(); ++i) {
        for (index_t j = 0; j < matrix.cols(); ++j) {
            if (j) out << ",";
            out << format_double(matrix.at(i, j));
        }
        out << "\n";
    }
    std::filesystem::path meta_path = path;
    meta_path += ".meta";
    std::ofstream mout = open_for_write(meta_path);
    mout << meta.sample_id << "," << meta.layer << "," << meta.epoch << "\n";
}

void write_results(const std::vector<result_row>& rows, const std::filesystem::path& path) {
    std::ofstream out = open_for_write(path);
    out << "dataset,method,task,mean,std\n";
    for (const result_row& r : rows) {
        out << r.dataset << "," << r.method << "," << r.task << "," << format_double(r.mean) << ","
            << format_double(r.std_dev) << "\n";
    }
}

} // namespace egcn
