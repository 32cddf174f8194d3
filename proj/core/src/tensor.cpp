#include "egcn/tensor.hpp"

#include <cmath>
#include <sstream>

namespace egcn {

namespace {

index_t shape_product(const std::vector<index_t>& shape) {
    index_t n = 1;
    for (index_t s : shape) {
        if (s < 0) throw structural_error("tensor shape has negative extent");
        n *= s;
    }
    return n;
}

} // namespace

tensor::tensor(std::vector<index_t> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_product(shape_)), 0.0) {}

tensor tensor::full(std::vector<index_t> shape, double value) {
    tensor t(std::move(shape));
    for (double& v : t.data_) v = value;
    return t;
}

tensor tensor::from(std::vector<index_t> shape, std::vector<double> values) {
    tensor t;
    if (shape_product(shape) != static_cast<index_t>(values.size())) {
        throw structural_error("tensor::from: data length does not match shape");
    }
    t.shape_ = std::move(shape);
    t.data_ = std::move(values);
    return t;
}

tensor tensor::identity(index_t n) {
    tensor t({n, n});
    for (index_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

tensor tensor::scalar(double value) { return from({1, 1}, {value}); }

tensor tensor::column(std::vector<double> values) {
    auto n = static_cast<index_t>(values.size());
    return from({n, 1}, std::move(values));
}

tensor tensor::row(std::vector<double> values) {
    auto n = static_cast<index_t>(values.size());
    return from({1, n}, std::move(values));
}

tensor tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    auto r = static_cast<index_t>(rows.size());
    index_t c = r > 0 ? static_cast<index_t>(rows.begin()->size()) : 0;
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(r * c));
    for (const auto& row : rows) {
        if (static_cast<index_t>(row.size()) != c) {
            throw structural_error("tensor::matrix: ragged rows");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return from({r, c}, std::move(data));
}

index_t tensor::rows() const {
    if (shape_.size() == 1) return shape_[0];
    if (shape_.size() == 2) return shape_[0];
    throw structural_error("tensor::rows: rank > 2 tensor (" + shape_str() + ")");
}

index_t tensor::cols() const {
    if (shape_.size() == 1) return 1;
    if (shape_.size() == 2) return shape_[1];
    throw structural_error("tensor::cols: rank > 2 tensor (" + shape_str() + ")");
}

double& tensor::at3(index_t a, index_t b, index_t c) {
    return data_[static_cast<std::size_t>((a * shape_[1] + b) * shape_[2] + c)];
}

double tensor::at3(index_t a, index_t b, index_t c) const {
    return data_[static_cast<std::size_t>((a * shape_[1] + b) * shape_[2] + c)];
}

double tensor::item() const {
    if (size() != 1) throw structural_error("tensor::item: size " + std::to_string(size()) + " != 1");
    return data_[0];
}

std::string tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << "x";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

bool tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void tensor::check_finite(const std::string& context) const {
    if (!all_finite()) {
        throw numerical_error(context + ": non-finite value in tensor " + shape_str());
    }
}

tensor tensor::block(index_t r0, index_t r1, index_t c0, index_t c1) const {
    if (rank() > 2) throw structural_error("tensor::block: rank > 2");
    const index_t r = rows(), c = cols();
    if (r0 < 0 || c0 < 0 || r1 > r || c1 > c || r0 > r1 || c0 > c1) {
        throw structural_error("tensor::block: window out of range for " + shape_str());
    }
    tensor out({r1 - r0, c1 - c0});
    for (index_t i = r0; i < r1; ++i) {
        for (index_t j = c0; j < c1; ++j) {
            out.at(i - r0, j - c0) = at(i, j);
        }
    }
    return out;
}

tensor tensor::slice2d(index_t b) const {
    if (rank() != 3) throw structural_error("tensor::slice2d: expected rank-3 tensor, got " + shape_str());
    if (b < 0 || b >= shape_[0]) throw structural_error("tensor::slice2d: index out of range");
    tensor out({shape_[1], shape_[2]});
    const index_t n = shape_[1] * shape_[2];
    const double* src = data_.data() + b * n;
    for (index_t i = 0; i < n; ++i) out[i] = src[i];
    return out;
}

double max_abs_diff(const tensor& a, const tensor& b) {
    if (!a.same_shape(b)) {
        throw structural_error("max_abs_diff: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    double m = 0.0;
    for (index_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

} // namespace egcn
