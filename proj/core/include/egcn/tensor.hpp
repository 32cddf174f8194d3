#ifndef EGCN_TENSOR_HPP
#define EGCN_TENSOR_HPP

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "egcn/errors.hpp"

namespace egcn {

using index_t = std::int64_t;

/// Dense row-major tensor of 64-bit floats. Rank 1 and 2 cover all of the
/// differentiable math; rank 3 is used for padded batch storage only.
class tensor {
public:
    tensor() = default;

    /// Zero-filled tensor of the given shape.
    explicit tensor(std::vector<index_t> shape);

    static tensor zeros(std::vector<index_t> shape) { return tensor(std::move(shape)); }
    static tensor full(std::vector<index_t> shape, double value);
    static tensor from(std::vector<index_t> shape, std::vector<double> values);
    static tensor identity(index_t n);
    static tensor scalar(double value);
    /// n x 1 column vector.
    static tensor column(std::vector<double> values);
    /// 1 x n row vector.
    static tensor row(std::vector<double> values);
    /// Row-major r x c matrix from nested initializer lists.
    static tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    const std::vector<index_t>& shape() const { return shape_; }
    index_t rank() const { return static_cast<index_t>(shape_.size()); }
    index_t size() const { return static_cast<index_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    /// Rows/cols of a rank-1 or rank-2 tensor (rank 1 is treated as n x 1).
    index_t rows() const;
    index_t cols() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return {data_.data(), data_.size()}; }
    std::span<const double> values() const { return {data_.data(), data_.size()}; }

    double& operator[](index_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](index_t i) const { return data_[static_cast<std::size_t>(i)]; }
    double& at(index_t r, index_t c) { return data_[static_cast<std::size_t>(r * cols_stride() + c)]; }
    double at(index_t r, index_t c) const { return data_[static_cast<std::size_t>(r * cols_stride() + c)]; }
    double& at3(index_t a, index_t b, index_t c);
    double at3(index_t a, index_t b, index_t c) const;

    /// Scalar value of a size-1 tensor.
    double item() const;

    bool same_shape(const tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    /// Throws numerical_error if any entry is NaN or Inf.
    void check_finite(const std::string& context) const;
    bool all_finite() const;

    /// Copy of rows [r0, r1) and columns [c0, c1) of a rank-2 tensor.
    tensor block(index_t r0, index_t r1, index_t c0, index_t c1) const;

    /// Rank-2 view of the b-th slice of a rank-3 tensor.
    tensor slice2d(index_t b) const;

    bool operator==(const tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    index_t cols_stride() const { return shape_.size() == 2 ? shape_[1] : 1; }

    std::vector<index_t> shape_;
    std::vector<double> data_;
};

/// Max |a - b| over all entries; shapes must match.
double max_abs_diff(const tensor& a, const tensor& b);

} // namespace egcn

#endif // EGCN_TENSOR_HPP
