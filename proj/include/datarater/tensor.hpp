#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "datarater/errors.hpp"
#include "datarater/rng.hpp"

namespace dr {

// Dense row-major tensor of doubles. Data is shared (cheap to copy the
// handle); tensors are treated as immutable once an operation has produced
// them, so sharing never aliases a mutation.
class Tensor {
public:
    Tensor() : shape_{0}, data_(std::make_shared<std::vector<double>>()) {}

    Tensor(std::vector<int64_t> shape, std::shared_ptr<std::vector<double>> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (numel() != int64_t(data_->size()))
            throw invalid_error("tensor shape does not match buffer size");
    }

    static Tensor zeros(std::vector<int64_t> shape) {
        int64_t n = count(shape);
        return Tensor(std::move(shape), std::make_shared<std::vector<double>>(size_t(n), 0.0));
    }

    static Tensor full(std::vector<int64_t> shape, double v) {
        int64_t n = count(shape);
        return Tensor(std::move(shape), std::make_shared<std::vector<double>>(size_t(n), v));
    }

    static Tensor scalar(double v) { return full({1}, v); }

    static Tensor from(std::vector<int64_t> shape, std::vector<double> values) {
        return Tensor(std::move(shape), std::make_shared<std::vector<double>>(std::move(values)));
    }

    static Tensor randn(std::vector<int64_t> shape, Rng& rng, double std_dev = 1.0) {
        int64_t n = count(shape);
        auto buf = std::make_shared<std::vector<double>>(size_t(n));
        for (auto& v : *buf) v = rng.normal() * std_dev;
        return Tensor(std::move(shape), std::move(buf));
    }

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t rank() const { return int64_t(shape_.size()); }
    int64_t dim(int64_t i) const { return shape_[size_t(i)]; }
    int64_t numel() const { return count(shape_); }

    const double* data() const { return data_->data(); }
    double* mutable_data() { return data_->data(); }
    const std::vector<double>& vec() const { return *data_; }
    const std::shared_ptr<std::vector<double>>& buffer() const { return data_; }

    double at(int64_t i) const { return (*data_)[size_t(i)]; }
    double at(int64_t i, int64_t j) const { return (*data_)[size_t(i * shape_[1] + j)]; }

    // Scalar convenience: tensors of one element read as doubles.
    double item() const {
        if (numel() != 1) throw invalid_error("item() on non-scalar tensor");
        return (*data_)[0];
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    Tensor reshaped(std::vector<int64_t> new_shape) const {
        if (count(new_shape) != numel())
            throw invalid_error("reshape changes element count");
        return Tensor(std::move(new_shape), data_);
    }

    bool all_finite() const {
        for (double v : *data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static int64_t count(const std::vector<int64_t>& shape) {
        int64_t n = 1;
        for (int64_t d : shape) {
            if (d < 0) throw invalid_error("negative dimension");
            n *= d;
        }
        return n;
    }

    static std::string shape_str(const std::vector<int64_t>& shape) {
        std::string s = "[";
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }

private:
    std::vector<int64_t> shape_;
    std::shared_ptr<std::vector<double>> data_;
};

// ---------------------------------------------------------------------------
// Numeric kernels. These back both the tape ops and host-side optimizer math
// so the two paths share one implementation of each primitive.
// ---------------------------------------------------------------------------
namespace kern {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b); // [m,k] x [k,n]
Tensor transpose(const Tensor& a);               // 2-D only

// Right-aligned numpy-style broadcast of `a` to `shape` (dims equal or 1).
Tensor broadcast_to(const Tensor& a, const std::vector<int64_t>& shape);
// Inverse of broadcast_to: sum over the expanded dimensions back to `shape`.
Tensor reduce_to(const Tensor& a, const std::vector<int64_t>& shape);

Tensor sum_axis(const Tensor& a, int64_t axis);  // keeps the axis as size 1
Tensor sum_all(const Tensor& a);                 // -> [1]
Tensor cumsum(const Tensor& a, int64_t axis);
Tensor rev_cumsum(const Tensor& a, int64_t axis);

Tensor softmax(const Tensor& a, int64_t axis);   // shift-stabilized
Tensor logsumexp(const Tensor& a, int64_t axis); // keeps the axis as size 1

// out[i,:] = table[idx[i],:]
Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& idx);
// inverse: scatter-add rows of src into a zero [rows, cols] tensor
Tensor scatter_rows(const Tensor& src, const std::vector<int64_t>& idx, int64_t rows);
// out[i] = x[i, idx[i]]
Tensor pick(const Tensor& x, const std::vector<int64_t>& idx);
// inverse: out[i, idx[i]] = v[i], zero elsewhere
Tensor scatter_pick(const Tensor& v, const std::vector<int64_t>& idx, const std::vector<int64_t>& shape);

double l2_norm(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

} // namespace kern
} // namespace dr
