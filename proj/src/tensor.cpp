#include "datarater/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace dr {
namespace kern {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw invalid_error(std::string(op) + ": shape mismatch " +
                            Tensor::shape_str(a.shape()) + " vs " + Tensor::shape_str(b.shape()));
}

template <typename F>
Tensor map1(const Tensor& a, F f) {
    auto out = std::make_shared<std::vector<double>>(size_t(a.numel()));
    const double* p = a.data();
    for (size_t i = 0; i < out->size(); ++i) (*out)[i] = f(p[i]);
    return Tensor(a.shape(), std::move(out));
}

template <typename F>
Tensor map2(const Tensor& a, const Tensor& b, F f, const char* op) {
    require_same_shape(a, b, op);
    auto out = std::make_shared<std::vector<double>>(size_t(a.numel()));
    const double* pa = a.data();
    const double* pb = b.data();
    for (size_t i = 0; i < out->size(); ++i) (*out)[i] = f(pa[i], pb[i]);
    return Tensor(a.shape(), std::move(out));
}

// Decomposes a shape into (outer, axis, inner) strides around `axis`.
struct AxisSplit {
    int64_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const std::vector<int64_t>& shape, int64_t axis) {
    if (axis < 0 || axis >= int64_t(shape.size()))
        throw invalid_error("axis out of range");
    AxisSplit s;
    for (int64_t i = 0; i < axis; ++i) s.outer *= shape[size_t(i)];
    s.n = shape[size_t(axis)];
    for (size_t i = size_t(axis) + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) { return map2(a, b, [](double x, double y) { return x + y; }, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return map2(a, b, [](double x, double y) { return x - y; }, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return map2(a, b, [](double x, double y) { return x * y; }, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return map2(a, b, [](double x, double y) { return x / y; }, "div"); }
Tensor neg(const Tensor& a) { return map1(a, [](double x) { return -x; }); }
Tensor exp(const Tensor& a) { return map1(a, [](double x) { return std::exp(x); }); }
Tensor log(const Tensor& a) { return map1(a, [](double x) { return std::log(x); }); }
Tensor tanh(const Tensor& a) { return map1(a, [](double x) { return std::tanh(x); }); }
Tensor relu(const Tensor& a) { return map1(a, [](double x) { return x > 0.0 ? x : 0.0; }); }
Tensor sqrt(const Tensor& a) { return map1(a, [](double x) { return std::sqrt(x); }); }
Tensor add_scalar(const Tensor& a, double c) { return map1(a, [c](double x) { return x + c; }); }
Tensor mul_scalar(const Tensor& a, double c) { return map1(a, [c](double x) { return x * c; }); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw invalid_error("matmul: incompatible shapes " + Tensor::shape_str(a.shape()) +
                            " x " + Tensor::shape_str(b.shape()));
    int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto out = std::make_shared<std::vector<double>>(size_t(m * n), 0.0);
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = out->data();
    // ikj order: streams B rows, vectorizes over j.
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        double* crow = pc + i * n;
        for (int64_t kk = 0; kk < k; ++kk) {
            double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return Tensor({m, n}, std::move(out));
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw invalid_error("transpose: 2-D only");
    int64_t m = a.dim(0), n = a.dim(1);
    auto out = std::make_shared<std::vector<double>>(size_t(m * n));
    const double* p = a.data();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j)
            (*out)[size_t(j * m + i)] = p[i * n + j];
    return Tensor({n, m}, std::move(out));
}

Tensor broadcast_to(const Tensor& a, const std::vector<int64_t>& shape) {
    if (a.shape() == shape) return a;
    int64_t out_rank = int64_t(shape.size());
    int64_t in_rank = a.rank();
    if (in_rank > out_rank)
        throw invalid_error("broadcast_to: rank decrease");
    // Right-aligned dims; input dim must equal output dim or be 1.
    std::vector<int64_t> in_dims(size_t(out_rank), 1);
    for (int64_t i = 0; i < in_rank; ++i)
        in_dims[size_t(out_rank - in_rank + i)] = a.dim(i);
    std::vector<int64_t> in_strides(size_t(out_rank), 0);
    int64_t stride = 1;
    for (int64_t i = out_rank - 1; i >= 0; --i) {
        if (in_dims[size_t(i)] == shape[size_t(i)]) {
            in_strides[size_t(i)] = stride;
            stride *= in_dims[size_t(i)];
        } else if (in_dims[size_t(i)] == 1) {
            in_strides[size_t(i)] = 0;
        } else {
            throw invalid_error("broadcast_to: incompatible " + Tensor::shape_str(a.shape()) +
                                " -> " + Tensor::shape_str(shape));
        }
    }
    int64_t total = Tensor::count(shape);
    auto out = std::make_shared<std::vector<double>>(size_t(total));
    const double* p = a.data();
    std::vector<int64_t> idx(size_t(out_rank), 0);
    for (int64_t flat = 0; flat < total; ++flat) {
        int64_t src = 0;
        for (int64_t d = 0; d < out_rank; ++d) src += idx[size_t(d)] * in_strides[size_t(d)];
        (*out)[size_t(flat)] = p[src];
        for (int64_t d = out_rank - 1; d >= 0; --d) {
            if (++idx[size_t(d)] < shape[size_t(d)]) break;
            idx[size_t(d)] = 0;
        }
    }
    return Tensor(shape, std::move(out));
}

Tensor reduce_to(const Tensor& a, const std::vector<int64_t>& shape) {
    if (a.shape() == shape) return a;
    int64_t in_rank = a.rank();
    int64_t out_rank = int64_t(shape.size());
    if (out_rank > in_rank) throw invalid_error("reduce_to: rank increase");
    std::vector<int64_t> out_dims(size_t(in_rank), 1);
    for (int64_t i = 0; i < out_rank; ++i)
        out_dims[size_t(in_rank - out_rank + i)] = shape[size_t(i)];
    std::vector<int64_t> out_strides(size_t(in_rank), 0);
    int64_t stride = 1;
    for (int64_t i = in_rank - 1; i >= 0; --i) {
        if (out_dims[size_t(i)] == a.dim(i)) {
            out_strides[size_t(i)] = stride;
            stride *= out_dims[size_t(i)];
        } else if (out_dims[size_t(i)] == 1) {
            out_strides[size_t(i)] = 0;
        } else {
            throw invalid_error("reduce_to: incompatible " + Tensor::shape_str(a.shape()) +
                                " -> " + Tensor::shape_str(shape));
        }
    }
    auto out = std::make_shared<std::vector<double>>(size_t(Tensor::count(shape)), 0.0);
    const double* p = a.data();
    int64_t total = a.numel();
    std::vector<int64_t> idx(size_t(in_rank), 0);
    for (int64_t flat = 0; flat < total; ++flat) {
        int64_t dst = 0;
        for (int64_t d = 0; d < in_rank; ++d) dst += idx[size_t(d)] * out_strides[size_t(d)];
        (*out)[size_t(dst)] += p[flat];
        for (int64_t d = in_rank - 1; d >= 0; --d) {
            if (++idx[size_t(d)] < a.dim(d)) break;
            idx[size_t(d)] = 0;
        }
    }
    return Tensor(shape, std::move(out));
}

Tensor sum_axis(const Tensor& a, int64_t axis) {
    AxisSplit s = split_axis(a.shape(), axis);
    std::vector<int64_t> out_shape = a.shape();
    out_shape[size_t(axis)] = 1;
    auto out = std::make_shared<std::vector<double>>(size_t(s.outer * s.inner), 0.0);
    const double* p = a.data();
    for (int64_t o = 0; o < s.outer; ++o)
        for (int64_t i = 0; i < s.n; ++i) {
            const double* src = p + (o * s.n + i) * s.inner;
            double* dst = out->data() + o * s.inner;
            for (int64_t j = 0; j < s.inner; ++j) dst[j] += src[j];
        }
    return Tensor(out_shape, std::move(out));
}

Tensor sum_all(const Tensor& a) {
    double acc = 0.0;
    const double* p = a.data();
    for (int64_t i = 0; i < a.numel(); ++i) acc += p[i];
    return Tensor::scalar(acc);
}

Tensor cumsum(const Tensor& a, int64_t axis) {
    AxisSplit s = split_axis(a.shape(), axis);
    auto out = std::make_shared<std::vector<double>>(size_t(a.numel()));
    const double* p = a.data();
    for (int64_t o = 0; o < s.outer; ++o)
        for (int64_t j = 0; j < s.inner; ++j) {
            double acc = 0.0;
            for (int64_t i = 0; i < s.n; ++i) {
                int64_t off = (o * s.n + i) * s.inner + j;
                acc += p[off];
                (*out)[size_t(off)] = acc;
            }
        }
    return Tensor(a.shape(), std::move(out));
}

Tensor rev_cumsum(const Tensor& a, int64_t axis) {
    AxisSplit s = split_axis(a.shape(), axis);
    auto out = std::make_shared<std::vector<double>>(size_t(a.numel()));
    const double* p = a.data();
    for (int64_t o = 0; o < s.outer; ++o)
        for (int64_t j = 0; j < s.inner; ++j) {
            double acc = 0.0;
            for (int64_t i = s.n - 1; i >= 0; --i) {
                int64_t off = (o * s.n + i) * s.inner + j;
                acc += p[off];
                (*out)[size_t(off)] = acc;
            }
        }
    return Tensor(a.shape(), std::move(out));
}

Tensor softmax(const Tensor& a, int64_t axis) {
    AxisSplit s = split_axis(a.shape(), axis);
    auto out = std::make_shared<std::vector<double>>(size_t(a.numel()));
    const double* p = a.data();
    for (int64_t o = 0; o < s.outer; ++o)
        for (int64_t j = 0; j < s.inner; ++j) {
            double mx = -HUGE_VAL;
            for (int64_t i = 0; i < s.n; ++i)
                mx = std::max(mx, p[(o * s.n + i) * s.inner + j]);
            double denom = 0.0;
            for (int64_t i = 0; i < s.n; ++i) {
                int64_t off = (o * s.n + i) * s.inner + j;
                double e = std::exp(p[off] - mx);
                (*out)[size_t(off)] = e;
                denom += e;
            }
            for (int64_t i = 0; i < s.n; ++i) {
                int64_t off = (o * s.n + i) * s.inner + j;
                (*out)[size_t(off)] /= denom;
            }
        }
    return Tensor(a.shape(), std::move(out));
}

Tensor logsumexp(const Tensor& a, int64_t axis) {
    AxisSplit s = split_axis(a.shape(), axis);
    std::vector<int64_t> out_shape = a.shape();
    out_shape[size_t(axis)] = 1;
    auto out = std::make_shared<std::vector<double>>(size_t(s.outer * s.inner));
    const double* p = a.data();
    for (int64_t o = 0; o < s.outer; ++o)
        for (int64_t j = 0; j < s.inner; ++j) {
            double mx = -HUGE_VAL;
            for (int64_t i = 0; i < s.n; ++i)
                mx = std::max(mx, p[(o * s.n + i) * s.inner + j]);
            double acc = 0.0;
            for (int64_t i = 0; i < s.n; ++i)
                acc += std::exp(p[(o * s.n + i) * s.inner + j] - mx);
            (*out)[size_t(o * s.inner + j)] = mx + std::log(acc);
        }
    return Tensor(out_shape, std::move(out));
}

Tensor gather_rows(const Tensor& table, const std::vector<int64_t>& idx) {
    if (table.rank() != 2) throw invalid_error("gather_rows: table must be 2-D");
    int64_t rows = table.dim(0), cols = table.dim(1);
    auto out = std::make_shared<std::vector<double>>(idx.size() * size_t(cols));
    const double* p = table.data();
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= rows) throw invalid_error("gather_rows: index out of range");
        std::copy(p + idx[i] * cols, p + (idx[i] + 1) * cols, out->data() + int64_t(i) * cols);
    }
    return Tensor({int64_t(idx.size()), cols}, std::move(out));
}

Tensor scatter_rows(const Tensor& src, const std::vector<int64_t>& idx, int64_t rows) {
    if (src.rank() != 2 || src.dim(0) != int64_t(idx.size()))
        throw invalid_error("scatter_rows: src shape mismatch");
    int64_t cols = src.dim(1);
    auto out = std::make_shared<std::vector<double>>(size_t(rows * cols), 0.0);
    const double* p = src.data();
    for (size_t i = 0; i < idx.size(); ++i) {
        double* dst = out->data() + idx[i] * cols;
        const double* s = p + int64_t(i) * cols;
        for (int64_t j = 0; j < cols; ++j) dst[j] += s[j];
    }
    return Tensor({rows, cols}, std::move(out));
}

Tensor pick(const Tensor& x, const std::vector<int64_t>& idx) {
    if (x.rank() != 2 || x.dim(0) != int64_t(idx.size()))
        throw invalid_error("pick: shape mismatch");
    int64_t cols = x.dim(1);
    auto out = std::make_shared<std::vector<double>>(idx.size());
    const double* p = x.data();
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= cols) throw invalid_error("pick: index out of range");
        (*out)[i] = p[int64_t(i) * cols + idx[i]];
    }
    return Tensor({int64_t(idx.size())}, std::move(out));
}

Tensor scatter_pick(const Tensor& v, const std::vector<int64_t>& idx, const std::vector<int64_t>& shape) {
    if (v.rank() != 1 || shape.size() != 2 || v.dim(0) != int64_t(idx.size()) ||
        shape[0] != int64_t(idx.size()))
        throw invalid_error("scatter_pick: shape mismatch");
    auto out = std::make_shared<std::vector<double>>(size_t(shape[0] * shape[1]), 0.0);
    const double* p = v.data();
    for (size_t i = 0; i < idx.size(); ++i)
        (*out)[i * size_t(shape[1]) + size_t(idx[i])] += p[i];
    return Tensor(shape, std::move(out));
}

double l2_norm(const Tensor& a) {
    double acc = 0.0;
    const double* p = a.data();
    for (int64_t i = 0; i < a.numel(); ++i) acc += p[i] * p[i];
    return std::sqrt(acc);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(pa[i] - pb[i]));
    return m;
}

} // namespace kern
} // namespace dr
