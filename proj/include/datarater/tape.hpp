#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "datarater/tensor.hpp"

namespace dr {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
struct Value {
    int32_t id = -1;
    Tape* tape = nullptr;

    bool valid() const { return tape != nullptr && id >= 0; }
};

enum class Op : uint8_t {
    Leaf,
    Add, Sub, Mul, Div, Neg,
    Exp, Log, Tanh, Relu, Sqrt,
    AddScalar, MulScalar,
    Matmul, Transpose, Reshape, Broadcast, ReduceTo,
    SumAxis, SumAll, Cumsum, RevCumsum,
    Softmax, Logsumexp,
    GatherRows, ScatterRows, Pick, ScatterPick,
    StopGrad,
};

const char* op_name(Op op);

// One recorded operation: kind, input node ids, attributes needed to replay
// the forward and to build the backward, and the output tensor. Nodes are
// appended in topological order and never mutated, so replaying forward from
// the leaves reproduces every output bit-identically.
struct TapeNode {
    Op op = Op::Leaf;
    std::array<int32_t, 2> in{-1, -1};
    Tensor out;
    int64_t axis = -1;
    double scalar = 0.0;
    std::vector<int64_t> dims;                     // reshape/broadcast/scatter target
    std::shared_ptr<std::vector<int64_t>> index;   // gather/pick indices
    Tensor saved;                                  // constants saved for backward (e.g. relu mask)
};

// Gradient query: scalar output, the requested leaves, and whether the
// returned gradients must themselves be differentiable. Gradients here are
// always built from tape ops, so order=2 is the same code path; the field
// documents intent and is validated.
struct GradRequest {
    Value output;
    std::vector<Value> wrt;
    int order = 1;
};

// Reverse-mode tape. Ops execute eagerly as they are recorded; backward
// passes append new ops, which makes gradients differentiable and enables
// meta-gradients through unrolled optimizer updates. Single-writer: a tape
// must not be mutated from two threads, but independent tapes may run
// concurrently.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Value leaf(Tensor t);
    Value constant(Tensor t) { return leaf(std::move(t)); }
    Value constant(double v) { return leaf(Tensor::scalar(v)); }

    const Tensor& value(Value v) const { return nodes_[size_t(v.id)].out; }
    const TapeNode& node(int32_t id) const { return nodes_[size_t(id)]; }
    size_t size() const { return nodes_.size(); }
    bool is_leaf(Value v) const { return nodes_[size_t(v.id)].op == Op::Leaf; }

    // When enabled (default), every committed op is scanned for NaN/Inf and
    // a numeric error is raised instead of storing the value.
    void set_check_finite(bool on) { check_finite_ = on; }

    // Core reverse sweep. `stop_at` nodes receive adjoints but do not
    // propagate further; disconnected nodes get zero gradients.
    std::vector<Value> grad(Value output, const std::vector<Value>& wrt,
                            const std::vector<Value>& stop_at = {});
    std::vector<Value> grad(const GradRequest& req);

    // Re-executes every recorded op from its stored inputs and verifies the
    // outputs match bit for bit.
    bool replay_verify() const;

    friend Value make_unary(Tape& t, Op op, Value a);
    friend Value make_binary(Tape& t, Op op, Value a, Value b);
    friend Value make_node(Tape& t, TapeNode node);

private:
    Value push(TapeNode node);
    std::vector<TapeNode> nodes_;
    bool check_finite_ = true;
};

// --- op builders ------------------------------------------------------------
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value div(Value a, Value b);
Value neg(Value a);
Value vexp(Value a);
Value vlog(Value a);
Value vtanh(Value a);
Value vrelu(Value a);
Value vsqrt(Value a);
Value add_scalar(Value a, double c);
Value mul_scalar(Value a, double c);
Value matmul(Value a, Value b);
Value transpose(Value a);
Value reshape(Value a, std::vector<int64_t> shape);
Value broadcast_to(Value a, std::vector<int64_t> shape);
Value reduce_to(Value a, std::vector<int64_t> shape);
Value sum_axis(Value a, int64_t axis);   // keeps the axis as size 1
Value sum_all(Value a);
Value vcumsum(Value a, int64_t axis);
Value vrev_cumsum(Value a, int64_t axis);
Value softmax(Value a, int64_t axis);
Value logsumexp(Value a, int64_t axis);  // keeps the axis as size 1
Value gather_rows(Value table, std::shared_ptr<std::vector<int64_t>> idx);
Value pick(Value x, std::shared_ptr<std::vector<int64_t>> idx);
Value stop_grad(Value a);

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(Value a, Value b) { return mul(a, b); }
inline Value operator/(Value a, Value b) { return div(a, b); }
inline Value operator-(Value a) { return neg(a); }
inline Value operator*(Value a, double c) { return mul_scalar(a, c); }
inline Value operator*(double c, Value a) { return mul_scalar(a, c); }
inline Value operator+(Value a, double c) { return add_scalar(a, c); }

// Max relative error between the tape gradient of `f` and central finite
// differences with step `eps`, maximized over coordinates of x:
//   |analytic - central| / (|central| + 1e-12).
// `f` must build a scalar from a fresh tape and the given leaf.
double check_grad(const std::function<Value(Tape&, Value)>& f, const Tensor& x, double eps);

} // namespace dr
