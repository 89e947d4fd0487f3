#include "datarater/tape.hpp"

#include <unordered_map>

namespace dr {

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Neg: return "neg";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Tanh: return "tanh";
        case Op::Relu: return "relu";
        case Op::Sqrt: return "sqrt";
        case Op::AddScalar: return "add_scalar";
        case Op::MulScalar: return "mul_scalar";
        case Op::Matmul: return "matmul";
        case Op::Transpose: return "transpose";
        case Op::Reshape: return "reshape";
        case Op::Broadcast: return "broadcast";
        case Op::ReduceTo: return "reduce_to";
        case Op::SumAxis: return "sum_axis";
        case Op::SumAll: return "sum_all";
        case Op::Cumsum: return "cumsum";
        case Op::RevCumsum: return "rev_cumsum";
        case Op::Softmax: return "softmax";
        case Op::Logsumexp: return "logsumexp";
        case Op::GatherRows: return "gather_rows";
        case Op::ScatterRows: return "scatter_rows";
        case Op::Pick: return "pick";
        case Op::ScatterPick: return "scatter_pick";
        case Op::StopGrad: return "stop_grad";
    }
    return "?";
}

namespace {

Tensor eval_op(const TapeNode& n, const Tensor* a, const Tensor* b) {
    switch (n.op) {
        case Op::Leaf: return n.out;
        case Op::Add: return kern::add(*a, *b);
        case Op::Sub: return kern::sub(*a, *b);
        case Op::Mul: return kern::mul(*a, *b);
        case Op::Div: return kern::div(*a, *b);
        case Op::Neg: return kern::neg(*a);
        case Op::Exp: return kern::exp(*a);
        case Op::Log: return kern::log(*a);
        case Op::Tanh: return kern::tanh(*a);
        case Op::Relu: return kern::relu(*a);
        case Op::Sqrt: return kern::sqrt(*a);
        case Op::AddScalar: return kern::add_scalar(*a, n.scalar);
        case Op::MulScalar: return kern::mul_scalar(*a, n.scalar);
        case Op::Matmul: return kern::matmul(*a, *b);
        case Op::Transpose: return kern::transpose(*a);
        case Op::Reshape: return a->reshaped(n.dims);
        case Op::Broadcast: return kern::broadcast_to(*a, n.dims);
        case Op::ReduceTo: return kern::reduce_to(*a, n.dims);
        case Op::SumAxis: return kern::sum_axis(*a, n.axis);
        case Op::SumAll: return kern::sum_all(*a);
        case Op::Cumsum: return kern::cumsum(*a, n.axis);
        case Op::RevCumsum: return kern::rev_cumsum(*a, n.axis);
        case Op::Softmax: return kern::softmax(*a, n.axis);
        case Op::Logsumexp: return kern::logsumexp(*a, n.axis);
        case Op::GatherRows: return kern::gather_rows(*a, *n.index);
        case Op::ScatterRows: return kern::scatter_rows(*a, *n.index, n.dims[0]);
        case Op::Pick: return kern::pick(*a, *n.index);
        case Op::ScatterPick: return kern::scatter_pick(*a, *n.index, n.dims);
        case Op::StopGrad: return *a;
    }
    throw invalid_error("eval_op: unknown op");
}

} // namespace

Value Tape::push(TapeNode node) {
    if (node.op != Op::Leaf) {
        const Tensor* a = node.in[0] >= 0 ? &nodes_[size_t(node.in[0])].out : nullptr;
        const Tensor* b = node.in[1] >= 0 ? &nodes_[size_t(node.in[1])].out : nullptr;
        node.out = eval_op(node, a, b);
    }
    if (check_finite_ && !node.out.all_finite())
        throw numeric_error(std::string("non-finite output from op ") + op_name(node.op));
    nodes_.push_back(std::move(node));
    return Value{int32_t(nodes_.size() - 1), this};
}

Value Tape::leaf(Tensor t) {
    TapeNode n;
    n.op = Op::Leaf;
    n.out = std::move(t);
    return push(std::move(n));
}

Value make_unary(Tape& t, Op op, Value a) {
    TapeNode n;
    n.op = op;
    n.in[0] = a.id;
    return t.push(std::move(n));
}

Value make_binary(Tape& t, Op op, Value a, Value b) {
    TapeNode n;
    n.op = op;
    n.in[0] = a.id;
    n.in[1] = b.id;
    return t.push(std::move(n));
}

Value make_node(Tape& t, TapeNode node) { return t.push(std::move(node)); }

namespace {
Tape& tape_of(Value a) {
    if (!a.valid()) throw invalid_error("op on invalid value");
    return *a.tape;
}
Tape& tape_of(Value a, Value b) {
    if (!a.valid() || !b.valid() || a.tape != b.tape)
        throw invalid_error("op on values from different tapes");
    return *a.tape;
}
} // namespace

Value add(Value a, Value b) { return make_binary(tape_of(a, b), Op::Add, a, b); }
Value sub(Value a, Value b) { return make_binary(tape_of(a, b), Op::Sub, a, b); }
Value mul(Value a, Value b) { return make_binary(tape_of(a, b), Op::Mul, a, b); }
Value div(Value a, Value b) { return make_binary(tape_of(a, b), Op::Div, a, b); }
Value neg(Value a) { return make_unary(tape_of(a), Op::Neg, a); }
Value vexp(Value a) { return make_unary(tape_of(a), Op::Exp, a); }
Value vlog(Value a) { return make_unary(tape_of(a), Op::Log, a); }
Value vtanh(Value a) { return make_unary(tape_of(a), Op::Tanh, a); }
Value vsqrt(Value a) { return make_unary(tape_of(a), Op::Sqrt, a); }
Value matmul(Value a, Value b) { return make_binary(tape_of(a, b), Op::Matmul, a, b); }
Value transpose(Value a) { return make_unary(tape_of(a), Op::Transpose, a); }
Value sum_all(Value a) { return make_unary(tape_of(a), Op::SumAll, a); }
Value stop_grad(Value a) { return make_unary(tape_of(a), Op::StopGrad, a); }

Value vrelu(Value a) {
    Tape& t = tape_of(a);
    TapeNode n;
    n.op = Op::Relu;
    n.in[0] = a.id;
    // Active-branch mask saved for backward; its derivative is zero a.e.
    const Tensor& x = t.value(a);
    auto mask = std::make_shared<std::vector<double>>(size_t(x.numel()));
    for (int64_t i = 0; i < x.numel(); ++i) (*mask)[size_t(i)] = x.data()[i] > 0.0 ? 1.0 : 0.0;
    n.saved = Tensor(x.shape(), std::move(mask));
    return make_node(t, std::move(n));
}

Value add_scalar(Value a, double c) {
    TapeNode n;
    n.op = Op::AddScalar;
    n.in[0] = a.id;
    n.scalar = c;
    return make_node(tape_of(a), std::move(n));
}

Value mul_scalar(Value a, double c) {
    TapeNode n;
    n.op = Op::MulScalar;
    n.in[0] = a.id;
    n.scalar = c;
    return make_node(tape_of(a), std::move(n));
}

Value reshape(Value a, std::vector<int64_t> shape) {
    TapeNode n;
    n.op = Op::Reshape;
    n.in[0] = a.id;
    n.dims = std::move(shape);
    return make_node(tape_of(a), std::move(n));
}

Value broadcast_to(Value a, std::vector<int64_t> shape) {
    TapeNode n;
    n.op = Op::Broadcast;
    n.in[0] = a.id;
    n.dims = std::move(shape);
    return make_node(tape_of(a), std::move(n));
}

Value reduce_to(Value a, std::vector<int64_t> shape) {
    TapeNode n;
    n.op = Op::ReduceTo;
    n.in[0] = a.id;
    n.dims = std::move(shape);
    return make_node(tape_of(a), std::move(n));
}

Value sum_axis(Value a, int64_t axis) {
    TapeNode n;
    n.op = Op::SumAxis;
    n.in[0] = a.id;
    n.axis = axis;
    return make_node(tape_of(a), std::move(n));
}

Value vcumsum(Value a, int64_t axis) {
    TapeNode n;
    n.op = Op::Cumsum;
    n.in[0] = a.id;
    n.axis = axis;
    return make_node(tape_of(a), std::move(n));
}

Value vrev_cumsum(Value a, int64_t axis) {
    TapeNode n;
    n.op = Op::RevCumsum;
    n.in[0] = a.id;
    n.axis = axis;
    return make_node(tape_of(a), std::move(n));
}

Value softmax(Value a, int64_t axis) {
    TapeNode n;
    n.op = Op::Softmax;
    n.in[0] = a.id;
    n.axis = axis;
    return make_node(tape_of(a), std::move(n));
}

Value logsumexp(Value a, int64_t axis) {
    TapeNode n;
    n.op = Op::Logsumexp;
    n.in[0] = a.id;
    n.axis = axis;
    return make_node(tape_of(a), std::move(n));
}

Value gather_rows(Value table, std::shared_ptr<std::vector<int64_t>> idx) {
    TapeNode n;
    n.op = Op::GatherRows;
    n.in[0] = table.id;
    n.index = std::move(idx);
    return make_node(tape_of(table), std::move(n));
}

Value pick(Value x, std::shared_ptr<std::vector<int64_t>> idx) {
    TapeNode n;
    n.op = Op::Pick;
    n.in[0] = x.id;
    n.index = std::move(idx);
    return make_node(tape_of(x), std::move(n));
}

namespace {

Value scatter_rows_node(Tape& t, Value src, std::shared_ptr<std::vector<int64_t>> idx, int64_t rows) {
    TapeNode n;
    n.op = Op::ScatterRows;
    n.in[0] = src.id;
    n.index = std::move(idx);
    n.dims = {rows};
    return make_node(t, std::move(n));
}

Value scatter_pick_node(Tape& t, Value v, std::shared_ptr<std::vector<int64_t>> idx,
                        std::vector<int64_t> shape) {
    TapeNode n;
    n.op = Op::ScatterPick;
    n.in[0] = v.id;
    n.index = std::move(idx);
    n.dims = std::move(shape);
    return make_node(t, std::move(n));
}

} // namespace

std::vector<Value> Tape::grad(Value output, const std::vector<Value>& wrt,
                              const std::vector<Value>& stop_at) {
    if (!output.valid() || output.tape != this)
        throw invalid_error("grad: output not on this tape");
    if (value(output).numel() != 1)
        throw invalid_error("grad: output must be scalar");

    std::unordered_map<int32_t, Value> adj;
    adj[output.id] = constant(Tensor::scalar(1.0));

    std::vector<char> stop(nodes_.size(), 0);
    for (Value s : stop_at)
        if (s.valid()) stop[size_t(s.id)] = 1;

    auto accumulate = [&](int32_t id, Value contrib) {
        auto it = adj.find(id);
        if (it == adj.end())
            adj.emplace(id, contrib);
        else
            it->second = add(it->second, contrib);
    };

    for (int32_t id = output.id; id >= 0; --id) {
        auto it = adj.find(id);
        if (it == adj.end()) continue;
        Value g = it->second;
        if (stop[size_t(id)]) continue;

        // Copy what we need: pushing vjp nodes may reallocate nodes_.
        Op op = nodes_[size_t(id)].op;
        int32_t in0 = nodes_[size_t(id)].in[0];
        int32_t in1 = nodes_[size_t(id)].in[1];
        int64_t axis = nodes_[size_t(id)].axis;
        double scalar = nodes_[size_t(id)].scalar;
        std::vector<int64_t> dims = nodes_[size_t(id)].dims;
        auto index = nodes_[size_t(id)].index;
        Value y{id, this};
        Value a{in0, this};
        Value b{in1, this};

        switch (op) {
            case Op::Leaf:
            case Op::StopGrad:
                break;
            case Op::Add:
                accumulate(in0, g);
                accumulate(in1, g);
                break;
            case Op::Sub:
                accumulate(in0, g);
                accumulate(in1, neg(g));
                break;
            case Op::Mul:
                accumulate(in0, mul(g, b));
                accumulate(in1, mul(g, a));
                break;
            case Op::Div:
                accumulate(in0, div(g, b));
                accumulate(in1, neg(mul(g, div(y, b))));
                break;
            case Op::Neg:
                accumulate(in0, neg(g));
                break;
            case Op::Exp:
                accumulate(in0, mul(g, y));
                break;
            case Op::Log:
                accumulate(in0, div(g, a));
                break;
            case Op::Tanh:
                accumulate(in0, mul(g, add_scalar(neg(mul(y, y)), 1.0)));
                break;
            case Op::Relu:
                accumulate(in0, mul(g, constant(nodes_[size_t(id)].saved)));
                break;
            case Op::Sqrt:
                accumulate(in0, div(mul_scalar(g, 0.5), y));
                break;
            case Op::AddScalar:
                accumulate(in0, g);
                break;
            case Op::MulScalar:
                accumulate(in0, mul_scalar(g, scalar));
                break;
            case Op::Matmul:
                accumulate(in0, matmul(g, transpose(b)));
                accumulate(in1, matmul(transpose(a), g));
                break;
            case Op::Transpose:
                accumulate(in0, transpose(g));
                break;
            case Op::Reshape:
                accumulate(in0, reshape(g, value(a).shape()));
                break;
            case Op::Broadcast:
                accumulate(in0, reduce_to(g, value(a).shape()));
                break;
            case Op::ReduceTo:
                accumulate(in0, broadcast_to(g, value(a).shape()));
                break;
            case Op::SumAxis:
                accumulate(in0, broadcast_to(g, value(a).shape()));
                break;
            case Op::SumAll:
                accumulate(in0, broadcast_to(g, value(a).shape()));
                break;
            case Op::Cumsum:
                accumulate(in0, vrev_cumsum(g, axis));
                break;
            case Op::RevCumsum:
                accumulate(in0, vcumsum(g, axis));
                break;
            case Op::Softmax: {
                Value yg = mul(y, g);
                Value s = sum_axis(yg, axis);
                accumulate(in0, mul(y, sub(g, broadcast_to(s, value(a).shape()))));
                break;
            }
            case Op::Logsumexp: {
                Value p = vexp(sub(a, broadcast_to(y, value(a).shape())));
                accumulate(in0, mul(broadcast_to(g, value(a).shape()), p));
                break;
            }
            case Op::GatherRows:
                accumulate(in0, scatter_rows_node(*this, g, index, value(a).dim(0)));
                break;
            case Op::ScatterRows:
                accumulate(in0, gather_rows(g, index));
                break;
            case Op::Pick:
                accumulate(in0, scatter_pick_node(*this, g, index, value(a).shape()));
                break;
            case Op::ScatterPick:
                accumulate(in0, pick(g, index));
                break;
        }
    }

    std::vector<Value> out;
    out.reserve(wrt.size());
    for (Value w : wrt) {
        if (!w.valid() || w.tape != this)
            throw invalid_error("grad: wrt value not on this tape");
        auto it = adj.find(w.id);
        if (it != adj.end() && w.id != output.id)
            out.push_back(it->second);
        else if (w.id == output.id)
            out.push_back(adj.at(w.id));
        else
            out.push_back(constant(Tensor::zeros(value(w).shape())));
    }
    return out;
}

std::vector<Value> Tape::grad(const GradRequest& req) {
    if (req.order != 1 && req.order != 2)
        throw invalid_error("grad: order must be 1 or 2");
    for (Value w : req.wrt)
        if (!w.valid() || w.tape != this || !is_leaf(w))
            throw invalid_error("grad: wrt must be leaves on this tape");
    return grad(req.output, req.wrt);
}

bool Tape::replay_verify() const {
    for (const TapeNode& n : nodes_) {
        if (n.op == Op::Leaf) continue;
        const Tensor* a = n.in[0] >= 0 ? &nodes_[size_t(n.in[0])].out : nullptr;
        const Tensor* b = n.in[1] >= 0 ? &nodes_[size_t(n.in[1])].out : nullptr;
        Tensor redo = eval_op(n, a, b);
        if (!redo.same_shape(n.out)) return false;
        for (int64_t i = 0; i < redo.numel(); ++i)
            if (redo.data()[i] != n.out.data()[i] &&
                !(std::isnan(redo.data()[i]) && std::isnan(n.out.data()[i])))
                return false;
    }
    return true;
}

double check_grad(const std::function<Value(Tape&, Value)>& f, const Tensor& x, double eps) {
    Tensor analytic;
    {
        Tape t;
        Value leaf = t.leaf(x);
        Value out = f(t, leaf);
        GradRequest req{out, {leaf}, 1};
        analytic = t.value(t.grad(req)[0]);
    }
    auto eval_at = [&](const Tensor& pt) {
        Tape t;
        Value out = f(t, t.leaf(pt));
        double v = t.value(out).item();
        if (!std::isfinite(v)) throw numeric_error("check_grad: non-finite function value");
        return v;
    };
    double max_rel = 0.0;
    std::vector<double> coords = x.vec();
    for (size_t i = 0; i < coords.size(); ++i) {
        std::vector<double> plus = coords, minus = coords;
        plus[i] += eps;
        minus[i] -= eps;
        double fd = (eval_at(Tensor::from(x.shape(), plus)) -
                     eval_at(Tensor::from(x.shape(), minus))) /
                    (2.0 * eps);
        double rel = std::abs(analytic.at(int64_t(i)) - fd) / (std::abs(fd) + 1e-12);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

} // namespace dr
