#include "uvmap/tape.hpp"

#include <cmath>
#include <utility>

namespace uvmap {
namespace {

void check_finite(const Matrix& m, const char* opname) {
    const double* d = m.data();
    for (std::size_t i = 0; i < m.size(); ++i)
        if (!std::isfinite(d[i]))
            throw NumericError(std::string(opname) + ": non-finite value produced");
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* opname) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ArgumentError(std::string(opname) + ": shape mismatch (" +
                            std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                            " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()) + ")");
}

}  // namespace

// ---------------------------------------------------------------------------
// node plumbing
// ---------------------------------------------------------------------------

Var Tape::push(Node n, const char* opname) {
    check_finite(n.value, opname);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

const Tape::Node& Tape::node(Var v, const char* opname) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
        throw ArgumentError(std::string(opname) + ": invalid var handle");
    return nodes_[v.id];
}

Matrix& Tape::grad_of(int id) {
    Matrix& g = grads_[id];
    const Matrix& v = nodes_[id].value;
    if (g.rows() != v.rows() || g.cols() != v.cols()) g.resize(v.rows(), v.cols());
    return g;
}

const Matrix& Tape::val(Var v) const { return node(v, "val").value; }

double Tape::scalar(Var v) const {
    const Matrix& m = node(v, "scalar").value;
    if (m.rows() != 1 || m.cols() != 1) throw ArgumentError("scalar: node is not 1x1");
    return m(0, 0);
}

void Tape::clear() {
    nodes_.clear();
    grads_.clear();
}

// ---------------------------------------------------------------------------
// leaves
// ---------------------------------------------------------------------------

Var Tape::constant(Matrix value) {
    Node n;
    n.op = Op::kConstant;
    n.value = std::move(value);
    return push(std::move(n), "constant");
}

Var Tape::param(ParamTensor& p) {
    if (p.grad.rows() != p.data.rows() || p.grad.cols() != p.data.cols())
        p.grad.resize(p.data.rows(), p.data.cols());
    Node n;
    n.op = Op::kParam;
    n.value = p.data;  // copy keeps the tape self-contained across optimizer steps
    n.p = &p;
    n.needs_grad = true;
    return push(std::move(n), "param");
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Var Tape::affine(Var xv, Var wv, Var bv) {
    const Node& x = node(xv, "affine");
    const Node& w = node(wv, "affine");
    const Node& b = node(bv, "affine");
    if (x.value.cols() != w.value.rows())
        throw ArgumentError("affine: input width " + std::to_string(x.value.cols()) +
                            " does not match weight rows " + std::to_string(w.value.rows()));
    if (b.value.rows() != 1 || b.value.cols() != w.value.cols())
        throw ArgumentError("affine: bias must be 1x" + std::to_string(w.value.cols()));
    Node n;
    n.op = Op::kAffine;
    uvmap::matmul(x.value, false, w.value, false, n.value);
    for (std::size_t r = 0; r < n.value.rows(); ++r) {
        double* row = n.value.row(r);
        const double* bias = b.value.data();
        for (std::size_t c = 0; c < n.value.cols(); ++c) row[c] += bias[c];
    }
    n.a = xv.id;
    n.b = wv.id;
    n.c = bv.id;
    n.needs_grad = x.needs_grad || w.needs_grad || b.needs_grad;
    return push(std::move(n), "affine");
}

Var Tape::matmul(Var xv, Var wv) {
    const Node& x = node(xv, "matmul");
    const Node& w = node(wv, "matmul");
    Node n;
    n.op = Op::kMatMul;
    uvmap::matmul(x.value, false, w.value, false, n.value);
    n.a = xv.id;
    n.b = wv.id;
    n.needs_grad = x.needs_grad || w.needs_grad;
    return push(std::move(n), "matmul");
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------

Var Tape::leaky_relu(Var xv, double negative_slope) {
    const Node& x = node(xv, "leaky_relu");
    Node n;
    n.op = Op::kLeakyRelu;
    n.value = x.value;
    double* d = n.value.data();
    for (std::size_t i = 0; i < n.value.size(); ++i)
        if (d[i] < 0.0) d[i] *= negative_slope;
    n.a = xv.id;
    n.attr = negative_slope;
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "leaky_relu");
}

Var Tape::leaky_mask(Var prev, Var tv, double negative_slope) {
    const Node& pre = node(prev, "leaky_mask");
    const Node& t = node(tv, "leaky_mask");
    require_same_shape(pre.value, t.value, "leaky_mask");
    Node n;
    n.op = Op::kLeakyMask;
    n.value = t.value;
    double* d = n.value.data();
    const double* p = pre.value.data();
    for (std::size_t i = 0; i < n.value.size(); ++i)
        if (p[i] < 0.0) d[i] *= negative_slope;
    n.a = prev.id;
    n.b = tv.id;
    n.attr = negative_slope;
    n.needs_grad = t.needs_grad;
    return push(std::move(n), "leaky_mask");
}

Var Tape::softmax_rows(Var xv) {
    const Node& x = node(xv, "softmax_rows");
    Node n;
    n.op = Op::kSoftmaxRows;
    n.value = x.value;
    for (std::size_t r = 0; r < n.value.rows(); ++r) {
        double* row = n.value.row(r);
        double mx = row[0];
        for (std::size_t c = 1; c < n.value.cols(); ++c) mx = std::max(mx, row[c]);
        double s = 0.0;
        for (std::size_t c = 0; c < n.value.cols(); ++c) {
            row[c] = std::exp(row[c] - mx);
            s += row[c];
        }
        for (std::size_t c = 0; c < n.value.cols(); ++c) row[c] /= s;
    }
    n.a = xv.id;
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "softmax_rows");
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Var Tape::add(Var av, Var bv) {
    const Node& a = node(av, "add");
    const Node& b = node(bv, "add");
    require_same_shape(a.value, b.value, "add");
    Node n;
    n.op = Op::kAdd;
    n.value = a.value;
    const double* src = b.value.data();
    double* d = n.value.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) d[i] += src[i];
    n.a = av.id;
    n.b = bv.id;
    n.needs_grad = a.needs_grad || b.needs_grad;
    return push(std::move(n), "add");
}

Var Tape::sub(Var av, Var bv) {
    const Node& a = node(av, "sub");
    const Node& b = node(bv, "sub");
    require_same_shape(a.value, b.value, "sub");
    Node n;
    n.op = Op::kSub;
    n.value = a.value;
    const double* src = b.value.data();
    double* d = n.value.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) d[i] -= src[i];
    n.a = av.id;
    n.b = bv.id;
    n.needs_grad = a.needs_grad || b.needs_grad;
    return push(std::move(n), "sub");
}

Var Tape::mul(Var av, Var bv) {
    const Node& a = node(av, "mul");
    const Node& b = node(bv, "mul");
    require_same_shape(a.value, b.value, "mul");
    Node n;
    n.op = Op::kMul;
    n.value = a.value;
    const double* src = b.value.data();
    double* d = n.value.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) d[i] *= src[i];
    n.a = av.id;
    n.b = bv.id;
    n.needs_grad = a.needs_grad || b.needs_grad;
    return push(std::move(n), "mul");
}

Var Tape::scale(Var xv, double c) {
    const Node& x = node(xv, "scale");
    Node n;
    n.op = Op::kScale;
    n.value = x.value;
    double* d = n.value.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) d[i] *= c;
    n.a = xv.id;
    n.attr = c;
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "scale");
}

Var Tape::shift(Var xv, double c) {
    const Node& x = node(xv, "shift");
    Node n;
    n.op = Op::kShift;
    n.value = x.value;
    double* d = n.value.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) d[i] += c;
    n.a = xv.id;
    n.attr = c;
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "shift");
}

Var Tape::square(Var xv) {
    const Node& x = node(xv, "square");
    Node n;
    n.op = Op::kSquare;
    n.value = x.value;
    double* d = n.value.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) d[i] *= d[i];
    n.a = xv.id;
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "square");
}

Var Tape::abs(Var xv) {
    const Node& x = node(xv, "abs");
    Node n;
    n.op = Op::kAbs;
    n.value = x.value;
    double* d = n.value.data();
    for (std::size_t i = 0; i < n.value.size(); ++i) d[i] = std::fabs(d[i]);
    n.a = xv.id;
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "abs");
}

Var Tape::sqrt0(Var xv) {
    const Node& x = node(xv, "sqrt0");
    Node n;
    n.op = Op::kSqrt0;
    n.value = x.value;
    double* d = n.value.data();
    for (std::size_t i = 0; i < n.value.size(); ++i)
        d[i] = d[i] > 0.0 ? std::sqrt(d[i]) : 0.0;
    n.a = xv.id;
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "sqrt0");
}

Var Tape::acos_clamped(Var xv, double guard) {
    const Node& x = node(xv, "acos_clamped");
    Node n;
    n.op = Op::kAcosClamped;
    n.value = x.value;
    const double lo = -1.0 + guard, hi = 1.0 - guard;
    double* d = n.value.data();
    for (std::size_t i = 0; i < n.value.size(); ++i)
        d[i] = std::acos(std::min(hi, std::max(lo, d[i])));
    n.a = xv.id;
    n.attr = guard;
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "acos_clamped");
}

// ---------------------------------------------------------------------------
// shape
// ---------------------------------------------------------------------------

Var Tape::concat_cols(Var av, Var bv) {
    const Node& a = node(av, "concat_cols");
    const Node& b = node(bv, "concat_cols");
    if (a.value.rows() != b.value.rows())
        throw ArgumentError("concat_cols: row counts differ");
    Node n;
    n.op = Op::kConcatCols;
    n.value.resize(a.value.rows(), a.value.cols() + b.value.cols());
    for (std::size_t r = 0; r < n.value.rows(); ++r) {
        double* dst = n.value.row(r);
        const double* ra = a.value.row(r);
        const double* rb = b.value.row(r);
        std::copy(ra, ra + a.value.cols(), dst);
        std::copy(rb, rb + b.value.cols(), dst + a.value.cols());
    }
    n.a = av.id;
    n.b = bv.id;
    n.i0 = a.value.cols();
    n.needs_grad = a.needs_grad || b.needs_grad;
    return push(std::move(n), "concat_cols");
}

Var Tape::concat_rows(Var av, Var bv) {
    const Node& a = node(av, "concat_rows");
    const Node& b = node(bv, "concat_rows");
    if (a.value.cols() != b.value.cols())
        throw ArgumentError("concat_rows: column counts differ");
    Node n;
    n.op = Op::kConcatRows;
    n.value.resize(a.value.rows() + b.value.rows(), a.value.cols());
    std::copy(a.value.data(), a.value.data() + a.value.size(), n.value.data());
    std::copy(b.value.data(), b.value.data() + b.value.size(),
              n.value.data() + a.value.size());
    n.a = av.id;
    n.b = bv.id;
    n.i0 = a.value.rows();
    n.needs_grad = a.needs_grad || b.needs_grad;
    return push(std::move(n), "concat_rows");
}

Var Tape::slice_cols(Var xv, std::size_t c0, std::size_t c1) {
    const Node& x = node(xv, "slice_cols");
    if (c0 >= c1 || c1 > x.value.cols())
        throw ArgumentError("slice_cols: bad column range");
    Node n;
    n.op = Op::kSliceCols;
    n.value.resize(x.value.rows(), c1 - c0);
    for (std::size_t r = 0; r < n.value.rows(); ++r) {
        const double* src = x.value.row(r) + c0;
        std::copy(src, src + (c1 - c0), n.value.row(r));
    }
    n.a = xv.id;
    n.i0 = c0;
    n.i1 = c1;
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "slice_cols");
}

Var Tape::slice_rows(Var xv, std::size_t r0, std::size_t r1) {
    const Node& x = node(xv, "slice_rows");
    if (r0 >= r1 || r1 > x.value.rows())
        throw ArgumentError("slice_rows: bad row range");
    Node n;
    n.op = Op::kSliceRows;
    n.value.resize(r1 - r0, x.value.cols());
    std::copy(x.value.row(r0), x.value.row(r0) + n.value.size(), n.value.data());
    n.a = xv.id;
    n.i0 = r0;
    n.i1 = r1;
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "slice_rows");
}

Var Tape::gather_rows(Var xv, std::vector<std::size_t> idx) {
    const Node& x = node(xv, "gather_rows");
    for (std::size_t i : idx)
        if (i >= x.value.rows()) throw ArgumentError("gather_rows: index out of range");
    Node n;
    n.op = Op::kGatherRows;
    n.value.resize(idx.size(), x.value.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const double* src = x.value.row(idx[r]);
        std::copy(src, src + x.value.cols(), n.value.row(r));
    }
    n.a = xv.id;
    n.idx = std::move(idx);
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "gather_rows");
}

// ---------------------------------------------------------------------------
// rows
// ---------------------------------------------------------------------------

Var Tape::normalize_rows(Var xv, ZeroRowPolicy policy) {
    const Node& x = node(xv, "normalize_rows");
    if (policy == ZeroRowPolicy::kUnitZ && x.value.cols() != 3)
        throw ArgumentError("normalize_rows: unit-z fallback needs 3 columns");
    Node n;
    n.op = Op::kNormalizeRows;
    n.value = x.value;
    n.aux.resize(x.value.rows(), 1);
    for (std::size_t r = 0; r < n.value.rows(); ++r) {
        double* row = n.value.row(r);
        double s = 0.0;
        for (std::size_t c = 0; c < n.value.cols(); ++c) s += row[c] * row[c];
        const double nrm = std::sqrt(s);
        n.aux(r, 0) = nrm;
        if (nrm < 1e-12) {
            for (std::size_t c = 0; c < n.value.cols(); ++c) row[c] = 0.0;
            if (policy == ZeroRowPolicy::kUnitZ) row[2] = 1.0;
        } else {
            for (std::size_t c = 0; c < n.value.cols(); ++c) row[c] /= nrm;
        }
    }
    n.a = xv.id;
    n.i0 = static_cast<std::size_t>(policy);
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "normalize_rows");
}

Var Tape::row_sum(Var xv) {
    const Node& x = node(xv, "row_sum");
    Node n;
    n.op = Op::kRowSum;
    n.value.resize(x.value.rows(), 1);
    for (std::size_t r = 0; r < x.value.rows(); ++r) {
        const double* row = x.value.row(r);
        double s = 0.0;
        for (std::size_t c = 0; c < x.value.cols(); ++c) s += row[c];
        n.value(r, 0) = s;
    }
    n.a = xv.id;
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "row_sum");
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

Var Tape::sum(Var xv) {
    const Node& x = node(xv, "sum");
    Node n;
    n.op = Op::kSum;
    n.value.resize(1, 1);
    double s = 0.0;
    const double* d = x.value.data();
    for (std::size_t i = 0; i < x.value.size(); ++i) s += d[i];
    n.value(0, 0) = s;
    n.a = xv.id;
    n.needs_grad = x.needs_grad;
    return push(std::move(n), "sum");
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void Tape::backward(Var loss) {
    const Node& top = node(loss, "backward");
    if (top.value.rows() != 1 || top.value.cols() != 1)
        throw ArgumentError("backward: loss must be a 1x1 scalar");
    grads_.resize(nodes_.size());
    grad_of(loss.id)(0, 0) += 1.0;

    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.needs_grad) continue;
        Matrix& g = grads_[i];
        if (g.size() == 0) continue;  // not reachable from loss
        check_finite(g, "backward");

        switch (n.op) {
            case Op::kConstant:
                break;
            case Op::kParam: {
                double* dst = n.p->grad.data();
                const double* src = g.data();
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += src[j];
                break;
            }
            case Op::kAffine:
            case Op::kMatMul: {
                if (needs(Var{n.a}))
                    uvmap::matmul(g, false, nodes_[n.b].value, true, grad_of(n.a), 1.0, 1.0);
                if (needs(Var{n.b}))
                    uvmap::matmul(nodes_[n.a].value, true, g, false, grad_of(n.b), 1.0, 1.0);
                if (n.op == Op::kAffine && needs(Var{n.c})) {
                    Matrix& gb = grad_of(n.c);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                        const double* row = g.row(r);
                        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += row[c];
                    }
                }
                break;
            }
            case Op::kLeakyRelu: {
                Matrix& gx = grad_of(n.a);
                const double* x = nodes_[n.a].value.data();
                const double* gy = g.data();
                double* dst = gx.data();
                for (std::size_t j = 0; j < g.size(); ++j)
                    dst[j] += x[j] < 0.0 ? n.attr * gy[j] : gy[j];
                break;
            }
            case Op::kLeakyMask: {
                if (!needs(Var{n.b})) break;
                Matrix& gt = grad_of(n.b);
                const double* pre = nodes_[n.a].value.data();
                const double* gy = g.data();
                double* dst = gt.data();
                for (std::size_t j = 0; j < g.size(); ++j)
                    dst[j] += pre[j] < 0.0 ? n.attr * gy[j] : gy[j];
                break;
            }
            case Op::kSoftmaxRows: {
                Matrix& gx = grad_of(n.a);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    const double* y = n.value.row(r);
                    const double* gy = g.row(r);
                    double dot = 0.0;
                    for (std::size_t c = 0; c < g.cols(); ++c) dot += gy[c] * y[c];
                    double* dst = gx.row(r);
                    for (std::size_t c = 0; c < g.cols(); ++c)
                        dst[c] += y[c] * (gy[c] - dot);
                }
                break;
            }
            case Op::kAdd: {
                const double* gy = g.data();
                if (needs(Var{n.a})) {
                    double* dst = grad_of(n.a).data();
                    for (std::size_t j = 0; j < g.size(); ++j) dst[j] += gy[j];
                }
                if (needs(Var{n.b})) {
                    double* dst = grad_of(n.b).data();
                    for (std::size_t j = 0; j < g.size(); ++j) dst[j] += gy[j];
                }
                break;
            }
            case Op::kSub: {
                const double* gy = g.data();
                if (needs(Var{n.a})) {
                    double* dst = grad_of(n.a).data();
                    for (std::size_t j = 0; j < g.size(); ++j) dst[j] += gy[j];
                }
                if (needs(Var{n.b})) {
                    double* dst = grad_of(n.b).data();
                    for (std::size_t j = 0; j < g.size(); ++j) dst[j] -= gy[j];
                }
                break;
            }
            case Op::kMul: {
                const double* gy = g.data();
                if (needs(Var{n.a})) {
                    double* dst = grad_of(n.a).data();
                    const double* other = nodes_[n.b].value.data();
                    for (std::size_t j = 0; j < g.size(); ++j) dst[j] += gy[j] * other[j];
                }
                if (needs(Var{n.b})) {
                    double* dst = grad_of(n.b).data();
                    const double* other = nodes_[n.a].value.data();
                    for (std::size_t j = 0; j < g.size(); ++j) dst[j] += gy[j] * other[j];
                }
                break;
            }
            case Op::kScale: {
                double* dst = grad_of(n.a).data();
                const double* gy = g.data();
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += n.attr * gy[j];
                break;
            }
            case Op::kShift: {
                double* dst = grad_of(n.a).data();
                const double* gy = g.data();
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += gy[j];
                break;
            }
            case Op::kSquare: {
                double* dst = grad_of(n.a).data();
                const double* x = nodes_[n.a].value.data();
                const double* gy = g.data();
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += 2.0 * x[j] * gy[j];
                break;
            }
            case Op::kAbs: {
                double* dst = grad_of(n.a).data();
                const double* x = nodes_[n.a].value.data();
                const double* gy = g.data();
                for (std::size_t j = 0; j < g.size(); ++j) {
                    if (x[j] > 0.0)
                        dst[j] += gy[j];
                    else if (x[j] < 0.0)
                        dst[j] -= gy[j];
                }
                break;
            }
            case Op::kSqrt0: {
                double* dst = grad_of(n.a).data();
                const double* y = n.value.data();
                const double* gy = g.data();
                for (std::size_t j = 0; j < g.size(); ++j)
                    if (y[j] > 0.0) dst[j] += gy[j] / (2.0 * y[j]);
                break;
            }
            case Op::kAcosClamped: {
                double* dst = grad_of(n.a).data();
                const double* x = nodes_[n.a].value.data();
                const double* gy = g.data();
                const double lo = -1.0 + n.attr, hi = 1.0 - n.attr;
                for (std::size_t j = 0; j < g.size(); ++j)
                    if (x[j] > lo && x[j] < hi)
                        dst[j] -= gy[j] / std::sqrt(1.0 - x[j] * x[j]);
                break;
            }
            case Op::kConcatCols: {
                const std::size_t split = n.i0;
                if (needs(Var{n.a})) {
                    Matrix& ga = grad_of(n.a);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                        const double* gy = g.row(r);
                        double* dst = ga.row(r);
                        for (std::size_t c = 0; c < split; ++c) dst[c] += gy[c];
                    }
                }
                if (needs(Var{n.b})) {
                    Matrix& gb = grad_of(n.b);
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                        const double* gy = g.row(r) + split;
                        double* dst = gb.row(r);
                        for (std::size_t c = 0; c < g.cols() - split; ++c) dst[c] += gy[c];
                    }
                }
                break;
            }
            case Op::kConcatRows: {
                const std::size_t split = n.i0;
                if (needs(Var{n.a})) {
                    Matrix& ga = grad_of(n.a);
                    const double* gy = g.data();
                    double* dst = ga.data();
                    for (std::size_t j = 0; j < ga.size(); ++j) dst[j] += gy[j];
                }
                if (needs(Var{n.b})) {
                    Matrix& gb = grad_of(n.b);
                    const double* gy = g.data() + split * g.cols();
                    double* dst = gb.data();
                    for (std::size_t j = 0; j < gb.size(); ++j) dst[j] += gy[j];
                }
                break;
            }
            case Op::kSliceCols: {
                Matrix& gx = grad_of(n.a);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    const double* gy = g.row(r);
                    double* dst = gx.row(r) + n.i0;
                    for (std::size_t c = 0; c < g.cols(); ++c) dst[c] += gy[c];
                }
                break;
            }
            case Op::kSliceRows: {
                Matrix& gx = grad_of(n.a);
                const double* gy = g.data();
                double* dst = gx.row(n.i0);
                for (std::size_t j = 0; j < g.size(); ++j) dst[j] += gy[j];
                break;
            }
            case Op::kGatherRows: {
                Matrix& gx = grad_of(n.a);
                for (std::size_t r = 0; r < n.idx.size(); ++r) {
                    const double* gy = g.row(r);
                    double* dst = gx.row(n.idx[r]);
                    for (std::size_t c = 0; c < g.cols(); ++c) dst[c] += gy[c];
                }
                break;
            }
            case Op::kNormalizeRows: {
                Matrix& gx = grad_of(n.a);
                for (std::size_t r = 0; r < g.rows(); ++r) {
                    const double nrm = n.aux(r, 0);
                    if (nrm < 1e-12) continue;  // fallback rows: zero gradient
                    const double* y = n.value.row(r);
                    const double* gy = g.row(r);
                    double dot = 0.0;
                    for (std::size_t c = 0; c < g.cols(); ++c) dot += gy[c] * y[c];
                    double* dst = gx.row(r);
                    for (std::size_t c = 0; c < g.cols(); ++c)
                        dst[c] += (gy[c] - dot * y[c]) / nrm;
                }
                break;
            }
            case Op::kRowSum: {
                Matrix& gx = grad_of(n.a);
                for (std::size_t r = 0; r < gx.rows(); ++r) {
                    const double gy = g(r, 0);
                    double* dst = gx.row(r);
                    for (std::size_t c = 0; c < gx.cols(); ++c) dst[c] += gy;
                }
                break;
            }
            case Op::kSum: {
                Matrix& gx = grad_of(n.a);
                const double gy = g(0, 0);
                double* dst = gx.data();
                for (std::size_t j = 0; j < gx.size(); ++j) dst[j] += gy;
                break;
            }
        }
    }

    for (const Node& n : nodes_)
        if (n.op == Op::kParam) check_finite(n.p->grad, "backward(param grad)");
    grads_.clear();
}

}  // namespace uvmap
