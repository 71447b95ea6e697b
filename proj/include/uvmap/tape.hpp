#pragma once
#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "uvmap/matrix.hpp"

namespace uvmap {

// ---------------------------------------------------------------------------
// ParamTensor — trainable weight with gradient accumulator
// ---------------------------------------------------------------------------

struct ParamTensor {
    std::string name;
    Matrix data;
    Matrix grad;  // same shape, zero-initialized; backward() accumulates

    ParamTensor() = default;
    ParamTensor(std::string n, std::size_t rows, std::size_t cols)
        : name(std::move(n)), data(rows, cols), grad(rows, cols) {}

    void zero_grad() { grad.fill(0.0); }
};

// ---------------------------------------------------------------------------
// Tape — eager reverse-mode autodiff over Matrix values
// ---------------------------------------------------------------------------
//
// Every op computes its value immediately, records a node, and returns a
// handle. backward(loss) sweeps the recorded nodes in reverse; parameter
// gradients accumulate into ParamTensor::grad. Values are checked for
// NaN/Inf after every op (and every gradient during the sweep) so numeric
// failures surface at the op that produced them, not three losses later.

struct Var {
    int id = -1;
    [[nodiscard]] bool valid() const { return id >= 0; }
};

class Tape {
public:
    // ----- leaves -----
    Var constant(Matrix value);              // no gradient flows
    Var param(ParamTensor& p);               // gradient accumulates into p.grad

    // ----- linear algebra -----
    Var affine(Var x, Var w, Var b);         // x·W + 1·bᵀ  (b is 1×out)
    Var matmul(Var x, Var w);                // x·W

    // ----- activations -----
    Var leaky_relu(Var x, double negative_slope);
    // mask(pre) ⊙ t where mask = 1 for pre ≥ 0 else slope. Used to push
    // forward-mode tangents through activations; no gradient flows to pre
    // (the mask is locally constant).
    Var leaky_mask(Var pre, Var t, double negative_slope);
    Var softmax_rows(Var x);

    // ----- elementwise -----
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var x, double c);              // c·x
    Var shift(Var x, double c);              // x + c
    Var square(Var x);
    Var abs(Var x);                          // subgradient 0 at 0
    // √max(x,0) with subgradient 0 where the value is 0 (valid for the
    // norm-like quantities this kernel takes roots of, all convex in x).
    Var sqrt0(Var x);
    // acos(clamp(x, -1+guard, 1-guard)); gradient 0 outside the clamp window
    Var acos_clamped(Var x, double guard = 1e-12);

    // ----- shape -----
    Var concat_cols(Var a, Var b);
    Var concat_rows(Var a, Var b);
    Var slice_cols(Var x, std::size_t c0, std::size_t c1);  // [c0, c1)
    Var slice_rows(Var x, std::size_t r0, std::size_t r1);  // [r0, r1)
    Var gather_rows(Var x, std::vector<std::size_t> idx);

    // ----- rows -----
    enum class ZeroRowPolicy { kZero, kUnitZ };
    // L2-normalize each row; rows with norm < 1e-12 map to the fallback
    // (zero row, or (0,0,1) for 3-column inputs) and receive zero gradient.
    Var normalize_rows(Var x, ZeroRowPolicy policy = ZeroRowPolicy::kZero);
    Var row_sum(Var x);                      // R×C → R×1

    // ----- reductions -----
    Var sum(Var x);                          // → 1×1

    // ----- access -----
    [[nodiscard]] const Matrix& val(Var v) const;
    [[nodiscard]] double scalar(Var v) const;  // value of a 1×1 node
    [[nodiscard]] std::size_t node_count() const { return nodes_.size(); }

    // Accumulate d(loss)/d(param) into every reachable ParamTensor::grad.
    // loss must be 1×1. Repeated calls accumulate.
    void backward(Var loss);

    // Drop all nodes (ParamTensors are owned by the caller and survive).
    void clear();

private:
    enum class Op {
        kConstant, kParam, kAffine, kMatMul, kLeakyRelu, kLeakyMask,
        kSoftmaxRows, kAdd, kSub, kMul, kScale, kShift, kSquare, kAbs,
        kSqrt0, kAcosClamped, kConcatCols, kConcatRows, kSliceCols,
        kSliceRows, kGatherRows, kNormalizeRows, kRowSum, kSum,
    };

    struct Node {
        Op op;
        Matrix value;
        int a = -1, b = -1, c = -1;      // input node ids
        double attr = 0.0;               // slope / scale / shift / guard
        std::size_t i0 = 0, i1 = 0;      // slice bounds / policy
        std::vector<std::size_t> idx;    // gather indices
        Matrix aux;                      // saved row norms (normalize)
        ParamTensor* p = nullptr;
        bool needs_grad = false;
    };

    Var push(Node n, const char* opname);
    const Node& node(Var v, const char* opname) const;
    [[nodiscard]] bool needs(Var v) const { return nodes_[v.id].needs_grad; }
    Matrix& grad_of(int id);

    // Deque keeps Matrix references from val() stable while later ops are
    // recorded; a vector would invalidate them on reallocation.
    std::deque<Node> nodes_;
    std::vector<Matrix> grads_;
};

}  // namespace uvmap
