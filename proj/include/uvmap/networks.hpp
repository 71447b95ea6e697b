#pragma once
#include <vector>

#include "uvmap/mlp.hpp"

namespace uvmap {

// ---------------------------------------------------------------------------
// Sub-network wiring
// ---------------------------------------------------------------------------

// Residual pair: y = b([a(x); x]) + x. Starts at the identity map when b's
// output layer is zero-initialized.
struct ResidualNet {
    Mlp a, b;
};

// Wrap pair: y = b([a(q); q]), 6 output channels split 3/3 into positions and
// raw normals.
struct WrapNet {
    Mlp a, b;
};

Var residual_forward(Tape& tape, ResidualNet& net, Var x);

struct WrapOut {
    Var p;  // V×3 positions
    Var n;  // V×3 normals, renormalized (zero rows map to (0,0,1))
};
WrapOut wrap_forward(Tape& tape, WrapNet& net, Var q);

// Wrap forward plus the two canonical input tangents (1,0) and (0,1) pushed
// through the net, sharing one primal pass. t1_p/t2_p are the position
// channels of the tangent outputs — the columns of the 3×2 Jacobian at each
// input row.
struct WrapJvpOut {
    Var p, n;
    Var t1_p, t2_p;  // V×3 each
};
WrapJvpOut wrap_forward_jvp(Tape& tape, WrapNet& net, Var q);

// ---------------------------------------------------------------------------
// Global (single-chart) network set
// ---------------------------------------------------------------------------

struct GlobalNetworkSet {
    ResidualNet deform;  // a: [2,512,512,512,64], b: [66,512,512,512,2]
    WrapNet wrap;        // a: [2,512,512,512,64], b: [66,512,512,512,6]
    ResidualNet cut;     // a: [3,512,512,64],     b: [67,512,512,3]
    Mlp unwrap;          // [3,512,512,2]

    // Xavier init, biases zero, deform.b/cut.b output layers zeroed so both
    // residual maps start exactly at the identity.
    static GlobalNetworkSet create(Rng& rng);
    // Validates exact channel lists and concatenation widths; throws
    // ArgumentError on any deviation.
    static GlobalNetworkSet from_parts(ResidualNet deform, WrapNet wrap,
                                       ResidualNet cut, Mlp unwrap);
    void validate() const;
    std::vector<ParamTensor*> parameters();
};

// ⌈√V⌉ × ⌈√V⌉ axis-aligned lattice spanning [-1,1]², first V points in
// row-major order.
Matrix sample_grid(std::size_t count);

Var deform(Tape& tape, GlobalNetworkSet& nets, Var g);
WrapOut wrap(Tape& tape, GlobalNetworkSet& nets, Var q);
Var cut(Tape& tape, GlobalNetworkSet& nets, Var p);
Var unwrap(Tape& tape, GlobalNetworkSet& nets, Var p_cut);

// ---------------------------------------------------------------------------
// Multi-chart network set
// ---------------------------------------------------------------------------

struct ChartNets {
    Mlp unwrap;    // [512,512,512,2]
    WrapNet wrap;  // a: [2,256,256,64], b: [66,256,256,6]
};

struct MultiChartNetworkSet {
    Mlp embed;   // [3,512,512]
    Mlp assign;  // [512,512,K]
    std::vector<ChartNets> charts;  // K independent copies, no weight sharing

    static MultiChartNetworkSet create(std::size_t k_charts, Rng& rng);
    void validate() const;
    std::vector<ParamTensor*> parameters();
    [[nodiscard]] std::size_t chart_count() const { return charts.size(); }
};

// Row-wise softmax over the K chart scores; each row sums to 1.
Var assign(Tape& tape, MultiChartNetworkSet& nets, Var h);

}  // namespace uvmap
