#pragma once
#include <string>
#include <utility>
#include <vector>

#include "uvmap/common.hpp"
#include "uvmap/tape.hpp"

namespace uvmap {

// ---------------------------------------------------------------------------
// MLP — fully-connected stack, LeakyReLU between layers, affine last layer
// ---------------------------------------------------------------------------

struct MlpSpec {
    std::vector<std::size_t> channels;  // [in, hidden..., out], length ≥ 2
    double negative_slope = 0.01;
};

struct Mlp {
    MlpSpec spec;
    std::vector<ParamTensor> weights;  // layer l: channels[l] × channels[l+1]
    std::vector<ParamTensor> biases;   // layer l: 1 × channels[l+1]

    // Xavier-uniform weights (±√(6/(fan_in+fan_out))), zero biases. Tensor
    // names are "<name>.w<l>" / "<name>.b<l>".
    static Mlp create(MlpSpec spec, const std::string& name, Rng& rng);

    // Zero the last layer's weight and bias; residual wrappers around this
    // net then start exactly at the identity map.
    void zero_output_layer();

    [[nodiscard]] std::size_t in_width() const { return spec.channels.front(); }
    [[nodiscard]] std::size_t out_width() const { return spec.channels.back(); }
    std::vector<ParamTensor*> parameters();
};

// Affine→LeakyReLU per hidden layer, affine only on the last layer.
Var mlp_forward(Tape& tape, Mlp& net, Var x);

// Forward pass that also pushes a directional derivative (tangent) through
// the net: y = f(x), t_out = J_f(x)·t_in, both recorded on the tape so the
// tangent output stays differentiable w.r.t. the weights.
struct MlpJvp {
    Var y;
    Var t;
};
MlpJvp mlp_forward_jvp(Tape& tape, Mlp& net, Var x, Var t);

// J·tangent at a single input point (plain value, no surrounding tape).
Matrix input_jvp(Mlp& net, const Matrix& input_point, const Matrix& tangent);

// Eigenvalues of a symmetric 2×2 matrix, λ₁ ≥ λ₂, closed form with the
// discriminant clamped at 0 against round-off. Requires |m01 − m10| < 1e-9.
std::pair<double, double> eig2x2_sym(double m00, double m01, double m10, double m11);

}  // namespace uvmap
