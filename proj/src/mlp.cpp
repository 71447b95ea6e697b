#include "uvmap/mlp.hpp"

#include <cmath>

namespace uvmap {

Mlp Mlp::create(MlpSpec spec, const std::string& name, Rng& rng) {
    if (spec.channels.size() < 2)
        throw ArgumentError("MlpSpec: need at least input and output widths");
    for (std::size_t w : spec.channels)
        if (w < 1) throw ArgumentError("MlpSpec: all widths must be ≥ 1");

    Mlp net;
    net.spec = std::move(spec);
    const std::size_t layers = net.spec.channels.size() - 1;
    net.weights.reserve(layers);
    net.biases.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t fan_in = net.spec.channels[l];
        const std::size_t fan_out = net.spec.channels[l + 1];
        ParamTensor w(name + ".w" + std::to_string(l), fan_in, fan_out);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (std::size_t i = 0; i < w.data.size(); ++i)
            w.data.data()[i] = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(name + ".b" + std::to_string(l), 1, fan_out);
    }
    return net;
}

void Mlp::zero_output_layer() {
    weights.back().data.fill(0.0);
    biases.back().data.fill(0.0);
}

std::vector<ParamTensor*> Mlp::parameters() {
    std::vector<ParamTensor*> out;
    out.reserve(weights.size() * 2);
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
    return out;
}

Var mlp_forward(Tape& tape, Mlp& net, Var x) {
    if (tape.val(x).cols() != net.in_width())
        throw ArgumentError("mlp_forward: input width " +
                            std::to_string(tape.val(x).cols()) + " != channels[0] " +
                            std::to_string(net.in_width()));
    Var h = x;
    const std::size_t layers = net.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        h = tape.affine(h, tape.param(net.weights[l]), tape.param(net.biases[l]));
        if (l + 1 < layers) h = tape.leaky_relu(h, net.spec.negative_slope);
    }
    return h;
}

MlpJvp mlp_forward_jvp(Tape& tape, Mlp& net, Var x, Var t) {
    if (tape.val(x).cols() != net.in_width() || tape.val(t).cols() != net.in_width())
        throw ArgumentError("mlp_forward_jvp: input/tangent width != channels[0]");
    if (tape.val(x).rows() != tape.val(t).rows())
        throw ArgumentError("mlp_forward_jvp: input/tangent row counts differ");
    Var h = x, tv = t;
    const std::size_t layers = net.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        Var w = tape.param(net.weights[l]);
        Var pre = tape.affine(h, w, tape.param(net.biases[l]));
        tv = tape.matmul(tv, w);
        if (l + 1 < layers) {
            h = tape.leaky_relu(pre, net.spec.negative_slope);
            tv = tape.leaky_mask(pre, tv, net.spec.negative_slope);
        } else {
            h = pre;
        }
    }
    return {h, tv};
}

Matrix input_jvp(Mlp& net, const Matrix& input_point, const Matrix& tangent) {
    if (input_point.rows() != tangent.rows() || input_point.cols() != tangent.cols())
        throw ArgumentError("input_jvp: point/tangent shapes differ");
    Tape tape;
    MlpJvp out = mlp_forward_jvp(tape, net, tape.constant(input_point),
                                 tape.constant(tangent));
    return tape.val(out.t);
}

std::pair<double, double> eig2x2_sym(double m00, double m01, double m10, double m11) {
    if (std::fabs(m01 - m10) >= 1e-9)
        throw ArgumentError("eig2x2_sym: matrix is not symmetric");
    const double tr = m00 + m11;
    const double det = m00 * m11 - m01 * m10;
    const double disc = std::max(0.0, tr * tr - 4.0 * det);
    const double root = std::sqrt(disc);
    return {(tr + root) / 2.0, (tr - root) / 2.0};
}

}  // namespace uvmap
