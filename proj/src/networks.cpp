#include "uvmap/networks.hpp"

#include <cmath>

namespace uvmap {
namespace {

void require_channels(const Mlp& net, const std::vector<std::size_t>& want,
                      const char* name) {
    if (net.spec.channels != want) {
        std::string msg = std::string(name) + ": expected channels [";
        for (std::size_t i = 0; i < want.size(); ++i)
            msg += (i ? "," : "") + std::to_string(want[i]);
        msg += "], got [";
        for (std::size_t i = 0; i < net.spec.channels.size(); ++i)
            msg += (i ? "," : "") + std::to_string(net.spec.channels[i]);
        throw ArgumentError(msg + "]");
    }
}

void require_pair_wiring(const Mlp& a, const Mlp& b, std::size_t data_width,
                         const char* name) {
    if (b.in_width() != a.out_width() + data_width)
        throw ArgumentError(std::string(name) + ": second net expects width " +
                            std::to_string(b.in_width()) + " but concatenation gives " +
                            std::to_string(a.out_width() + data_width));
}

}  // namespace

// ---------------------------------------------------------------------------
// generic wiring
// ---------------------------------------------------------------------------

Var residual_forward(Tape& tape, ResidualNet& net, Var x) {
    const std::size_t width = tape.val(x).cols();
    require_pair_wiring(net.a, net.b, width, "residual_forward");
    if (net.b.out_width() != width)
        throw ArgumentError("residual_forward: output width must match input for the skip");
    Var latent = mlp_forward(tape, net.a, x);
    Var offset = mlp_forward(tape, net.b, tape.concat_cols(latent, x));
    return tape.add(offset, x);
}

WrapOut wrap_forward(Tape& tape, WrapNet& net, Var q) {
    require_pair_wiring(net.a, net.b, tape.val(q).cols(), "wrap_forward");
    if (net.b.out_width() != 6)
        throw ArgumentError("wrap_forward: wrap net must emit 6 channels");
    Var latent = mlp_forward(tape, net.a, q);
    Var out = mlp_forward(tape, net.b, tape.concat_cols(latent, q));
    Var p = tape.slice_cols(out, 0, 3);
    Var n = tape.normalize_rows(tape.slice_cols(out, 3, 6), Tape::ZeroRowPolicy::kUnitZ);
    return {p, n};
}

WrapJvpOut wrap_forward_jvp(Tape& tape, WrapNet& net, Var q) {
    require_pair_wiring(net.a, net.b, tape.val(q).cols(), "wrap_forward_jvp");
    if (net.b.out_width() != 6 || net.a.in_width() != 2)
        throw ArgumentError("wrap_forward_jvp: wrap net must be 2 -> 6 channels");
    const std::size_t rows = tape.val(q).rows();

    Matrix e1(rows, 2), e2(rows, 2);
    for (std::size_t r = 0; r < rows; ++r) {
        e1(r, 0) = 1.0;
        e2(r, 1) = 1.0;
    }
    Var t1 = tape.constant(std::move(e1));
    Var t2 = tape.constant(std::move(e2));

    // one primal pass through net.a, both tangents share its pre-activations
    Var h = q, ta = t1, tb = t2;
    for (std::size_t l = 0; l < net.a.weights.size(); ++l) {
        Var w = tape.param(net.a.weights[l]);
        Var pre = tape.affine(h, w, tape.param(net.a.biases[l]));
        ta = tape.matmul(ta, w);
        tb = tape.matmul(tb, w);
        if (l + 1 < net.a.weights.size()) {
            h = tape.leaky_relu(pre, net.a.spec.negative_slope);
            ta = tape.leaky_mask(pre, ta, net.a.spec.negative_slope);
            tb = tape.leaky_mask(pre, tb, net.a.spec.negative_slope);
        } else {
            h = pre;
        }
    }
    // concatenated input [latent; q] has tangent [t_latent; e_i]
    h = tape.concat_cols(h, q);
    ta = tape.concat_cols(ta, t1);
    tb = tape.concat_cols(tb, t2);
    for (std::size_t l = 0; l < net.b.weights.size(); ++l) {
        Var w = tape.param(net.b.weights[l]);
        Var pre = tape.affine(h, w, tape.param(net.b.biases[l]));
        ta = tape.matmul(ta, w);
        tb = tape.matmul(tb, w);
        if (l + 1 < net.b.weights.size()) {
            h = tape.leaky_relu(pre, net.b.spec.negative_slope);
            ta = tape.leaky_mask(pre, ta, net.b.spec.negative_slope);
            tb = tape.leaky_mask(pre, tb, net.b.spec.negative_slope);
        } else {
            h = pre;
        }
    }

    WrapJvpOut out;
    out.p = tape.slice_cols(h, 0, 3);
    out.n = tape.normalize_rows(tape.slice_cols(h, 3, 6), Tape::ZeroRowPolicy::kUnitZ);
    out.t1_p = tape.slice_cols(ta, 0, 3);
    out.t2_p = tape.slice_cols(tb, 0, 3);
    return out;
}

// ---------------------------------------------------------------------------
// global network set
// ---------------------------------------------------------------------------

GlobalNetworkSet GlobalNetworkSet::create(Rng& rng) {
    GlobalNetworkSet nets;
    nets.deform.a = Mlp::create({{2, 512, 512, 512, 64}}, "deform.a", rng);
    nets.deform.b = Mlp::create({{66, 512, 512, 512, 2}}, "deform.b", rng);
    nets.wrap.a = Mlp::create({{2, 512, 512, 512, 64}}, "wrap.a", rng);
    nets.wrap.b = Mlp::create({{66, 512, 512, 512, 6}}, "wrap.b", rng);
    nets.cut.a = Mlp::create({{3, 512, 512, 64}}, "cut.a", rng);
    nets.cut.b = Mlp::create({{67, 512, 512, 3}}, "cut.b", rng);
    nets.unwrap = Mlp::create({{3, 512, 512, 2}}, "unwrap", rng);
    // residual maps start exactly at the identity
    nets.deform.b.zero_output_layer();
    nets.cut.b.zero_output_layer();
    nets.validate();
    return nets;
}

GlobalNetworkSet GlobalNetworkSet::from_parts(ResidualNet deform, WrapNet wrap,
                                              ResidualNet cut, Mlp unwrap) {
    GlobalNetworkSet nets;
    nets.deform = std::move(deform);
    nets.wrap = std::move(wrap);
    nets.cut = std::move(cut);
    nets.unwrap = std::move(unwrap);
    nets.validate();
    return nets;
}

void GlobalNetworkSet::validate() const {
    require_channels(deform.a, {2, 512, 512, 512, 64}, "deform.a");
    require_channels(deform.b, {66, 512, 512, 512, 2}, "deform.b");
    require_channels(wrap.a, {2, 512, 512, 512, 64}, "wrap.a");
    require_channels(wrap.b, {66, 512, 512, 512, 6}, "wrap.b");
    require_channels(cut.a, {3, 512, 512, 64}, "cut.a");
    require_channels(cut.b, {67, 512, 512, 3}, "cut.b");
    require_channels(unwrap, {3, 512, 512, 2}, "unwrap");
    require_pair_wiring(deform.a, deform.b, 2, "deform");
    require_pair_wiring(wrap.a, wrap.b, 2, "wrap");
    require_pair_wiring(cut.a, cut.b, 3, "cut");
}

std::vector<ParamTensor*> GlobalNetworkSet::parameters() {
    std::vector<ParamTensor*> out;
    for (Mlp* net : {&deform.a, &deform.b, &wrap.a, &wrap.b, &cut.a, &cut.b, &unwrap})
        for (ParamTensor* p : net->parameters()) out.push_back(p);
    return out;
}

Matrix sample_grid(std::size_t count) {
    if (count < 1) throw ArgumentError("sample_grid: count must be ≥ 1");
    const auto m = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(count))));
    Matrix g(count, 2);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t r = i / m, c = i % m;
        g(i, 0) = m > 1 ? -1.0 + 2.0 * static_cast<double>(r) / static_cast<double>(m - 1)
                        : -1.0;
        g(i, 1) = m > 1 ? -1.0 + 2.0 * static_cast<double>(c) / static_cast<double>(m - 1)
                        : -1.0;
    }
    return g;
}

Var deform(Tape& tape, GlobalNetworkSet& nets, Var g) {
    return residual_forward(tape, nets.deform, g);
}

WrapOut wrap(Tape& tape, GlobalNetworkSet& nets, Var q) {
    return wrap_forward(tape, nets.wrap, q);
}

Var cut(Tape& tape, GlobalNetworkSet& nets, Var p) {
    return residual_forward(tape, nets.cut, p);
}

Var unwrap(Tape& tape, GlobalNetworkSet& nets, Var p_cut) {
    return mlp_forward(tape, nets.unwrap, p_cut);
}

// ---------------------------------------------------------------------------
// multi-chart network set
// ---------------------------------------------------------------------------

MultiChartNetworkSet MultiChartNetworkSet::create(std::size_t k_charts, Rng& rng) {
    if (k_charts < 1) throw ArgumentError("MultiChartNetworkSet: K must be ≥ 1");
    MultiChartNetworkSet nets;
    nets.embed = Mlp::create({{3, 512, 512}}, "embed", rng);
    nets.assign = Mlp::create({{512, 512, k_charts}}, "assign", rng);
    nets.charts.reserve(k_charts);
    for (std::size_t k = 0; k < k_charts; ++k) {
        const std::string prefix = "chart" + std::to_string(k);
        ChartNets chart;
        chart.unwrap = Mlp::create({{512, 512, 512, 2}}, prefix + ".unwrap", rng);
        chart.wrap.a = Mlp::create({{2, 256, 256, 64}}, prefix + ".wrap.a", rng);
        chart.wrap.b = Mlp::create({{66, 256, 256, 6}}, prefix + ".wrap.b", rng);
        nets.charts.push_back(std::move(chart));
    }
    nets.validate();
    return nets;
}

void MultiChartNetworkSet::validate() const {
    require_channels(embed, {3, 512, 512}, "embed");
    if (charts.empty()) throw ArgumentError("MultiChartNetworkSet: no charts");
    require_channels(assign, {512, 512, charts.size()}, "assign");
    for (std::size_t k = 0; k < charts.size(); ++k) {
        const std::string prefix = "chart" + std::to_string(k);
        require_channels(charts[k].unwrap, {512, 512, 512, 2},
                         (prefix + ".unwrap").c_str());
        require_channels(charts[k].wrap.a, {2, 256, 256, 64},
                         (prefix + ".wrap.a").c_str());
        require_channels(charts[k].wrap.b, {66, 256, 256, 6},
                         (prefix + ".wrap.b").c_str());
        require_pair_wiring(charts[k].wrap.a, charts[k].wrap.b, 2, prefix.c_str());
    }
}

std::vector<ParamTensor*> MultiChartNetworkSet::parameters() {
    std::vector<ParamTensor*> out;
    for (ParamTensor* p : embed.parameters()) out.push_back(p);
    for (ParamTensor* p : assign.parameters()) out.push_back(p);
    for (ChartNets& chart : charts)
        for (Mlp* net : {&chart.unwrap, &chart.wrap.a, &chart.wrap.b})
            for (ParamTensor* p : net->parameters()) out.push_back(p);
    return out;
}

Var assign(Tape& tape, MultiChartNetworkSet& nets, Var h) {
    return tape.softmax_rows(mlp_forward(tape, nets.assign, h));
}

}  // namespace uvmap
