#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cxqsm/dcrnet/layers.hpp"
#include "cxqsm/rng.hpp"

namespace cxqsm::dcr {

struct DcrNetConfig {
    int channels = 64;
    int blocks = 5;
    ConvConvention convention = ConvConvention::printed;

    void validate() const {
        if (channels < 1) fail(ErrorKind::architecture, "channel width must be positive");
        if (blocks < 1) fail(ErrorKind::architecture, "block count must be positive");
    }
};

struct ResidualBlock {
    ComplexConv conv0;
    ComplexBatchNorm bn0;
    ComplexConv conv1;
    ComplexBatchNorm bn1;
};

/// Input layer (1 -> C), residual blocks (C -> C), output layer (C -> 1)
/// with the input skip, then the data-consistency blend.
struct DcrNet {
    DcrNetConfig config;
    ComplexConv input;
    ComplexBatchNorm input_bn;
    std::vector<ResidualBlock> blocks;
    ComplexConv output;
    double lambda_raw = 0.0;  // lambda = softplus(lambda_raw)
    bool training = true;

    double lambda() const { return lambda_raw > 30.0 ? lambda_raw : std::log1p(std::exp(lambda_raw)); }
    double lambda_slope() const { return 1.0 / (1.0 + std::exp(-lambda_raw)); }
};

inline double softplus_inverse(double lambda) {
    require(lambda > 0.0, "data-consistency weight must be positive to invert softplus");
    return lambda > 30.0 ? lambda : std::log(std::expm1(lambda));
}

/// Architecture with zero conv parameters, BN scale 1 and lambda = 1.
inline DcrNet zero_dcrnet(const DcrNetConfig& cfg) {
    cfg.validate();
    DcrNet m;
    m.config = cfg;
    m.input = ComplexConv(cfg.channels, 1);
    m.input_bn = ComplexBatchNorm(cfg.channels);
    for (int b = 0; b < cfg.blocks; ++b)
        m.blocks.push_back({ComplexConv(cfg.channels, cfg.channels), ComplexBatchNorm(cfg.channels),
                            ComplexConv(cfg.channels, cfg.channels), ComplexBatchNorm(cfg.channels)});
    m.output = ComplexConv(1, cfg.channels);
    m.lambda_raw = softplus_inverse(1.0);
    return m;
}

/// Conv kernels and biases ~ N(0, init_std) per real part; BN scale 1,
/// offset 0; lambda = 1.
inline DcrNet make_dcrnet(const DcrNetConfig& cfg, std::uint64_t seed, double init_std = 0.01) {
    require(init_std >= 0.0, "init standard deviation must be non-negative");
    DcrNet m = zero_dcrnet(cfg);
    RngStream rng(seed, 0x696e6974);
    auto fill = [&](ComplexConv& c) {
        for (cplx& v : c.weight) v = {init_std * rng.normal(), init_std * rng.normal()};
        for (cplx& v : c.bias) v = {init_std * rng.normal(), init_std * rng.normal()};
    };
    fill(m.input);
    for (auto& b : m.blocks) {
        fill(b.conv0);
        fill(b.conv1);
    }
    fill(m.output);
    return m;
}

/// A named trainable tensor viewed as real numbers (complex tensors are
/// interleaved re/im). Batch-norm running statistics are not trainable.
struct ParamView {
    std::string name;
    std::vector<int> shape;
    bool complex = false;
    double* data = nullptr;
    std::size_t count = 0;  // real numbers
};

namespace detail {

template <class F>
void visit_conv(ComplexConv& conv, const std::string& prefix, F&& f) {
    auto* w = reinterpret_cast<double*>(conv.weight.data());
    auto* b = reinterpret_cast<double*>(conv.bias.data());
    f(ParamView{prefix + ".weight", {conv.c_out, conv.c_in, 3, 3}, true, w, 2 * conv.weight.size()});
    f(ParamView{prefix + ".bias", {conv.c_out}, true, b, 2 * conv.bias.size()});
}

template <class F>
void visit_bn(ComplexBatchNorm& bn, const std::string& prefix, F&& f) {
    f(ParamView{prefix + ".gamma_re", {bn.channels}, false, bn.gamma_re.data(), bn.gamma_re.size()});
    f(ParamView{prefix + ".beta_re", {bn.channels}, false, bn.beta_re.data(), bn.beta_re.size()});
    f(ParamView{prefix + ".gamma_im", {bn.channels}, false, bn.gamma_im.data(), bn.gamma_im.size()});
    f(ParamView{prefix + ".beta_im", {bn.channels}, false, bn.beta_im.data(), bn.beta_im.size()});
}

}  // namespace detail

/// Visits every trainable tensor in a fixed order.
template <class F>
void visit_params(DcrNet& m, F&& f) {
    detail::visit_conv(m.input, "input.conv", f);
    detail::visit_bn(m.input_bn, "input.bn", f);
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        const std::string p = "block" + std::to_string(b + 1);
        detail::visit_conv(m.blocks[b].conv0, p + ".conv0", f);
        detail::visit_bn(m.blocks[b].bn0, p + ".bn0", f);
        detail::visit_conv(m.blocks[b].conv1, p + ".conv1", f);
        detail::visit_bn(m.blocks[b].bn1, p + ".bn1", f);
    }
    detail::visit_conv(m.output, "output.conv", f);
    f(ParamView{"dc.lambda_raw", {1}, false, &m.lambda_raw, 1});
}

/// Running statistics (state, not trained), same order convention.
template <class F>
void visit_buffers(DcrNet& m, F&& f) {
    auto bn = [&](ComplexBatchNorm& b, const std::string& prefix) {
        f(ParamView{prefix + ".mean_re", {b.channels}, false, b.mean_re.data(), b.mean_re.size()});
        f(ParamView{prefix + ".var_re", {b.channels}, false, b.var_re.data(), b.var_re.size()});
        f(ParamView{prefix + ".mean_im", {b.channels}, false, b.mean_im.data(), b.mean_im.size()});
        f(ParamView{prefix + ".var_im", {b.channels}, false, b.var_im.data(), b.var_im.size()});
    };
    bn(m.input_bn, "input.bn");
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        const std::string p = "block" + std::to_string(b + 1);
        bn(m.blocks[b].bn0, p + ".bn0");
        bn(m.blocks[b].bn1, p + ".bn1");
    }
}

inline std::size_t parameter_count(DcrNet& m) {
    std::size_t n = 0;
    visit_params(m, [&](const ParamView& v) { n += v.count; });
    return n;
}

/// Flattened trainable parameters, in visit order.
inline std::vector<double> flatten_params(DcrNet& m) {
    std::vector<double> out;
    visit_params(m, [&](const ParamView& v) { out.insert(out.end(), v.data, v.data + v.count); });
    return out;
}

/// Same architecture as `m` with every trainable number set to zero.
inline DcrNet gradient_buffer(const DcrNet& m) {
    DcrNet g = zero_dcrnet(m.config);
    visit_params(g, [](const ParamView& v) { std::fill(v.data, v.data + v.count, 0.0); });
    return g;
}

/// Everything the backward pass needs from one forward pass.
struct ForwardTape {
    ComplexTensor x0;
    ComplexTensor in_conv, in_bn_out;
    BnCache in_bn;
    struct Block {
        ComplexTensor x, c0, b0_out, c1, b1_out, a;
        BnCache bn0, bn1;
    };
    std::vector<Block> blocks;
    ComplexTensor last;  // input of the output layer
    ComplexTensor y6, y6_kspace;
    ComplexTensor out;
    bool has_dc = false;
};

/// Full forward pass. Without `dc` the consistency layer is skipped.
/// BN uses batch statistics when model.training is set, and updates the
/// running statistics unless update_running is false.
inline ComplexTensor dcrnet_forward(const ComplexTensor& x0, DcrNet& m, const DcInput* dc = nullptr,
                                    ForwardTape* tape = nullptr, bool update_running = true) {
    if (x0.c != 1) fail(ErrorKind::architecture, "network input must have exactly one channel");
    const ConvConvention cv = m.config.convention;
    ForwardTape local;
    ForwardTape& t = tape ? *tape : local;
    const bool keep = tape != nullptr;
    t.blocks.clear();
    if (keep) t.x0 = x0;

    ComplexTensor pre = complex_conv2d(x0, m.input, cv);
    ComplexTensor bn = complex_bn(pre, m.input_bn, m.training, keep ? &t.in_bn : nullptr, update_running);
    ComplexTensor x = complex_relu(bn);
    if (keep) {
        t.in_conv = std::move(pre);
        t.in_bn_out = std::move(bn);
    }
    for (ResidualBlock& blk : m.blocks) {
        ForwardTape::Block rec;
        ComplexTensor c0 = complex_conv2d(x, blk.conv0, cv);
        ComplexTensor b0 = complex_bn(c0, blk.bn0, m.training, keep ? &rec.bn0 : nullptr, update_running);
        ComplexTensor a = complex_relu(b0);
        for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += x.data[i];
        ComplexTensor c1 = complex_conv2d(a, blk.conv1, cv);
        ComplexTensor b1 = complex_bn(c1, blk.bn1, m.training, keep ? &rec.bn1 : nullptr, update_running);
        ComplexTensor y = complex_relu(b1);
        if (keep) {
            rec.x = std::move(x);
            rec.c0 = std::move(c0);
            rec.b0_out = std::move(b0);
            rec.a = std::move(a);
            rec.c1 = std::move(c1);
            rec.b1_out = std::move(b1);
            t.blocks.push_back(std::move(rec));
        }
        x = std::move(y);
    }
    ComplexTensor y6 = complex_conv2d(x, m.output, cv);
    for (std::size_t i = 0; i < y6.size(); ++i) y6.data[i] += x0.data[i];
    if (keep) t.last = std::move(x);
    t.has_dc = dc != nullptr;
    ComplexTensor out = dc ? data_consistency(y6, *dc, m.lambda(), keep ? &t.y6_kspace : nullptr) : y6;
    if (keep) {
        t.y6 = std::move(y6);
        t.out = out;
    }
    return out;
}

/// Reverse pass from d loss / d output; gradients are added into `grad`
/// (an architecture-identical model used as storage).
inline void dcrnet_backward(const ForwardTape& t, const DcrNet& m, const ComplexTensor& g_out, DcrNet& grad,
                            const DcInput* dc = nullptr) {
    const ConvConvention cv = m.config.convention;
    ComplexTensor g = g_out;
    if (t.has_dc) {
        require(dc != nullptr, "backward needs the consistency inputs used in forward");
        double gl = 0.0;
        g = data_consistency_backward(g, *dc, m.lambda(), t.y6_kspace, &gl);
        grad.lambda_raw += gl * m.lambda_slope();
    }
    // y6 = x0 + conv(last): the skip needs no parameters.
    ComplexTensor gx = complex_conv2d_backward(t.last, m.output, g, grad.output, cv);
    for (std::size_t b = m.blocks.size(); b-- > 0;) {
        const auto& rec = t.blocks[b];
        const ResidualBlock& blk = m.blocks[b];
        ResidualBlock& gb = grad.blocks[b];
        ComplexTensor g1 = complex_relu_backward(rec.b1_out, std::move(gx));
        g1 = complex_bn_backward(rec.bn1, blk.bn1, g1, gb.bn1);
        ComplexTensor ga = complex_conv2d_backward(rec.a, blk.conv1, g1, gb.conv1, cv);
        // a = relu(bn0(conv0(x))) + x
        ComplexTensor g0 = complex_relu_backward(rec.b0_out, ga);
        g0 = complex_bn_backward(rec.bn0, blk.bn0, g0, gb.bn0);
        ComplexTensor gxin = complex_conv2d_backward(rec.x, blk.conv0, g0, gb.conv0, cv);
        for (std::size_t i = 0; i < gxin.size(); ++i) gxin.data[i] += ga.data[i];
        gx = std::move(gxin);
    }
    ComplexTensor gi = complex_relu_backward(t.in_bn_out, std::move(gx));
    gi = complex_bn_backward(t.in_bn, m.input_bn, gi, grad.input_bn);
    complex_conv2d_backward(t.x0, m.input, gi, grad.input, cv, false);
}

/// mean |pred - target|^2 over every complex sample, and its gradient
/// (d/dRe + i d/dIm).
inline double mse_loss(const ComplexTensor& pred, const ComplexTensor& target, ComplexTensor* grad = nullptr) {
    require(pred.same_dims(target), "prediction and target shapes differ");
    const double n = static_cast<double>(pred.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) loss += std::norm(pred.data[i] - target.data[i]);
    if (grad) {
        *grad = pred;
        for (std::size_t i = 0; i < pred.size(); ++i) grad->data[i] = 2.0 * (pred.data[i] - target.data[i]) / n;
    }
    return loss / n;
}

/// Loss and parameter gradients for one batch.
inline double loss_and_grad(DcrNet& m, const ComplexTensor& x0, const ComplexTensor& target, const DcInput* dc,
                            DcrNet& grad, bool update_running = true) {
    ForwardTape tape;
    const ComplexTensor pred = dcrnet_forward(x0, m, dc, &tape, update_running);
    ComplexTensor g;
    const double loss = mse_loss(pred, target, &g);
    grad = gradient_buffer(m);
    dcrnet_backward(tape, m, g, grad, dc);
    return loss;
}

}  // namespace cxqsm::dcr
