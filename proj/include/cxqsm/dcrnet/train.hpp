#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cxqsm/dcrnet/model.hpp"
#include "cxqsm/forward.hpp"

namespace cxqsm::dcr {

/// Learning-rate phase: `epochs` is a relative length when training is
/// given an explicit step budget.
struct LrPhase {
    double epochs = 0.0;
    double lr = 0.0;
};

struct TrainConfig {
    int batch = 32;
    std::vector<LrPhase> schedule{{40, 1e-3}, {40, 1e-4}, {20, 1e-5}};
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double init_std = 0.01;
    double noise_sigma_max = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        require(batch > 0, "batch size must be positive");
        require(!schedule.empty(), "learning-rate schedule is empty");
        for (const LrPhase& p : schedule) {
            require(p.epochs > 0.0, "schedule phase lengths must be positive");
            require(p.lr >= 0.0, "learning rates must be non-negative");
        }
        require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must lie in [0, 1)");
        require(eps > 0.0, "Adam eps must be positive");
        require(noise_sigma_max >= 0.0, "noise level must be non-negative");
    }

    /// Learning rate at `step` of `total`, with the phases stretched to fit.
    double lr_at(long step, long total) const {
        double length = 0.0;
        for (const LrPhase& p : schedule) length += p.epochs;
        const double pos = (static_cast<double>(step) + 0.5) / static_cast<double>(std::max(total, 1L)) * length;
        double edge = 0.0;
        for (const LrPhase& p : schedule) {
            edge += p.epochs;
            if (pos < edge) return p.lr;
        }
        return schedule.back().lr;
    }
};

struct AdamState {
    std::vector<double> m, v;
    long t = 0;
};

/// One Adam step with bias correction on every trainable real number;
/// complex parameters are two independent reals.
inline void adam_update(DcrNet& model, DcrNet& grad, AdamState& state, double lr, double beta1 = 0.9,
                        double beta2 = 0.999, double eps = 1e-8) {
    const std::size_t n = parameter_count(model);
    if (state.m.empty()) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    require(state.m.size() == n && state.v.size() == n, "optimizer state does not match the model");
    require(parameter_count(grad) == n, "gradient does not match the model");
    ++state.t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    std::vector<double*> gptr;
    gptr.reserve(64);
    visit_params(grad, [&](const ParamView& v) { gptr.push_back(v.data); });
    std::size_t k = 0, tensor = 0;
    visit_params(model, [&](const ParamView& v) {
        const double* g = gptr[tensor++];
        for (std::size_t i = 0; i < v.count; ++i, ++k) {
            state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g[i];
            state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g[i] * g[i];
            v.data[i] -= lr * (state.m[k] / c1) / (std::sqrt(state.v[k] / c2) + eps);
        }
    });
}

/// Adds zero-mean Gaussian noise to both parts; each batch sample gets its
/// own sigma ~ U[0, sigma_max].
inline ComplexTensor add_noise(ComplexTensor x, double sigma_max, RngStream& rng) {
    require(sigma_max >= 0.0, "noise level must be non-negative");
    if (sigma_max == 0.0) return x;
    const std::size_t per = static_cast<std::size_t>(x.c) * x.plane_size();
    for (int b = 0; b < x.n; ++b) {
        const double sigma = rng.uniform(0.0, sigma_max);
        cplx* p = x.plane(b, 0);
        for (std::size_t i = 0; i < per; ++i) p[i] += sigma * cplx(rng.normal(), rng.normal());
    }
    return x;
}

inline ComplexTensor add_noise(const ComplexTensor& x, double sigma_max, std::uint64_t seed) {
    RngStream rng(seed, 0x6e6f6973);
    return add_noise(x, sigma_max, rng);
}

/// One training pair: normalised zero-fill input, normalised truth, the
/// acquired (normalised) k-space and its sampling plane. Planes are
/// (ny, nz) y-fastest, i.e. tensor height nz and width ny.
struct SlicePair {
    ComplexSlice zero_fill;
    ComplexSlice truth;
    ComplexSlice kspace;
    Plane<std::uint8_t> mask;
};

/// Slices `xs` of an image volume, undersampled with `mask` and divided by
/// the maximum magnitude of the zero-fill volume.
inline std::vector<SlicePair> make_slice_pairs(const ComplexVolume& truth, const SamplingMask& mask,
                                               const std::vector<int>& xs) {
    const ComplexVolume k = undersampled_forward(truth, mask);
    const ComplexVolume zf = zero_fill_recon(k, mask);
    double scale = 0.0;
    for (const cplx& c : zf.data) scale = std::max(scale, std::abs(c));
    require(scale > 0.0, "zero-fill volume is identically zero");
    const std::vector<ComplexSlice> kslices = slice_decompose(k);
    std::vector<SlicePair> out;
    for (int x : xs) {
        require(x >= 0 && x < truth.shape.nx, "slice index out of range");
        SlicePair p{plane_at(zf, x), plane_at(truth, x), kslices[static_cast<std::size_t>(x)], mask.plane};
        for (auto* s : {&p.zero_fill, &p.truth, &p.kspace})
            for (cplx& c : s->data) c /= scale;
        out.push_back(std::move(p));
    }
    return out;
}

struct Batch {
    ComplexTensor input, target;
    DcInput dc;
};

inline Batch make_batch(const std::vector<SlicePair>& data, const std::vector<std::size_t>& idx) {
    require(!idx.empty(), "empty batch");
    const SlicePair& f = data[idx.front()];
    const int h = f.truth.nz, w = f.truth.ny;
    const int n = static_cast<int>(idx.size());
    Batch b{ComplexTensor(n, 1, h, w), ComplexTensor(n, 1, h, w), {ComplexTensor(n, 1, h, w), {}}};
    b.dc.mask.reserve(static_cast<std::size_t>(n) * b.input.plane_size());
    for (int s = 0; s < n; ++s) {
        const SlicePair& p = data[idx[static_cast<std::size_t>(s)]];
        require(p.truth.ny == w && p.truth.nz == h, "slices in a batch must share a shape");
        std::copy(p.zero_fill.data.begin(), p.zero_fill.data.end(), b.input.plane(s, 0));
        std::copy(p.truth.data.begin(), p.truth.data.end(), b.target.plane(s, 0));
        std::copy(p.kspace.data.begin(), p.kspace.data.end(), b.dc.kspace.plane(s, 0));
        b.dc.mask.insert(b.dc.mask.end(), p.mask.data.begin(), p.mask.data.end());
    }
    return b;
}

struct TrainResult {
    std::vector<double> loss;  // one entry per step
    std::vector<double> lr;
};

/// Adam over `steps` mini-batches drawn by reshuffling the dataset each
/// pass. The model is left in eval mode.
inline TrainResult train_toy(const std::vector<SlicePair>& data, DcrNet& model, const TrainConfig& cfg, long steps) {
    cfg.validate();
    if (data.empty()) fail(ErrorKind::validation, "training dataset is empty");
    require(steps >= 0, "step count must be non-negative");
    RngStream order_rng(cfg.seed, 0x6f726472);
    RngStream noise_rng(cfg.seed, 0x6e6f6973);
    std::vector<std::size_t> perm(data.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::size_t cursor = perm.size();
    const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), data.size());
    AdamState state;
    TrainResult out;
    model.training = true;
    for (long step = 0; step < steps; ++step) {
        std::vector<std::size_t> idx;
        while (idx.size() < bs) {
            if (cursor == perm.size()) {
                for (std::size_t i = perm.size(); i > 1; --i) {
                    const auto j = static_cast<std::size_t>(order_rng.uniform() * static_cast<double>(i));
                    std::swap(perm[i - 1], perm[std::min(j, i - 1)]);
                }
                cursor = 0;
            }
            idx.push_back(perm[cursor++]);
        }
        Batch b = make_batch(data, idx);
        b.input = add_noise(std::move(b.input), cfg.noise_sigma_max, noise_rng);
        DcrNet grad;
        const double loss = loss_and_grad(model, b.input, b.target, &b.dc, grad);
        const double lr = cfg.lr_at(step, steps);
        adam_update(model, grad, state, lr, cfg.beta1, cfg.beta2, cfg.eps);
        out.loss.push_back(loss);
        out.lr.push_back(lr);
    }
    model.training = false;
    return out;
}

/// Mean squared error over the whole dataset in one pass. In training mode
/// BN uses the statistics of that single full batch and the running
/// statistics are left alone.
inline double dataset_mse(DcrNet& model, const std::vector<SlicePair>& data, bool training_mode) {
    require(!data.empty(), "dataset is empty");
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const Batch b = make_batch(data, idx);
    const bool saved = model.training;
    model.training = training_mode;
    const ComplexTensor pred = dcrnet_forward(b.input, model, &b.dc, nullptr, false);
    model.training = saved;
    return mse_loss(pred, b.target);
}

/// Eval-mode reconstruction of every x-slice of undersampled k-space. Input
/// is scaled by 1/max|zero-fill| and the output is scaled back.
inline ComplexVolume recon_dcrnet(DcrNet& model, const ComplexVolume& kspace, const SamplingMask& mask) {
    const ComplexVolume zf = zero_fill_recon(kspace, mask);
    double scale = 0.0;
    for (const cplx& c : zf.data) scale = std::max(scale, std::abs(c));
    if (scale == 0.0) return ComplexVolume(kspace.shape, Domain::image);
    const std::vector<ComplexSlice> kslices = slice_decompose(kspace);
    const bool saved = model.training;
    model.training = false;
    const int h = kspace.shape.nz, w = kspace.shape.ny;
    ComplexVolume out(kspace.shape, Domain::image);
    for (int x = 0; x < kspace.shape.nx; ++x) {
        Batch b{ComplexTensor(1, 1, h, w), {}, {ComplexTensor(1, 1, h, w), mask.plane.data}};
        const ComplexSlice zs = plane_at(zf, x);
        for (std::size_t i = 0; i < zs.size(); ++i) {
            b.input.data[i] = zs[i] / scale;
            b.dc.kspace.data[i] = kslices[static_cast<std::size_t>(x)][i] / scale;
        }
        const ComplexTensor y = dcrnet_forward(b.input, model, &b.dc, nullptr, false);
        ComplexSlice s(w, h, Domain::image);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = y.data[i] * scale;
        set_plane(out, x, s);
    }
    model.training = saved;
    return out;
}

namespace detail {

// Sign pattern of every ReLU input in a taped forward pass.
inline std::vector<bool> relu_pattern(const ForwardTape& t) {
    std::vector<bool> out;
    auto add = [&](const ComplexTensor& pre) {
        for (const cplx& v : pre.data) {
            out.push_back(v.real() > 0.0);
            out.push_back(v.imag() > 0.0);
        }
    };
    add(t.in_bn_out);
    for (const auto& b : t.blocks) {
        add(b.b0_out);
        add(b.b1_out);
    }
    return out;
}

}  // namespace detail

/// Largest relative error between analytic and central-difference
/// gradients over every trainable real number, |fd - g| / max(|fd|, |g|,
/// floor). BN runs in training mode without touching the running
/// statistics, so the loss is a pure function of the parameters. When a
/// stencil crosses a ReLU kink the difference quotient is not a derivative
/// estimate; such entries are retried with the step divided by 10 (up to
/// four times) and counted in `refined`.
struct GradcheckResult {
    double max_rel_error = 0.0;
    std::string worst;
    std::size_t checked = 0;
    std::size_t refined = 0;
};

inline GradcheckResult gradcheck(DcrNet model, const ComplexTensor& x0, const ComplexTensor& target,
                                 const DcInput* dc, double h = 1e-4, double floor = 1e-5) {
    model.training = true;
    DcrNet grad;
    loss_and_grad(model, x0, target, dc, grad, false);
    ForwardTape base_tape;
    dcrnet_forward(x0, model, dc, &base_tape, false);
    const std::vector<bool> base = detail::relu_pattern(base_tape);
    std::vector<const double*> gptr;
    visit_params(grad, [&](const ParamView& v) { gptr.push_back(v.data); });
    GradcheckResult out;
    std::size_t tensor = 0;
    // Loss at the current parameters; *smooth is cleared on a kink crossing.
    auto loss_at = [&](bool* smooth) {
        ForwardTape tape;
        const double l = mse_loss(dcrnet_forward(x0, model, dc, &tape, false), target);
        if (detail::relu_pattern(tape) != base) *smooth = false;
        return l;
    };
    visit_params(model, [&](const ParamView& v) {
        const double* g = gptr[tensor++];
        for (std::size_t i = 0; i < v.count; ++i) {
            const double keep = v.data[i];
            double step = h, rel = 0.0;
            for (int attempt = 0; attempt < 5; ++attempt, step /= 10.0) {
                bool smooth = true;
                v.data[i] = keep + step;
                const double lp = loss_at(&smooth);
                v.data[i] = keep - step;
                const double lm = loss_at(&smooth);
                v.data[i] = keep;
                const double fd = (lp - lm) / (2.0 * step);
                rel = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), floor});
                if (smooth) break;
                if (attempt == 0) ++out.refined;
            }
            ++out.checked;
            if (rel > out.max_rel_error) {
                out.max_rel_error = rel;
                out.worst = v.name + "[" + std::to_string(i) + "]";
            }
        }
    });
    return out;
}

}  // namespace cxqsm::dcr
