#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "cxqsm/dcrnet/train.hpp"

namespace cxqsm::dcr {

/// Desk-scale network: 8 channels, 2 residual blocks.
inline DcrNetConfig toy_config(ConvConvention c = ConvConvention::printed) { return {8, 2, c}; }

inline TrainConfig toy_train_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.batch = 8;
    cfg.seed = seed;
    cfg.noise_sigma_max = 0.0;
    return cfg;
}

struct ToySplit {
    std::vector<SlicePair> train, held_out;
    std::vector<int> train_x, held_out_x;
};

/// Central x-slices [3 nx / 16, 13 nx / 16); every fifth one (offset 2) is held
/// out. For nx = 64 that is 32 training and 8 held-out slices.
inline ToySplit toy_split(const ComplexVolume& truth, const SamplingMask& mask) {
    ToySplit s;
    const int lo = 3 * truth.shape.nx / 16, hi = 13 * truth.shape.nx / 16;
    for (int x = lo; x < hi; ++x) ((x - lo) % 5 == 2 ? s.held_out_x : s.train_x).push_back(x);
    require(!s.train_x.empty() && !s.held_out_x.empty(), "volume too small for a train/held-out split");
    s.train = make_slice_pairs(truth, mask, s.train_x);
    s.held_out = make_slice_pairs(truth, mask, s.held_out_x);
    return s;
}

/// Complex PSNR over a set of slices, peak = max |truth| over the set.
/// `pred` holds one image per pair; empty means the zero-fill input.
inline double pairs_psnr(const std::vector<SlicePair>& data, const std::vector<ComplexSlice>& pred = {}) {
    double se = 0.0, peak = 0.0, n = 0.0;
    for (std::size_t k = 0; k < data.size(); ++k) {
        const ComplexSlice& x = pred.empty() ? data[k].zero_fill : pred[k];
        for (std::size_t i = 0; i < x.size(); ++i) {
            se += std::norm(x[i] - data[k].truth[i]);
            peak = std::max(peak, std::abs(data[k].truth[i]));
            n += 1.0;
        }
    }
    require(n > 0.0 && peak > 0.0, "PSNR over an empty or zero slice set");
    return 20.0 * std::log10(peak / std::sqrt(se / n));
}

/// Eval-mode output for every pair.
inline std::vector<ComplexSlice> predict(DcrNet& model, const std::vector<SlicePair>& data) {
    std::vector<std::size_t> idx(data.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const Batch b = make_batch(data, idx);
    const bool saved = model.training;
    model.training = false;
    const ComplexTensor y = dcrnet_forward(b.input, model, &b.dc, nullptr, false);
    model.training = saved;
    std::vector<ComplexSlice> out;
    const std::size_t plane = static_cast<std::size_t>(y.h) * y.w;
    for (int k = 0; k < y.n; ++k) {
        ComplexSlice s(y.w, y.h, Domain::image);
        for (std::size_t i = 0; i < plane; ++i) s[i] = y.data[static_cast<std::size_t>(k) * plane + i];
        out.push_back(std::move(s));
    }
    return out;
}

struct ToyOutcome {
    double mse_before = 0.0, mse_after = 0.0;     // train-mode, whole training set
    double psnr_model = 0.0, psnr_zero_fill = 0.0;  // held-out, eval mode
    TrainResult trace;
};

inline ToyOutcome run_toy(const ToySplit& split, DcrNet& model, const TrainConfig& cfg, long steps) {
    ToyOutcome o;
    o.mse_before = dataset_mse(model, split.train, true);
    o.trace = train_toy(split.train, model, cfg, steps);
    o.mse_after = dataset_mse(model, split.train, true);
    o.psnr_model = pairs_psnr(split.held_out, predict(model, split.held_out));
    o.psnr_zero_fill = pairs_psnr(split.held_out);
    return o;
}

/// step,lr,loss
inline std::string train_trace_csv(const TrainResult& r) {
    std::string out = "step,lr,loss\n";
    char line[96];
    for (std::size_t k = 0; k < r.loss.size(); ++k) {
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", k, r.lr[k], r.loss[k]);
        out += line;
    }
    return out;
}

}  // namespace cxqsm::dcr
