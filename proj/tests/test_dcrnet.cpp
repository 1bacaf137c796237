#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cxqsm/dcrnet/train.hpp"
#include "cxqsm/dcrnet/weights.hpp"
#include "oracles.hpp"

using namespace cxqsm;
using namespace cxqsm::dcr;

namespace {

ComplexTensor random_tensor(int n, int c, int h, int w, std::uint64_t seed) {
    ComplexTensor t(n, c, h, w);
    RngStream rng(seed, 11);
    for (cplx& v : t.data) v = {rng.normal(), rng.normal()};
    return t;
}

ComplexConv random_conv(int out, int in, std::uint64_t seed, bool bias = true) {
    ComplexConv c(out, in);
    RngStream rng(seed, 12);
    for (cplx& v : c.weight) v = {rng.normal(), rng.normal()};
    if (bias)
        for (cplx& v : c.bias) v = {rng.normal(), rng.normal()};
    return c;
}

DcInput random_dc(int n, int h, int w, double fraction, std::uint64_t seed) {
    DcInput dc{random_tensor(n, 1, h, w, seed), {}};
    RngStream rng(seed, 13);
    for (std::size_t i = 0; i < dc.kspace.size(); ++i) dc.mask.push_back(rng.uniform() < fraction ? 1 : 0);
    return dc;
}

ComplexTensor kspace_of(ComplexTensor t) {
    for (int b = 0; b < t.n; ++b)
        dft2_inplace(std::span<cplx>(t.plane(b, 0), t.plane_size()), t.w, t.h, FftDirection::forward);
    return t;
}

double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
    return d;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("cxqsm_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST(ComplexConv, PrintedRuleExample) {
    ComplexTensor x(1, 1, 1, 1);
    x.data[0] = {2.0, 3.0};
    ComplexConv c(1, 1);
    c.w(0, 0, 1, 1) = {1.0, 1.0};
    EXPECT_EQ(complex_conv2d(x, c, ConvConvention::printed).data[0], cplx(5.0, 5.0));
    EXPECT_EQ(complex_conv2d(x, c, ConvConvention::complex_multiply).data[0], cplx(-1.0, 5.0));
}

TEST(ComplexConv, IdentityKernel) {
    const ComplexTensor x = random_tensor(2, 3, 5, 6, 1);
    ComplexConv c(3, 3);
    for (int i = 0; i < 3; ++i) c.w(i, i, 1, 1) = 1.0;
    for (auto cv : {ConvConvention::printed, ConvConvention::complex_multiply})
        EXPECT_EQ(complex_conv2d(x, c, cv).data, x.data);
}

TEST(ComplexConv, MatchesFourRealConvolutions) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const ComplexTensor x = random_tensor(2, 3, 8, 8, 100 + seed);
        const ComplexConv c = random_conv(4, 3, 200 + seed);
        EXPECT_LT(max_abs_diff(complex_conv2d(x, c), oracle::printed_conv(x, c)), 1e-10);
    }
}

TEST(ComplexConv, ComplexMultiplyIsComplexLinear) {
    const ComplexTensor x = random_tensor(1, 2, 6, 7, 3), y = random_tensor(1, 2, 6, 7, 4);
    const ComplexConv c = random_conv(3, 2, 5, false);
    const cplx a{0.7, -1.3}, b{-0.4, 2.1};
    ComplexTensor mix = x;
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data[i] = a * x.data[i] + b * y.data[i];
    const auto cx = complex_conv2d(x, c, ConvConvention::complex_multiply);
    const auto cy = complex_conv2d(y, c, ConvConvention::complex_multiply);
    ComplexTensor expect = cx;
    for (std::size_t i = 0; i < expect.size(); ++i) expect.data[i] = a * cx.data[i] + b * cy.data[i];
    EXPECT_LT(max_abs_diff(complex_conv2d(mix, c, ConvConvention::complex_multiply), expect), 1e-10);
}

TEST(ComplexConv, PrintedRuleIsRealLinearOnly) {
    const ComplexTensor x = random_tensor(1, 2, 6, 7, 3), y = random_tensor(1, 2, 6, 7, 4);
    const ComplexConv c = random_conv(3, 2, 5, false);
    auto combo = [&](cplx a, cplx b) {
        ComplexTensor mix = x;
        for (std::size_t i = 0; i < mix.size(); ++i) mix.data[i] = a * x.data[i] + b * y.data[i];
        const auto cx = complex_conv2d(x, c), cy = complex_conv2d(y, c);
        ComplexTensor expect = cx;
        for (std::size_t i = 0; i < expect.size(); ++i) expect.data[i] = a * cx.data[i] + b * cy.data[i];
        return max_abs_diff(complex_conv2d(mix, c), expect);
    };
    EXPECT_LT(combo(0.7, -1.9), 1e-10);
    EXPECT_GT(combo({0.0, 1.0}, 0.0), 1e-3);
}

TEST(ComplexConv, BackwardIsAdjoint) {
    for (auto cv : {ConvConvention::printed, ConvConvention::complex_multiply}) {
        const ComplexTensor x = random_tensor(2, 3, 5, 4, 7), g = random_tensor(2, 2, 5, 4, 8);
        const ComplexConv c = random_conv(2, 3, 9, false);
        ComplexConv grad(2, 3);
        const ComplexTensor gx = complex_conv2d_backward(x, c, g, grad, cv);
        const ComplexTensor y = complex_conv2d(x, c, cv);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) lhs += y.data[i].real() * g.data[i].real() + y.data[i].imag() * g.data[i].imag();
        for (std::size_t i = 0; i < x.size(); ++i) rhs += x.data[i].real() * gx.data[i].real() + x.data[i].imag() * gx.data[i].imag();
        EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs));
    }
}

TEST(ComplexConv, ChannelMismatchIsArchitectureError) {
    const ComplexTensor x = random_tensor(1, 2, 4, 4, 1);
    const ComplexConv c(1, 3);
    try {
        complex_conv2d(x, c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::architecture);
    }
}

TEST(ComplexBn, TrainingOutputIsStandardised) {
    ComplexTensor x = random_tensor(3, 4, 6, 5, 21);
    // Large spread so eps = 1e-5 is negligible next to the batch variance.
    for (cplx& v : x.data) v = {300.0 * v.real() + 2.0, 50.0 * v.imag() - 1.0};
    ComplexBatchNorm bn(4);
    const ComplexTensor y = complex_bn(x, bn, true);
    const double n = 3.0 * 30.0;
    for (int ch = 0; ch < 4; ++ch) {
        double mr = 0, mi = 0, vr = 0, vi = 0;
        for (int b = 0; b < 3; ++b)
            for (std::size_t q = 0; q < 30; ++q) {
                mr += y.plane(b, ch)[q].real() / n;
                mi += y.plane(b, ch)[q].imag() / n;
            }
        for (int b = 0; b < 3; ++b)
            for (std::size_t q = 0; q < 30; ++q) {
                vr += std::pow(y.plane(b, ch)[q].real() - mr, 2) / n;
                vi += std::pow(y.plane(b, ch)[q].imag() - mi, 2) / n;
            }
        EXPECT_NEAR(mr, 0.0, 1e-6);
        EXPECT_NEAR(mi, 0.0, 1e-6);
        EXPECT_NEAR(vr, 1.0, 1e-6);
        EXPECT_NEAR(vi, 1.0, 1e-6);
    }
}

TEST(ComplexBn, RunningStatisticsAndEvalMode) {
    ComplexTensor x(1, 1, 1, 4);
    x.data = {{1.0, 0.0}, {2.0, 0.0}, {3.0, 0.0}, {6.0, 4.0}};
    ComplexBatchNorm bn(1);
    complex_bn(x, bn, true);
    EXPECT_DOUBLE_EQ(bn.mean_re[0], 0.1 * 3.0);
    EXPECT_DOUBLE_EQ(bn.var_re[0], 0.9 + 0.1 * (4.0 + 1.0 + 0.0 + 9.0) / 3.0);
    EXPECT_DOUBLE_EQ(bn.mean_im[0], 0.1 * 1.0);
    EXPECT_DOUBLE_EQ(bn.var_im[0], 0.9 + 0.1 * (1.0 + 1.0 + 1.0 + 9.0) / 3.0);
    bn.gamma_re[0] = 2.0;
    bn.beta_im[0] = 0.5;
    const ComplexTensor y = complex_bn(x, bn, false);
    EXPECT_NEAR(y.data[3].real(), 2.0 * (6.0 - bn.mean_re[0]) / std::sqrt(bn.var_re[0] + 1e-5), 1e-14);
    EXPECT_NEAR(y.data[3].imag(), (4.0 - bn.mean_im[0]) / std::sqrt(bn.var_im[0] + 1e-5) + 0.5, 1e-14);
}

TEST(ComplexRelu, Componentwise) {
    ComplexTensor x(1, 1, 1, 2);
    x.data = {{-1.0, 2.0}, {0.5, 0.25}};
    const ComplexTensor y = complex_relu(x);
    EXPECT_EQ(y.data[0], cplx(0.0, 2.0));
    EXPECT_EQ(y.data[1], x.data[1]);
}

TEST(DataConsistency, LambdaZeroKeepsNetworkOutput) {
    const ComplexTensor y6 = random_tensor(2, 1, 8, 6, 31);
    const DcInput dc = random_dc(2, 8, 6, 0.4, 32);
    EXPECT_EQ(dc_blend(kspace_of(y6), dc, 0.0).data, kspace_of(y6).data);
    EXPECT_LT(max_abs_diff(data_consistency(y6, dc, 0.0), y6), 1e-12);
}

TEST(DataConsistency, LargeLambdaReproducesAcquiredSamples) {
    const ComplexTensor y6 = random_tensor(2, 1, 8, 6, 33);
    const DcInput dc = random_dc(2, 8, 6, 0.4, 34);
    ComplexTensor k;
    const ComplexTensor out = kspace_of(data_consistency(y6, dc, 1e9, &k));
    for (std::size_t i = 0; i < out.size(); ++i)
        if (dc.mask[i]) EXPECT_LE(std::abs(out.data[i] - dc.kspace.data[i]), 1e-6 * std::abs(dc.kspace.data[i]));
}

TEST(DataConsistency, BlendIsExactPointwise) {
    const ComplexTensor y6k = kspace_of(random_tensor(2, 1, 8, 6, 35));
    const DcInput dc = random_dc(2, 8, 6, 0.4, 36);
    const double lambda = 0.37;
    const ComplexTensor out = dc_blend(y6k, dc, lambda);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (dc.mask[i])
            EXPECT_EQ(out.data[i], (lambda * dc.kspace.data[i] + y6k.data[i]) / (1.0 + lambda));
        else
            EXPECT_EQ(out.data[i], y6k.data[i]);
    }
}

TEST(DcrNet, ZeroWeightsPassInputThrough) {
    DcrNet m = zero_dcrnet({8, 2, ConvConvention::printed});
    const ComplexTensor x = random_tensor(2, 1, 8, 6, 41);
    EXPECT_EQ(dcrnet_forward(x, m).data, x.data);
    const DcInput dc = random_dc(2, 8, 6, 0.5, 42);
    EXPECT_LT(max_abs_diff(dcrnet_forward(x, m, &dc), data_consistency(x, dc, 1.0)), 1e-14);
}

TEST(DcrNet, MultiChannelInputRejected) {
    DcrNet m = zero_dcrnet({4, 1, ConvConvention::printed});
    try {
        dcrnet_forward(random_tensor(1, 2, 4, 4, 1), m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::architecture);
    }
}

TEST(DcrNet, ForwardIsFinite) {
    DcrNet m = make_dcrnet({8, 2, ConvConvention::printed}, 5, 0.5);
    const DcInput dc = random_dc(2, 8, 8, 0.3, 6);
    for (const cplx& v : dcrnet_forward(random_tensor(2, 1, 8, 8, 7), m, &dc).data) EXPECT_TRUE(is_finite(v));
}

TEST(DcrNet, EvalModeIsBatchIndependent) {
    DcrNet m = make_dcrnet({4, 2, ConvConvention::printed}, 8, 0.3);
    dcrnet_forward(random_tensor(3, 1, 6, 6, 9), m);
    m.training = false;
    const ComplexTensor x = random_tensor(3, 1, 6, 6, 10);
    const DcInput dc = random_dc(3, 6, 6, 0.5, 11);
    const ComplexTensor all = dcrnet_forward(x, m, &dc);
    for (int b = 0; b < 3; ++b) {
        ComplexTensor xb(1, 1, 6, 6);
        DcInput db{ComplexTensor(1, 1, 6, 6), {}};
        std::copy(x.plane(b, 0), x.plane(b, 0) + 36, xb.data.begin());
        std::copy(dc.kspace.plane(b, 0), dc.kspace.plane(b, 0) + 36, db.kspace.data.begin());
        db.mask.assign(dc.mask.begin() + 36 * b, dc.mask.begin() + 36 * (b + 1));
        const ComplexTensor one = dcrnet_forward(xb, m, &db);
        for (std::size_t i = 0; i < 36; ++i) EXPECT_EQ(one.data[i], all.plane(b, 0)[i]);
    }
}

TEST(DcrNet, LambdaStartsAtOne) {
    EXPECT_NEAR(make_dcrnet({4, 1, ConvConvention::printed}, 1).lambda(), 1.0, 1e-15);
}

TEST(Loss, PerfectPredictionHasZeroLossAndGradients) {
    DcrNet m = make_dcrnet({4, 2, ConvConvention::printed}, 12, 0.3);
    const ComplexTensor x = random_tensor(2, 1, 6, 6, 13);
    const DcInput dc = random_dc(2, 6, 6, 0.4, 14);
    const ComplexTensor target = dcrnet_forward(x, m, &dc, nullptr, false);
    DcrNet grad;
    EXPECT_EQ(loss_and_grad(m, x, target, &dc, grad, false), 0.0);
    visit_params(grad, [](const ParamView& v) {
        for (std::size_t i = 0; i < v.count; ++i) EXPECT_EQ(v.data[i], 0.0) << v.name;
    });
}

TEST(Loss, ConstantOffsetAddsSquaredModulus) {
    const ComplexTensor p = random_tensor(2, 1, 4, 5, 15);
    ComplexTensor q = p;
    const cplx c{0.3, -0.4};
    for (cplx& v : q.data) v += c;
    EXPECT_NEAR(mse_loss(q, p), std::norm(c), 1e-15);
    EXPECT_THROW(mse_loss(p, ComplexTensor(1, 1, 4, 5)), Error);
}

TEST(Loss, GradientsMatchFiniteDifferences) {
    const DcrNet m = make_dcrnet({8, 2, ConvConvention::printed}, 1, 0.1);
    const ComplexTensor x = random_tensor(2, 1, 16, 16, 50), target = random_tensor(2, 1, 16, 16, 51);
    const DcInput dc = random_dc(2, 16, 16, 0.3, 52);
    const GradcheckResult r = gradcheck(m, x, target, &dc);
    EXPECT_EQ(r.checked, 5139u);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Adam, ZeroGradientLeavesParameters) {
    DcrNet m = make_dcrnet({4, 1, ConvConvention::printed}, 3);
    const std::vector<double> before = flatten_params(m);
    DcrNet g = gradient_buffer(m);
    AdamState s;
    adam_update(m, g, s, 1e-3);
    EXPECT_EQ(flatten_params(m), before);
}

TEST(Adam, ScalarHandTrace) {
    DcrNet m = zero_dcrnet({1, 1, ConvConvention::printed});
    m.lambda_raw = 0.25;
    AdamState s;
    DcrNet g = gradient_buffer(m);
    g.lambda_raw = 0.5;
    adam_update(m, g, s, 0.1);
    EXPECT_NEAR(m.lambda_raw, 0.25 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
    g.lambda_raw = -0.25;
    adam_update(m, g, s, 0.1);
    EXPECT_NEAR(m.lambda_raw, 0.12336629870784635, 1e-15);
}

TEST(Noise, ZeroSigmaIsIdentity) {
    const ComplexTensor x = random_tensor(2, 1, 4, 4, 60);
    EXPECT_EQ(add_noise(x, 0.0, 1).data, x.data);
}

TEST(Noise, ZeroMeanAndDeterministic) {
    const ComplexTensor zero(1, 1, 1000, 1000);
    const ComplexTensor a = add_noise(zero, 1.0, 61);
    EXPECT_EQ(a.data, add_noise(zero, 1.0, 61).data);
    cplx mean{};
    double power = 0.0;
    for (const cplx& v : a.data) {
        mean += v;
        power += std::norm(v);
    }
    mean /= 1e6;
    const double sigma = std::sqrt(power / 2e6);
    EXPECT_GT(sigma, 0.0);
    EXPECT_LT(std::abs(mean.real()), 4.0 * sigma / 1000.0);
    EXPECT_LT(std::abs(mean.imag()), 4.0 * sigma / 1000.0);
}

TEST(Noise, SigmaDrawnPerSample) {
    const ComplexTensor zero(4, 1, 64, 64);
    const ComplexTensor a = add_noise(zero, 2.0, 62);
    std::vector<double> sig;
    for (int b = 0; b < 4; ++b) {
        double p = 0.0;
        for (std::size_t i = 0; i < a.plane_size(); ++i) p += std::norm(a.plane(b, 0)[i]);
        sig.push_back(std::sqrt(p / (2.0 * a.plane_size())));
        EXPECT_LE(sig.back(), 2.0 * 1.1);
    }
    EXPECT_GT(*std::max_element(sig.begin(), sig.end()) - *std::min_element(sig.begin(), sig.end()), 0.05);
}

namespace {

std::vector<SlicePair> tiny_dataset() {
    ComplexVolume truth({6, 8, 8});
    RngStream rng(70, 1);
    for (cplx& v : truth.data) v = std::polar(rng.uniform(0.2, 1.0), rng.uniform(-1.0, 1.0));
    MaskSpec spec = make_mask_spec(4, 8, 8, 3);
    spec.calib_y = spec.calib_z = 2;
    return make_slice_pairs(truth, realize_mask(spec), {0, 1, 2, 3, 4, 5});
}

}  // namespace

TEST(Train, SlicePairsNormalisedByZeroFillMaximum) {
    const auto data = tiny_dataset();
    double peak = 0.0;
    for (const auto& p : data)
        for (const cplx& c : p.zero_fill.data) peak = std::max(peak, std::abs(c));
    EXPECT_NEAR(peak, 1.0, 1e-15);
}

TEST(Train, HistoryLengthAndDeterminism) {
    const auto data = tiny_dataset();
    TrainConfig cfg;
    cfg.batch = 4;
    cfg.seed = 5;
    cfg.noise_sigma_max = 0.01;
    DcrNet a = make_dcrnet({4, 1, ConvConvention::printed}, 1, cfg.init_std);
    DcrNet b = a;
    const TrainResult ra = train_toy(data, a, cfg, 7);
    const TrainResult rb = train_toy(data, b, cfg, 7);
    EXPECT_EQ(ra.loss.size(), 7u);
    EXPECT_EQ(ra.loss, rb.loss);
    EXPECT_EQ(flatten_params(a), flatten_params(b));
    EXPECT_FALSE(a.training);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
    const auto data = tiny_dataset();
    TrainConfig cfg;
    cfg.batch = 3;
    cfg.schedule = {{1, 0.0}};
    DcrNet m = make_dcrnet({4, 1, ConvConvention::printed}, 2);
    const auto before = flatten_params(m);
    train_toy(data, m, cfg, 3);
    EXPECT_EQ(flatten_params(m), before);
}

TEST(Train, EmptyDatasetRejected) {
    DcrNet m = make_dcrnet({4, 1, ConvConvention::printed}, 2);
    EXPECT_THROW(train_toy({}, m, TrainConfig{}, 1), Error);
}

TEST(Train, ScheduleStretchesToStepBudget) {
    const TrainConfig cfg;
    EXPECT_EQ(cfg.lr_at(0, 200), 1e-3);
    EXPECT_EQ(cfg.lr_at(79, 200), 1e-3);
    EXPECT_EQ(cfg.lr_at(80, 200), 1e-4);
    EXPECT_EQ(cfg.lr_at(159, 200), 1e-4);
    EXPECT_EQ(cfg.lr_at(160, 200), 1e-5);
    EXPECT_EQ(cfg.lr_at(199, 200), 1e-5);
}

TEST(Train, ZeroModelReconstructionIsZeroFill) {
    ComplexVolume truth({4, 8, 8});
    RngStream rng(80, 1);
    for (cplx& v : truth.data) v = {rng.normal(), rng.normal()};
    MaskSpec spec = make_mask_spec(4, 8, 8, 3);
    spec.calib_y = spec.calib_z = 2;
    const SamplingMask mask = realize_mask(spec);
    const ComplexVolume k = undersampled_forward(truth, mask);
    DcrNet m = zero_dcrnet({4, 1, ConvConvention::printed});
    const ComplexVolume rec = recon_dcrnet(m, k, mask);
    const ComplexVolume zf = zero_fill_recon(k, mask);
    for (std::size_t i = 0; i < rec.size(); ++i) EXPECT_NEAR(std::abs(rec[i] - zf[i]), 0.0, 1e-12);
}

TEST(Weights, RoundTripIsBitExact) {
    DcrNet m = make_dcrnet({4, 2, ConvConvention::complex_multiply}, 90, 0.3);
    dcrnet_forward(random_tensor(2, 1, 6, 6, 91), m);
    m.lambda_raw = 0.123456789;
    const auto dir = scratch_dir("weights64");
    save_weights(m, dir, WeightDtype::f64le);
    DcrNet back = load_weights(dir);
    EXPECT_EQ(back.config.convention, ConvConvention::complex_multiply);
    EXPECT_EQ(flatten_params(back), flatten_params(m));
    std::vector<double> bm, bb;
    visit_buffers(m, [&](const ParamView& v) { bm.insert(bm.end(), v.data, v.data + v.count); });
    visit_buffers(back, [&](const ParamView& v) { bb.insert(bb.end(), v.data, v.data + v.count); });
    EXPECT_EQ(bm, bb);
}

TEST(Weights, Float32RoundTripIsBitExactForFloatValues) {
    DcrNet m = make_dcrnet({4, 1, ConvConvention::printed}, 92, 0.3);
    visit_params(m, [](const ParamView& v) {
        for (std::size_t i = 0; i < v.count; ++i) v.data[i] = static_cast<float>(v.data[i]);
    });
    const auto dir = scratch_dir("weights32");
    save_weights(m, dir);
    DcrNet back = load_weights(dir);
    EXPECT_EQ(flatten_params(back), flatten_params(m));
    const std::string blob = io::read_all(dir / kWeightsBlobName);
    save_weights(back, dir);
    EXPECT_EQ(io::read_all(dir / kWeightsBlobName), blob);
}

TEST(Weights, ManifestDescribesParts) {
    DcrNet m = make_dcrnet({4, 1, ConvConvention::printed}, 93);
    const auto dir = scratch_dir("manifest");
    save_weights(m, dir);
    const auto j = nlohmann::json::parse(io::read_all(dir / "manifest.json"));
    EXPECT_EQ(j["arch"], "dcrnet");
    EXPECT_EQ(j["blocks"], 1);
    EXPECT_EQ(j["channels"], 4);
    EXPECT_EQ(j["tensors"][0]["name"], "input.conv.weight");
    EXPECT_EQ(j["tensors"][0]["part"], "real");
    EXPECT_EQ(j["tensors"][0]["dtype"], "f32le");
    EXPECT_EQ(j["tensors"][1]["part"], "imag");
    EXPECT_EQ(j["tensors"][1]["offset"], 4 * 36);
}

TEST(Weights, TruncatedBlobIsFormatError) {
    DcrNet m = make_dcrnet({4, 1, ConvConvention::printed}, 94);
    const auto dir = scratch_dir("truncated");
    save_weights(m, dir);
    const std::string blob = io::read_all(dir / kWeightsBlobName);
    io::write_atomic(dir / kWeightsBlobName, blob.substr(0, blob.size() - 3));
    try {
        load_weights(dir);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::format);
    }
}

TEST(Weights, WrongBlockCountIsArchitectureError) {
    DcrNet m = make_dcrnet({4, 2, ConvConvention::printed}, 95);
    const auto dir = scratch_dir("blocks");
    save_weights(m, dir);
    try {
        load_weights(dir, DcrNetConfig{4, 5, ConvConvention::printed});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::architecture);
    }
    auto j = nlohmann::json::parse(io::read_all(dir / "manifest.json"));
    j["blocks"] = 3;
    io::write_atomic(dir / "manifest.json", j.dump());
    try {
        load_weights(dir);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::architecture);
    }
}
