#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cxqsm/qsm/phantom.hpp"
#include "cxqsm/solvers.hpp"

using namespace cxqsm;

namespace {

// Ellipse of magnitude 1 with a smooth phase ramp that wraps once.
ComplexSlice test_image(int ny, int nz) {
    ComplexSlice x(ny, nz);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y) {
            const double a = (y - ny / 2 + 0.5) / (0.35 * ny), b = (z - nz / 2 + 0.5) / (0.35 * nz);
            if (a * a + b * b <= 1.0) x(y, z) = std::polar(1.0, 4.0 * y / ny + 1.5 * z / nz + 1.0);
        }
    return x;
}

SamplingMask small_mask(int ny, int nz, double af, std::uint64_t seed) {
    MaskSpec spec = make_mask_spec(4, ny, nz, seed);
    spec.af = af;
    spec.calib_y = 2;
    spec.calib_z = 2;
    return realize_mask(spec);
}

ComplexSlice acquire(const ComplexSlice& x, const SamplingMask& mask) {
    ComplexSlice y = dft_centered(x);
    apply_mask(y, mask);
    return y;
}

double max_abs_diff(const ComplexSlice& a, const ComplexSlice& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

void expect_non_increasing(const std::vector<CostTerms>& h) {
    ASSERT_GE(h.size(), 2u);
    for (std::size_t k = 1; k < h.size(); ++k) EXPECT_LE(h[k].total, h[k - 1].total + 1e-9) << "iteration " << k;
}

double residual(const ComplexSlice& image, const ComplexSlice& y, const SamplingMask& mask) {
    ComplexSlice k = dft_centered(image);
    double r = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i)
        if (mask.plane[i]) r += std::norm(k[i] - y[i]);
    return std::sqrt(r);
}

// Central x-slice of the shipped phantom's last echo, AF 4, seed 42.
struct PhantomSlice {
    ComplexSlice truth, y, zero_fill;
    SamplingMask mask;
    std::vector<std::uint8_t> object;

    PhantomSlice() {
        const auto p = qsm::make_phantom(qsm::PhantomKind::spheres, {64, 64, 32}, 42);
        const auto echoes = qsm::simulate_gre(p);
        const ComplexVolume& img = echoes.echoes.back();
        mask = realize_mask(make_mask_spec(4, 64, 32, 42));
        ComplexVolume k = dft_centered(img);
        apply_mask(k, mask);
        const int x = 32;
        truth = unstack_slices(img)[x];
        y = slice_decompose(k)[x];
        zero_fill = zero_fill_recon(y, mask);
        for (int z = 0; z < 32; ++z)
            for (int yy = 0; yy < 64; ++yy) object.push_back(p.mask(x, yy, z));
    }

    double psnr(const ComplexSlice& v) const {
        double se = 0.0, peak = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            se += std::norm(v[i] - truth[i]);
            peak = std::max(peak, std::abs(truth[i]));
        }
        return 10.0 * std::log10(peak * peak * static_cast<double>(v.size()) / se);
    }

    double magnitude_psnr(const RealSlice& m) const {
        double se = 0.0, peak = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            se += std::pow(m[i] - std::abs(truth[i]), 2);
            peak = std::max(peak, std::abs(truth[i]));
        }
        return 10.0 * std::log10(peak * peak * static_cast<double>(m.size()) / se);
    }

    double phase_rmse(const ComplexSlice& v) const {
        double se = 0.0;
        int n = 0;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (object[i]) {
                const double d = wrap_phase(std::arg(v[i]) - std::arg(truth[i]));
                se += d * d;
                ++n;
            }
        return std::sqrt(se / n);
    }
};

const PhantomSlice& phantom_slice() {
    static const PhantomSlice s;
    return s;
}

}  // namespace

TEST(PhaseShifts, ZeroShiftAlwaysFirst) {
    const ComplexSlice zf(8, 8);
    const auto one = gen_phase_shifts(zf, 1, 99);
    ASSERT_EQ(one.count(), 1u);
    EXPECT_EQ(one.shifts[0], 0.0);
    const auto many = gen_phase_shifts(zf, 16, 99);
    EXPECT_EQ(many.shifts[0], 0.0);
    for (double s : many.shifts) {
        EXPECT_GE(s, -std::numbers::pi);
        EXPECT_LT(s, std::numbers::pi);
    }
    EXPECT_EQ(many.shifts, gen_phase_shifts(zf, 16, 99).shifts);
    EXPECT_NE(many.shifts, gen_phase_shifts(zf, 16, 100).shifts);
    EXPECT_THROW(gen_phase_shifts(zf, 0, 1), Error);
}

TEST(PhaseShifts, FrozenSeven) {
    // Regression: offsets from the fixed generator for count 8, seed 7.
    const std::vector<double> expected{0.0, -1.3725916636453854, 2.5467669215533029, 1.4838853673765486,
                                       1.3094664265688012, -1.7849495495119934, 2.5488196351512533, 0.97446914708835219};
    const auto set = gen_phase_shifts(ComplexSlice(8, 8), 8, 7);
    ASSERT_EQ(set.count(), 8u);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(set.shifts[i], expected[i]) << i;
}

TEST(Solvers, FullMaskNoRegularisationReproducesImage) {
    const ComplexSlice x = test_image(32, 16);
    const SamplingMask full = full_mask(32, 16);
    const ComplexSlice y = acquire(x, full);
    SolverConfig cfg;
    cfg.lambda1 = cfg.lambda2 = 0.0;

    EXPECT_LT(max_abs_diff(recon_cspr(y, full, cfg).image, x), 1e-10);
    EXPECT_LT(max_abs_diff(recon_cspc(y, full, cfg, gen_phase_shifts(x, 4, 1)).image, x), 1e-10);
    EXPECT_LT(max_abs_diff(recon_magnitude_cs(y, full, cfg).image, x), 1e-10);

    // Without the final projection the iterates themselves must get there.
    cfg.enforce_data_consistency = false;
    EXPECT_LT(max_abs_diff(recon_cspr(y, full, cfg).image, x), 1e-10);
    RealSlice phi(32, 16);
    for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = std::arg(x[i]);
    const auto mag = recon_magnitude_cs(y, full, phi, cfg);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(mag.magnitude[i], std::abs(x[i]), 1e-10);
}

TEST(Solvers, ZeroRegularisationFullMaskIsZeroFill) {
    const ComplexSlice x = test_image(32, 16);
    const SamplingMask full = full_mask(32, 16);
    const ComplexSlice y = acquire(x, full);
    SolverConfig cfg;
    cfg.lambda1 = cfg.lambda2 = 0.0;
    const ComplexSlice zf = zero_fill_recon(y, full);
    EXPECT_LT(max_abs_diff(recon_cspc(y, full, cfg, gen_phase_shifts(zf, 8, 3)).image, zf), 1e-10);
}

TEST(Solvers, DataConsistencyNeverWorseThanZeroFill) {
    const ComplexSlice x = test_image(32, 16);
    const SamplingMask mask = small_mask(32, 16, 3.0, 5);
    const ComplexSlice y = acquire(x, mask);
    SolverConfig cfg;
    cfg.max_outer = 20;
    const double zf = residual(zero_fill_recon(y, mask), y, mask);
    const double scale = std::sqrt(squared_norm(y.data));
    EXPECT_LE(residual(recon_magnitude_cs(y, mask, cfg).image, y, mask), zf + 1e-12 * scale);
    EXPECT_LE(residual(recon_cspr(y, mask, cfg).image, y, mask), zf + 1e-12 * scale);
    EXPECT_LE(residual(recon_cspc(y, mask, cfg, gen_phase_shifts(x, 8, 1)).image, y, mask), zf + 1e-12 * scale);
}

TEST(Solvers, CostHistoriesNonIncreasing) {
    const ComplexSlice x = test_image(32, 16);
    const SamplingMask mask = small_mask(32, 16, 3.0, 5);
    const ComplexSlice y = acquire(x, mask);
    SolverConfig cfg;
    cfg.max_outer = 40;
    expect_non_increasing(recon_magnitude_cs(y, mask, cfg).history);
    expect_non_increasing(recon_cspr(y, mask, cfg).history);
    expect_non_increasing(recon_cspc(y, mask, cfg, gen_phase_shifts(x, 8, 1)).history);
}

TEST(Solvers, GlobalPhaseEquivariance) {
    const ComplexSlice x = test_image(32, 16);
    const SamplingMask mask = small_mask(32, 16, 3.0, 5);
    const ComplexSlice y = acquire(x, mask);
    ComplexSlice rotated = y;
    for (auto& c : rotated.data) c *= std::polar(1.0, 0.7);
    SolverConfig cfg;
    cfg.max_outer = 30;
    const auto shifts = gen_phase_shifts(x, 8, 11);

    const auto a = recon_cspc(y, mask, cfg, shifts);
    const auto b = recon_cspc(rotated, mask, cfg, shifts);
    for (std::size_t i = 0; i < a.magnitude.size(); ++i) EXPECT_NEAR(a.magnitude[i], b.magnitude[i], 1e-6);

    const auto c = recon_cspr(y, mask, cfg);
    const auto d = recon_cspr(rotated, mask, cfg);
    for (std::size_t i = 0; i < c.magnitude.size(); ++i) EXPECT_NEAR(c.magnitude[i], d.magnitude[i], 1e-6);
}

TEST(Solvers, ShiftSetGaugeInvariance) {
    const ComplexSlice x = test_image(32, 16);
    const SamplingMask mask = small_mask(32, 16, 3.0, 5);
    const ComplexSlice y = acquire(x, mask);
    SolverConfig cfg;
    cfg.max_outer = 30;
    const auto shifts = gen_phase_shifts(x, 8, 11);
    PhaseShiftSet moved = shifts;
    for (double& s : moved.shifts) s += 1.234;
    const auto a = recon_cspc(y, mask, cfg, shifts);
    const auto b = recon_cspc(y, mask, cfg, moved);
    for (std::size_t i = 0; i < a.magnitude.size(); ++i) EXPECT_NEAR(a.magnitude[i], b.magnitude[i], 1e-8);
}

TEST(Solvers, Deterministic) {
    const ComplexSlice x = test_image(32, 16);
    const SamplingMask mask = small_mask(32, 16, 3.0, 5);
    const ComplexSlice y = acquire(x, mask);
    SolverConfig cfg;
    cfg.max_outer = 15;
    const auto shifts = gen_phase_shifts(x, 8, 2);
    EXPECT_EQ(recon_cspc(y, mask, cfg, shifts).image.data, recon_cspc(y, mask, cfg, shifts).image.data);
    EXPECT_EQ(recon_cspr(y, mask, cfg).image.data, recon_cspr(y, mask, cfg).image.data);
}

TEST(Solvers, InvalidConfiguration) {
    const ComplexSlice x = test_image(16, 16);
    const SamplingMask full = full_mask(16, 16);
    SolverConfig cfg;
    cfg.lambda1 = -1.0;
    EXPECT_THROW(recon_cspr(x, full, cfg), Error);
    cfg = {};
    cfg.step_scale = 1.5;
    EXPECT_THROW(recon_magnitude_cs(x, full, cfg), Error);
    cfg = {};
    EXPECT_THROW(recon_cspc(x, full, cfg, PhaseShiftSet{}), Error);
    EXPECT_THROW(recon_magnitude_cs(x, full, RealSlice(8, 16), cfg), Error);
    EXPECT_THROW(recon_cspr(x, full_mask(8, 16), cfg), Error);
}

TEST(Solvers, NonConvergenceIsReportedNotThrown) {
    const ComplexSlice x = test_image(32, 16);
    const SamplingMask mask = small_mask(32, 16, 3.0, 5);
    SolverConfig cfg;
    cfg.max_outer = 1;
    cfg.tol = 1e-15;
    const auto r = recon_cspr(acquire(x, mask), mask, cfg);
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 1);
    EXPECT_EQ(r.history.size(), 2u);
}

TEST(SolverRegression, PhantomSliceMagnitudeCs) {
    const auto& s = phantom_slice();
    SolverConfig cfg;
    const auto r = recon_magnitude_cs(s.y, s.mask, cfg);
    expect_non_increasing(r.history);
    EXPECT_NEAR(s.magnitude_psnr(r.magnitude), 20.776063481027478, 1e-6);
}

TEST(SolverRegression, PhantomSliceCsprPhaseBeatsZeroFill) {
    const auto& s = phantom_slice();
    const auto r = recon_cspr(s.y, s.mask, SolverConfig{});
    expect_non_increasing(r.history);
    const double zf = s.phase_rmse(s.zero_fill);
    const double pr = s.phase_rmse(r.image);
    EXPECT_LT(pr, zf);
    EXPECT_NEAR(zf, 0.098501866708961258, 1e-9);
    EXPECT_NEAR(pr, 0.089715908242641224, 1e-6);
}

TEST(SolverRegression, PhantomSliceCspc) {
    const auto& s = phantom_slice();
    const auto r = recon_cspc(s.y, s.mask, SolverConfig{}, gen_phase_shifts(s.zero_fill, 8, 42));
    expect_non_increasing(r.history);
    const double zf = s.psnr(s.zero_fill);
    const double pc = s.psnr(r.image);
    EXPECT_GT(pc, zf);
    EXPECT_NEAR(zf, 18.905355035943778, 1e-9);
    EXPECT_NEAR(pc, 21.141048265206045, 1e-6);
}

TEST(VolumeRecon, ThreadCountDoesNotChangeResult) {
    ComplexVolume img({4, 32, 16});
    const ComplexSlice x = test_image(32, 16);
    for (int i = 0; i < 4; ++i) {
        ComplexSlice s = x;
        for (auto& c : s.data) c *= (1.0 + 0.1 * i);
        set_plane(img, i, s);
    }
    const SamplingMask mask = small_mask(32, 16, 3.0, 5);
    ComplexVolume k = dft_centered(img);
    apply_mask(k, mask);
    SolverConfig cfg;
    cfg.max_outer = 10;
    const auto a = recon_volume(k, mask, CsMethod::cspc, cfg, 8, 3, 1);
    const auto b = recon_volume(k, mask, CsMethod::cspc, cfg, 8, 3, 3);
    EXPECT_EQ(a.image.data, b.image.data);
    ASSERT_EQ(a.history.size(), b.history.size());
    for (std::size_t i = 1; i < a.history.size(); ++i) EXPECT_LE(a.history[i].total, a.history[i - 1].total + 1e-9);
}

TEST(VolumeRecon, ZeroDataGivesZeroImage) {
    const ComplexVolume k({2, 16, 16}, Domain::kspace);
    const auto r = recon_volume(k, full_mask(16, 16), CsMethod::cspr);
    for (const cplx& c : r.image.data) EXPECT_EQ(c, cplx(0.0, 0.0));
}

TEST(VolumeRecon, CostCsvLayout) {
    const std::string csv = cost_history_csv({{1.0, 0.5, 0.25, 1.75}, {0.5, 0.25, 0.125, 0.875}});
    EXPECT_EQ(csv, "iteration,data_term,reg_m,reg_phi,total\n0,1,0.5,0.25,1.75\n1,0.5,0.25,0.125,0.875\n");
}
