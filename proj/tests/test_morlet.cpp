#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "vesselseg/morlet.hpp"

using namespace vesselseg;

namespace {

double max_abs_diff(const ComplexImage& a, const ComplexImage& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs(const ComplexImage& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

ComplexImage oracle_response(const GrayImage& img, double a, double theta, const MorletParams& p, int half) {
    return oracle::correlate(img, half, [&](int ux, int uy) {
        return oracle::morlet(a, theta, p.k0[0], p.k0[1], p.epsilon, ux, uy);
    });
}

}  // namespace

TEST(MorletKernel, CentreSampleIsOneOverScale) {
    for (double a : {1.0, 2.0, 4.0, 8.0})
        for (double theta : {0.0, 30.0, 170.0}) {
            const auto k = morlet_kernel(a, theta, {}, 21);
            EXPECT_EQ(k.at(0, 0), std::complex<double>(1.0 / a, 0.0));
        }
}

TEST(MorletKernel, MatchesClosedForm) {
    const MorletParams p;
    for (double theta : {0.0, 40.0, 130.0}) {
        const auto k = morlet_kernel(3.0, theta, p, 31);
        for (int uy = -15; uy <= 15; ++uy)
            for (int ux = -15; ux <= 15; ++ux)
                ASSERT_LT(std::abs(k.at(ux, uy) - oracle::morlet(3.0, theta, 0.0, 3.0, 4.0, ux, uy)), 1e-15);
    }
}

TEST(MorletKernel, IsotropicEnvelopeRotatesWithTheGrid) {
    MorletParams p;
    p.epsilon = 1.0;
    const auto k0 = morlet_kernel(2.0, 0.0, p, 21);
    const auto k90 = morlet_kernel(2.0, 90.0, p, 21);
    // (ux, uy) -> (uy, -ux) is a quarter turn of the sampling grid
    for (int uy = -10; uy <= 10; ++uy)
        for (int ux = -10; ux <= 10; ++ux) ASSERT_NEAR(std::abs(k90.at(ux, uy)), std::abs(k0.at(uy, -ux)), 1e-15);
}

TEST(MorletKernel, DilationHalvesModulusAtMatchedArguments) {
    const auto k1 = morlet_kernel(1.0, 25.0, {}, 41);
    const auto k2 = morlet_kernel(2.0, 25.0, {}, 81);
    for (int y = -20; y <= 20; ++y)
        for (int x = -20; x <= 20; ++x)
            ASSERT_NEAR(std::abs(k2.at(2 * x, 2 * y)), 0.5 * std::abs(k1.at(x, y)), 1e-15);
}

TEST(MorletKernel, DefaultSupport) {
    EXPECT_EQ(default_support(2.0, {}), 41);
    EXPECT_EQ(default_support(4.0, {}), 81);
    EXPECT_EQ(default_support(8.0, {}), 161);
    MorletParams iso;
    iso.epsilon = 1.0;
    EXPECT_EQ(default_support(1.5, iso), 17);
    EXPECT_EQ(morlet_kernel(2.0, 0.0, {}).support(), 41);
}

TEST(MorletKernel, RejectsBadArguments) {
    EXPECT_THROW(morlet_kernel(0.0, 0.0, {}), ConfigError);
    EXPECT_THROW(morlet_kernel(2.0, 0.0, {}, 20), ConfigError);
    MorletParams bad;
    bad.epsilon = 0.0;
    EXPECT_THROW(morlet_kernel(2.0, 0.0, bad), ConfigError);
}

TEST(CwtResponse, ZeroImageGivesZero) {
    const auto k = morlet_kernel(2.0, 30.0, {}, 21);
    const auto r = cwt_response(GrayImage(32, 32, 0.0), k);
    EXPECT_EQ(max_abs(r), 0.0);
}

TEST(CwtResponse, ImpulseGivesReflectedKernel) {
    const auto k = morlet_kernel(2.0, 50.0, {}, 21);
    GrayImage img(40, 36, 0.0);
    const int cx = 17, cy = 20;
    img(cx, cy) = 1.0;
    for (auto backend : {CwtBackend::fft, CwtBackend::direct}) {
        const auto r = cwt_response(img, k, backend);
        for (int by = 0; by < 36; ++by)
            for (int bx = 0; bx < 40; ++bx) {
                const int ux = cx - bx, uy = cy - by;
                const auto want =
                    std::abs(ux) <= k.half && std::abs(uy) <= k.half ? k.at(ux, uy) : std::complex<double>(0.0);
                ASSERT_LT(std::abs(r(bx, by) - want), 1e-12) << bx << "," << by;
            }
    }
}

TEST(CwtResponse, FftMatchesBruteForceSum) {
    const MorletParams p;
    for (std::uint32_t seed = 0; seed < 3; ++seed) {
        const auto img = oracle::random_image(32, 32, seed);
        for (double a : {2.0, 4.0, 8.0})
            for (double theta : {0.0, 70.0, 160.0}) {
                const auto k = morlet_kernel(a, theta, p, 31);
                const auto want = oracle_response(img, a, theta, p, 15);
                const auto fft = cwt_response(img, k, CwtBackend::fft);
                const auto direct = cwt_response(img, k, CwtBackend::direct);
                EXPECT_LE(max_abs_diff(fft, want) / max_abs(want), 1e-6);
                EXPECT_LE(max_abs_diff(direct, want) / max_abs(want), 1e-12);
            }
    }
}

TEST(CwtResponse, NonSquareImage) {
    const auto img = oracle::random_image(57, 45, 8);
    const auto k = morlet_kernel(2.0, 20.0, {}, 0);
    EXPECT_LE(max_abs_diff(cwt_response(img, k), oracle_response(img, 2.0, 20.0, {}, 20)), 1e-9);
}

TEST(CwtResponse, Linearity) {
    for (std::uint32_t seed = 0; seed < 5; ++seed) {
        const auto f = oracle::random_image(32, 32, 2 * seed);
        const auto g = oracle::random_image(32, 32, 2 * seed + 1);
        const double alpha = 0.7, beta = -1.9;
        GrayImage mix(32, 32);
        for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * f[i] + beta * g[i];
        const auto k = morlet_kernel(4.0, 110.0, {}, 31);
        const auto rf = cwt_response(f, k), rg = cwt_response(g, k), rm = cwt_response(mix, k);
        for (std::size_t i = 0; i < rm.size(); ++i) ASSERT_LT(std::abs(rm[i] - (alpha * rf[i] + beta * rg[i])), 1e-9);
    }
}

TEST(CwtResponse, KernelLargerThanImageIsRejected) {
    const auto k = morlet_kernel(8.0, 0.0, {});
    EXPECT_THROW(cwt_response(GrayImage(32, 32, 0.0), k), DimensionMismatch);
}

TEST(MaxModulus, ZeroImage) {
    const auto out = max_modulus_over_angles(GrayImage(48, 48, 0.0), 2.0, {}, {});
    for (double v : out.values()) ASSERT_EQ(v, 0.0);
}

TEST(MaxModulus, SingleAngleEqualsModulus) {
    const auto img = oracle::random_image(48, 48, 3);
    SweepConfig cfg{{2.0}, {0.0}};
    const auto out = max_modulus_over_angles(img, 2.0, cfg, {});
    const auto r = cwt_response(img, morlet_kernel(2.0, 0.0, {}));
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out[i], std::abs(r[i]));
}

TEST(MaxModulus, HorizontalBarSelectsZeroDegrees) {
    GrayImage img(96, 96, 0.0);
    for (int y = 47; y <= 49; ++y)
        for (int x = 10; x < 86; ++x) img(x, y) = 1.0;
    const MorletParams p;
    const auto angles = angle_grid(10.0);
    ASSERT_EQ(angles.size(), 18u);
    for (int x : {30, 48, 66}) {
        double best = -1.0, best_angle = -1.0, at90 = 0.0;
        for (double theta : angles) {
            const double m = std::abs(cwt_response(img, morlet_kernel(2.0, theta, p))(x, 48));
            if (m > best) best = m, best_angle = theta;
            if (theta == 90.0) at90 = m;
        }
        EXPECT_EQ(best_angle, 0.0);
        EXPECT_GT(best, at90);
        EXPECT_EQ(max_modulus_over_angles(img, 2.0, {{2.0}, angles}, p)(x, 48), best);
    }
}

TEST(MaxModulus, AngleOrderAndInclusion) {
    const auto img = oracle::random_image(48, 48, 12);
    const MorletParams p;
    const auto base = max_modulus_over_angles(img, 2.0, {{2.0}, {0.0, 60.0, 120.0}}, p);
    const auto shuffled = max_modulus_over_angles(img, 2.0, {{2.0}, {120.0, 0.0, 60.0}}, p);
    const auto larger = max_modulus_over_angles(img, 2.0, {{2.0}, {0.0, 30.0, 60.0, 120.0, 170.0}}, p);
    EXPECT_EQ(base, shuffled);
    for (std::size_t i = 0; i < base.size(); ++i) ASSERT_GE(larger[i], base[i]);
}

TEST(Sweep, AngleGridAndValidation) {
    const auto g = angle_grid(10.0);
    EXPECT_EQ(g.front(), 0.0);
    EXPECT_EQ(g.back(), 170.0);
    EXPECT_THROW(validate(SweepConfig{{}, {0.0}}), ConfigError);
    EXPECT_THROW(validate(SweepConfig{{2.0}, {0.0, 0.0}}), ConfigError);
    EXPECT_THROW(validate(SweepConfig{{2.0}, {180.0}}), ConfigError);
}

TEST(FeatureStack, DefaultDepthAndChannels) {
    const auto img = oracle::random_image(170, 170, 21);
    const SweepConfig cfg;
    const MorletParams p;
    const auto stack = build_feature_stack(img, cfg, p);
    ASSERT_EQ(stack.depth(), 4);
    EXPECT_FALSE(stack.normalized);
    EXPECT_EQ(stack.channels[0], img);
    for (std::size_t s = 0; s < cfg.scales.size(); ++s)
        EXPECT_EQ(stack.channels[s + 1], max_modulus_over_angles(img, cfg.scales[s], cfg, p));
}

TEST(FeatureStack, ZeroImageAllChannelsZero) {
    const auto stack = build_feature_stack(GrayImage(170, 170, 0.0), {}, {});
    for (const auto& ch : stack.channels)
        for (double v : ch.values()) ASSERT_EQ(v, 0.0);
}

TEST(FeatureStats, TwoPointPopulationStats) {
    FeatureStack s;
    GrayImage ch(3, 1, 9.0);
    ch(0, 0) = 1.0;
    ch(2, 0) = 3.0;
    s.channels.push_back(ch);
    BinaryMask fov(3, 1, 1);
    fov(1, 0) = 0;
    const auto st = compute_feature_stats(s, fov);
    EXPECT_EQ(st.mean[0], 2.0);
    EXPECT_EQ(st.stddev[0], 1.0);
}

TEST(FeatureStats, ConstantChannelIsDegenerate) {
    FeatureStack s;
    s.channels = {oracle::random_image(5, 5, 1), GrayImage(5, 5, 0.25)};
    EXPECT_THROW(compute_feature_stats(s, BinaryMask(5, 5, 1)), DegenerateChannel);
}

TEST(FeatureStats, NeedsTwoFovPixels) {
    FeatureStack s;
    s.channels = {oracle::random_image(5, 5, 1)};
    BinaryMask fov(5, 5, 0);
    fov(2, 2) = 1;
    EXPECT_THROW(compute_feature_stats(s, fov), InsufficientPixels);
}

TEST(FeatureStats, PooledHalvesEqualWhole) {
    FeatureStack s;
    s.channels = {oracle::random_image(20, 10, 4), oracle::random_image(20, 10, 5, -3.0, 7.0)};
    BinaryMask left(20, 10, 0), right(20, 10, 0), whole(20, 10, 1);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 20; ++x) (x < 8 ? left : right)(x, y) = 1;
    const auto a = compute_feature_stats(s, left);
    const auto b = compute_feature_stats(s, right);
    const auto w = compute_feature_stats(s, whole);
    const double na = 80.0, nb = 120.0;
    for (std::size_t c = 0; c < 2; ++c) {
        const double mean = (na * a.mean[c] + nb * b.mean[c]) / (na + nb);
        const double m2 = na * (a.stddev[c] * a.stddev[c] + a.mean[c] * a.mean[c]) +
                          nb * (b.stddev[c] * b.stddev[c] + b.mean[c] * b.mean[c]);
        EXPECT_NEAR(w.mean[c], mean, 1e-12);
        EXPECT_NEAR(w.stddev[c], std::sqrt(m2 / (na + nb) - mean * mean), 1e-12);
    }
}

TEST(Normalize, MeanAndOneSigmaPoints) {
    FeatureStack s;
    GrayImage ch(3, 1);
    ch(0, 0) = 5.0;
    ch(1, 0) = 7.0;
    ch(2, 0) = 1.0;
    s.channels = {ch};
    const FeatureStats st{{5.0}, {2.0}};
    const auto z = normalize_features(s, st, BinaryMask(3, 1, 1));
    EXPECT_TRUE(z.normalized);
    EXPECT_EQ(z.channels[0](0, 0), 0.0);
    EXPECT_EQ(z.channels[0](1, 0), 1.0);
    EXPECT_EQ(z.channels[0](2, 0), -2.0);
}

TEST(Normalize, RecomputedStatsAreStandardAndIdempotent) {
    const auto img = oracle::random_image(170, 170, 30);
    BinaryMask fov(170, 170, 0);
    for (int y = 0; y < 170; ++y)
        for (int x = 0; x < 170; ++x) fov(x, y) = std::hypot(x - 84.5, y - 84.5) < 80.0 ? 1 : 0;
    const auto stack = build_feature_stack(img, {}, {});
    const auto z = normalize_features(stack, compute_feature_stats(stack, fov), fov);
    for (int c = 0; c < z.depth(); ++c) {
        const auto [mean, sd] = oracle::moments(z.channels[static_cast<std::size_t>(c)], fov);
        EXPECT_NEAR(mean, 0.0, 1e-10);
        EXPECT_NEAR(sd, 1.0, 1e-10);
    }
    const auto again = normalize_features(z, compute_feature_stats(z, fov), fov);
    for (int c = 0; c < z.depth(); ++c)
        for (std::size_t i = 0; i < fov.size(); ++i)
            ASSERT_NEAR(again.channels[static_cast<std::size_t>(c)][i], z.channels[static_cast<std::size_t>(c)][i], 1e-9);
}

TEST(Normalize, StatsDepthMismatch) {
    FeatureStack s;
    s.channels = {GrayImage(3, 3, 0.0), GrayImage(3, 3, 0.0)};
    EXPECT_THROW(normalize_features(s, {{0.0}, {1.0}}, BinaryMask(3, 3, 1)), DimensionMismatch);
}
