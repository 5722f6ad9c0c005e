// Multi-scale, multi-orientation 2-D Morlet wavelet features.
//
// The analysing wavelet is psi(x) = exp(i k0.x) exp(-1/2 |A x|^2) with
// A = diag(eps^-1/2, 1). For dilation a and rotation theta the correlation
// kernel is k(u) = conj(psi(a^-1 r_-theta u)) * C_psi^-1/2 / a, and the
// response at displacement b is T(b) = sum_x k(x - b) f(x).
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "vesselseg/errors.hpp"
#include "vesselseg/image.hpp"

namespace vesselseg {

struct MorletParams {
    std::array<double, 2> k0 = {0.0, 3.0};
    double epsilon = 4.0;
    double c_psi = 1.0;

    bool operator==(const MorletParams&) const = default;
};

inline std::vector<double> angle_grid(double step_degrees) {
    if (!(step_degrees > 0.0) || step_degrees > 180.0)
        throw ConfigError("angle step must be in (0, 180]");
    std::vector<double> angles;
    for (int i = 0;; ++i) {
        const double a = i * step_degrees;
        if (a >= 180.0 - 1e-9) break;
        angles.push_back(a);
    }
    return angles;
}

struct SweepConfig {
    std::vector<double> scales = {2.0, 4.0, 8.0};
    std::vector<double> angles = angle_grid(10.0);  // 0, 10, ..., 170

    bool operator==(const SweepConfig&) const = default;
};

inline void validate(const MorletParams& p) {
    if (!(p.epsilon >= 1.0)) throw ConfigError("morlet epsilon must be >= 1");
    if (!std::isfinite(p.k0[0]) || !std::isfinite(p.k0[1])) throw ConfigError("morlet k0 must be finite");
    if (!(p.c_psi > 0.0)) throw ConfigError("morlet C_psi must be positive");
}

inline void validate(const SweepConfig& cfg) {
    if (cfg.scales.empty()) throw ConfigError("at least one scale is required");
    for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
        if (!(cfg.scales[i] > 0.0)) throw ConfigError("scales must be positive");
        if (i > 0 && !(cfg.scales[i] > cfg.scales[i - 1]))
            throw ConfigError("scales must be strictly increasing");
    }
    if (cfg.angles.empty()) throw ConfigError("at least one angle is required");
    auto sorted = cfg.angles;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("angles must be unique");
    if (sorted.front() < 0.0 || sorted.back() >= 180.0) throw ConfigError("angles must lie in [0, 180)");
}

/// Square complex correlation kernel; values(half + ux, half + uy) holds k(ux, uy).
struct ComplexKernel {
    int half = 0;
    ComplexImage values;

    int support() const noexcept { return 2 * half + 1; }
    std::complex<double> at(int ux, int uy) const { return values(half + ux, half + uy); }
};

/// Smallest odd integer >= 10 * a * max(1, sqrt(eps)) + 1.
inline int default_support(double scale, const MorletParams& params) {
    const double reach = 10.0 * scale * std::max(1.0, std::sqrt(params.epsilon)) + 1.0;
    int s = static_cast<int>(std::ceil(reach - 1e-9));
    if (s % 2 == 0) ++s;
    return s;
}

/// `support` = 0 selects default_support().
inline ComplexKernel morlet_kernel(double scale, double angle_degrees, const MorletParams& params,
                                   int support = 0) {
    validate(params);
    if (!(scale > 0.0)) throw ConfigError("scale must be positive");
    if (support == 0) support = default_support(scale, params);
    if (support < 1 || support % 2 == 0) throw ConfigError("kernel support must be odd and positive");

    const double theta = angle_degrees * std::numbers::pi / 180.0;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    const double inv_sqrt_eps = 1.0 / std::sqrt(params.epsilon);
    const double amplitude = 1.0 / (std::sqrt(params.c_psi) * scale);

    ComplexKernel k{support / 2, ComplexImage(support, support)};
    for (int uy = -k.half; uy <= k.half; ++uy) {
        for (int ux = -k.half; ux <= k.half; ++ux) {
            // x = a^-1 r_-theta u
            const double x0 = (c * ux + s * uy) / scale;
            const double x1 = (-s * ux + c * uy) / scale;
            const double ax0 = x0 * inv_sqrt_eps;
            const double envelope = std::exp(-0.5 * (ax0 * ax0 + x1 * x1));
            const double phase = params.k0[0] * x0 + params.k0[1] * x1;
            // complex conjugate of exp(i phase)
            k.values(ux + k.half, uy + k.half) =
                amplitude * envelope * std::complex<double>(std::cos(phase), -std::sin(phase));
        }
    }
    return k;
}

enum class CwtBackend { fft, direct };

/// Precomputed image spectrum, reusable for every kernel up to `max_half`.
class CwtPlan {
public:
    CwtPlan(const GrayImage& img, int max_half) : width_(img.width()), height_(img.height()), max_half_(max_half) {
        rows_ = cv::getOptimalDFTSize(height_ + max_half_);
        cols_ = cv::getOptimalDFTSize(width_ + max_half_);
        cv::Mat padded(rows_, cols_, CV_64FC2, cv::Scalar(0, 0));
        for (int y = 0; y < height_; ++y)
            for (int x = 0; x < width_; ++x) padded.at<cv::Vec2d>(y, x)[0] = img(x, y);
        cv::dft(padded, spectrum_, cv::DFT_COMPLEX_OUTPUT);
    }

    ComplexImage respond(const ComplexKernel& kernel) const {
        if (kernel.half > max_half_) throw DimensionMismatch("kernel exceeds the plan's padding");
        // g(v) = k(-v) placed circularly, so that T = f (*) g over the padded torus.
        cv::Mat g(rows_, cols_, CV_64FC2, cv::Scalar(0, 0));
        for (int uy = -kernel.half; uy <= kernel.half; ++uy) {
            const int row = ((-uy) % rows_ + rows_) % rows_;
            for (int ux = -kernel.half; ux <= kernel.half; ++ux) {
                const int col = ((-ux) % cols_ + cols_) % cols_;
                const auto v = kernel.at(ux, uy);
                g.at<cv::Vec2d>(row, col) = cv::Vec2d(v.real(), v.imag());
            }
        }
        cv::Mat g_spec, product, result;
        cv::dft(g, g_spec, cv::DFT_COMPLEX_OUTPUT);
        cv::mulSpectrums(spectrum_, g_spec, product, 0);
        cv::dft(product, result, cv::DFT_INVERSE | cv::DFT_SCALE | cv::DFT_COMPLEX_OUTPUT);

        ComplexImage out(width_, height_);
        for (int y = 0; y < height_; ++y) {
            for (int x = 0; x < width_; ++x) {
                const auto& v = result.at<cv::Vec2d>(y, x);
                out(x, y) = {v[0], v[1]};
            }
        }
        return out;
    }

private:
    int width_;
    int height_;
    int max_half_;
    int rows_ = 0;
    int cols_ = 0;
    cv::Mat spectrum_;
};

namespace detail {

inline ComplexImage cwt_direct(const GrayImage& img, const ComplexKernel& kernel) {
    const int w = img.width();
    const int h = img.height();
    ComplexImage out(w, h);
    for (int by = 0; by < h; ++by) {
        for (int bx = 0; bx < w; ++bx) {
            std::complex<double> acc = 0.0;
            const int uy0 = std::max(-kernel.half, -by);
            const int uy1 = std::min(kernel.half, h - 1 - by);
            const int ux0 = std::max(-kernel.half, -bx);
            const int ux1 = std::min(kernel.half, w - 1 - bx);
            for (int uy = uy0; uy <= uy1; ++uy)
                for (int ux = ux0; ux <= ux1; ++ux) acc += kernel.at(ux, uy) * img(bx + ux, by + uy);
            out(bx, by) = acc;
        }
    }
    return out;
}

inline void require_kernel_fits(const GrayImage& img, const ComplexKernel& kernel) {
    if (kernel.support() > std::min(img.width(), img.height()))
        throw DimensionMismatch("kernel support " + std::to_string(kernel.support()) +
                                " exceeds image dimension " +
                                std::to_string(std::min(img.width(), img.height())));
}

}  // namespace detail

/// T(b) = sum_u k(u) f(b + u) with f zero-extended beyond the image.
inline ComplexImage cwt_response(const GrayImage& img, const ComplexKernel& kernel,
                                 CwtBackend backend = CwtBackend::fft) {
    detail::require_kernel_fits(img, kernel);
    if (backend == CwtBackend::direct) return detail::cwt_direct(img, kernel);
    return CwtPlan(img, kernel.half).respond(kernel);
}

/// Per-pixel maximum of |T| over cfg.angles at one dilation.
/// `support` = 0 selects default_support().
inline GrayImage max_modulus_over_angles(const GrayImage& img, double scale, const SweepConfig& cfg,
                                         const MorletParams& params,
                                         CwtBackend backend = CwtBackend::fft, int support = 0) {
    if (cfg.angles.empty()) throw ConfigError("angle sweep is empty");
    if (support == 0) support = default_support(scale, params);
    GrayImage out(img.width(), img.height(), 0.0);
    std::optional<CwtPlan> plan;
    for (double angle : cfg.angles) {
        const auto kernel = morlet_kernel(scale, angle, params, support);
        detail::require_kernel_fits(img, kernel);
        ComplexImage response;
        if (backend == CwtBackend::fft) {
            if (!plan) plan.emplace(img, kernel.half);
            response = plan->respond(kernel);
        } else {
            response = detail::cwt_direct(img, kernel);
        }
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], std::abs(response[i]));
    }
    return out;
}

/// Channel 0 is the intensity; channel s is the max-modulus response at scales[s - 1].
struct FeatureStack {
    std::vector<GrayImage> channels;
    bool normalized = false;

    int width() const noexcept { return channels.empty() ? 0 : channels.front().width(); }
    int height() const noexcept { return channels.empty() ? 0 : channels.front().height(); }
    int depth() const noexcept { return static_cast<int>(channels.size()); }

    void gather(std::size_t pixel, std::span<double> out) const {
        for (std::size_t c = 0; c < channels.size(); ++c) out[c] = channels[c][pixel];
    }
};

struct FeatureStats {
    std::vector<double> mean;
    std::vector<double> stddev;

    std::size_t depth() const noexcept { return mean.size(); }
    bool operator==(const FeatureStats&) const = default;
};

inline FeatureStack build_feature_stack(const GrayImage& intensity, const SweepConfig& cfg,
                                        const MorletParams& params,
                                        CwtBackend backend = CwtBackend::fft) {
    validate(cfg);
    validate(params);
    FeatureStack stack;
    stack.channels.reserve(cfg.scales.size() + 1);
    stack.channels.push_back(intensity);
    for (double scale : cfg.scales)
        stack.channels.push_back(max_modulus_over_angles(intensity, scale, cfg, params, backend));
    return stack;
}

/// Per-channel mean and population standard deviation over FOV pixels.
inline FeatureStats compute_feature_stats(const FeatureStack& stack, const BinaryMask& fov) {
    if (stack.channels.empty()) throw DimensionMismatch("empty feature stack");
    require_same_shape(stack.channels.front(), fov, "compute_feature_stats");
    const std::size_t n = count_true(fov);
    if (n < 2) throw InsufficientPixels("feature statistics need at least 2 FOV pixels");

    FeatureStats stats;
    for (std::size_t c = 0; c < stack.channels.size(); ++c) {
        const auto& ch = stack.channels[c];
        double sum = 0.0;
        bool constant = true;
        double first = 0.0;
        bool seen = false;
        for (std::size_t i = 0; i < ch.size(); ++i) {
            if (!fov[i]) continue;
            sum += ch[i];
            if (!seen) {
                first = ch[i];
                seen = true;
            } else if (ch[i] != first) {
                constant = false;
            }
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < ch.size(); ++i)
            if (fov[i]) ss += (ch[i] - mean) * (ch[i] - mean);
        const double sd = std::sqrt(ss / static_cast<double>(n));
        if (constant || !(sd > 0.0))
            throw DegenerateChannel("feature channel " + std::to_string(c) + " is constant over the FOV");
        stats.mean.push_back(mean);
        stats.stddev.push_back(sd);
    }
    return stats;
}

/// (v - mean) / stddev on FOV pixels, 0 elsewhere.
inline FeatureStack normalize_features(const FeatureStack& stack, const FeatureStats& stats,
                                       const BinaryMask& fov) {
    if (stats.depth() != stack.channels.size())
        throw DimensionMismatch("stats have " + std::to_string(stats.depth()) + " channels, stack has " +
                                std::to_string(stack.channels.size()));
    FeatureStack out;
    out.normalized = true;
    for (std::size_t c = 0; c < stack.channels.size(); ++c) {
        const auto& ch = stack.channels[c];
        require_same_shape(ch, fov, "normalize_features");
        GrayImage z(ch.width(), ch.height(), 0.0);
        for (std::size_t i = 0; i < ch.size(); ++i)
            if (fov[i]) z[i] = (ch[i] - stats.mean[c]) / stats.stddev[c];
        out.channels.push_back(std::move(z));
    }
    return out;
}

/// Linear rescale of [min, max] onto [0, 1]; used for response dumps.
inline GrayImage rescale_to_unit(const GrayImage& img) {
    const auto [lo, hi] = std::minmax_element(img.values().begin(), img.values().end());
    GrayImage out(img.width(), img.height(), 0.0);
    const double span = *hi - *lo;
    if (span <= 0.0) return out;
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = (img[i] - *lo) / span;
    return out;
}

}  // namespace vesselseg
