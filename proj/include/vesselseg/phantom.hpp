// Synthetic fundus-like phantom: dark smooth curves on a textured, vignetted
// background inside a circular aperture, with the exact vessel mask.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "vesselseg/errors.hpp"
#include "vesselseg/image.hpp"
#include "vesselseg/random.hpp"

namespace vesselseg {

struct Phantom {
    GrayImage image;
    BinaryMask truth;
    BinaryMask fov;
};

struct PhantomStyle {
    double fov_radius_fraction = 0.46;  // of min(width, height)
    double background = 0.62;
    double vignette = 0.12;
    double texture_sigma = 0.025;
    double min_contrast = 0.12;
    double max_contrast = 0.26;
    double min_width = 1.0;
    double max_width = 5.0;
};

inline Phantom generate_phantom(int width, int height, int n_vessels, std::uint64_t seed,
                                const PhantomStyle& style = {}) {
    if (width < 64 || height < 64) throw ConfigError("phantom dimensions must be >= 64");
    if (n_vessels < 0) throw ConfigError("phantom vessel count must be non-negative");

    Rng rng(seed);
    const double cx = (width - 1) / 2.0;
    const double cy = (height - 1) / 2.0;
    const double radius = style.fov_radius_fraction * std::min(width, height);

    Phantom ph{GrayImage(width, height, 0.0), BinaryMask(width, height, 0), BinaryMask(width, height, 0)};
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            ph.fov(x, y) = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius ? 1 : 0;

    // Vessel darkening per pixel; overlapping vessels keep the strongest.
    GrayImage darkening(width, height, 0.0);
    for (int v = 0; v < n_vessels; ++v) {
        const double vessel_width = rng.uniform(style.min_width, style.max_width);
        const double contrast = rng.uniform(style.min_contrast, style.max_contrast);
        const double r0 = 0.8 * radius * std::sqrt(rng.uniform());
        const double a0 = 2.0 * std::numbers::pi * rng.uniform();
        double px = cx + r0 * std::cos(a0);
        double py = cy + r0 * std::sin(a0);
        double heading = 2.0 * std::numbers::pi * rng.uniform();
        double curvature = 0.0;
        const double length = rng.uniform(0.6, 1.6) * radius;
        const double step = 0.5;
        const double reach = vessel_width / 2.0;
        for (double travelled = 0.0; travelled < length; travelled += step) {
            curvature = std::clamp(curvature + rng.normal(0.0, 0.002), -0.015, 0.015);
            heading += curvature * step;
            px += step * std::cos(heading);
            py += step * std::sin(heading);
            const int x0 = static_cast<int>(std::floor(px - reach)), x1 = static_cast<int>(std::ceil(px + reach));
            const int y0 = static_cast<int>(std::floor(py - reach)), y1 = static_cast<int>(std::ceil(py + reach));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    if (!ph.fov.contains(x, y) || !ph.fov(x, y)) continue;
                    if ((x - px) * (x - px) + (y - py) * (y - py) > reach * reach) continue;
                    ph.truth(x, y) = 1;
                    darkening(x, y) = std::max(darkening(x, y), contrast);
                }
            }
        }
    }

    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            if (!ph.fov(x, y)) continue;
            const double rr = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy)) / radius;
            const double base = style.background - style.vignette * rr * rr;
            const double value = base - darkening(x, y) + rng.normal(0.0, style.texture_sigma);
            ph.image(x, y) = std::clamp(value, 0.0, 1.0);
        }
    }
    return ph;
}

}  // namespace vesselseg
