// Rank-based local adaptive histogram equalization restricted to the field of view.
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

#include "vesselseg/errors.hpp"
#include "vesselseg/image.hpp"

namespace vesselseg {

struct AheConfig {
    int window = 31;  // odd side length
    bool fov_restricted = true;

    bool operator==(const AheConfig&) const = default;
};

inline void validate(const AheConfig& cfg) {
    if (cfg.window < 3 || cfg.window % 2 == 0)
        throw ConfigError("AHE window must be odd and >= 3, got " + std::to_string(cfg.window));
}

/// Each FOV pixel becomes its fractional rank within the clipped window:
///   (#{v(q) < v(p)} + 0.5 * #{q != p : v(q) = v(p)}) / (|W| - 1).
/// A strict local minimum maps to 0, a strict maximum to 1, and a pixel whose window
/// is all ties to exactly 0.5. Pixels outside the FOV are 0. A FOV pixel with no
/// neighbours inside its window is mapped to 0.5.
inline GrayImage local_adaptive_hist_eq(const GrayImage& img, const BinaryMask& fov,
                                        const AheConfig& cfg = {}) {
    require_same_shape(img, fov, "local_adaptive_hist_eq");
    validate(cfg);
    const int half = cfg.window / 2;
    const int w = img.width();
    const int h = img.height();
    GrayImage out(w, h, 0.0);

    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - half);
        const int y1 = std::min(h - 1, y + half);
        for (int x = 0; x < w; ++x) {
            if (!fov(x, y)) continue;
            const int x0 = std::max(0, x - half);
            const int x1 = std::min(w - 1, x + half);
            const double v = img(x, y);
            // Counts the centre pixel as a tie; removed below.
            std::int64_t less = 0, equal = 0, members = 0;
            for (int yy = y0; yy <= y1; ++yy) {
                const double* row = img.row(yy).data();
                const std::uint8_t* frow = fov.row(yy).data();
                if (cfg.fov_restricted) {
                    for (int xx = x0; xx <= x1; ++xx) {
                        const std::int64_t in = frow[xx] != 0;
                        less += in & (row[xx] < v);
                        equal += in & (row[xx] == v);
                        members += in;
                    }
                } else {
                    for (int xx = x0; xx <= x1; ++xx) {
                        less += row[xx] < v;
                        equal += row[xx] == v;
                    }
                    members += x1 - x0 + 1;
                }
            }
            equal -= 1;
            const std::int64_t denom = members - 1;
            out(x, y) = denom == 0 ? 0.5
                                   : static_cast<double>(2 * less + equal) /
                                         static_cast<double>(2 * denom);
        }
    }
    return out;
}

/// 1 - v inside the FOV, 0 outside.
inline GrayImage invert(const GrayImage& img, const BinaryMask& fov) {
    require_same_shape(img, fov, "invert");
    GrayImage out(img.width(), img.height(), 0.0);
    for (std::size_t i = 0; i < img.size(); ++i)
        if (fov[i]) out[i] = 1.0 - img[i];
    return out;
}

}  // namespace vesselseg
