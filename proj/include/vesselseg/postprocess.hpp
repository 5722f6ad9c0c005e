// Binary clean-up of the classifier output: majority (median) filter, oriented
// line openings OR-combined, and removal of short connected components.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "vesselseg/errors.hpp"
#include "vesselseg/image.hpp"

namespace vesselseg {

struct PostConfig {
    int median_radius = 1;
    int opening_length = 9;
    int min_component_length = 10;
    std::vector<double> directions = {0.0, 30.0, 60.0, 120.0, 150.0};

    bool operator==(const PostConfig&) const = default;
};

inline void validate(const PostConfig& cfg) {
    if (cfg.median_radius < 1) throw ConfigError("post.median_radius must be >= 1");
    if (cfg.opening_length < 1 || cfg.opening_length % 2 == 0)
        throw ConfigError("post.opening_length must be odd and positive");
    if (cfg.min_component_length < 1) throw ConfigError("post.min_component_length must be >= 1");
    if (cfg.directions.empty()) throw ConfigError("post.directions must not be empty");
}

/// Digital line segment through the origin. Offsets are (dx, dy) with dy pointing down
/// the image, so 30 degrees rises to the right.
struct StructuringElement {
    double angle = 0.0;
    int length = 1;
    std::vector<std::pair<int, int>> offsets;
};

/// Bresenham-style rasterization: the major axis is stepped over [-h, h] and the minor
/// coordinate is rounded half away from zero, which keeps the set point-symmetric.
inline StructuringElement line_element(double angle_degrees, int length) {
    if (length < 1 || length % 2 == 0) throw ConfigError("line element length must be odd and positive");
    StructuringElement se{angle_degrees, length, {}};
    const double t = angle_degrees * std::numbers::pi / 180.0;
    const double dx = std::cos(t);
    const double dy = -std::sin(t);
    const int h = length / 2;
    const bool x_major = std::abs(dx) >= std::abs(dy);
    for (int s = -h; s <= h; ++s) {
        if (x_major) {
            const int step = dx >= 0 ? s : -s;
            se.offsets.emplace_back(step, static_cast<int>(std::round(step * dy / dx)));
        } else {
            const int step = dy >= 0 ? s : -s;
            se.offsets.emplace_back(static_cast<int>(std::round(step * dx / dy)), step);
        }
    }
    return se;
}

/// Majority vote over the clipped (2r+1)^2 window; an exact tie resolves to false.
inline BinaryMask median_filter_mask(const BinaryMask& mask, int radius) {
    if (radius < 1) throw ConfigError("median radius must be >= 1");
    const int w = mask.width();
    const int h = mask.height();
    // Summed-area table with a zero border row/column.
    std::vector<std::int64_t> sat(static_cast<std::size_t>(w + 1) * static_cast<std::size_t>(h + 1), 0);
    auto at = [&](int x, int y) -> std::int64_t& { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) at(x + 1, y + 1) = (mask(x, y) ? 1 : 0) + at(x, y + 1) + at(x + 1, y) - at(x, y);

    BinaryMask out(w, h, 0);
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
            const std::int64_t ones = at(x1 + 1, y1 + 1) - at(x0, y1 + 1) - at(x1 + 1, y0) + at(x0, y0);
            const std::int64_t area = static_cast<std::int64_t>(x1 - x0 + 1) * (y1 - y0 + 1);
            out(x, y) = 2 * ones > area ? 1 : 0;
        }
    }
    return out;
}

inline BinaryMask erode(const BinaryMask& mask, const StructuringElement& se) {
    BinaryMask out(mask.width(), mask.height(), 0);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y)) continue;
            bool fits = true;
            for (const auto& [dx, dy] : se.offsets) {
                const int xx = x + dx, yy = y + dy;
                if (!mask.contains(xx, yy) || !mask(xx, yy)) {
                    fits = false;
                    break;
                }
            }
            out(x, y) = fits ? 1 : 0;
        }
    }
    return out;
}

inline BinaryMask dilate(const BinaryMask& mask, const StructuringElement& se) {
    BinaryMask out(mask.width(), mask.height(), 0);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y)) continue;
            for (const auto& [dx, dy] : se.offsets) {
                const int xx = x + dx, yy = y + dy;
                if (out.contains(xx, yy)) out(xx, yy) = 1;
            }
        }
    }
    return out;
}

/// Erosion followed by dilation; pixels outside the image count as false.
inline BinaryMask directional_opening(const BinaryMask& mask, const StructuringElement& se) {
    return dilate(erode(mask, se), se);
}

inline BinaryMask combine_openings(const BinaryMask& mask, const PostConfig& cfg) {
    validate(cfg);
    BinaryMask out(mask.width(), mask.height(), 0);
    for (double angle : cfg.directions) {
        const auto opened = directional_opening(mask, line_element(angle, cfg.opening_length));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] |= opened[i];
    }
    return out;
}

/// Connected component (8-connectivity) with its bounding box.
struct Component {
    std::vector<std::size_t> pixels;
    int min_x, min_y, max_x, max_y;

    int box_width() const noexcept { return max_x - min_x + 1; }
    int box_height() const noexcept { return max_y - min_y + 1; }
};

inline std::vector<Component> connected_components(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<Component> out;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || seen[start]) continue;
        Component comp{{}, w, h, -1, -1};
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            comp.pixels.push_back(p);
            const int x = static_cast<int>(p % static_cast<std::size_t>(w));
            const int y = static_cast<int>(p / static_cast<std::size_t>(w));
            comp.min_x = std::min(comp.min_x, x);
            comp.max_x = std::max(comp.max_x, x);
            comp.min_y = std::min(comp.min_y, y);
            comp.max_y = std::max(comp.max_y, y);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if ((dx == 0 && dy == 0) || !mask.contains(xx, yy)) continue;
                    const std::size_t q = mask.index(xx, yy);
                    if (mask[q] && !seen[q]) {
                        seen[q] = 1;
                        stack.push_back(q);
                    }
                }
            }
        }
        std::sort(comp.pixels.begin(), comp.pixels.end());
        out.push_back(std::move(comp));
    }
    return out;
}

/// Deletes components whose bounding-box diagonal sqrt(w^2 + h^2) is below min_len.
inline BinaryMask remove_short_components(const BinaryMask& mask, int min_len) {
    if (min_len < 1) throw ConfigError("min component length must be >= 1");
    BinaryMask out(mask.width(), mask.height(), 0);
    const std::int64_t threshold = static_cast<std::int64_t>(min_len) * min_len;
    for (const auto& comp : connected_components(mask)) {
        const std::int64_t bw = comp.box_width(), bh = comp.box_height();
        if (bw * bw + bh * bh < threshold) continue;
        for (std::size_t p : comp.pixels) out[p] = 1;
    }
    return out;
}

/// remove_short(combine_openings(median(mask AND fov) AND fov)).
inline BinaryMask postprocess_pipeline(const BinaryMask& mask, const BinaryMask& fov, const PostConfig& cfg = {}) {
    require_same_shape(mask, fov, "postprocess_pipeline");
    validate(cfg);
    const BinaryMask smoothed = mask_and(median_filter_mask(mask_and(mask, fov), cfg.median_radius), fov);
    return remove_short_components(combine_openings(smoothed, cfg), cfg.min_component_length);
}

}  // namespace vesselseg
