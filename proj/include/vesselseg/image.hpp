// Value-type raster containers used throughout the pipeline.
#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vesselseg/errors.hpp"

namespace vesselseg {

/// Row-major 2-D grid. Indexing is (x, y) = (column, row).
template <typename T>
class Grid {
public:
    using value_type = T;

    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height), data_(checked_size(width, height), fill) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(int x, int y) { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const { return data_[index(x, y)]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }
    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    std::span<T> row(int y) noexcept { return {data_.data() + index(0, y), std::size_t(width_)}; }
    std::span<const T> row(int y) const noexcept {
        return {data_.data() + index(0, y), std::size_t(width_)};
    }

    template <typename U>
    bool same_shape(const Grid<U>& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    bool operator==(const Grid&) const = default;

private:
    static std::size_t checked_size(int width, int height) {
        if (width <= 0 || height <= 0)
            throw DimensionMismatch("grid dimensions must be positive, got " +
                                    std::to_string(width) + "x" + std::to_string(height));
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// Real intensities; preprocessed images live in [0,1], filter responses are unbounded.
using GrayImage = Grid<double>;
using ComplexImage = Grid<std::complex<double>>;

/// Per-pixel boolean labels stored as 0/1 bytes (vessel, inside-FOV, ...).
using BinaryMask = Grid<std::uint8_t>;

struct RgbImage {
    std::array<GrayImage, 3> planes;  // R, G, B
    int bit_depth = 8;

    int width() const noexcept { return planes[0].width(); }
    int height() const noexcept { return planes[0].height(); }
    const GrayImage& red() const noexcept { return planes[0]; }
    const GrayImage& green() const noexcept { return planes[1]; }
    const GrayImage& blue() const noexcept { return planes[2]; }
};

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
    if (!a.same_shape(b))
        throw DimensionMismatch(std::string(what) + ": " + std::to_string(a.width()) + "x" +
                                std::to_string(a.height()) + " vs " +
                                std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

inline std::size_t count_true(const BinaryMask& mask) {
    return static_cast<std::size_t>(std::count_if(mask.values().begin(), mask.values().end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

inline BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b, "mask_and");
    BinaryMask out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
    return out;
}

inline BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b, "mask_or");
    BinaryMask out(a.width(), a.height());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
    return out;
}

/// true iff every set pixel of `inner` is also set in `outer`.
inline bool mask_subset(const BinaryMask& inner, const BinaryMask& outer) {
    require_same_shape(inner, outer, "mask_subset");
    for (std::size_t i = 0; i < inner.size(); ++i)
        if (inner[i] && !outer[i]) return false;
    return true;
}

/// Dice overlap 2|A∩B| / (|A|+|B|); two empty masks overlap perfectly.
inline double dice(const BinaryMask& a, const BinaryMask& b) {
    require_same_shape(a, b, "dice");
    std::size_t both = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        na += a[i] != 0;
        nb += b[i] != 0;
        both += (a[i] && b[i]);
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

}  // namespace vesselseg
