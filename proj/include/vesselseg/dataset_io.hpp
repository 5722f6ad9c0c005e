// Image/mask loading, PNG/PPM writing, and DRIVE-style split discovery.
#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "vesselseg/errors.hpp"
#include "vesselseg/image.hpp"

namespace vesselseg {

namespace fs = std::filesystem;

enum class GrayMethod { green_channel, luminance };

enum class SplitRole { train, test };

struct DatasetRecord {
    int id = 0;
    std::string label;  // the leading digits exactly as they appear in the filename
    fs::path image;
    fs::path fov;
    fs::path truth;
};

struct DatasetSplit {
    SplitRole role = SplitRole::train;
    std::vector<DatasetRecord> records;  // sorted by id
};

struct LoadedRecord {
    RgbImage image;
    BinaryMask fov;
    BinaryMask truth;
};

namespace detail {

enum class Encoding { png, pnm, tiff, unknown };

inline Encoding sniff_encoding(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::array<unsigned char, 8> magic{};
    in.read(reinterpret_cast<char*>(magic.data()), magic.size());
    const auto got = in.gcount();
    static constexpr std::array<unsigned char, 8> png_sig = {0x89, 'P', 'N', 'G',
                                                             0x0D, 0x0A, 0x1A, 0x0A};
    if (got >= 8 && magic == png_sig) return Encoding::png;
    if (got >= 2 && magic[0] == 'P' && (magic[1] == '5' || magic[1] == '6')) return Encoding::pnm;
    if (got >= 4 && ((magic[0] == 'I' && magic[1] == 'I' && magic[2] == 42 && magic[3] == 0) ||
                     (magic[0] == 'M' && magic[1] == 'M' && magic[2] == 0 && magic[3] == 42)))
        return Encoding::tiff;
    return Encoding::unknown;
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline bool has_supported_extension(const fs::path& p) {
    const auto ext = lower(p.extension().string());
    return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".tif" || ext == ".tiff";
}

/// Leading decimal digits of the filename, if any.
inline std::optional<std::string> leading_digits(const fs::path& p) {
    const std::string name = p.filename().string();
    std::size_t n = 0;
    while (n < name.size() && std::isdigit(static_cast<unsigned char>(name[n]))) ++n;
    if (n == 0) return std::nullopt;
    return name.substr(0, n);
}

inline GrayImage plane_from_mat(const cv::Mat& channel) {
    GrayImage out(channel.cols, channel.rows);
    const double scale = channel.depth() == CV_16U ? 65535.0 : 255.0;
    for (int y = 0; y < channel.rows; ++y) {
        for (int x = 0; x < channel.cols; ++x) {
            const double raw = channel.depth() == CV_16U
                                   ? static_cast<double>(channel.at<std::uint16_t>(y, x))
                                   : static_cast<double>(channel.at<std::uint8_t>(y, x));
            out(x, y) = raw / scale;
        }
    }
    return out;
}

inline std::uint8_t quantize8(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace detail

/// Writes `bytes` to a sibling temp file and renames it over `path`.
inline void write_file_atomic(const fs::path& path, std::span<const char> bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename into " + path.string());
    }
}

inline void write_text_atomic(const fs::path& path, std::string_view text) {
    write_file_atomic(path, std::span<const char>(text.data(), text.size()));
}

inline RgbImage load_image(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw IoError("no such file: " + path.string());
    const auto encoding = detail::sniff_encoding(path);
    if (encoding == detail::Encoding::unknown)
        throw FormatError("unsupported encoding (expected PNG, PPM/PGM, or TIFF): " +
                          path.string());

    cv::Mat mat;
    try {
        mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    } catch (const cv::Exception& e) {
        throw FormatError("decoder failed on " + path.string() + ": " + e.what());
    }
    if (mat.empty()) throw FormatError("corrupt or undecodable image: " + path.string());
    if (mat.depth() != CV_8U && mat.depth() != CV_16U)
        throw FormatError("only 8- and 16-bit samples are supported: " + path.string());

    std::vector<cv::Mat> channels;
    cv::split(mat, channels);
    RgbImage img;
    img.bit_depth = mat.depth() == CV_16U ? 16 : 8;
    switch (channels.size()) {
    case 1:
        img.planes[0] = detail::plane_from_mat(channels[0]);
        img.planes[1] = img.planes[0];
        img.planes[2] = img.planes[0];
        break;
    case 3:
    case 4:  // OpenCV stores BGR(A); alpha is dropped
        img.planes[0] = detail::plane_from_mat(channels[2]);
        img.planes[1] = detail::plane_from_mat(channels[1]);
        img.planes[2] = detail::plane_from_mat(channels[0]);
        break;
    default:
        throw FormatError("unsupported channel count " + std::to_string(channels.size()) +
                          ": " + path.string());
    }
    return img;
}

/// Pixel is set iff its rescaled sample exceeds 0.5. Colour masks must be gray (R = G = B).
inline BinaryMask load_mask(const fs::path& path) {
    const RgbImage img = load_image(path);
    if (img.red() != img.green() || img.green() != img.blue())
        throw FormatError("mask is not single-channel: " + path.string());
    BinaryMask mask(img.width(), img.height());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = img.green()[i] > 0.5 ? 1 : 0;
    return mask;
}

inline GrayImage to_gray(const RgbImage& img, GrayMethod method = GrayMethod::green_channel) {
    if (method == GrayMethod::green_channel) return img.green();
    GrayImage out(img.width(), img.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double r = img.red()[i], g = img.green()[i], b = img.blue()[i];
        // gray pixels pass through unchanged
        out[i] = r == g && g == b ? g : 0.299 * r + 0.587 * g + 0.114 * b;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Encoding

inline std::vector<char> encode_png(const cv::Mat& mat) {
    std::vector<uchar> buf;
    const std::vector<int> params = {cv::IMWRITE_PNG_COMPRESSION, 6};
    if (!cv::imencode(".png", mat, buf, params)) throw IoError("PNG encoding failed");
    return {buf.begin(), buf.end()};
}

inline cv::Mat to_mat8(const GrayImage& img) {
    cv::Mat mat(img.height(), img.width(), CV_8UC1);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) mat.at<std::uint8_t>(y, x) = detail::quantize8(img(x, y));
    return mat;
}

inline cv::Mat to_mat8(const RgbImage& img) {
    cv::Mat mat(img.height(), img.width(), CV_8UC3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            auto& px = mat.at<cv::Vec3b>(y, x);
            px[0] = detail::quantize8(img.blue()(x, y));
            px[1] = detail::quantize8(img.green()(x, y));
            px[2] = detail::quantize8(img.red()(x, y));
        }
    }
    return mat;
}

/// 8-bit PNG; values clamped to [0,1] then scaled by 255 and rounded.
inline void save_png(const fs::path& path, const GrayImage& img) {
    write_file_atomic(path, encode_png(to_mat8(img)));
}

inline void save_png(const fs::path& path, const RgbImage& img) {
    write_file_atomic(path, encode_png(to_mat8(img)));
}

/// Mask as 0/255 8-bit PNG.
inline void save_png(const fs::path& path, const BinaryMask& mask) {
    cv::Mat mat(mask.height(), mask.width(), CV_8UC1);
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) mat.at<std::uint8_t>(y, x) = mask(x, y) ? 255 : 0;
    write_file_atomic(path, encode_png(mat));
}

/// Binary P6 with maxval 255.
inline void save_ppm(const fs::path& path, const RgbImage& img) {
    std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                      "\n255\n";
    out.reserve(out.size() + img.planes[0].size() * 3);
    for (std::size_t i = 0; i < img.planes[0].size(); ++i)
        for (const auto& plane : img.planes)
            out.push_back(static_cast<char>(detail::quantize8(plane[i])));
    write_text_atomic(path, out);
}

// ---------------------------------------------------------------------------
// DRIVE layout: <root>/images, <root>/mask, <root>/1st_manual, paired by leading integer.

namespace detail {

struct IdFiles {
    std::map<int, std::vector<fs::path>> supported;
    std::map<int, std::vector<fs::path>> other;
    std::map<int, std::string> labels;
};

inline IdFiles scan_dir(const fs::path& dir) {
    IdFiles out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const auto digits = leading_digits(entry.path());
        if (!digits) continue;
        const int id = std::stoi(*digits);
        if (has_supported_extension(entry.path())) {
            out.supported[id].push_back(entry.path());
            out.labels.emplace(id, *digits);
        } else {
            out.other[id].push_back(entry.path());
        }
    }
    return out;
}

inline fs::path pick_partner(const IdFiles& files, int id, const fs::path& dir) {
    if (auto it = files.supported.find(id); it != files.supported.end()) {
        if (it->second.size() > 1)
            throw PairingError("record " + std::to_string(id) + " is ambiguous in " + dir.string());
        return it->second.front();
    }
    if (files.other.contains(id))
        throw PairingError("record " + std::to_string(id) + " in " + dir.string() +
                           " has no PNG/PPM/PGM/TIFF file (convert GIF masks to PNG first)");
    throw PairingError("record " + std::to_string(id) + " has no partner in " + dir.string());
}

}  // namespace detail

inline DatasetSplit discover_split(const fs::path& root, SplitRole role) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw LayoutError("dataset root is not a directory: " + root.string());
    const fs::path images = root / "images";
    const fs::path masks = root / "mask";
    const fs::path manuals = root / "1st_manual";
    for (const auto& sub : {images, masks, manuals})
        if (!fs::is_directory(sub, ec)) throw LayoutError("missing subdirectory " + sub.string());

    const auto image_files = detail::scan_dir(images);
    const auto mask_files = detail::scan_dir(masks);
    const auto manual_files = detail::scan_dir(manuals);

    DatasetSplit split;
    split.role = role;
    for (const auto& [id, paths] : image_files.supported) {
        if (paths.size() > 1)
            throw PairingError("record " + std::to_string(id) + " is ambiguous in " + images.string());
        DatasetRecord rec;
        rec.id = id;
        rec.label = image_files.labels.at(id);
        rec.image = paths.front();
        rec.fov = detail::pick_partner(mask_files, id, masks);
        rec.truth = detail::pick_partner(manual_files, id, manuals);
        split.records.push_back(std::move(rec));
    }
    if (split.records.empty()) throw LayoutError("no image records under " + images.string());
    return split;
}

/// Loads one record's triple and checks that all three share dimensions.
inline LoadedRecord load_record(const DatasetRecord& rec) {
    LoadedRecord out{load_image(rec.image), load_mask(rec.fov), load_mask(rec.truth)};
    require_same_shape(out.image.green(), out.fov, ("record " + rec.label + " image/mask").c_str());
    require_same_shape(out.image.green(), out.truth,
                       ("record " + rec.label + " image/manual").c_str());
    return out;
}

}  // namespace vesselseg
