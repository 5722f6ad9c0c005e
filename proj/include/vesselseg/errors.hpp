// Exception types shared by every vesselseg module.
#pragma once

#include <stdexcept>
#include <string>

namespace vesselseg {

/// Broad failure category; drives the CLI exit code.
enum class ErrorCategory {
    usage = 2,    // bad config, dataset layout, mismatched inputs
    numeric = 3,  // EM singularity, degenerate statistics
    io = 4,       // unreadable / unwritable files, bad encodings
};

enum class ErrorKind {
    io,
    format,
    layout,
    pairing,
    config,
    dimension_mismatch,
    stats_mismatch,
    degenerate_channel,
    insufficient_pixels,
    missing_class,
    singular_component,
    too_few_samples,
    empty_denominator,
};

constexpr ErrorCategory category_of(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::io:
    case ErrorKind::format:
        return ErrorCategory::io;
    case ErrorKind::degenerate_channel:
    case ErrorKind::insufficient_pixels:
    case ErrorKind::missing_class:
    case ErrorKind::singular_component:
    case ErrorKind::too_few_samples:
    case ErrorKind::empty_denominator:
        return ErrorCategory::numeric;
    default:
        return ErrorCategory::usage;
    }
}

constexpr const char* kind_name(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::io: return "IoError";
    case ErrorKind::format: return "FormatError";
    case ErrorKind::layout: return "LayoutError";
    case ErrorKind::pairing: return "PairingError";
    case ErrorKind::config: return "ConfigError";
    case ErrorKind::dimension_mismatch: return "DimensionMismatch";
    case ErrorKind::stats_mismatch: return "StatsMismatch";
    case ErrorKind::degenerate_channel: return "DegenerateChannel";
    case ErrorKind::insufficient_pixels: return "InsufficientPixels";
    case ErrorKind::missing_class: return "MissingClass";
    case ErrorKind::singular_component: return "SingularComponent";
    case ErrorKind::too_few_samples: return "TooFewSamples";
    case ErrorKind::empty_denominator: return "EmptyDenominator";
    }
    return "Error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(kind_name(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    ErrorCategory category() const noexcept { return category_of(kind_); }

private:
    ErrorKind kind_;
};

/// One distinct exception type per kind so callers can catch selectively.
template <ErrorKind K>
class KindError : public Error {
public:
    explicit KindError(const std::string& what) : Error(K, what) {}
};

using IoError = KindError<ErrorKind::io>;
using FormatError = KindError<ErrorKind::format>;
using LayoutError = KindError<ErrorKind::layout>;
using PairingError = KindError<ErrorKind::pairing>;
using ConfigError = KindError<ErrorKind::config>;
using DimensionMismatch = KindError<ErrorKind::dimension_mismatch>;
using StatsMismatch = KindError<ErrorKind::stats_mismatch>;
using DegenerateChannel = KindError<ErrorKind::degenerate_channel>;
using InsufficientPixels = KindError<ErrorKind::insufficient_pixels>;
using MissingClass = KindError<ErrorKind::missing_class>;
using SingularComponent = KindError<ErrorKind::singular_component>;
using TooFewSamples = KindError<ErrorKind::too_few_samples>;
using EmptyDenominator = KindError<ErrorKind::empty_denominator>;

}  // namespace vesselseg
