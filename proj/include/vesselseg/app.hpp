// End-to-end commands behind the vesselseg CLI: train, segment, evaluate, roc, synth.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "vesselseg/classifier.hpp"
#include "vesselseg/config.hpp"
#include "vesselseg/dataset_io.hpp"
#include "vesselseg/errors.hpp"
#include "vesselseg/metrics.hpp"
#include "vesselseg/morlet.hpp"
#include "vesselseg/phantom.hpp"
#include "vesselseg/postprocess.hpp"
#include "vesselseg/preprocess.hpp"

namespace vesselseg {

inline constexpr const char* tool_version = "1.0.0";

/// Reference mean accuracy reported for this method on the DRIVE test set.
inline constexpr double published_drive_accuracy = 0.9571;

// ---------------------------------------------------------------------------
// Small utilities

/// Re-throws `e` as the same error kind with a context prefix.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
    const std::string msg = context + ": " + e.what();
    switch (e.kind()) {
    case ErrorKind::io: throw IoError(msg);
    case ErrorKind::format: throw FormatError(msg);
    case ErrorKind::layout: throw LayoutError(msg);
    case ErrorKind::pairing: throw PairingError(msg);
    case ErrorKind::config: throw ConfigError(msg);
    case ErrorKind::dimension_mismatch: throw DimensionMismatch(msg);
    case ErrorKind::stats_mismatch: throw StatsMismatch(msg);
    case ErrorKind::degenerate_channel: throw DegenerateChannel(msg);
    case ErrorKind::insufficient_pixels: throw InsufficientPixels(msg);
    case ErrorKind::missing_class: throw MissingClass(msg);
    case ErrorKind::singular_component: throw SingularComponent(msg);
    case ErrorKind::too_few_samples: throw TooFewSamples(msg);
    case ErrorKind::empty_denominator: throw EmptyDenominator(msg);
    }
    throw Error(e.kind(), msg);
}

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw IoError("SHA-256 failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return out.str();
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string file_digest(const fs::path& path) { return sha256_hex(read_file(path)); }

/// Runs body(i) for i in [0, n) on up to `jobs` threads. The first exception (lowest
/// index) is rethrown after all workers finish.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

class StageTimer {
public:
    template <typename F>
    decltype(auto) time(const std::string& stage, F&& f) {
        const auto t0 = std::chrono::steady_clock::now();
        struct Record {
            StageTimer* self;
            std::string stage;
            std::chrono::steady_clock::time_point t0;
            ~Record() {
                const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
                std::lock_guard lock(self->mutex_);
                self->seconds_[stage] += dt.count();
            }
        } record{this, stage, t0};
        return f();
    }

    const std::map<std::string, double>& seconds() const noexcept { return seconds_; }

private:
    std::mutex mutex_;
    std::map<std::string, double> seconds_;
};

/// `<out>/run-<UTC timestamp>`, suffixed when the directory already exists.
inline fs::path make_run_dir(const fs::path& out_dir) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream name;
    name << "run-" << std::put_time(&tm, "%Y%m%dT%H%M%SZ");
    fs::path dir = out_dir / name.str();
    for (int i = 1; fs::exists(dir); ++i) dir = out_dir / (name.str() + "-" + std::to_string(i));
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create run directory " + dir.string());
    return dir;
}

struct RunManifest {
    std::string command;
    std::string config_text;
    std::map<std::string, double> timings;
    std::map<std::string, std::string> inputs;   // path -> sha256
    std::map<std::string, std::string> outputs;  // path -> sha256
};

inline std::string manifest_to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["tool"] = "vesselseg";
    j["version"] = tool_version;
    j["command"] = m.command;
    j["config"] = m.config_text;
    j["timings_seconds"] = m.timings;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    return j.dump(2) + "\n";
}

inline RunManifest manifest_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.config_text = j.at("config").get<std::string>();
        m.timings = j.at("timings_seconds").get<std::map<std::string, double>>();
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed manifest: ") + e.what());
    }
}

inline void write_manifest(const fs::path& run_dir, const RunManifest& m) {
    write_text_atomic(run_dir / "manifest.json", manifest_to_json(m));
}

// ---------------------------------------------------------------------------
// Per-image pipeline

struct ImageFeatures {
    GrayImage intensity;  // preprocessed, inverted
    FeatureStack normalized;
    FeatureStats stats;
};

inline ImageFeatures extract_features(const RgbImage& rgb, const BinaryMask& fov, const RunConfig& cfg) {
    const GrayImage gray = to_gray(rgb, cfg.grayscale);
    const GrayImage enhanced = local_adaptive_hist_eq(gray, fov, cfg.ahe);
    ImageFeatures out;
    out.intensity = invert(enhanced, fov);
    const FeatureStack raw = build_feature_stack(out.intensity, cfg.sweep(), cfg.morlet);
    out.stats = compute_feature_stats(raw, fov);
    out.normalized = normalize_features(raw, out.stats, fov);
    return out;
}

struct Segmentation {
    BinaryMask classified;  // raw Bayes decision
    BinaryMask mask;        // after post-processing
    GrayImage posterior;
    std::size_t underflow_pixels = 0;
};

inline Segmentation segment_features(const BayesModel& model, const FeatureStack& normalized, const BinaryMask& fov,
                                     const RunConfig& cfg) {
    auto cls = classify_stack(model, normalized, fov);
    Segmentation seg;
    seg.mask = postprocess_pipeline(cls.labels, fov, cfg.post);
    seg.classified = std::move(cls.labels);
    seg.posterior = std::move(cls.posterior);
    seg.underflow_pixels = cls.underflow_pixels;
    return seg;
}

inline Segmentation segment_image(const BayesModel& model, const RgbImage& rgb, const BinaryMask& fov,
                                  const RunConfig& cfg) {
    const auto features = extract_features(rgb, fov, cfg);
    return segment_features(model, features.normalized, fov, cfg);
}

/// Source image with predicted vessel pixels painted pure red.
inline RgbImage overlay(const RgbImage& src, const BinaryMask& mask) {
    RgbImage out = src;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        out.planes[0][i] = 1.0;
        out.planes[1][i] = 0.0;
        out.planes[2][i] = 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainingOutcome {
    BayesModel model;
    TrainingSet training_set;
};

inline void require_uniform_depth(int& depth, const RgbImage& img, const std::string& label) {
    if (depth == 0) depth = img.bit_depth;
    else if (depth != img.bit_depth)
        throw FormatError("record " + label + " is " + std::to_string(img.bit_depth) + "-bit but the dataset is " +
                          std::to_string(depth) + "-bit (mixed depths are rejected)");
}

/// Features for every record, sampling n_samples FOV pixels jointly across the split.
/// The draw is identical to sample_training_set() over the full stacks, but only the
/// selected pixels are retained.
inline TrainingOutcome train_on_split(const DatasetSplit& split, const RunConfig& cfg, StageTimer* timer = nullptr) {
    validate(cfg);
    const std::size_t n_rec = split.records.size();
    StageTimer local;
    StageTimer& t = timer ? *timer : local;

    // FOV sizes first; the draw is fixed before any features exist.
    std::vector<std::uint64_t> fov_counts(n_rec);
    t.time("load_masks", [&] {
        parallel_for(n_rec, cfg.jobs, [&](std::size_t r) {
            try {
                fov_counts[r] = count_true(load_mask(split.records[r].fov));
            } catch (const Error& e) {
                rethrow_with_context(e, "record " + split.records[r].label);
            }
        });
        return 0;
    });
    std::uint64_t total = 0;
    std::vector<std::uint64_t> offset(n_rec);
    for (std::size_t r = 0; r < n_rec; ++r) {
        offset[r] = total;
        total += fov_counts[r];
    }
    const auto ordinals = t.time("sample", [&] { return select_sample_ordinals(total, cfg.n_samples, cfg.em.seed); });

    int depth = 0;
    std::mutex depth_mutex;
    std::vector<FeatureStats> stats(n_rec);
    std::vector<SampleMatrix> gathered(n_rec);
    std::vector<std::vector<std::uint8_t>> labels(n_rec);
    t.time("features", [&] {
        parallel_for(n_rec, cfg.jobs, [&](std::size_t r) {
            const auto& rec = split.records[r];
            try {
                const LoadedRecord data = load_record(rec);
                {
                    std::lock_guard lock(depth_mutex);
                    require_uniform_depth(depth, data.image, rec.label);
                }
                const auto feats = extract_features(data.image, data.fov, cfg);
                stats[r] = feats.stats;
                const auto lo = std::lower_bound(ordinals.begin(), ordinals.end(), offset[r]);
                const auto hi = std::lower_bound(ordinals.begin(), ordinals.end(), offset[r] + fov_counts[r]);
                const int d = feats.normalized.depth();
                gathered[r].resize(d, hi - lo);
                labels[r].resize(static_cast<std::size_t>(hi - lo));
                std::vector<double> buf(static_cast<std::size_t>(d));
                std::uint64_t ordinal = offset[r];
                auto want = lo;
                Eigen::Index col = 0;
                for (std::size_t i = 0; i < data.fov.size() && want != hi; ++i) {
                    if (!data.fov[i]) continue;
                    if (ordinal == *want) {
                        feats.normalized.gather(i, buf);
                        for (int c = 0; c < d; ++c) gathered[r](c, col) = buf[static_cast<std::size_t>(c)];
                        labels[r][static_cast<std::size_t>(col)] = data.truth[i] ? 1 : 0;
                        ++col;
                        ++want;
                    }
                    ++ordinal;
                }
            } catch (const Error& e) {
                rethrow_with_context(e, "record " + rec.label);
            }
        });
        return 0;
    });

    TrainingSet set;
    set.seed = cfg.em.seed;
    const int d = static_cast<int>(cfg.scales.size()) + 1;
    set.samples.resize(d, static_cast<Eigen::Index>(ordinals.size()));
    Eigen::Index col = 0;
    for (std::size_t r = 0; r < n_rec; ++r) {
        if (gathered[r].cols() > 0) set.samples.middleCols(col, gathered[r].cols()) = gathered[r];
        set.labels.insert(set.labels.end(), labels[r].begin(), labels[r].end());
        col += gathered[r].cols();
    }
    if (set.count(PixelClass::vessel) == 0 || set.count(PixelClass::background) == 0)
        throw MissingClass("the training sample contains only one class");

    // Informational: average of the per-image normalization statistics.
    FeatureStats mean_stats{std::vector<double>(static_cast<std::size_t>(d), 0.0),
                            std::vector<double>(static_cast<std::size_t>(d), 0.0)};
    for (const auto& s : stats)
        for (int c = 0; c < d; ++c) {
            mean_stats.mean[static_cast<std::size_t>(c)] += s.mean[static_cast<std::size_t>(c)] / static_cast<double>(n_rec);
            mean_stats.stddev[static_cast<std::size_t>(c)] +=
                s.stddev[static_cast<std::size_t>(c)] / static_cast<double>(n_rec);
        }

    TrainingOutcome out;
    out.model = t.time("em", [&] { return train_bayes_model(set, cfg.em, cfg.equal_priors, mean_stats); });
    out.training_set = std::move(set);
    return out;
}

// ---------------------------------------------------------------------------
// Commands

struct TrainResult {
    fs::path run_dir;
    fs::path model_path;
    BayesModel model;
};

inline TrainResult cmd_train(const RunConfig& cfg) {
    validate(cfg);
    if (cfg.train_root.empty()) throw ConfigError("paths.train_root is required for train");
    const auto split = discover_split(cfg.train_root, SplitRole::train);

    StageTimer timer;
    auto outcome = train_on_split(split, cfg, &timer);

    const fs::path run_dir = make_run_dir(cfg.out_dir);
    const fs::path model_path = cfg.model_path.empty() ? run_dir / "model.json" : fs::path(cfg.model_path);
    const std::string text = model_to_json(outcome.model);
    write_text_atomic(model_path, text);

    RunManifest manifest{"train", to_config_text(cfg), timer.seconds(), {}, {}};
    for (const auto& rec : split.records)
        for (const auto& p : {rec.image, rec.fov, rec.truth}) manifest.inputs[p.string()] = file_digest(p);
    manifest.outputs[model_path.string()] = sha256_hex(text);
    write_manifest(run_dir, manifest);
    return {run_dir, model_path, std::move(outcome.model)};
}

struct SegmentResult {
    fs::path run_dir;
    Segmentation segmentation;
};

inline SegmentResult cmd_segment(const RunConfig& cfg, const fs::path& model_path, const fs::path& image_path,
                                 const std::optional<fs::path>& fov_path) {
    validate(cfg);
    StageTimer timer;
    const BayesModel model = load_model(model_path);
    if (model.dim() != static_cast<int>(cfg.scales.size()) + 1)
        throw StatsMismatch("model has " + std::to_string(model.dim()) + " features but the config's scales give " +
                            std::to_string(cfg.scales.size() + 1));
    const RgbImage rgb = load_image(image_path);
    BinaryMask fov;
    if (fov_path) {
        fov = load_mask(*fov_path);
        require_same_shape(rgb.green(), fov, "segment image/fov");
    } else {
        std::clog << "warning: no FOV mask given; using the full frame\n";
        fov = BinaryMask(rgb.width(), rgb.height(), 1);
    }
    const auto features = timer.time("features", [&] { return extract_features(rgb, fov, cfg); });
    auto seg = timer.time("classify", [&] { return segment_features(model, features.normalized, fov, cfg); });
    if (seg.underflow_pixels)
        std::clog << "warning: " << seg.underflow_pixels << " pixels had both likelihoods underflow (posterior 0.5)\n";

    const fs::path run_dir = make_run_dir(cfg.out_dir);
    RunManifest manifest{"segment", to_config_text(cfg), {}, {}, {}};
    const auto stem = image_path.stem().string();
    const fs::path mask_png = run_dir / (stem + "_mask.png");
    const fs::path post_png = run_dir / (stem + "_posterior.png");
    const fs::path over_png = run_dir / (stem + "_overlay.png");
    save_png(mask_png, seg.mask);
    save_png(post_png, seg.posterior);
    save_png(over_png, overlay(rgb, seg.mask));
    if (cfg.dump_responses) {
        for (int c = 1; c < features.normalized.depth(); ++c) {
            const fs::path p = run_dir / (stem + "_scale" + std::to_string(c) + ".png");
            save_png(p, rescale_to_unit(features.normalized.channels[static_cast<std::size_t>(c)]));
            manifest.outputs[p.string()] = file_digest(p);
        }
    }
    manifest.inputs[model_path.string()] = file_digest(model_path);
    manifest.inputs[image_path.string()] = file_digest(image_path);
    if (fov_path) manifest.inputs[fov_path->string()] = file_digest(*fov_path);
    for (const auto& p : {mask_png, post_png, over_png}) manifest.outputs[p.string()] = file_digest(p);
    manifest.timings = timer.seconds();
    write_manifest(run_dir, manifest);
    return {run_dir, std::move(seg)};
}

struct EvaluateResult {
    fs::path run_dir;
    MetricsReport report;
    RocCurve roc;
};

inline std::string evaluation_summary(const MetricsReport& report, const RocCurve& roc) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << "records: " << report.per_image.size() << "\n";
    out << "mean accuracy: " << report.mean_accuracy << "\n";
    out << "pooled accuracy: " << report.pooled.accuracy << "\n";
    if (report.mean_sensitivity) out << "mean sensitivity: " << *report.mean_sensitivity << "\n";
    if (report.mean_specificity) out << "mean specificity: " << *report.mean_specificity << "\n";
    out << "pooled ROC AUC: " << roc.auc << "\n";
    out << "reference mean accuracy (DRIVE): " << published_drive_accuracy
        << "  gap: " << (published_drive_accuracy - report.mean_accuracy) << "\n";
    return out.str();
}

/// Evaluates precomputed predictions (mask + posterior per record) against the split.
inline EvaluateResult evaluate_predictions(const DatasetSplit& split, const std::vector<BinaryMask>& masks,
                                           const std::vector<GrayImage>& posteriors, int roc_thresholds) {
    std::vector<std::pair<std::string, ConfusionCounts>> counts;
    RocAccumulator roc(roc_thresholds);
    for (std::size_t r = 0; r < split.records.size(); ++r) {
        const auto& rec = split.records[r];
        try {
            const BinaryMask fov = load_mask(rec.fov);
            const BinaryMask truth = load_mask(rec.truth);
            counts.emplace_back(rec.label, confusion(masks[r], truth, fov));
            roc.add(posteriors[r], truth, fov);
        } catch (const Error& e) {
            rethrow_with_context(e, "record " + rec.label);
        }
    }
    return {{}, aggregate_report(counts), roc.curve()};
}

inline EvaluateResult cmd_evaluate(const RunConfig& cfg, const fs::path& model_path, const fs::path& test_root) {
    validate(cfg);
    const auto split = discover_split(test_root, SplitRole::test);
    const BayesModel model = load_model(model_path);
    if (model.dim() != static_cast<int>(cfg.scales.size()) + 1)
        throw StatsMismatch("model feature count does not match the configured scales");

    StageTimer timer;
    const std::size_t n = split.records.size();
    std::vector<BinaryMask> masks(n);
    std::vector<GrayImage> posteriors(n);
    int depth = 0;
    std::mutex depth_mutex;
    timer.time("segment", [&] {
        parallel_for(n, cfg.jobs, [&](std::size_t r) {
            const auto& rec = split.records[r];
            try {
                const auto data = load_record(rec);
                {
                    std::lock_guard lock(depth_mutex);
                    require_uniform_depth(depth, data.image, rec.label);
                }
                auto seg = segment_image(model, data.image, data.fov, cfg);
                masks[r] = std::move(seg.mask);
                posteriors[r] = std::move(seg.posterior);
            } catch (const Error& e) {
                rethrow_with_context(e, "record " + rec.label);
            }
        });
        return 0;
    });

    auto result = timer.time("metrics", [&] { return evaluate_predictions(split, masks, posteriors, cfg.roc_thresholds); });
    result.run_dir = make_run_dir(cfg.out_dir);
    RunManifest manifest{"evaluate", to_config_text(cfg), {}, {}, {}};
    const fs::path pred_dir = result.run_dir / "predictions";
    for (std::size_t r = 0; r < n; ++r) {
        const auto& label = split.records[r].label;
        const fs::path mp = pred_dir / (label + "_mask.png");
        const fs::path pp = pred_dir / (label + "_posterior.png");
        save_png(mp, masks[r]);
        save_png(pp, posteriors[r]);
        manifest.outputs[mp.string()] = file_digest(mp);
        manifest.outputs[pp.string()] = file_digest(pp);
    }
    const std::string metrics_text = metrics_csv(result.report);
    const std::string roc_text = roc_csv(result.roc);
    const std::string summary = evaluation_summary(result.report, result.roc);
    write_text_atomic(result.run_dir / "metrics.csv", metrics_text);
    write_text_atomic(result.run_dir / "roc.csv", roc_text);
    write_text_atomic(result.run_dir / "report.txt", summary);
    manifest.outputs[(result.run_dir / "metrics.csv").string()] = sha256_hex(metrics_text);
    manifest.outputs[(result.run_dir / "roc.csv").string()] = sha256_hex(roc_text);
    manifest.outputs[(result.run_dir / "report.txt").string()] = sha256_hex(summary);
    manifest.inputs[model_path.string()] = file_digest(model_path);
    for (const auto& rec : split.records)
        for (const auto& p : {rec.image, rec.fov, rec.truth}) manifest.inputs[p.string()] = file_digest(p);
    manifest.timings = timer.seconds();
    write_manifest(result.run_dir, manifest);
    return result;
}

/// Re-derives the pooled ROC from `<pred_dir>/<label>_posterior.png` files
/// (8-bit, so scores are quantized to k/255).
inline EvaluateResult cmd_roc(const RunConfig& cfg, const fs::path& pred_dir, const fs::path& test_root) {
    validate(cfg);
    const auto split = discover_split(test_root, SplitRole::test);
    RocAccumulator acc(cfg.roc_thresholds);
    for (const auto& rec : split.records) {
        const fs::path p = pred_dir / (rec.label + "_posterior.png");
        try {
            const GrayImage prob = load_image(p).green();
            acc.add(prob, load_mask(rec.truth), load_mask(rec.fov));
        } catch (const Error& e) {
            rethrow_with_context(e, "record " + rec.label);
        }
    }
    EvaluateResult result;
    result.roc = acc.curve();
    result.run_dir = make_run_dir(cfg.out_dir);
    const std::string text = roc_csv(result.roc);
    write_text_atomic(result.run_dir / "roc.csv", text);
    RunManifest manifest{"roc", to_config_text(cfg), {}, {}, {}};
    manifest.outputs[(result.run_dir / "roc.csv").string()] = sha256_hex(text);
    write_manifest(result.run_dir, manifest);
    return result;
}

/// Writes cfg.synth.count phantoms in DRIVE layout under `out_dir`.
inline std::vector<fs::path> cmd_synth(const RunConfig& cfg, const fs::path& out_dir) {
    validate(cfg);
    std::vector<fs::path> written;
    for (int i = 0; i < cfg.synth.count; ++i) {
        const int id = cfg.synth.first_id + i;
        std::ostringstream label;
        label << std::setw(2) << std::setfill('0') << id;
        const auto ph = generate_phantom(cfg.synth.width, cfg.synth.height, cfg.synth.vessels,
                                         derive_seed(cfg.seed, static_cast<std::uint64_t>(id)));
        RgbImage rgb;
        rgb.planes = {ph.image, ph.image, ph.image};
        const fs::path image = out_dir / "images" / (label.str() + "_synth.png");
        const fs::path mask = out_dir / "mask" / (label.str() + "_synth_mask.png");
        const fs::path manual = out_dir / "1st_manual" / (label.str() + "_manual1.png");
        save_png(image, rgb);
        save_png(mask, ph.fov);
        save_png(manual, ph.truth);
        written.insert(written.end(), {image, mask, manual});
    }
    return written;
}

}  // namespace vesselseg
