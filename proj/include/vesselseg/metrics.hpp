// FOV-restricted confusion counts, sensitivity/specificity/accuracy, ROC and AUC.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vesselseg/errors.hpp"
#include "vesselseg/format.hpp"
#include "vesselseg/image.hpp"

namespace vesselseg {

struct ConfusionCounts {
    std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

    std::uint64_t positives() const noexcept { return tp + fn; }
    std::uint64_t negatives() const noexcept { return tn + fp; }
    std::uint64_t total() const noexcept { return tp + tn + fp + fn; }

    ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
        tp += o.tp;
        tn += o.tn;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Exact count ratio; value() rounds once.
struct Ratio {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
};

inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth, const BinaryMask& fov) {
    require_same_shape(pred, truth, "confusion pred/truth");
    require_same_shape(pred, fov, "confusion pred/fov");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!fov[i]) continue;
        const bool p = pred[i] != 0, t = truth[i] != 0;
        c.tp += p && t;
        c.tn += !p && !t;
        c.fp += p && !t;
        c.fn += !p && t;
    }
    return c;
}

inline Ratio sensitivity(const ConfusionCounts& c) {
    if (c.positives() == 0) throw EmptyDenominator("sensitivity undefined: no vessel pixels in truth");
    return {c.tp, c.positives()};
}

inline Ratio specificity(const ConfusionCounts& c) {
    if (c.negatives() == 0) throw EmptyDenominator("specificity undefined: no background pixels in truth");
    return {c.tn, c.negatives()};
}

inline Ratio accuracy(const ConfusionCounts& c) {
    if (c.total() == 0) throw EmptyDenominator("accuracy undefined: no evaluated pixels");
    return {c.tp + c.tn, c.total()};
}

// ---------------------------------------------------------------------------
// ROC

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

struct RocCurve {
    std::vector<RocPoint> points;  // descending threshold
    double auc = 0.0;
};

/// Accumulates score histograms so a curve can be pooled over several images.
/// Thresholds are i/n for i = n..0 plus a sentinel above 1; a pixel is predicted
/// positive at threshold t iff prob >= t.
class RocAccumulator {
public:
    explicit RocAccumulator(int n_thresholds = 1000)
        : n_(n_thresholds), pos_(static_cast<std::size_t>(n_thresholds) + 1, 0),
          neg_(static_cast<std::size_t>(n_thresholds) + 1, 0) {
        if (n_thresholds < 2) throw ConfigError("ROC needs at least 2 thresholds");
    }

    int n_thresholds() const noexcept { return n_; }
    double threshold(int i) const noexcept { return static_cast<double>(i) / static_cast<double>(n_); }

    /// Largest i with prob >= i/n.
    int bin(double prob) const {
        int k = static_cast<int>(std::floor(prob * n_));
        k = std::clamp(k, 0, n_);
        while (k < n_ && prob >= threshold(k + 1)) ++k;
        while (k > 0 && prob < threshold(k)) --k;
        return k;
    }

    void add(const GrayImage& prob, const BinaryMask& truth, const BinaryMask& fov) {
        require_same_shape(prob, truth, "roc prob/truth");
        require_same_shape(prob, fov, "roc prob/fov");
        for (std::size_t i = 0; i < prob.size(); ++i) {
            if (!fov[i]) continue;
            const double p = prob[i];
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("ROC scores must lie in [0,1]");
            auto& hist = truth[i] ? pos_ : neg_;
            ++hist[static_cast<std::size_t>(bin(p))];
        }
    }

    RocCurve curve() const {
        std::uint64_t total_pos = 0, total_neg = 0;
        for (auto v : pos_) total_pos += v;
        for (auto v : neg_) total_neg += v;
        if (total_pos == 0 || total_neg == 0)
            throw EmptyDenominator("ROC needs both vessel and background pixels");

        std::vector<RocPoint> raw;
        raw.push_back({1.0 + 1.0 / n_, 0.0, 0.0});
        std::uint64_t tp = 0, fp = 0;
        for (int i = n_; i >= 0; --i) {
            tp += pos_[static_cast<std::size_t>(i)];
            fp += neg_[static_cast<std::size_t>(i)];
            raw.push_back({threshold(i), static_cast<double>(fp) / static_cast<double>(total_neg),
                           static_cast<double>(tp) / static_cast<double>(total_pos)});
        }

        RocCurve out;
        // Keep the first point of each run of identical (fpr, tpr), plus the final point.
        for (std::size_t i = 0; i < raw.size(); ++i) {
            const bool last = i + 1 == raw.size();
            if (out.points.empty() || last || raw[i].fpr != out.points.back().fpr ||
                raw[i].tpr != out.points.back().tpr)
                out.points.push_back(raw[i]);
        }
        for (std::size_t i = 1; i < out.points.size(); ++i) {
            const auto& a = out.points[i - 1];
            const auto& b = out.points[i];
            out.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
        }
        return out;
    }

private:
    int n_;
    std::vector<std::uint64_t> pos_;
    std::vector<std::uint64_t> neg_;
};

inline RocCurve roc_curve(const GrayImage& prob, const BinaryMask& truth, const BinaryMask& fov,
                          int n_thresholds = 1000) {
    RocAccumulator acc(n_thresholds);
    acc.add(prob, truth, fov);
    return acc.curve();
}

// ---------------------------------------------------------------------------
// Reports

struct ImageMetrics {
    std::string id;
    ConfusionCounts counts;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    double accuracy = 0.0;
};

struct MetricsReport {
    std::vector<ImageMetrics> per_image;
    ImageMetrics pooled;
    double mean_accuracy = 0.0;
    std::optional<double> mean_sensitivity;
    std::optional<double> mean_specificity;
};

inline ImageMetrics image_metrics(std::string id, const ConfusionCounts& c) {
    ImageMetrics m{std::move(id), c, std::nullopt, std::nullopt, accuracy(c).value()};
    if (c.positives() > 0) m.sensitivity = sensitivity(c).value();
    if (c.negatives() > 0) m.specificity = specificity(c).value();
    return m;
}

/// Per-image metrics, pooled-count metrics, and unweighted means across images.
inline MetricsReport aggregate_report(const std::vector<std::pair<std::string, ConfusionCounts>>& per_image) {
    if (per_image.empty()) throw ConfigError("aggregate_report needs at least one image");
    MetricsReport r;
    ConfusionCounts pooled;
    double acc_sum = 0.0, sens_sum = 0.0, spec_sum = 0.0;
    std::size_t sens_n = 0, spec_n = 0;
    for (const auto& [id, c] : per_image) {
        r.per_image.push_back(image_metrics(id, c));
        const auto& m = r.per_image.back();
        pooled += c;
        acc_sum += m.accuracy;
        if (m.sensitivity) {
            sens_sum += *m.sensitivity;
            ++sens_n;
        }
        if (m.specificity) {
            spec_sum += *m.specificity;
            ++spec_n;
        }
    }
    r.pooled = image_metrics("pooled", pooled);
    const double n = static_cast<double>(per_image.size());
    r.mean_accuracy = acc_sum / n;
    if (sens_n) r.mean_sensitivity = sens_sum / static_cast<double>(sens_n);
    if (spec_n) r.mean_specificity = spec_sum / static_cast<double>(spec_n);
    return r;
}

/// record_id,tp,tn,fp,fn,sensitivity,specificity,accuracy; per-image rows, then a
/// "pooled" row and a "mean" row (counts left empty).
inline std::string metrics_csv(const MetricsReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    std::string out = "record_id,tp,tn,fp,fn,sensitivity,specificity,accuracy\n";
    auto row = [&](const ImageMetrics& m) {
        out += m.id + "," + std::to_string(m.counts.tp) + "," + std::to_string(m.counts.tn) + "," +
               std::to_string(m.counts.fp) + "," + std::to_string(m.counts.fn) + "," + opt(m.sensitivity) + "," +
               opt(m.specificity) + "," + format_double(m.accuracy) + "\n";
    };
    for (const auto& m : r.per_image) row(m);
    row(r.pooled);
    out += "mean,,,,," + opt(r.mean_sensitivity) + "," + opt(r.mean_specificity) + "," +
           format_double(r.mean_accuracy) + "\n";
    return out;
}

inline std::string roc_csv(const RocCurve& c) {
    std::string out = "threshold,fpr,tpr\n";
    for (const auto& p : c.points)
        out += format_double(p.threshold) + "," + format_double(p.fpr) + "," + format_double(p.tpr) + "\n";
    return out;
}

}  // namespace vesselseg
