// Bayes vessel/background classifier with Gaussian-mixture class likelihoods.
//
// Decision: vessel iff p(x|vessel) p(vessel) > p(x|background) p(background),
// ties go to background. The posterior map stores the normalized
// p(vessel|x) = p(x|v)p(v) / (p(x|v)p(v) + p(x|b)p(b)), evaluated in log space.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <utility>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vesselseg/dataset_io.hpp"
#include "vesselseg/errors.hpp"
#include "vesselseg/gmm.hpp"
#include "vesselseg/image.hpp"
#include "vesselseg/morlet.hpp"
#include "vesselseg/random.hpp"

namespace vesselseg {

enum class PixelClass : std::uint8_t { background = 0, vessel = 1 };

struct TrainingImage {
    std::reference_wrapper<const FeatureStack> features;
    std::reference_wrapper<const BinaryMask> truth;
    std::reference_wrapper<const BinaryMask> fov;
};

struct TrainingSet {
    SampleMatrix samples;              // d x n
    std::vector<std::uint8_t> labels;  // 1 = vessel
    std::uint64_t seed = 0;

    Eigen::Index size() const noexcept { return samples.cols(); }
    Eigen::Index dim() const noexcept { return samples.rows(); }
    std::size_t count(PixelClass cls) const {
        return static_cast<std::size_t>(
            std::count(labels.begin(), labels.end(), static_cast<std::uint8_t>(cls)));
    }
    double fraction(PixelClass cls) const {
        return static_cast<double>(count(cls)) / static_cast<double>(labels.size());
    }
    SampleMatrix class_samples(PixelClass cls) const {
        SampleMatrix out(samples.rows(), static_cast<Eigen::Index>(count(cls)));
        Eigen::Index col = 0;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == static_cast<std::uint8_t>(cls)) out.col(col++) = samples.col(static_cast<Eigen::Index>(i));
        return out;
    }
};

/// Sorted ordinals of n draws without replacement from [0, total) (partial Fisher-Yates).
inline std::vector<std::uint64_t> select_sample_ordinals(std::uint64_t total, std::size_t n, std::uint64_t seed) {
    if (total < n)
        throw InsufficientPixels("requested " + std::to_string(n) + " samples but only " + std::to_string(total) +
                                 " FOV pixels exist");
    std::vector<std::uint64_t> pool(total);
    for (std::uint64_t i = 0; i < total; ++i) pool[i] = i;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) std::swap(pool[i], pool[i + rng.below(total - i)]);
    pool.resize(n);
    std::sort(pool.begin(), pool.end());
    return pool;
}

/// Draws n_total FOV pixels uniformly without replacement across all images.
/// Samples are ordered by (image, pixel) index.
inline TrainingSet sample_training_set(std::span<const TrainingImage> images, std::size_t n_total,
                                       std::uint64_t seed) {
    if (images.empty()) throw InsufficientPixels("no training images");
    if (n_total < 2) throw InsufficientPixels("need at least 2 training samples");
    const int d = images.front().features.get().depth();
    std::vector<std::pair<std::size_t, std::size_t>> fov_pixels;  // (image, pixel)
    for (std::size_t m = 0; m < images.size(); ++m) {
        const auto& img = images[m];
        if (img.features.get().depth() != d) throw DimensionMismatch("feature depth differs between images");
        require_same_shape(img.features.get().channels.front(), img.truth.get(), "training truth");
        require_same_shape(img.features.get().channels.front(), img.fov.get(), "training fov");
        const auto& fov = img.fov.get();
        for (std::size_t i = 0; i < fov.size(); ++i)
            if (fov[i]) fov_pixels.emplace_back(m, i);
    }
    const auto chosen = select_sample_ordinals(fov_pixels.size(), n_total, seed);

    TrainingSet set;
    set.seed = seed;
    set.samples.resize(d, static_cast<Eigen::Index>(n_total));
    set.labels.resize(n_total);
    std::vector<double> buf(static_cast<std::size_t>(d));
    for (std::size_t s = 0; s < n_total; ++s) {
        const auto [m, px] = fov_pixels[static_cast<std::size_t>(chosen[s])];
        images[m].features.get().gather(px, buf);
        for (int c = 0; c < d; ++c) set.samples(c, static_cast<Eigen::Index>(s)) = buf[static_cast<std::size_t>(c)];
        set.labels[s] = images[m].truth.get()[px] ? 1 : 0;
    }
    if (set.count(PixelClass::vessel) == 0 || set.count(PixelClass::background) == 0)
        throw MissingClass("the training sample contains only one class");
    return set;
}

struct BayesModel {
    double prior_vessel = 0.5;
    double prior_background = 0.5;
    Gmm vessel;
    Gmm background;
    FeatureStats feature_stats;

    int dim() const noexcept { return vessel.dim(); }
};

inline BayesModel train_bayes_model(const TrainingSet& set, const EmConfig& cfg, bool equal_priors,
                                    FeatureStats feature_stats) {
    validate(cfg);
    if (set.count(PixelClass::vessel) == 0 || set.count(PixelClass::background) == 0)
        throw MissingClass("both classes are required for training");
    BayesModel model;
    if (equal_priors) {
        model.prior_vessel = model.prior_background = 0.5;
    } else {
        model.prior_vessel = set.fraction(PixelClass::vessel);
        model.prior_background = 1.0 - model.prior_vessel;
    }
    EmConfig vessel_cfg = cfg;
    vessel_cfg.seed = derive_seed(cfg.seed, 1);
    EmConfig background_cfg = cfg;
    background_cfg.seed = derive_seed(cfg.seed, 2);
    model.vessel = fit_gmm(set.class_samples(PixelClass::vessel), vessel_cfg);
    model.background = fit_gmm(set.class_samples(PixelClass::background), background_cfg);
    model.feature_stats = std::move(feature_stats);
    return model;
}

/// log p(x|C) + log p(C) for vessel (first) and background (second).
struct ClassScores {
    double vessel;
    double background;
};

inline ClassScores class_log_scores(const BayesModel& model, std::span<const double> x) {
    return {model.vessel.log_pdf(x) + std::log(model.prior_vessel),
            model.background.log_pdf(x) + std::log(model.prior_background)};
}

/// Normalized posterior of `cls`. Returns 0.5 when both scores are -inf; `underflow`
/// reports that case. The two class posteriors sum to exactly 1.
inline double posterior_from_scores(const ClassScores& s, PixelClass cls, bool* underflow = nullptr) {
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    if (underflow) *underflow = s.vessel == ninf && s.background == ninf;
    if (s.vessel == ninf && s.background == ninf) return 0.5;
    const bool vessel_leads = s.vessel >= s.background;
    const double hi = vessel_leads ? s.vessel : s.background;
    const double lo = vessel_leads ? s.background : s.vessel;
    const double p_lead = 1.0 / (1.0 + std::exp(lo - hi));
    return (cls == PixelClass::vessel) == vessel_leads ? p_lead : 1.0 - p_lead;
}

/// MAP decision: vessel iff its posterior exceeds one half; ties go to background.
inline PixelClass decide(const ClassScores& s) noexcept {
    return posterior_from_scores(s, PixelClass::vessel) > 0.5 ? PixelClass::vessel : PixelClass::background;
}

inline double posterior(const BayesModel& model, std::span<const double> x, PixelClass cls) {
    bool underflow = false;
    const double p = posterior_from_scores(class_log_scores(model, x), cls, &underflow);
    if (underflow) std::clog << "warning: both class likelihoods underflowed; posterior set to 0.5\n";
    return p;
}

inline double posterior_vessel(const BayesModel& model, std::span<const double> x) {
    return posterior(model, x, PixelClass::vessel);
}

struct Classification {
    BinaryMask labels;
    GrayImage posterior;  // p(vessel | x); 0 outside the FOV
    std::size_t underflow_pixels = 0;
};

inline void require_compatible(const BayesModel& model, const FeatureStack& stack) {
    if (!stack.normalized) throw StatsMismatch("feature stack has not been normalized");
    if (stack.depth() != model.dim() || model.feature_stats.depth() != static_cast<std::size_t>(stack.depth()))
        throw StatsMismatch("feature stack has " + std::to_string(stack.depth()) + " channels, model expects " +
                            std::to_string(model.dim()));
}

inline Classification classify_stack(const BayesModel& model, const FeatureStack& stack, const BinaryMask& fov) {
    require_compatible(model, stack);
    require_same_shape(stack.channels.front(), fov, "classify_stack");
    const int d = stack.depth();
    Classification out{BinaryMask(fov.width(), fov.height(), 0), GrayImage(fov.width(), fov.height(), 0.0), 0};

    std::vector<std::size_t> pixels;
    for (std::size_t i = 0; i < fov.size(); ++i)
        if (fov[i]) pixels.push_back(i);

    const double log_pv = std::log(model.prior_vessel);
    const double log_pb = std::log(model.prior_background);
    constexpr std::size_t chunk = 4096;
    std::vector<double> buf(static_cast<std::size_t>(d));
    for (std::size_t start = 0; start < pixels.size(); start += chunk) {
        const std::size_t count = std::min(chunk, pixels.size() - start);
        SampleMatrix x(d, static_cast<Eigen::Index>(count));
        for (std::size_t c = 0; c < count; ++c) {
            stack.gather(pixels[start + c], buf);
            for (int r = 0; r < d; ++r) x(r, static_cast<Eigen::Index>(c)) = buf[static_cast<std::size_t>(r)];
        }
        const Eigen::MatrixXd lv = model.vessel.weighted_log_densities(x);
        const Eigen::MatrixXd lb = model.background.weighted_log_densities(x);
        for (std::size_t c = 0; c < count; ++c) {
            const auto col = static_cast<Eigen::Index>(c);
            const ClassScores s{
                Gmm::log_sum_exp(std::span<const double>(lv.col(col).data(), static_cast<std::size_t>(lv.rows()))) + log_pv,
                Gmm::log_sum_exp(std::span<const double>(lb.col(col).data(), static_cast<std::size_t>(lb.rows()))) + log_pb};
            bool underflow = false;
            const std::size_t px = pixels[start + c];
            out.posterior[px] = posterior_from_scores(s, PixelClass::vessel, &underflow);
            out.labels[px] = out.posterior[px] > 0.5 ? 1 : 0;
            out.underflow_pixels += underflow;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// model.json

inline constexpr int model_format_version = 1;

namespace detail {

inline nlohmann::ordered_json gmm_to_json(const Gmm& g) {
    nlohmann::ordered_json comps = nlohmann::ordered_json::array();
    for (const auto& c : g.components()) {
        nlohmann::ordered_json cov = nlohmann::ordered_json::array();
        for (Eigen::Index r = 0; r < c.covariance.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(c.covariance.cols()));
            for (Eigen::Index col = 0; col < c.covariance.cols(); ++col) row[static_cast<std::size_t>(col)] = c.covariance(r, col);
            cov.push_back(row);
        }
        std::vector<double> mean(c.mean.data(), c.mean.data() + c.mean.size());
        comps.push_back({{"weight", c.weight}, {"mean", mean}, {"covariance", cov}});
    }
    return {{"components", comps}};
}

inline Gmm gmm_from_json(const nlohmann::ordered_json& j, int dim) {
    std::vector<GaussianParams> comps;
    for (const auto& jc : j.at("components")) {
        GaussianParams c;
        c.weight = jc.at("weight").get<double>();
        const auto mean = jc.at("mean").get<std::vector<double>>();
        if (static_cast<int>(mean.size()) != dim) throw FormatError("component mean has wrong dimension");
        c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), dim);
        c.covariance.resize(dim, dim);
        const auto& cov = jc.at("covariance");
        if (static_cast<int>(cov.size()) != dim) throw FormatError("covariance has wrong dimension");
        for (int r = 0; r < dim; ++r) {
            const auto row = cov.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
            if (static_cast<int>(row.size()) != dim) throw FormatError("covariance has wrong dimension");
            for (int col = 0; col < dim; ++col) c.covariance(r, col) = row[static_cast<std::size_t>(col)];
        }
        comps.push_back(std::move(c));
    }
    return Gmm(std::move(comps));
}

}  // namespace detail

inline std::string model_to_json(const BayesModel& model) {
    nlohmann::ordered_json j;
    j["format"] = "vesselseg-bayes-model";
    j["version"] = model_format_version;
    j["dim"] = model.dim();
    j["priors"] = {{"vessel", model.prior_vessel}, {"background", model.prior_background}};
    j["feature_stats"] = {{"mean", model.feature_stats.mean}, {"stddev", model.feature_stats.stddev}};
    j["classes"] = {{"vessel", detail::gmm_to_json(model.vessel)},
                    {"background", detail::gmm_to_json(model.background)}};
    return j.dump(2) + "\n";
}

inline BayesModel model_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::ordered_json::parse(text);
        if (j.at("format").get<std::string>() != "vesselseg-bayes-model")
            throw FormatError("not a vesselseg model document");
        if (j.at("version").get<int>() != model_format_version)
            throw FormatError("unsupported model version " + std::to_string(j.at("version").get<int>()));
        const int dim = j.at("dim").get<int>();
        BayesModel m;
        m.prior_vessel = j.at("priors").at("vessel").get<double>();
        m.prior_background = j.at("priors").at("background").get<double>();
        if (!(m.prior_vessel > 0.0) || !(m.prior_background > 0.0) ||
            std::abs(m.prior_vessel + m.prior_background - 1.0) > 1e-12)
            throw FormatError("class priors must be positive and sum to 1");
        m.feature_stats.mean = j.at("feature_stats").at("mean").get<std::vector<double>>();
        m.feature_stats.stddev = j.at("feature_stats").at("stddev").get<std::vector<double>>();
        if (static_cast<int>(m.feature_stats.depth()) != dim || m.feature_stats.stddev.size() != m.feature_stats.mean.size())
            throw FormatError("feature_stats dimension does not match model");
        m.vessel = detail::gmm_from_json(j.at("classes").at("vessel"), dim);
        m.background = detail::gmm_from_json(j.at("classes").at("background"), dim);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed model document: ") + e.what());
    }
}

inline void save_model(const std::filesystem::path& path, const BayesModel& model) {
    write_text_atomic(path, model_to_json(model));
}

inline BayesModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace vesselseg
