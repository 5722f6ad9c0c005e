// Gaussian mixture densities and their EM fit.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "vesselseg/errors.hpp"
#include "vesselseg/random.hpp"

namespace vesselseg {

/// Samples are stored column-wise: one d-vector per column.
using SampleMatrix = Eigen::MatrixXd;

struct EmConfig {
    int k_per_class = 15;
    int max_iters = 200;
    double tol = 1e-6;  // relative log-likelihood improvement
    double cov_floor = 1e-6;
    int restarts = 3;
    std::uint64_t seed = 0;

    bool operator==(const EmConfig&) const = default;
};

inline void validate(const EmConfig& cfg) {
    if (cfg.k_per_class < 1) throw ConfigError("classifier.k must be >= 1");
    if (cfg.max_iters < 1) throw ConfigError("classifier.max_iters must be >= 1");
    if (!(cfg.tol > 0.0)) throw ConfigError("classifier.tol must be positive");
    if (!(cfg.cov_floor > 0.0)) throw ConfigError("classifier.cov_floor must be positive");
    if (cfg.restarts < 1) throw ConfigError("classifier.restarts must be >= 1");
}

struct GaussianParams {
    double weight = 0.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

/// Immutable mixture. Components are held in a canonical order (sorted by mean, then
/// weight, then covariance) so evaluation is bit-identical under any input ordering.
class Gmm {
public:
    Gmm() = default;

    explicit Gmm(std::vector<GaussianParams> components) {
        if (components.empty()) throw ConfigError("a mixture needs at least one component");
        dim_ = static_cast<int>(components.front().mean.size());
        if (dim_ < 1) throw DimensionMismatch("component dimension must be >= 1");
        double total = 0.0;
        for (const auto& c : components) {
            if (c.mean.size() != dim_ || c.covariance.rows() != dim_ || c.covariance.cols() != dim_)
                throw DimensionMismatch("inconsistent component dimensions");
            if (!(c.weight >= 0.0)) throw ConfigError("mixture weights must be non-negative");
            total += c.weight;
        }
        if (std::abs(total - 1.0) > 1e-9) throw ConfigError("mixture weights must sum to 1");
        std::sort(components.begin(), components.end(), canonical_less);
        components_ = std::move(components);
        for (const auto& c : components_) {
            Eigen::LLT<Eigen::MatrixXd> llt(c.covariance);
            if (llt.info() != Eigen::Success)
                throw SingularComponent("covariance is not symmetric positive definite");
            Eigen::MatrixXd lower = llt.matrixL();
            double log_det = 0.0;
            for (int i = 0; i < dim_; ++i) log_det += 2.0 * std::log(lower(i, i));
            if (!std::isfinite(log_det)) throw SingularComponent("covariance determinant is not finite");
            cholesky_.push_back(std::move(lower));
            log_norm_.push_back(-0.5 * (dim_ * std::log(2.0 * std::numbers::pi) + log_det));
            log_weight_.push_back(std::log(c.weight));
        }
    }

    int dim() const noexcept { return dim_; }
    int size() const noexcept { return static_cast<int>(components_.size()); }
    const GaussianParams& component(int j) const { return components_[static_cast<std::size_t>(j)]; }
    const std::vector<GaussianParams>& components() const noexcept { return components_; }

    /// log N(x; mu_j, Sigma_j)
    double component_log_pdf(int j, std::span<const double> x) const {
        require_dim(x);
        const auto& L = cholesky_[static_cast<std::size_t>(j)];
        const auto& mu = components_[static_cast<std::size_t>(j)].mean;
        Eigen::VectorXd diff(dim_);
        for (int i = 0; i < dim_; ++i) diff(i) = x[static_cast<std::size_t>(i)] - mu(i);
        L.triangularView<Eigen::Lower>().solveInPlace(diff);
        return log_norm_[static_cast<std::size_t>(j)] - 0.5 * diff.squaredNorm();
    }

    double component_pdf(int j, std::span<const double> x) const { return std::exp(component_log_pdf(j, x)); }

    /// sum_j w_j N(x; mu_j, Sigma_j), summed in component order.
    double pdf(std::span<const double> x) const {
        double total = 0.0;
        for (int j = 0; j < size(); ++j)
            total += components_[static_cast<std::size_t>(j)].weight * component_pdf(j, x);
        return total;
    }

    /// log p(x) via max-shifted log-sum-exp; -inf only if every component underflows.
    double log_pdf(std::span<const double> x) const {
        double terms[64];
        std::vector<double> spill;
        double* t = terms;
        if (size() > 64) {
            spill.resize(static_cast<std::size_t>(size()));
            t = spill.data();
        }
        for (int j = 0; j < size(); ++j)
            t[j] = log_weight_[static_cast<std::size_t>(j)] + component_log_pdf(j, x);
        return log_sum_exp(std::span<const double>(t, static_cast<std::size_t>(size())));
    }

    /// Column-wise log-densities of every component: result(j, n) = log w_j + log N(x_n; j).
    Eigen::MatrixXd weighted_log_densities(const SampleMatrix& samples) const {
        if (samples.rows() != dim_) throw DimensionMismatch("sample dimension does not match mixture");
        Eigen::MatrixXd out(size(), samples.cols());
        for (int j = 0; j < size(); ++j) {
            Eigen::MatrixXd diff = samples.colwise() - components_[static_cast<std::size_t>(j)].mean;
            cholesky_[static_cast<std::size_t>(j)].triangularView<Eigen::Lower>().solveInPlace(diff);
            out.row(j) = (log_weight_[static_cast<std::size_t>(j)] + log_norm_[static_cast<std::size_t>(j)]) -
                         0.5 * diff.colwise().squaredNorm().array();
        }
        return out;
    }

    static double log_sum_exp(std::span<const double> terms) {
        double peak = -std::numeric_limits<double>::infinity();
        for (double v : terms) peak = std::max(peak, v);
        if (!std::isfinite(peak)) return peak;
        double acc = 0.0;
        for (double v : terms) acc += std::exp(v - peak);
        return peak + std::log(acc);
    }

private:
    void require_dim(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != dim_)
            throw DimensionMismatch("expected a " + std::to_string(dim_) + "-vector, got " +
                                    std::to_string(x.size()));
    }

    static bool canonical_less(const GaussianParams& a, const GaussianParams& b) {
        auto lex = [](const double* pa, const double* pb, Eigen::Index n) -> int {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (pa[i] < pb[i]) return -1;
                if (pb[i] < pa[i]) return 1;
            }
            return 0;
        };
        if (int c = lex(a.mean.data(), b.mean.data(), a.mean.size()); c != 0) return c < 0;
        if (a.weight != b.weight) return a.weight < b.weight;
        return lex(a.covariance.data(), b.covariance.data(), a.covariance.size()) < 0;
    }

    int dim_ = 0;
    std::vector<GaussianParams> components_;
    std::vector<Eigen::MatrixXd> cholesky_;
    std::vector<double> log_norm_;
    std::vector<double> log_weight_;
};

inline double gmm_pdf(const Gmm& model, std::span<const double> x) { return model.pdf(x); }

// ---------------------------------------------------------------------------
// EM

struct EmTrace {
    std::vector<double> log_likelihood;  // entry 0 is the initialization
    bool converged = false;
};

struct GmmFit {
    Gmm model;
    std::vector<EmTrace> restarts;
    int best_restart = 0;

    const EmTrace& best_trace() const { return restarts[static_cast<std::size_t>(best_restart)]; }
};

namespace detail {

inline void floor_and_symmetrize(Eigen::MatrixXd& cov, double floor) {
    cov = 0.5 * (cov + cov.transpose()).eval();
    for (Eigen::Index i = 0; i < cov.rows(); ++i) cov(i, i) = std::max(cov(i, i), floor);
}

inline Eigen::MatrixXd weighted_covariance(const SampleMatrix& x, const Eigen::VectorXd& mean,
                                           const Eigen::ArrayXd& weights, double total) {
    const Eigen::MatrixXd diff = x.colwise() - mean;
    Eigen::MatrixXd scaled = diff;
    scaled.array().rowwise() *= weights.transpose();
    return (scaled * diff.transpose()) / total;
}

/// k-means++ seeding followed by one hard assignment pass.
inline std::vector<GaussianParams> kmeanspp_init(const SampleMatrix& x, int k, double cov_floor, Rng& rng) {
    const Eigen::Index n = x.cols();
    const Eigen::Index d = x.rows();
    std::vector<Eigen::Index> centers;
    centers.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    Eigen::ArrayXd dist2 = (x.colwise() - x.col(centers[0])).colwise().squaredNorm().transpose().array();
    while (static_cast<int>(centers.size()) < k) {
        const double total = dist2.sum();
        Eigen::Index pick = 0;
        if (!(total > 0.0)) {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        } else {
            double target = rng.uniform() * total;
            pick = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                target -= dist2(i);
                if (target < 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(pick);
        dist2 = dist2.min((x.colwise() - x.col(pick)).colwise().squaredNorm().transpose().array());
    }

    std::vector<int> owner(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j) {
            const double dd = (x.col(i) - x.col(centers[static_cast<std::size_t>(j)])).squaredNorm();
            if (dd < best) {
                best = dd;
                owner[static_cast<std::size_t>(i)] = j;
            }
        }
    }

    const Eigen::VectorXd global_mean = x.rowwise().mean();
    Eigen::MatrixXd global_cov =
        weighted_covariance(x, global_mean, Eigen::ArrayXd::Ones(n), static_cast<double>(n));
    floor_and_symmetrize(global_cov, cov_floor);

    std::vector<GaussianParams> comps(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        Eigen::ArrayXd member(n);
        for (Eigen::Index i = 0; i < n; ++i) member(i) = owner[static_cast<std::size_t>(i)] == j ? 1.0 : 0.0;
        const double count = member.sum();
        auto& c = comps[static_cast<std::size_t>(j)];
        c.weight = count / static_cast<double>(n);
        if (count < static_cast<double>(d + 1)) {
            c.mean = x.col(centers[static_cast<std::size_t>(j)]);
            c.covariance = global_cov;
        } else {
            c.mean = (x * member.matrix()) / count;
            c.covariance = weighted_covariance(x, c.mean, member, count);
            floor_and_symmetrize(c.covariance, cov_floor);
            if (Eigen::LLT<Eigen::MatrixXd>(c.covariance).info() != Eigen::Success) c.covariance = global_cov;
        }
    }
    // Components that captured nothing still need a positive weight to stay in the model.
    const double min_weight = 1.0 / (static_cast<double>(n) * 10.0);
    double total = 0.0;
    for (auto& c : comps) {
        c.weight = std::max(c.weight, min_weight);
        total += c.weight;
    }
    for (auto& c : comps) c.weight /= total;
    return comps;
}

/// E-step: responsibilities (k x n) and the total log-likelihood.
inline double expectation(const Gmm& model, const SampleMatrix& x, Eigen::MatrixXd& resp) {
    resp = model.weighted_log_densities(x);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < resp.cols(); ++i) {
        auto col = resp.col(i);
        const double peak = col.maxCoeff();
        if (!std::isfinite(peak)) throw SingularComponent("sample has zero density under every component");
        col = (col.array() - peak).exp();
        const double s = col.sum();
        col /= s;
        ll += peak + std::log(s);
    }
    return ll;
}

/// M-step with diagonal flooring. Components whose responsibility mass vanishes keep
/// their previous shape with a negligible weight.
inline Gmm maximization(const Gmm& previous, const SampleMatrix& x, const Eigen::MatrixXd& resp,
                        double cov_floor) {
    const int k = static_cast<int>(resp.rows());
    const double n = static_cast<double>(x.cols());
    std::vector<GaussianParams> comps(static_cast<std::size_t>(k));
    const Eigen::VectorXd mass = resp.rowwise().sum();
    const double total_mass = mass.sum();
    for (int j = 0; j < k; ++j) {
        auto& c = comps[static_cast<std::size_t>(j)];
        const double nk = mass(j);
        if (!(nk > 1e-10 * n)) {
            c = previous.component(j);
            c.weight = 1e-10 / static_cast<double>(k);
            continue;
        }
        c.weight = nk / total_mass;
        c.mean = (x * resp.row(j).transpose()) / nk;
        c.covariance = weighted_covariance(x, c.mean, resp.row(j).transpose().array(), nk);
        floor_and_symmetrize(c.covariance, cov_floor);
    }
    double wsum = 0.0;
    for (const auto& c : comps) wsum += c.weight;
    for (auto& c : comps) c.weight /= wsum;
    return Gmm(std::move(comps));
}

struct RestartResult {
    Gmm model;
    EmTrace trace;
};

inline RestartResult run_em(const SampleMatrix& x, const EmConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    Gmm model(kmeanspp_init(x, cfg.k_per_class, cfg.cov_floor, rng));
    EmTrace trace;
    Eigen::MatrixXd resp;
    double ll = expectation(model, x, resp);
    trace.log_likelihood.push_back(ll);
    for (int it = 0; it < cfg.max_iters; ++it) {
        Gmm next = maximization(model, x, resp, cfg.cov_floor);
        Eigen::MatrixXd next_resp;
        const double next_ll = expectation(next, x, next_resp);
        trace.log_likelihood.push_back(next_ll);
        const double improvement = next_ll - ll;
        model = std::move(next);
        resp = std::move(next_resp);
        if (improvement < cfg.tol * std::abs(ll)) {
            trace.converged = true;
            ll = next_ll;
            break;
        }
        ll = next_ll;
    }
    return {std::move(model), std::move(trace)};
}

}  // namespace detail

/// EM from k-means++ starts; returns the best of cfg.restarts runs by final log-likelihood.
inline GmmFit fit_gmm_traced(const SampleMatrix& samples, const EmConfig& cfg) {
    validate(cfg);
    const auto d = samples.rows();
    const auto n = samples.cols();
    if (d < 1) throw DimensionMismatch("samples have no features");
    if (n < static_cast<Eigen::Index>(cfg.k_per_class) * (d + 1))
        throw TooFewSamples(std::to_string(n) + " samples cannot support " + std::to_string(cfg.k_per_class) +
                            " components in " + std::to_string(d) + " dimensions");
    if (!samples.allFinite()) throw ConfigError("training features must be finite");

    std::vector<std::future<detail::RestartResult>> jobs;
    for (int r = 0; r < cfg.restarts; ++r)
        jobs.push_back(std::async(std::launch::async, [&samples, &cfg, r] {
            return detail::run_em(samples, cfg, derive_seed(cfg.seed, static_cast<std::uint64_t>(r)));
        }));

    GmmFit fit;
    int best = -1;
    double best_ll = -std::numeric_limits<double>::infinity();
    std::string failure;
    for (int r = 0; r < cfg.restarts; ++r) {
        try {
            auto result = jobs[static_cast<std::size_t>(r)].get();
            const double final_ll = result.trace.log_likelihood.back();
            fit.restarts.push_back(std::move(result.trace));
            if (best < 0 || final_ll > best_ll) {
                best = r;
                best_ll = final_ll;
                fit.model = std::move(result.model);
            }
        } catch (const SingularComponent& e) {
            fit.restarts.push_back({});
            failure = e.what();
        }
    }
    if (best < 0) throw SingularComponent("every EM restart failed: " + failure);
    fit.best_restart = best;
    return fit;
}

inline Gmm fit_gmm(const SampleMatrix& samples, const EmConfig& cfg) {
    return fit_gmm_traced(samples, cfg).model;
}

}  // namespace vesselseg
