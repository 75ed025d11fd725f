#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "twinfock/interferometer.hpp"
#include "twinfock/specfun.hpp"

namespace twinfock {

/// Ordered phase samples on [lo, hi] within [0, pi/2], endpoints included.
struct PhaseGrid {
    double lo = 0;
    double hi = std::numbers::pi / 2;
    std::vector<double> points;

    static PhaseGrid uniform(double lo, double hi, std::size_t count) {
        if (!(lo >= 0.0 && lo < hi && hi <= std::numbers::pi / 2)) {
            throw std::invalid_argument("PhaseGrid: need 0 <= lo < hi <= pi/2");
        }
        if (count < 2) {
            throw std::invalid_argument("PhaseGrid: need at least two points");
        }
        PhaseGrid g;
        g.lo = lo;
        g.hi = hi;
        g.points.resize(count);
        const double step = (hi - lo) / static_cast<double>(count - 1);
        for (std::size_t i = 0; i < count; ++i) {
            g.points[i] = lo + step * static_cast<double>(i);
        }
        g.points.back() = hi;
        return g;
    }

    double step() const {
        return (hi - lo) / static_cast<double>(points.size() - 1);
    }
};

/// Unnormalized log posterior over a phase grid, shifted so its maximum is zero.
struct PhasePosterior {
    PhaseGrid grid;
    std::vector<double> log_weight;
    std::size_t uninformative_bursts = 0;
    bool flat = false;
    // Amount subtracted to bring the maximum to zero.
    double log_offset = 0;

    std::size_t argmax() const {
        return static_cast<std::size_t>(std::max_element(log_weight.begin(), log_weight.end()) - log_weight.begin());
    }

    std::vector<double> relative_probability() const {
        std::vector<double> out(log_weight.size());
        std::transform(log_weight.begin(), log_weight.end(), out.begin(), [](double v) {
            return std::exp(v);
        });
        return out;
    }
};

struct PhaseEstimate {
    double phi_hat = 0;
    double sigma_post = 0;
    std::optional<double> abs_error;
    std::size_t k = 0;
    bool valid = true;
    bool ambiguous = false;
    std::optional<double> secondary_peak;
    PhasePosterior final_window;
};

struct EstimatorConfig {
    double lo = 0.0;
    double hi = std::numbers::pi / 2;
    std::size_t coarse_points = 1024;
    int refine_rounds = 2;
    int refine_half_width = 8;
    int refine_factor = 16;
    // A second local peak whose relative weight is at least 1 - this is ambiguous.
    double ambiguity_tolerance = 1e-3;

    void validate() const {
        if (!(lo >= 0.0 && lo < hi && hi <= std::numbers::pi / 2)) {
            throw std::invalid_argument("EstimatorConfig: need 0 <= lo < hi <= pi/2");
        }
        if (coarse_points < 2 || refine_rounds < 0 || refine_half_width < 1 || refine_factor < 1) {
            throw std::invalid_argument("EstimatorConfig: invalid grid settings");
        }
    }
};

/// log P(j, m, phase) from the detected counts; an empty burst carries no information and scores 0.
inline double burst_log_likelihood(const BurstRecord &burst, double phase) {
    const PhotonCounts &c = burst.detected;
    if (c.n_a < 0 || c.n_b < 0) {
        throw std::invalid_argument("burst_log_likelihood: negative counts");
    }
    if (c.total() == 0) {
        return 0.0;
    }
    return eval_weight(c.j(), c.m(), std::cos(phase)).log_magnitude;
}

/// Sum of burst log likelihoods at each grid point, shifted to a zero maximum.
///
/// Bursts sharing (j, |m|) are evaluated once and weighted by multiplicity.
inline PhasePosterior accumulate_posterior(std::span<const BurstRecord> bursts, PhaseGrid grid) {
    if (bursts.empty()) {
        throw std::invalid_argument("accumulate_posterior: need at least one burst");
    }
    PhasePosterior post;
    std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> multiplicity;
    for (const auto &b : bursts) {
        if (b.detected.n_a < 0 || b.detected.n_b < 0) {
            throw std::invalid_argument("accumulate_posterior: negative counts");
        }
        if (b.detected.total() == 0) {
            ++post.uninformative_bursts;
            continue;
        }
        ++multiplicity[{b.detected.j().twice(), b.detected.m().abs().twice()}];
    }

    const std::size_t n = grid.points.size();
    std::vector<double> xs(n);
    std::transform(grid.points.begin(), grid.points.end(), xs.begin(), [](double phi) {
        return std::cos(phi);
    });
    post.log_weight.assign(n, 0.0);
    std::vector<double> term(n);
    for (const auto &[key, count] : multiplicity) {
        eval_weight_batch(HalfInt::from_twice(key.first), HalfInt::from_twice(key.second), xs, term);
        for (std::size_t i = 0; i < n; ++i) {
            post.log_weight[i] += static_cast<double>(count) * term[i];
        }
    }
    post.grid = std::move(grid);

    const double top = *std::max_element(post.log_weight.begin(), post.log_weight.end());
    const double bottom = *std::min_element(post.log_weight.begin(), post.log_weight.end());
    if (multiplicity.empty() || !std::isfinite(top) || top == bottom) {
        post.flat = true;
        std::fill(post.log_weight.begin(), post.log_weight.end(), 0.0);
        return post;
    }
    for (auto &v : post.log_weight) {
        v -= top;
    }
    post.log_offset = top;
    return post;
}

namespace detail {

// Mean and standard deviation of the posterior sampled at (phase, unshifted log weight)
// pairs from any mix of grids, integrated with the trapezoid rule.
inline std::pair<double, double> posterior_moments(std::vector<std::pair<double, double>> samples) {
    std::sort(samples.begin(), samples.end());
    samples.erase(std::unique(samples.begin(), samples.end(),
                              [](const auto &a, const auto &b) {
                                  return a.first == b.first;
                              }),
                  samples.end());
    double top = -std::numeric_limits<double>::infinity();
    for (const auto &s : samples) {
        top = std::fmax(top, s.second);
    }
    if (samples.size() < 2 || !std::isfinite(top)) {
        return {samples.empty() ? 0.0 : samples.front().first, 0.0};
    }
    std::vector<double> w(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        w[i] = std::exp(samples[i].second - top);
    }
    double z = 0, m1 = 0;
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
        const double h = samples[i + 1].first - samples[i].first;
        z += 0.5 * h * (w[i] + w[i + 1]);
        m1 += 0.5 * h * (w[i] * samples[i].first + w[i + 1] * samples[i + 1].first);
    }
    const double mean = m1 / z;
    double m2 = 0;
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
        const double h = samples[i + 1].first - samples[i].first;
        const double d0 = samples[i].first - mean;
        const double d1 = samples[i + 1].first - mean;
        m2 += 0.5 * h * (w[i] * d0 * d0 + w[i + 1] * d1 * d1);
    }
    return {mean, std::sqrt(std::fmax(m2 / z, 0.0))};
}

inline void append_samples(const PhasePosterior &post, std::vector<std::pair<double, double>> &out) {
    for (std::size_t i = 0; i < post.log_weight.size(); ++i) {
        out.emplace_back(post.grid.points[i], post.log_weight[i] + post.log_offset);
    }
}

// Highest separated local maximum other than the global one with log weight >= floor.
inline std::optional<std::size_t> secondary_peak(const std::vector<double> &lw, std::size_t best, double log_floor) {
    std::optional<std::size_t> found;
    const std::size_t n = lw.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (i == best || lw[i] < log_floor) {
            continue;
        }
        const double left = i > 0 ? lw[i - 1] : -std::numeric_limits<double>::infinity();
        const double right = i + 1 < n ? lw[i + 1] : -std::numeric_limits<double>::infinity();
        if (!(lw[i] > left && lw[i] >= right) && !(lw[i] >= left && lw[i] > right)) {
            continue;
        }
        // A local maximum only counts when a dip separates it from the global peak.
        const std::size_t a = std::min(i, best);
        const std::size_t b = std::max(i, best);
        const double floor_between = *std::min_element(lw.begin() + static_cast<std::ptrdiff_t>(a), lw.begin() + static_cast<std::ptrdiff_t>(b) + 1);
        if (floor_between >= lw[i]) {
            continue;
        }
        if (!found || lw[i] > lw[*found]) {
            found = i;
        }
    }
    return found;
}

}  // namespace detail

/// Posterior-peak phase estimate with two (by default) zoom-in refinements.
///
/// The coarse posterior spans [lo, hi]; each refinement re-grids +-refine_half_width
/// current steps around the argmax with refine_factor times finer spacing.
///
/// The reported width is the posterior standard deviation over every point
/// evaluated at every level. When the peak fits inside the last window this is the
/// last window's standard deviation; when the posterior is wider than that window
/// (small N) the coarser levels supply the tails the window cuts off.
inline PhaseEstimate estimate_phase(std::span<const BurstRecord> bursts, std::optional<double> phase_true, const EstimatorConfig &cfg = {}) {
    cfg.validate();
    PhaseEstimate est;
    est.k = bursts.size();

    PhasePosterior post = accumulate_posterior(bursts, PhaseGrid::uniform(cfg.lo, cfg.hi, cfg.coarse_points));
    if (post.flat) {
        est.valid = false;
        est.phi_hat = 0.5 * (cfg.lo + cfg.hi);
        std::vector<std::pair<double, double>> samples;
        detail::append_samples(post, samples);
        est.sigma_post = detail::posterior_moments(std::move(samples)).second;
        est.final_window = std::move(post);
        if (phase_true) {
            est.abs_error = std::fabs(est.phi_hat - *phase_true);
        }
        return est;
    }

    std::size_t best = post.argmax();
    if (auto second = detail::secondary_peak(post.log_weight, best, std::log1p(-cfg.ambiguity_tolerance))) {
        est.ambiguous = true;
        est.secondary_peak = post.grid.points[*second];
    }

    std::vector<std::pair<double, double>> samples;
    detail::append_samples(post, samples);
    double step = post.grid.step();
    for (int round = 0; round < cfg.refine_rounds; ++round) {
        const double center = post.grid.points[best];
        const double a = std::max(cfg.lo, center - cfg.refine_half_width * step);
        const double b = std::min(cfg.hi, center + cfg.refine_half_width * step);
        const double fine = step / cfg.refine_factor;
        const auto count = static_cast<std::size_t>(std::llround((b - a) / fine)) + 1;
        post = accumulate_posterior(bursts, PhaseGrid::uniform(a, b, std::max<std::size_t>(count, 2)));
        best = post.argmax();
        step = post.grid.step();
        detail::append_samples(post, samples);
    }

    est.phi_hat = post.grid.points[best];
    est.sigma_post = detail::posterior_moments(std::move(samples)).second;
    if (phase_true) {
        est.abs_error = std::fabs(est.phi_hat - *phase_true);
    }
    est.final_window = std::move(post);
    return est;
}

}  // namespace twinfock
