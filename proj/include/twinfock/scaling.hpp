#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "twinfock/experiment.hpp"

namespace twinfock {

/// (photon total, phase error) pair for the log-log fits.
struct ScalingSample {
    double n = 0;
    double error = 0;
};

inline std::vector<ScalingSample> scaling_samples(std::span<const SweepPoint> points) {
    std::vector<ScalingSample> out;
    out.reserve(points.size());
    for (const auto &p : points) {
        out.push_back({static_cast<double>(p.N), p.mean_abs_error});
    }
    return out;
}

namespace detail {

inline std::vector<std::pair<double, double>> log_log(std::span<const ScalingSample> samples, std::optional<std::pair<double, double>> range) {
    std::vector<std::pair<double, double>> xy;
    for (const auto &s : samples) {
        if (!(s.n > 0)) {
            throw std::invalid_argument("scaling fit: photon totals must be positive");
        }
        if (!(s.error > 0)) {
            throw std::invalid_argument("scaling fit: errors must be positive");
        }
        if (range && (s.n < range->first || s.n > range->second)) {
            continue;
        }
        xy.emplace_back(std::log(s.n), std::log(s.error));
    }
    std::sort(xy.begin(), xy.end());
    return xy;
}

// Least squares on a small dense basis; returns the residual sum of squares.
template <std::size_t K>
double least_squares_rss(const std::vector<std::array<double, K>> &rows, const std::vector<double> &y, std::array<double, K> *coef = nullptr) {
    std::array<std::array<double, K + 1>, K> a{};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i = 0; i < K; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                a[i][k] += rows[r][i] * rows[r][k];
            }
            a[i][K] += rows[r][i] * y[r];
        }
    }
    // Gaussian elimination with partial pivoting.
    for (std::size_t c = 0; c < K; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < K; ++r) {
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) {
                piv = r;
            }
        }
        std::swap(a[c], a[piv]);
        if (std::fabs(a[c][c]) < 1e-300) {
            return std::numeric_limits<double>::infinity();
        }
        for (std::size_t r = 0; r < K; ++r) {
            if (r == c) {
                continue;
            }
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k <= K; ++k) {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    std::array<double, K> beta{};
    for (std::size_t i = 0; i < K; ++i) {
        beta[i] = a[i][K] / a[i][i];
    }
    double rss = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        double fit = 0;
        for (std::size_t i = 0; i < K; ++i) {
            fit += beta[i] * rows[r][i];
        }
        rss += (y[r] - fit) * (y[r] - fit);
    }
    if (coef) {
        *coef = beta;
    }
    return rss;
}

}  // namespace detail

/// OLS slope of ln(error) against ln(N), optionally restricted to N in [lo, hi].
inline double fit_loglog_slope(std::span<const ScalingSample> samples, std::optional<std::pair<double, double>> range = std::nullopt) {
    const auto xy = detail::log_log(samples, range);
    if (xy.size() < 2) {
        throw std::invalid_argument("fit_loglog_slope: need at least two points");
    }
    double mx = 0, my = 0;
    for (const auto &[x, y] : xy) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(xy.size());
    my /= static_cast<double>(xy.size());
    double sxx = 0, sxy = 0;
    for (const auto &[x, y] : xy) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if (sxx == 0) {
        throw std::invalid_argument("fit_loglog_slope: all photon totals coincide");
    }
    return sxy / sxx;
}

inline double fit_loglog_slope(std::span<const SweepPoint> points, std::optional<std::pair<double, double>> range = std::nullopt) {
    const auto s = scaling_samples(points);
    return fit_loglog_slope(std::span<const ScalingSample>(s), range);
}

struct CrossoverFit {
    bool has_crossover = false;
    double n_cross = 0;
    double slope_low = 0;
    double slope_high = 0;
    double rss_single = 0;
    double rss_broken = 0;
};

/// Continuous two-segment power law fitted in log-log space.
///
/// For each candidate break b the model ln e = c + s1 min(x - b, 0) + s2 max(x - b, 0)
/// is linear in (c, s1, s2); the break minimizing the residual wins. Candidates
/// are a dense log-uniform scan between the data leaving at least two points on
/// each side. When one straight line fits within 1% of that residual the result
/// reports no crossover.
inline CrossoverFit crossover_estimate(std::span<const ScalingSample> samples) {
    const auto xy = detail::log_log(samples, std::nullopt);
    if (xy.size() < 4) {
        throw std::invalid_argument("crossover_estimate: need at least four points");
    }
    std::vector<double> y;
    std::vector<std::array<double, 2>> line_rows;
    for (const auto &[x, v] : xy) {
        y.push_back(v);
        line_rows.push_back({1.0, x});
    }
    CrossoverFit fit;
    fit.rss_single = detail::least_squares_rss<2>(line_rows, y);

    constexpr int kCandidates = 4000;
    const double lo = xy[1].first;
    const double hi = xy[xy.size() - 2].first;
    double best_rss = std::numeric_limits<double>::infinity();
    std::array<double, 3> best_coef{};
    double best_b = lo;
    std::vector<std::array<double, 3>> rows(xy.size());
    for (int c = 0; c <= kCandidates; ++c) {
        const double b = lo + (hi - lo) * c / kCandidates;
        for (std::size_t i = 0; i < xy.size(); ++i) {
            const double d = xy[i].first - b;
            rows[i] = {1.0, std::min(d, 0.0), std::max(d, 0.0)};
        }
        std::array<double, 3> coef{};
        const double rss = detail::least_squares_rss<3>(rows, y, &coef);
        if (rss < best_rss) {
            best_rss = rss;
            best_coef = coef;
            best_b = b;
        }
    }
    fit.rss_broken = best_rss;
    fit.n_cross = std::exp(best_b);
    fit.slope_low = best_coef[1];
    fit.slope_high = best_coef[2];
    constexpr double kExactFit = 1e-20;
    fit.has_crossover = fit.rss_single > kExactFit && fit.rss_single - fit.rss_broken > 0.01 * fit.rss_single;
    return fit;
}

inline CrossoverFit crossover_estimate(std::span<const SweepPoint> points) {
    const auto s = scaling_samples(points);
    return crossover_estimate(std::span<const ScalingSample>(s));
}

}  // namespace twinfock
