#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "twinfock/random.hpp"
#include "twinfock/specfun.hpp"

namespace twinfock {

/// Photon numbers at the two output ports.
struct PhotonCounts {
    std::int64_t n_a = 0;
    std::int64_t n_b = 0;

    std::int64_t total() const {
        return n_a + n_b;
    }
    HalfInt j() const {
        return HalfInt::from_twice(n_a + n_b);
    }
    HalfInt m() const {
        return HalfInt::from_twice(n_a - n_b);
    }

    bool operator==(const PhotonCounts &) const = default;
};

/// Exact output law of the twin-Fock interferometer at one phase.
///
/// Index i of log_probs and cdf corresponds to m = i - photons_per_arm.
struct OutcomeDistribution {
    std::int64_t photons_per_arm = 0;
    double phase = 0;
    std::vector<double> log_probs;
    std::vector<double> cdf;

    HalfInt j() const {
        return HalfInt(photons_per_arm);
    }
    std::int64_t size() const {
        return static_cast<std::int64_t>(log_probs.size());
    }
    double probability(std::int64_t m) const {
        if (m < -photons_per_arm || m > photons_per_arm) {
            return 0.0;
        }
        return std::exp(log_probs[static_cast<std::size_t>(m + photons_per_arm)]);
    }
};

struct BurstRecord {
    PhotonCounts detected;
    PhotonCounts pre_loss;
    double efficiency = 1.0;
};

namespace detail {

inline OutcomeDistribution distribution_from_probabilities(std::int64_t n, double phase, const std::vector<double> &probs) {
    OutcomeDistribution dist;
    dist.photons_per_arm = n;
    dist.phase = phase;
    dist.log_probs.resize(probs.size());
    dist.cdf.resize(probs.size());
    double running = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        dist.log_probs[i] = probs[i] > 0 ? std::log(probs[i]) : -std::numeric_limits<double>::infinity();
        running += probs[i];
        dist.cdf[i] = running;
    }
    return dist;
}

inline void check_phase(double phase, const char *who) {
    if (!(phase >= 0.0 && phase <= std::numbers::pi)) {
        throw std::invalid_argument(std::string(who) + ": phase must lie in [0, pi]");
    }
}

}  // namespace detail

/// Builds P(m) = [(n-m)!/(n+m)!] [P_n^m(cos phase)]^2 over m in {-n..n} for input |n>|n>.
inline OutcomeDistribution build_outcome_distribution(std::int64_t photons_per_arm, double phase) {
    if (photons_per_arm < 1) {
        throw std::invalid_argument("build_outcome_distribution: need at least one photon per arm");
    }
    detail::check_phase(phase, "build_outcome_distribution");
    const auto row = eval_weight_row(HalfInt(photons_per_arm), std::cos(phase));
    return detail::distribution_from_probabilities(photons_per_arm, phase, row_probabilities(row));
}

/// Pre-loss port counts (n + m, n - m) with m drawn by inverse CDF.
inline PhotonCounts sample_burst(const OutcomeDistribution &dist, RandomSource &rng) {
    if (dist.cdf.empty() || dist.size() != 2 * dist.photons_per_arm + 1) {
        throw std::invalid_argument("sample_burst: malformed distribution");
    }
    const double target = rng.uniform() * dist.cdf.back();
    auto it = std::upper_bound(dist.cdf.begin(), dist.cdf.end(), target);
    if (it == dist.cdf.end()) {
        --it;
    }
    const std::int64_t m = static_cast<std::int64_t>(it - dist.cdf.begin()) - dist.photons_per_arm;
    return {dist.photons_per_arm + m, dist.photons_per_arm - m};
}

/// Independent binomial thinning of each port.
inline PhotonCounts apply_loss(PhotonCounts counts, double efficiency, RandomSource &rng) {
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
        throw std::invalid_argument("apply_loss: efficiency must lie in [0, 1]");
    }
    const std::int64_t a = sample_binomial(rng, counts.n_a, efficiency);
    const std::int64_t b = sample_binomial(rng, counts.n_b, efficiency);
    return {a, b};
}

inline std::vector<BurstRecord> simulate_bursts(const OutcomeDistribution &dist, double efficiency, std::int64_t bursts, RandomSource &rng) {
    if (bursts < 1) {
        throw std::invalid_argument("simulate_bursts: need at least one burst");
    }
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) {
        throw std::invalid_argument("simulate_bursts: efficiency must lie in [0, 1]");
    }
    std::vector<BurstRecord> out;
    out.reserve(static_cast<std::size_t>(bursts));
    for (std::int64_t i = 0; i < bursts; ++i) {
        BurstRecord rec;
        rec.pre_loss = sample_burst(dist, rng);
        rec.detected = apply_loss(rec.pre_loss, efficiency, rng);
        rec.efficiency = efficiency;
        out.push_back(rec);
    }
    return out;
}

inline std::vector<BurstRecord> simulate_bursts(std::int64_t photons_per_arm, double phase_true, double efficiency, std::int64_t bursts,
                                                RandomSource &rng) {
    return simulate_bursts(build_outcome_distribution(photons_per_arm, phase_true), efficiency, bursts, rng);
}

/// Mach-Zehnder output law computed directly in the two-mode Fock basis.
///
/// Both beam splitters use r = 1/sqrt(2), t = i/sqrt(2); the phase sits on arm a.
/// The input a^dag^n b^dag^n / n! is pushed through the mode transformation and the
/// coefficient of each c^dag^p d^dag^(2n-p) is expanded by brute force. Independent
/// of the Legendre kernel; limited to n <= 4.
inline OutcomeDistribution oracle_distribution(std::int64_t photons_per_arm, double phase) {
    using cplx = std::complex<double>;
    if (photons_per_arm < 1 || photons_per_arm > 4) {
        throw std::invalid_argument("oracle_distribution: photons per arm must lie in [1, 4]");
    }
    detail::check_phase(phase, "oracle_distribution");
    const double s = 1.0 / std::numbers::sqrt2;
    const cplx t{0.0, s};
    const cplx r{s, 0.0};
    using Mat = std::array<std::array<cplx, 2>, 2>;
    const Mat bs{{{t, r}, {r, t}}};
    const Mat shift{{{std::polar(1.0, phase), 0.0}, {0.0, 1.0}}};
    auto mul = [](const Mat &x, const Mat &y) {
        Mat z{};
        for (int i = 0; i < 2; ++i) {
            for (int k = 0; k < 2; ++k) {
                for (int l = 0; l < 2; ++l) {
                    z[i][k] += x[i][l] * y[l][k];
                }
            }
        }
        return z;
    };
    const Mat u = mul(bs, mul(shift, bs));

    const int n = static_cast<int>(photons_per_arm);
    auto factorial = [](int v) {
        double f = 1;
        for (int i = 2; i <= v; ++i) {
            f *= i;
        }
        return f;
    };
    auto choose = [&](int a, int b) {
        return factorial(a) / (factorial(b) * factorial(a - b));
    };
    auto ipow = [](cplx base, int e) {
        cplx acc = 1.0;
        for (int i = 0; i < e; ++i) {
            acc *= base;
        }
        return acc;
    };

    // a^dag -> u[0][0] c^dag + u[1][0] d^dag, b^dag -> u[0][1] c^dag + u[1][1] d^dag.
    std::vector<double> probs(static_cast<std::size_t>(2 * n + 1), 0.0);
    for (int p = 0; p <= 2 * n; ++p) {
        cplx coeff = 0;
        for (int sa = std::max(0, p - n); sa <= std::min(n, p); ++sa) {
            const int sb = p - sa;
            coeff += choose(n, sa) * ipow(u[0][0], sa) * ipow(u[1][0], n - sa) * choose(n, sb) * ipow(u[0][1], sb) *
                     ipow(u[1][1], n - sb);
        }
        const cplx amp = coeff * std::sqrt(factorial(p) * factorial(2 * n - p)) / factorial(n);
        probs[static_cast<std::size_t>(p)] = std::norm(amp);
    }
    return detail::distribution_from_probabilities(photons_per_arm, phase, probs);
}

}  // namespace twinfock
