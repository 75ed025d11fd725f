#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace twinfock {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t &state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// ln(k!) - (k + 1/2) ln(k + 1) + (k + 1) - ln(sqrt(2 pi)), the Stirling tail used by BTRD.
inline double stirling_tail(std::int64_t k) {
    static constexpr std::array<double, 10> table = {
        0.08106146679532726, 0.04134069595540929, 0.02767792568499834, 0.02079067210376509,
        0.01664469118982119, 0.01387612882307075, 0.01189670994589177, 0.01041126526197209,
        0.009255462182712733, 0.008330563433362871,
    };
    if (k < 10) {
        return table[static_cast<std::size_t>(k)];
    }
    const double r = 1.0 / static_cast<double>(k + 1);
    const double r2 = r * r;
    return (1.0 / 12 - (1.0 / 360 - r2 / 1260) * r2) * r;
}

}  // namespace detail

/// Deterministic random stream keyed by (master seed, stream index).
///
/// Only the engine's raw 64-bit output is consumed; uniforms and binomials are
/// derived here rather than through <random> distributions, whose algorithms are
/// implementation-defined. Same key, same sequence, on every platform.
class RandomSource {
   public:
    RandomSource(std::uint64_t master_seed, std::uint64_t stream_index) {
        std::uint64_t state = master_seed;
        std::uint64_t stream_state = stream_index ^ 0xD1B54A32D192ED03ULL;
        const std::uint64_t stream_key = detail::splitmix64(stream_state);
        state ^= stream_key;
        std::array<std::uint32_t, 8> words{};
        for (std::size_t i = 0; i < words.size(); i += 2) {
            const std::uint64_t v = detail::splitmix64(state);
            words[i] = static_cast<std::uint32_t>(v);
            words[i + 1] = static_cast<std::uint32_t>(v >> 32);
        }
        std::seed_seq seq(words.begin(), words.end());
        engine_.seed(seq);
    }

    std::uint64_t next_u64() {
        return engine_();
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

   private:
    std::mt19937_64 engine_;
};

/// Exact Binomial(trials, p) variate.
///
/// Sequential inversion when trials * min(p, 1-p) < 10, otherwise Hormann's
/// BTRD transformed-rejection sampler. No normal approximation anywhere.
inline std::int64_t sample_binomial(RandomSource &rng, std::int64_t trials, double p) {
    if (trials < 0) {
        throw std::invalid_argument("sample_binomial: negative trial count");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("sample_binomial: probability outside [0, 1]");
    }
    if (trials == 0 || p == 0.0) {
        return 0;
    }
    if (p == 1.0) {
        return trials;
    }
    const bool flipped = p > 0.5;
    const double q = flipped ? 1.0 - p : p;
    const double n = static_cast<double>(trials);

    std::int64_t k;
    if (n * q < 10.0) {
        const double s = q / (1.0 - q);
        const double a = (n + 1.0) * s;
        double r = std::pow(1.0 - q, n);
        double u = rng.uniform();
        k = 0;
        while (u > r && k < trials) {
            u -= r;
            ++k;
            r *= a / static_cast<double>(k) - s;
        }
    } else {
        const double spq = std::sqrt(n * q * (1.0 - q));
        const double b = 1.15 + 2.53 * spq;
        const double a = -0.0873 + 0.0248 * b + 0.01 * q;
        const double c = n * q + 0.5;
        const double alpha = (2.83 + 5.1 / b) * spq;
        const double v_r = 0.92 - 4.2 / b;
        const double u_rv_r = 0.86 * v_r;
        const double r = q / (1.0 - q);
        const double nr = (n + 1.0) * r;
        const double npq = n * q * (1.0 - q);
        const auto mode = static_cast<std::int64_t>(std::floor((n + 1.0) * q));

        while (true) {
            double v = rng.uniform();
            double u;
            if (v <= u_rv_r) {
                u = v / v_r - 0.43;
                k = static_cast<std::int64_t>(std::floor((2.0 * a / (0.5 - std::fabs(u)) + b) * u + c));
                break;
            }
            if (v >= v_r) {
                u = rng.uniform() - 0.5;
            } else {
                u = v / v_r - 0.93;
                u = (u < 0 ? -0.5 : 0.5) - u;
                v = rng.uniform() * v_r;
            }
            const double us = 0.5 - std::fabs(u);
            const double kd = std::floor((2.0 * a / us + b) * u + c);
            if (kd < 0.0 || kd > n) {
                continue;
            }
            k = static_cast<std::int64_t>(kd);
            v = v * alpha / (a / (us * us) + b);
            const std::int64_t km = k > mode ? k - mode : mode - k;
            if (km <= 15) {
                double f = 1.0;
                if (mode < k) {
                    for (std::int64_t i = mode + 1; i <= k; ++i) {
                        f *= nr / static_cast<double>(i) - r;
                    }
                } else if (mode > k) {
                    for (std::int64_t i = k + 1; i <= mode; ++i) {
                        v *= nr / static_cast<double>(i) - r;
                    }
                }
                if (v <= f) {
                    break;
                }
                continue;
            }
            v = std::log(v);
            const double kmd = static_cast<double>(km);
            const double rho = (kmd / npq) * (((kmd / 3.0 + 0.625) * kmd + 1.0 / 6.0) / npq + 0.5);
            const double t = -kmd * kmd / (2.0 * npq);
            if (v < t - rho) {
                break;
            }
            if (v > t + rho) {
                continue;
            }
            const double nm = n - static_cast<double>(mode) + 1.0;
            const double h = (static_cast<double>(mode) + 0.5) * std::log((static_cast<double>(mode) + 1.0) / (r * nm)) +
                             detail::stirling_tail(mode) + detail::stirling_tail(trials - mode);
            const double nk = n - static_cast<double>(k) + 1.0;
            if (v <= h + (n + 1.0) * std::log(nm / nk) + (static_cast<double>(k) + 0.5) * std::log(nk * r / (static_cast<double>(k) + 1.0)) -
                         detail::stirling_tail(k) - detail::stirling_tail(trials - k)) {
                break;
            }
        }
    }
    return flipped ? trials - k : k;
}

}  // namespace twinfock
