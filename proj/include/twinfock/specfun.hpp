#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace twinfock {

/// An exact half-integer, stored as twice its value.
///
/// Used for the angular-momentum labels j = (n_a + n_b)/2 and m = (n_a - n_b)/2,
/// which are half-integers whenever the photon total is odd.
class HalfInt {
   public:
    constexpr HalfInt() = default;
    constexpr explicit HalfInt(std::int64_t integer_value) : twice_(2 * integer_value) {
    }

    static constexpr HalfInt from_twice(std::int64_t twice_value) {
        HalfInt h;
        h.twice_ = twice_value;
        return h;
    }

    constexpr std::int64_t twice() const {
        return twice_;
    }
    constexpr double value() const {
        return 0.5 * static_cast<double>(twice_);
    }
    constexpr bool is_integer() const {
        return twice_ % 2 == 0;
    }
    constexpr HalfInt abs() const {
        return from_twice(twice_ < 0 ? -twice_ : twice_);
    }
    constexpr HalfInt operator-() const {
        return from_twice(-twice_);
    }

    constexpr auto operator<=>(const HalfInt &) const = default;

    std::string str() const {
        if (is_integer()) {
            return std::to_string(twice_ / 2);
        }
        return std::to_string(twice_) + "/2";
    }

   private:
    std::int64_t twice_ = 0;
};

/// True when (j, m) label a state: j >= 0, |m| <= j, and j - m integral.
constexpr bool is_valid_pair(HalfInt j, HalfInt m) {
    return j.twice() >= 0 && m.abs().twice() <= j.twice() && (j.twice() - m.twice()) % 2 == 0;
}

/// Signed value carried as (sign, ln|value|). Exact zero is sign 0 with log -inf.
struct LogScaledValue {
    double log_magnitude = -std::numeric_limits<double>::infinity();
    int sign = 0;

    static LogScaledValue zero() {
        return {};
    }
    static LogScaledValue from_log(double log_magnitude, int sign = 1) {
        if (sign == 0 || log_magnitude == -std::numeric_limits<double>::infinity()) {
            return zero();
        }
        return {log_magnitude, sign > 0 ? 1 : -1};
    }
    static LogScaledValue from_double(double v) {
        if (v == 0) {
            return zero();
        }
        return {std::log(std::fabs(v)), v > 0 ? 1 : -1};
    }

    bool is_zero() const {
        return sign == 0;
    }
    double value() const {
        return sign == 0 ? 0.0 : sign * std::exp(log_magnitude);
    }

    friend LogScaledValue operator*(const LogScaledValue &a, const LogScaledValue &b) {
        if (a.is_zero() || b.is_zero()) {
            return zero();
        }
        return {a.log_magnitude + b.log_magnitude, a.sign * b.sign};
    }
};

namespace detail {

// glibc's lgamma writes the global signgam; lgamma_r keeps evaluation free of shared state.
inline double log_gamma(double x) {
#if defined(__GLIBC__)
    int sign_out;
    return ::lgamma_r(x, &sign_out);
#else
    return std::lgamma(x);
#endif
}

constexpr double kRescaleHigh = 1e150;
constexpr double kRescaleLow = 1e-150;

}  // namespace detail

/// ln((2m-1)!!) extended to half-integer m through (2m-1)!! = 2^m Gamma(m + 1/2) / sqrt(pi).
inline double log_double_factorial_gamma(HalfInt m) {
    if (m.twice() < 0) {
        throw std::invalid_argument("log_double_factorial_gamma: negative argument " + m.str());
    }
    const double v = m.value();
    return v * std::numbers::ln2 + detail::log_gamma(v + 0.5) - 0.5 * std::log(std::numbers::pi);
}

/// Associated Legendre function P_j^mu(x) with the Condon-Shortley phase, for mu >= 0.
///
/// Seeds at P_mu^mu = (-1)^mu (2mu-1)!! (1-x^2)^(mu/2) and climbs in degree with
///     (l - mu + 1) P_{l+1} = (2l + 1) x P_l - (l + mu) P_{l-1},
/// keeping the pair (P_{l-1}, P_l) under a shared power-of-two exponent so that
/// nothing overflows at degree 5000. Half-integer mu takes a + sign on the seed.
inline LogScaledValue legendre_log_scaled(HalfInt j, HalfInt mu, double x) {
    if (mu.twice() < 0 || !is_valid_pair(j, mu)) {
        throw std::invalid_argument("legendre_log_scaled: invalid (j, mu) = (" + j.str() + ", " + mu.str() + ")");
    }
    if (!(x >= -1.0 && x <= 1.0)) {
        throw std::invalid_argument("legendre_log_scaled: x outside [-1, 1]");
    }
    const double one_minus_x2 = (1.0 - x) * (1.0 + x);
    if (one_minus_x2 == 0.0) {
        if (mu.twice() != 0) {
            return LogScaledValue::zero();
        }
        // P_j(1) = 1, P_j(-1) = (-1)^j.
        return LogScaledValue::from_log(0.0, (x < 0 && (j.twice() / 2) % 2 != 0) ? -1 : 1);
    }

    const double mu_v = mu.value();
    const int seed_sign = (mu.is_integer() && (mu.twice() / 2) % 2 != 0) ? -1 : 1;
    double log_scale = log_double_factorial_gamma(mu) + 0.5 * mu_v * std::log(one_minus_x2);
    const std::int64_t steps = (j.twice() - mu.twice()) / 2;
    if (steps == 0) {
        return LogScaledValue::from_log(log_scale, seed_sign);
    }

    double p_prev = seed_sign;
    double p_cur = x * (2.0 * mu_v + 1.0) * p_prev;
    int exponent_shift = 0;
    for (std::int64_t i = 1; i < steps; ++i) {
        const double l = mu_v + static_cast<double>(i);
        const double p_next = ((2.0 * l + 1.0) * x * p_cur - (l + mu_v) * p_prev) / (l - mu_v + 1.0);
        p_prev = p_cur;
        p_cur = p_next;
        const double big = std::fmax(std::fabs(p_prev), std::fabs(p_cur));
        if (big > detail::kRescaleHigh || (big < detail::kRescaleLow && big > 0.0)) {
            int e;
            std::frexp(big, &e);
            p_prev = std::ldexp(p_prev, -e);
            p_cur = std::ldexp(p_cur, -e);
            exponent_shift += e;
        }
    }
    if (p_cur == 0.0) {
        return LogScaledValue::zero();
    }
    log_scale += std::log(std::fabs(p_cur)) + exponent_shift * std::numbers::ln2;
    return LogScaledValue::from_log(log_scale, p_cur > 0 ? 1 : -1);
}

/// ln of [(j-|m|)!/(j+|m|)!] without the Legendre factor.
inline double log_factorial_ratio(HalfInt j, HalfInt m) {
    const double j_v = j.value();
    const double mu_v = m.abs().value();
    return detail::log_gamma(j_v - mu_v + 1.0) - detail::log_gamma(j_v + mu_v + 1.0);
}

namespace detail {

// ln of the outcome weight at n abscissae in (-1, 1), sharing one degree recurrence.
//
// The recurrence coefficients depend only on (l, mu), so they are hoisted out of the
// abscissa loop. Values are renormalized by an exact power of two every few steps; a
// single step can grow the pair by at most ~4j, so 8 steps stay far from overflow.
inline void weight_kernel(HalfInt j, HalfInt mu, const double *xs, double *out, std::size_t n, double *p_prev, double *p_cur,
                          int *shift) {
    constexpr int kCheckEvery = 8;
    const double mu_v = mu.value();
    const double base = log_factorial_ratio(j, mu) + 2.0 * log_double_factorial_gamma(mu);
    const std::int64_t steps = (j.twice() - mu.twice()) / 2;

    for (std::size_t i = 0; i < n; ++i) {
        p_prev[i] = 1.0;
        p_cur[i] = xs[i] * (2.0 * mu_v + 1.0);
        shift[i] = 0;
    }
    for (std::int64_t s = 1; s < steps; ++s) {
        const double l = mu_v + static_cast<double>(s);
        const double inv = 1.0 / (l - mu_v + 1.0);
        const double a = (2.0 * l + 1.0) * inv;
        const double b = (l + mu_v) * inv;
        for (std::size_t i = 0; i < n; ++i) {
            const double next = a * xs[i] * p_cur[i] - b * p_prev[i];
            p_prev[i] = p_cur[i];
            p_cur[i] = next;
        }
        if (s % kCheckEvery == 0) {
            for (std::size_t i = 0; i < n; ++i) {
                const double big = std::fmax(std::fabs(p_prev[i]), std::fabs(p_cur[i]));
                if (big > kRescaleHigh || (big < kRescaleLow && big > 0.0)) {
                    int e;
                    std::frexp(big, &e);
                    p_prev[i] = std::ldexp(p_prev[i], -e);
                    p_cur[i] = std::ldexp(p_cur[i], -e);
                    shift[i] += e;
                }
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double x = xs[i];
        const double one_minus_x2 = (1.0 - x) * (1.0 + x);
        if (one_minus_x2 == 0.0) {
            out[i] = mu.twice() == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
            continue;
        }
        const double p = steps == 0 ? 1.0 : p_cur[i];
        if (p == 0.0) {
            out[i] = -std::numeric_limits<double>::infinity();
            continue;
        }
        const double log_p = std::log(std::fabs(p)) + (steps == 0 ? 0 : shift[i]) * std::numbers::ln2;
        out[i] = base + mu_v * std::log(one_minus_x2) + 2.0 * log_p;
    }
}

inline void check_weight_args(HalfInt j, HalfInt m, const char *who) {
    if (!is_valid_pair(j, m)) {
        throw std::invalid_argument(std::string(who) + ": invalid (j, m) = (" + j.str() + ", " + m.str() + ")");
    }
}

inline void check_abscissa(double x, const char *who) {
    if (!(x >= -1.0 && x <= 1.0)) {
        throw std::invalid_argument(std::string(who) + ": x outside [-1, 1]");
    }
}

}  // namespace detail

/// ln of [(j-m)!/(j+m)!] [P_j^m(x)]^2 at every x in xs (-inf where the weight vanishes).
inline void eval_weight_batch(HalfInt j, HalfInt m, std::span<const double> xs, std::span<double> log_out) {
    detail::check_weight_args(j, m, "eval_weight_batch");
    if (log_out.size() != xs.size()) {
        throw std::invalid_argument("eval_weight_batch: output size mismatch");
    }
    for (double x : xs) {
        detail::check_abscissa(x, "eval_weight_batch");
    }
    const std::size_t n = xs.size();
    std::vector<double> p_prev(n), p_cur(n);
    std::vector<int> shift(n);
    detail::weight_kernel(j, m.abs(), xs.data(), log_out.data(), n, p_prev.data(), p_cur.data(), shift.data());
}

/// The outcome weight [(j-m)!/(j+m)!] [P_j^m(x)]^2, evaluated with |m|.
///
/// For integer j this is the squared Wigner element d^j_{m0}(arccos x)^2. The
/// endpoints x = +-1 return delta_{m,0} exactly.
inline LogScaledValue eval_weight(HalfInt j, HalfInt m, double x) {
    detail::check_weight_args(j, m, "eval_weight");
    detail::check_abscissa(x, "eval_weight");
    double log_w;
    double p_prev;
    double p_cur;
    int shift;
    detail::weight_kernel(j, m.abs(), &x, &log_w, 1, &p_prev, &p_cur, &shift);
    return LogScaledValue::from_log(log_w, 1);
}

/// eval_weight for every m in {-j, ..., j}; entry i holds m = i - j.
inline std::vector<LogScaledValue> eval_weight_row(HalfInt j, double x) {
    if (!j.is_integer() || j.twice() < 0) {
        throw std::invalid_argument("eval_weight_row: j must be a nonnegative integer, got " + j.str());
    }
    if (!(x >= -1.0 && x <= 1.0)) {
        throw std::invalid_argument("eval_weight_row: x outside [-1, 1]");
    }
    const std::int64_t jj = j.twice() / 2;
    std::vector<LogScaledValue> row(static_cast<std::size_t>(2 * jj + 1));
    for (std::int64_t mu = 0; mu <= jj; ++mu) {
        const LogScaledValue w = eval_weight(j, HalfInt(mu), x);
        row[static_cast<std::size_t>(jj + mu)] = w;
        row[static_cast<std::size_t>(jj - mu)] = w;
    }
    return row;
}

/// Exponentiates a row with a shared max-log shift and normalizes it to sum to one.
inline std::vector<double> row_probabilities(const std::vector<LogScaledValue> &row) {
    double top = -std::numeric_limits<double>::infinity();
    for (const auto &w : row) {
        if (!w.is_zero()) {
            top = std::fmax(top, w.log_magnitude);
        }
    }
    std::vector<double> out(row.size(), 0.0);
    double total = 0;
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (!row[i].is_zero()) {
            out[i] = std::exp(row[i].log_magnitude - top);
            total += out[i];
        }
    }
    for (auto &p : out) {
        p /= total;
    }
    return out;
}

}  // namespace twinfock
