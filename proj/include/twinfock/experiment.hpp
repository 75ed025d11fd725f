#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "twinfock/bayes.hpp"
#include "twinfock/interferometer.hpp"
#include "twinfock/random.hpp"

namespace twinfock {

struct ReferenceLimits {
    double hl = 0;        // 1/N
    double snl = 0;       // 1/sqrt(N)
    double true_snl = 0;  // 1/sqrt(eta N)
};

inline ReferenceLimits reference_limits(std::int64_t total_photons, double eta) {
    if (total_photons < 1) {
        throw std::invalid_argument("reference_limits: N must be positive");
    }
    if (!(eta > 0.0 && eta <= 1.0)) {
        throw std::invalid_argument("reference_limits: efficiency must lie in (0, 1]");
    }
    const double n = static_cast<double>(total_photons);
    return {1.0 / n, 1.0 / std::sqrt(n), 1.0 / std::sqrt(eta * n)};
}

/// Detector efficiency per photon total: a fixed value, or the threshold 1 - 1/N.
class EfficiencyRule {
   public:
    static EfficiencyRule fixed(double eta) {
        if (!(eta >= 0.0 && eta <= 1.0)) {
            throw std::invalid_argument("efficiency must lie in [0, 1]");
        }
        EfficiencyRule r;
        r.value_ = eta;
        return r;
    }
    static EfficiencyRule threshold() {
        EfficiencyRule r;
        r.threshold_ = true;
        return r;
    }
    /// Accepts a real in [0, 1] or the literal "1-1/N".
    static EfficiencyRule parse(const std::string &text) {
        if (text == "1-1/N") {
            return threshold();
        }
        std::size_t used = 0;
        double v;
        try {
            v = std::stod(text, &used);
        } catch (const std::exception &) {
            throw std::invalid_argument("efficiency: expected a real or \"1-1/N\", got '" + text + "'");
        }
        if (used != text.size()) {
            throw std::invalid_argument("efficiency: trailing characters in '" + text + "'");
        }
        return fixed(v);
    }

    bool is_threshold() const {
        return threshold_;
    }
    double resolve(std::int64_t total_photons) const {
        return threshold_ ? 1.0 - 1.0 / static_cast<double>(total_photons) : value_;
    }

   private:
    double value_ = 1.0;
    bool threshold_ = false;
};

/// True phase per photon total: 1/N unless pinned.
struct PhaseRule {
    std::optional<double> fixed;

    double resolve(std::int64_t total_photons) const {
        return fixed ? *fixed : 1.0 / static_cast<double>(total_photons);
    }
};

struct RunOptions {
    EstimatorConfig estimator;
    unsigned threads = 0;  // 0 = hardware concurrency
};

struct SweepConfig {
    std::vector<std::int64_t> photon_totals;
    EfficiencyRule efficiency = EfficiencyRule::fixed(1.0);
    std::int64_t bursts = 10;
    std::int64_t trials = 100;
    PhaseRule phase;
    std::uint64_t master_seed = 0;
    RunOptions options;

    void validate() const;
};

struct SweepPoint {
    std::int64_t N = 0;
    double eta = 1;
    double phase_true = 0;
    double mean_abs_error = 0;
    double trial_stddev = 0;
    double mean_sigma_post = 0;
    double mean_phi_hat = 0;
    double hl = 0;
    double snl = 0;
    double true_snl = 0;
    std::int64_t trials = 0;
    std::int64_t excluded = 0;
    std::int64_t ambiguous = 0;
};

struct ScanConfig {
    std::int64_t N = 100;
    double eta = 0.99;
    std::vector<double> phases;
    std::int64_t bursts = 10;
    std::int64_t trials = 100;
    std::uint64_t master_seed = 0;
    RunOptions options;

    void validate() const;
};

struct ScanRow {
    double phase_true = 0;
    double mean_phi_hat = 0;
    double trial_stddev = 0;
    double mean_sigma_post = 0;
    double mean_abs_error = 0;
    std::int64_t trials = 0;
    std::int64_t excluded = 0;
};

namespace detail {

// Runs fn(0..count-1) on a small worker pool. Each index writes only its own slot,
// so results do not depend on scheduling.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)> &fn) {
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    next.store(count);
                }
            }
        });
    }
    pool.clear();
    if (failure) {
        std::rethrow_exception(failure);
    }
}

struct TrialOutcome {
    double phi_hat = 0;
    double abs_error = 0;
    double sigma_post = 0;
    bool valid = false;
    bool ambiguous = false;
};

inline std::vector<TrialOutcome> run_trials(const OutcomeDistribution &dist, double eta, std::int64_t bursts, std::int64_t trials,
                                            double phase_true, std::uint64_t master_seed, const RunOptions &opts) {
    std::vector<TrialOutcome> out(static_cast<std::size_t>(trials));
    parallel_for(out.size(), opts.threads, [&](std::size_t t) {
        RandomSource rng(master_seed, t);
        const auto records = simulate_bursts(dist, eta, bursts, rng);
        const PhaseEstimate est = estimate_phase(records, phase_true, opts.estimator);
        out[t] = {est.phi_hat, *est.abs_error, est.sigma_post, est.valid, est.ambiguous};
    });
    return out;
}

// Sample standard deviation; zero for fewer than two values.
inline double sample_stddev(const std::vector<double> &v) {
    if (v.size() < 2) {
        return 0.0;
    }
    double mean = 0;
    for (double x : v) {
        mean += x;
    }
    mean /= static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double mean_of(const std::vector<double> &v) {
    double s = 0;
    for (double x : v) {
        s += x;
    }
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline void check_totals(std::int64_t total) {
    if (total < 2 || total % 2 != 0) {
        throw std::invalid_argument("photon total N must be even and >= 2, got " + std::to_string(total));
    }
}

inline void check_phase_in_domain(double phase, const EstimatorConfig &est) {
    if (!(phase >= est.lo && phase <= est.hi)) {
        throw std::invalid_argument("true phase outside the estimation domain");
    }
}

}  // namespace detail

inline void SweepConfig::validate() const {
    if (photon_totals.empty()) {
        throw std::invalid_argument("sweep: no photon totals");
    }
    for (auto n : photon_totals) {
        detail::check_totals(n);
        const double eta = efficiency.resolve(n);
        if (!(eta > 0.0 && eta <= 1.0)) {
            throw std::invalid_argument("sweep: efficiency must lie in (0, 1]");
        }
        detail::check_phase_in_domain(phase.resolve(n), options.estimator);
    }
    if (bursts < 1) {
        throw std::invalid_argument("sweep: bursts must be >= 1");
    }
    if (trials < 1) {
        throw std::invalid_argument("sweep: trials must be >= 1");
    }
    options.estimator.validate();
}

inline void ScanConfig::validate() const {
    detail::check_totals(N);
    if (!(eta > 0.0 && eta <= 1.0)) {
        throw std::invalid_argument("scan: efficiency must lie in (0, 1]");
    }
    if (phases.empty()) {
        throw std::invalid_argument("scan: no phases");
    }
    for (std::size_t i = 0; i < phases.size(); ++i) {
        if (!(phases[i] >= 0.0 && phases[i] <= std::numbers::pi / 2)) {
            throw std::invalid_argument("scan: phases must lie in [0, pi/2]");
        }
        if (i > 0 && !(phases[i] > phases[i - 1])) {
            throw std::invalid_argument("scan: phases must be strictly increasing");
        }
        detail::check_phase_in_domain(phases[i], options.estimator);
    }
    if (bursts < 1 || trials < 1) {
        throw std::invalid_argument("scan: bursts and trials must be >= 1");
    }
    options.estimator.validate();
}

/// T independent trials at one (N, eta); trial t draws from stream t of master_seed.
inline SweepPoint run_point(std::int64_t total_photons, double eta, std::int64_t bursts, std::int64_t trials, double phase_true,
                            std::uint64_t master_seed, const RunOptions &opts = {}) {
    detail::check_totals(total_photons);
    if (bursts < 1 || trials < 1) {
        throw std::invalid_argument("run_point: bursts and trials must be >= 1");
    }
    detail::check_phase_in_domain(phase_true, opts.estimator);
    const ReferenceLimits lim = reference_limits(total_photons, eta);
    const OutcomeDistribution dist = build_outcome_distribution(total_photons / 2, phase_true);
    const auto outcomes = detail::run_trials(dist, eta, bursts, trials, phase_true, master_seed, opts);

    SweepPoint p;
    p.N = total_photons;
    p.eta = eta;
    p.phase_true = phase_true;
    p.hl = lim.hl;
    p.snl = lim.snl;
    p.true_snl = lim.true_snl;
    p.trials = trials;
    std::vector<double> phi, err, sig;
    for (const auto &o : outcomes) {
        if (!o.valid) {
            ++p.excluded;
            continue;
        }
        p.ambiguous += o.ambiguous ? 1 : 0;
        phi.push_back(o.phi_hat);
        err.push_back(o.abs_error);
        sig.push_back(o.sigma_post);
    }
    p.mean_abs_error = detail::mean_of(err);
    p.mean_phi_hat = detail::mean_of(phi);
    p.trial_stddev = detail::sample_stddev(phi);
    p.mean_sigma_post = detail::mean_of(sig);
    return p;
}

/// One point per photon total, sorted by N, efficiency and phase resolved per rule.
inline std::vector<SweepPoint> run_sweep(const SweepConfig &cfg) {
    cfg.validate();
    std::vector<std::int64_t> totals = cfg.photon_totals;
    std::sort(totals.begin(), totals.end());
    std::vector<SweepPoint> out;
    out.reserve(totals.size());
    for (auto n : totals) {
        out.push_back(run_point(n, cfg.efficiency.resolve(n), cfg.bursts, cfg.trials, cfg.phase.resolve(n), cfg.master_seed, cfg.options));
    }
    return out;
}

/// Estimator behaviour across true phases at fixed (N, eta), one row per phase.
inline std::vector<ScanRow> run_phase_scan(const ScanConfig &cfg) {
    cfg.validate();
    std::vector<ScanRow> rows;
    for (double phase : cfg.phases) {
        const SweepPoint p = run_point(cfg.N, cfg.eta, cfg.bursts, cfg.trials, phase, cfg.master_seed, cfg.options);
        ScanRow row;
        row.phase_true = phase;
        row.mean_phi_hat = p.mean_phi_hat;
        row.trial_stddev = p.trial_stddev;
        row.mean_sigma_post = p.mean_sigma_post;
        row.mean_abs_error = p.mean_abs_error;
        row.trials = p.trials;
        row.excluded = p.excluded;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace twinfock
