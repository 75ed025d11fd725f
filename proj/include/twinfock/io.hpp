#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "twinfock/bayes.hpp"
#include "twinfock/experiment.hpp"
#include "twinfock/interferometer.hpp"

namespace twinfock {

inline constexpr std::string_view kVersion = "0.1.0";

/// Shortest decimal text that parses back to the same double.
inline std::string format_real(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline std::string sweep_csv(std::span<const SweepPoint> points) {
    if (points.empty()) {
        throw std::invalid_argument("sweep csv: no points to write");
    }
    std::vector<SweepPoint> sorted(points.begin(), points.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const SweepPoint &a, const SweepPoint &b) {
        return a.N < b.N;
    });
    std::string out = "N,eta,mean_abs_error,trial_stddev,mean_sigma_post,hl,snl,true_snl,trials,excluded\n";
    for (const auto &p : sorted) {
        out += std::to_string(p.N) + ',' + format_real(p.eta) + ',' + format_real(p.mean_abs_error) + ',' + format_real(p.trial_stddev) + ',' +
               format_real(p.mean_sigma_post) + ',' + format_real(p.hl) + ',' + format_real(p.snl) + ',' + format_real(p.true_snl) + ',' +
               std::to_string(p.trials) + ',' + std::to_string(p.excluded) + '\n';
    }
    return out;
}

inline nlohmann::json sweep_json(std::span<const SweepPoint> points) {
    if (points.empty()) {
        throw std::invalid_argument("sweep json: no points to write");
    }
    std::vector<SweepPoint> sorted(points.begin(), points.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const SweepPoint &a, const SweepPoint &b) {
        return a.N < b.N;
    });
    auto rows = nlohmann::json::array();
    for (const auto &p : sorted) {
        rows.push_back({{"N", p.N},
                        {"eta", p.eta},
                        {"mean_abs_error", p.mean_abs_error},
                        {"trial_stddev", p.trial_stddev},
                        {"mean_sigma_post", p.mean_sigma_post},
                        {"hl", p.hl},
                        {"snl", p.snl},
                        {"true_snl", p.true_snl},
                        {"trials", p.trials},
                        {"excluded", p.excluded}});
    }
    return rows;
}

inline void emit_sweep_csv(std::span<const SweepPoint> points, std::ostream &sink) {
    sink << sweep_csv(points);
}

/// Relative posterior probability (peak 1) on the posterior's grid.
inline std::string posterior_csv(const PhasePosterior &post) {
    if (post.log_weight.size() != post.grid.points.size() || post.log_weight.empty()) {
        throw std::invalid_argument("posterior csv: malformed posterior");
    }
    std::string out = "phase,relative_probability\n";
    for (std::size_t i = 0; i < post.log_weight.size(); ++i) {
        out += format_real(post.grid.points[i]) + ',' + format_real(std::exp(post.log_weight[i])) + '\n';
    }
    return out;
}

inline nlohmann::json posterior_json(const PhasePosterior &post) {
    if (post.log_weight.size() != post.grid.points.size() || post.log_weight.empty()) {
        throw std::invalid_argument("posterior json: malformed posterior");
    }
    auto rows = nlohmann::json::array();
    for (std::size_t i = 0; i < post.log_weight.size(); ++i) {
        rows.push_back({{"phase", post.grid.points[i]}, {"relative_probability", std::exp(post.log_weight[i])}});
    }
    return rows;
}

inline void emit_posterior_csv(const PhasePosterior &post, std::ostream &sink) {
    sink << posterior_csv(post);
}

inline std::string distribution_csv(const OutcomeDistribution &dist) {
    std::string out = "m,probability\n";
    for (std::int64_t i = 0; i < dist.size(); ++i) {
        out += std::to_string(i - dist.photons_per_arm) + ',' + format_real(std::exp(dist.log_probs[static_cast<std::size_t>(i)])) + '\n';
    }
    return out;
}

inline nlohmann::json distribution_json(const OutcomeDistribution &dist) {
    auto rows = nlohmann::json::array();
    for (std::int64_t i = 0; i < dist.size(); ++i) {
        rows.push_back({{"m", i - dist.photons_per_arm}, {"probability", std::exp(dist.log_probs[static_cast<std::size_t>(i)])}});
    }
    return rows;
}

inline std::string scan_csv(std::span<const ScanRow> rows) {
    if (rows.empty()) {
        throw std::invalid_argument("scan csv: no rows to write");
    }
    std::string out = "phase_true,mean_phi_hat,trial_stddev,mean_sigma_post,mean_abs_error,trials,excluded\n";
    for (const auto &r : rows) {
        out += format_real(r.phase_true) + ',' + format_real(r.mean_phi_hat) + ',' + format_real(r.trial_stddev) + ',' +
               format_real(r.mean_sigma_post) + ',' + format_real(r.mean_abs_error) + ',' + std::to_string(r.trials) + ',' +
               std::to_string(r.excluded) + '\n';
    }
    return out;
}

inline nlohmann::json scan_json(std::span<const ScanRow> rows) {
    if (rows.empty()) {
        throw std::invalid_argument("scan json: no rows to write");
    }
    auto out = nlohmann::json::array();
    for (const auto &r : rows) {
        out.push_back({{"phase_true", r.phase_true},
                       {"mean_phi_hat", r.mean_phi_hat},
                       {"trial_stddev", r.trial_stddev},
                       {"mean_sigma_post", r.mean_sigma_post},
                       {"mean_abs_error", r.mean_abs_error},
                       {"trials", r.trials},
                       {"excluded", r.excluded}});
    }
    return out;
}

inline std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

/// Writes content in one piece to path, or to `console` when path is "-".
inline void write_output(const std::string &path, std::string_view content, std::ostream &console) {
    if (path == "-") {
        console << content;
        console.flush();
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error("cannot open output file '" + path + "'");
    }
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) {
        throw std::runtime_error("failed writing output file '" + path + "'");
    }
}

inline std::string read_file(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream ss;
    ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return ss.str();
}

/// Reproducibility record written next to each output.
struct RunManifest {
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::string timestamp;
    struct Output {
        std::string path;
        std::string sha256;
    };
    std::vector<Output> outputs;

    nlohmann::json to_json() const {
        auto outs = nlohmann::json::array();
        for (const auto &o : outputs) {
            outs.push_back({{"path", o.path}, {"sha256", o.sha256}});
        }
        return {{"version", std::string(kVersion)}, {"config", config}, {"seed", seed}, {"timestamp", timestamp}, {"outputs", outs}};
    }

    static RunManifest from_json(const nlohmann::json &j) {
        RunManifest m;
        m.config = j.at("config");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.timestamp = j.value("timestamp", "");
        for (const auto &o : j.at("outputs")) {
            m.outputs.push_back({o.at("path").get<std::string>(), o.at("sha256").get<std::string>()});
        }
        return m;
    }
};

}  // namespace twinfock
