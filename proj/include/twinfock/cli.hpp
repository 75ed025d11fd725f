#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "twinfock/bayes.hpp"
#include "twinfock/experiment.hpp"
#include "twinfock/interferometer.hpp"
#include "twinfock/io.hpp"

namespace twinfock::cli {

/// Bad flag value; reported with the flag name and exit code 2.
class UsageError : public std::runtime_error {
   public:
    UsageError(const std::string &flag, const std::string &what) : std::runtime_error(flag + ": " + what) {
    }
};

/// Fully parsed command line.
struct Invocation {
    std::string subcommand;
    std::vector<std::int64_t> photons;
    std::vector<double> phases;  // empty: the 1/N rule where a rule applies
    std::string efficiency = "1";
    std::int64_t bursts = 10;
    std::int64_t trials = 100;
    std::uint64_t seed = 0;
    std::size_t grid = 1024;
    std::string format = "csv";
    std::string out = "-";
    std::string manifest;
    unsigned threads = 0;

    RunOptions run_options() const {
        RunOptions o;
        o.estimator.coarse_points = grid;
        o.threads = threads;
        return o;
    }

    /// Everything that determines the output bytes (not where they go).
    nlohmann::json config() const {
        nlohmann::json c = {{"subcommand", subcommand}, {"photons", photons}, {"format", format}};
        const EstimatorConfig est = run_options().estimator;
        if (subcommand != "dist") {
            c["efficiency"] = efficiency;
            c["bursts"] = bursts;
            c["grid"] = grid;
            c["refine_rounds"] = est.refine_rounds;
            c["refine_factor"] = est.refine_factor;
            c["domain"] = {est.lo, est.hi};
        }
        if (subcommand == "sweep" || subcommand == "phase-scan") {
            c["trials"] = trials;
        }
        c["phase"] = phases;
        if (subcommand == "sweep") {
            const auto rule = EfficiencyRule::parse(efficiency);
            PhaseRule pr;
            if (!phases.empty()) {
                pr.fixed = phases.front();
            }
            auto pts = nlohmann::json::array();
            for (auto n : photons) {
                pts.push_back({{"N", n}, {"eta", rule.resolve(n)}, {"phase_true", pr.resolve(n)}});
            }
            c["points"] = pts;
        }
        return c;
    }

    static Invocation from_config(const nlohmann::json &c, std::uint64_t seed) {
        Invocation inv;
        inv.subcommand = c.at("subcommand").get<std::string>();
        inv.photons = c.at("photons").get<std::vector<std::int64_t>>();
        inv.format = c.value("format", "csv");
        inv.phases = c.value("phase", std::vector<double>{});
        inv.efficiency = c.value("efficiency", std::string("1"));
        inv.bursts = c.value("bursts", std::int64_t{10});
        inv.trials = c.value("trials", std::int64_t{100});
        inv.grid = c.value("grid", std::size_t{1024});
        inv.seed = seed;
        return inv;
    }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string &text) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    return parts;
}

template <class Int>
Int parse_int(const std::string &flag, const std::string &text) {
    Int v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw UsageError(flag, "expected an integer, got '" + text + "'");
    }
    return v;
}

inline double parse_real(const std::string &flag, const std::string &text) {
    std::size_t used = 0;
    double v;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception &) {
        throw UsageError(flag, "expected a real number, got '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(v)) {
        throw UsageError(flag, "expected a real number, got '" + text + "'");
    }
    return v;
}

inline void require_single(const std::string &flag, std::size_t count) {
    if (count != 1) {
        throw UsageError(flag, "expects exactly one value for this subcommand");
    }
}

}  // namespace detail

/// Checks every flag against the preconditions of the operation it feeds.
inline void validate(const Invocation &inv) {
    if (inv.photons.empty()) {
        throw UsageError("--photons", "required");
    }
    for (auto n : inv.photons) {
        if (n < 2 || n % 2 != 0) {
            throw UsageError("--photons", "total photon number must be even and >= 2, got " + std::to_string(n));
        }
    }
    if (inv.format != "csv" && inv.format != "json") {
        throw UsageError("--format", "must be csv or json");
    }
    const bool single_n = inv.subcommand != "sweep";
    if (single_n) {
        detail::require_single("--photons", inv.photons.size());
    }
    if (inv.subcommand == "dist") {
        detail::require_single("--phase", inv.phases.size());
        if (!(inv.phases[0] >= 0.0 && inv.phases[0] <= std::numbers::pi)) {
            throw UsageError("--phase", "must lie in [0, pi]");
        }
        return;
    }

    try {
        const auto rule = EfficiencyRule::parse(inv.efficiency);
        for (auto n : inv.photons) {
            const double eta = rule.resolve(n);
            if (!(eta > 0.0 && eta <= 1.0)) {
                throw std::invalid_argument("must lie in (0, 1]");
            }
        }
    } catch (const std::invalid_argument &e) {
        throw UsageError("--efficiency", e.what());
    }
    if (inv.bursts < 1) {
        throw UsageError("--bursts", "must be >= 1");
    }
    if (inv.trials < 1) {
        throw UsageError("--trials", "must be >= 1");
    }
    if (inv.grid < 2) {
        throw UsageError("--grid", "must be >= 2");
    }
    const double half_pi = std::numbers::pi / 2;
    if (inv.subcommand == "simulate" || inv.subcommand == "sweep") {
        if (inv.phases.size() > 1) {
            throw UsageError("--phase", "expects at most one value for this subcommand");
        }
    }
    if (inv.subcommand == "phase-scan" && inv.phases.empty()) {
        throw UsageError("--phase", "required for phase-scan");
    }
    for (std::size_t i = 0; i < inv.phases.size(); ++i) {
        if (!(inv.phases[i] >= 0.0 && inv.phases[i] <= half_pi)) {
            throw UsageError("--phase", "must lie in [0, pi/2]");
        }
        if (i > 0 && !(inv.phases[i] > inv.phases[i - 1])) {
            throw UsageError("--phase", "values must be strictly increasing");
        }
    }
}

/// Output bytes plus a one-line human summary (may be empty).
struct Rendered {
    std::string content;
    std::string summary;
};

inline Rendered execute(const Invocation &inv) {
    validate(inv);
    const bool json = inv.format == "json";
    Rendered r;
    if (inv.subcommand == "dist") {
        const auto dist = build_outcome_distribution(inv.photons[0] / 2, inv.phases[0]);
        r.content = json ? distribution_json(dist).dump(2) + "\n" : distribution_csv(dist);
        return r;
    }
    const auto rule = EfficiencyRule::parse(inv.efficiency);
    if (inv.subcommand == "simulate") {
        const std::int64_t n_total = inv.photons[0];
        const double phase = inv.phases.empty() ? 1.0 / static_cast<double>(n_total) : inv.phases[0];
        RandomSource rng(inv.seed, 0);
        const auto bursts = simulate_bursts(n_total / 2, phase, rule.resolve(n_total), inv.bursts, rng);
        const auto est = estimate_phase(bursts, phase, inv.run_options().estimator);
        r.content = json ? posterior_json(est.final_window).dump(2) + "\n" : posterior_csv(est.final_window);
        std::ostringstream s;
        s << "phi_hat=" << format_real(est.phi_hat) << " sigma_post=" << format_real(est.sigma_post)
          << " abs_error=" << format_real(*est.abs_error) << " k=" << est.k << (est.valid ? "" : " invalid")
          << (est.ambiguous ? " ambiguous secondary=" + format_real(*est.secondary_peak) : "");
        r.summary = s.str();
        return r;
    }
    if (inv.subcommand == "sweep") {
        SweepConfig cfg;
        cfg.photon_totals = inv.photons;
        cfg.efficiency = rule;
        cfg.bursts = inv.bursts;
        cfg.trials = inv.trials;
        if (!inv.phases.empty()) {
            cfg.phase.fixed = inv.phases[0];
        }
        cfg.master_seed = inv.seed;
        cfg.options = inv.run_options();
        const auto points = run_sweep(cfg);
        r.content = json ? sweep_json(points).dump(2) + "\n" : sweep_csv(points);
        return r;
    }
    if (inv.subcommand == "phase-scan") {
        ScanConfig cfg;
        cfg.N = inv.photons[0];
        cfg.eta = rule.resolve(cfg.N);
        cfg.phases = inv.phases;
        cfg.bursts = inv.bursts;
        cfg.trials = inv.trials;
        cfg.master_seed = inv.seed;
        cfg.options = inv.run_options();
        const auto rows = run_phase_scan(cfg);
        r.content = json ? scan_json(rows).dump(2) + "\n" : scan_csv(rows);
        return r;
    }
    throw UsageError("subcommand", "unknown '" + inv.subcommand + "'");
}

inline std::string manifest_path_for(const Invocation &inv) {
    if (!inv.manifest.empty()) {
        return inv.manifest;
    }
    if (inv.out != "-") {
        return inv.out + ".manifest.json";
    }
    return {};
}

/// Entry point behind the twinfock executable. args excludes the program name.
///
/// Exit codes: 0 success, 2 usage error, 1 runtime error.
inline int parse_and_dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Twin-Fock Bayesian interferometry simulator", "twinfock"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    Invocation inv;
    std::string photons_text;
    std::string phase_text;
    std::string bursts_text = "10";
    std::string trials_text = "100";
    std::string seed_text = "0";
    std::string grid_text = "1024";
    std::string threads_text = "0";

    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--photons", photons_text, "Total photons per burst N (even); comma list for sweep")->required();
        sub->add_option("--out", inv.out, "Output path, or - for standard output")->capture_default_str();
        sub->add_option("--format", inv.format, "csv or json")->capture_default_str();
        sub->add_option("--manifest", inv.manifest, "Manifest path (default <out>.manifest.json)");
    };
    auto add_sim = [&](CLI::App *sub) {
        sub->add_option("--efficiency", inv.efficiency, "Detector efficiency in (0,1], or 1-1/N")->capture_default_str();
        sub->add_option("--bursts", bursts_text, "Bursts per trial k")->capture_default_str();
        sub->add_option("--seed", seed_text, "Master seed (u64)")->capture_default_str();
        sub->add_option("--grid", grid_text, "Coarse posterior grid points on [0, pi/2]")->capture_default_str();
    };

    auto *dist = app.add_subcommand("dist", "Exact outcome distribution over m at one phase");
    add_common(dist);
    dist->add_option("--phase", phase_text, "Phase in radians, [0, pi]")->required();

    auto *simulate = app.add_subcommand("simulate", "Simulate k bursts and write the refined posterior");
    add_common(simulate);
    add_sim(simulate);
    simulate->add_option("--phase", phase_text, "True phase (default 1/N)");

    auto *sweep = app.add_subcommand("sweep", "Phase error against photon number");
    add_common(sweep);
    add_sim(sweep);
    sweep->add_option("--phase", phase_text, "Fixed true phase (default 1/N per point)");
    sweep->add_option("--trials", trials_text, "Trials per point T")->capture_default_str();
    sweep->add_option("--threads", threads_text, "Worker threads (0 = all cores)")->capture_default_str();

    auto *scan = app.add_subcommand("phase-scan", "Estimator behaviour across true phases");
    add_common(scan);
    add_sim(scan);
    scan->add_option("--phase", phase_text, "Comma list of true phases in [0, pi/2]")->required();
    scan->add_option("--trials", trials_text, "Trials per phase T")->capture_default_str();
    scan->add_option("--threads", threads_text, "Worker threads (0 = all cores)")->capture_default_str();

    std::string replay_manifest;
    bool replay_verify = false;
    std::string replay_out = "-";
    auto *replay = app.add_subcommand("replay", "Re-run the configuration recorded in a manifest");
    replay->add_option("manifest", replay_manifest, "Manifest JSON")->required();
    replay->add_option("--out", replay_out, "Output path, or -")->capture_default_str();
    replay->add_flag("--verify", replay_verify, "Fail unless the output checksum matches the manifest");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion &) {
        out << kVersion << "\n";
        return 0;
    } catch (const CLI::ParseError &e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (replay->parsed()) {
            const RunManifest m = RunManifest::from_json(nlohmann::json::parse(read_file(replay_manifest)));
            Invocation again = Invocation::from_config(m.config, m.seed);
            const Rendered r = execute(again);
            write_output(replay_out, r.content, out);
            if (replay_verify) {
                const std::string digest = sha256_hex(r.content);
                const bool match = std::any_of(m.outputs.begin(), m.outputs.end(), [&](const RunManifest::Output &o) {
                    return o.sha256 == digest;
                });
                if (!match) {
                    err << "replay: output checksum " << digest << " does not match the manifest\n";
                    return 1;
                }
                err << "replay: checksum verified " << digest << "\n";
            }
            return 0;
        }

        CLI::App *sub = app.get_subcommands().front();
        inv.subcommand = sub->get_name();
        for (const auto &p : detail::split_list(photons_text)) {
            inv.photons.push_back(detail::parse_int<std::int64_t>("--photons", p));
        }
        if (!phase_text.empty()) {
            for (const auto &p : detail::split_list(phase_text)) {
                inv.phases.push_back(detail::parse_real("--phase", p));
            }
        }
        inv.bursts = detail::parse_int<std::int64_t>("--bursts", bursts_text);
        inv.trials = detail::parse_int<std::int64_t>("--trials", trials_text);
        inv.seed = detail::parse_int<std::uint64_t>("--seed", seed_text);
        inv.grid = detail::parse_int<std::size_t>("--grid", grid_text);
        inv.threads = detail::parse_int<unsigned>("--threads", threads_text);
        validate(inv);
    } catch (const UsageError &e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        const Rendered r = execute(inv);
        write_output(inv.out, r.content, out);
        if (!r.summary.empty()) {
            err << r.summary << "\n";
        }
        const std::string mpath = manifest_path_for(inv);
        if (!mpath.empty()) {
            RunManifest m;
            m.config = inv.config();
            m.seed = inv.seed;
            m.timestamp = utc_timestamp();
            m.outputs.push_back({inv.out, sha256_hex(r.content)});
            write_output(mpath, m.to_json().dump(2) + "\n", out);
        }
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace twinfock::cli
