#include "twinfock/io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <sstream>

#include "support/property.hpp"

using twinfock::SweepPoint;

namespace {

std::string golden(const std::string &name) {
    return twinfock::read_file(std::string(TWINFOCK_GOLDEN_DIR) + "/" + name);
}

std::string first_line(const std::string &text) {
    return text.substr(0, text.find('\n') + 1);
}

SweepPoint point(std::int64_t n, double eta) {
    SweepPoint p;
    p.N = n;
    p.eta = eta;
    const auto l = twinfock::reference_limits(n, eta);
    p.hl = l.hl;
    p.snl = l.snl;
    p.true_snl = l.true_snl;
    p.mean_abs_error = 0.001;
    p.trials = 100;
    return p;
}

}  // namespace

TEST(FormatReal, ShortestRoundTrip) {
    EXPECT_EQ(twinfock::format_real(1.0), "1");
    EXPECT_EQ(twinfock::format_real(0.1), "0.1");
    EXPECT_EQ(twinfock::format_real(1e-4), "1e-04");
    prop::for_all(2000, 9, [](prop::Gen &g) {
        const double v = std::ldexp(g.real(-1, 1), static_cast<int>(g.integer(-300, 300)));
        EXPECT_EQ(std::stod(twinfock::format_real(v)), v);
    });
}

TEST(SweepCsv, HeaderMatchesGolden) {
    const std::vector<SweepPoint> pts = {point(100, 1.0)};
    EXPECT_EQ(first_line(twinfock::sweep_csv(pts)), golden("sweep_header.csv"));
}

TEST(SweepCsv, ReferenceColumns) {
    const std::vector<SweepPoint> pts = {point(100, 1.0)};
    const auto csv = twinfock::sweep_csv(pts);
    EXPECT_EQ(csv.substr(csv.find('\n') + 1), "100,1,0.001,0,0,0.01,0.1,0.1,100,0\n");
}

TEST(SweepCsv, RowsSortedAndThresholdEtas) {
    twinfock::EfficiencyRule rule = twinfock::EfficiencyRule::threshold();
    std::vector<SweepPoint> pts;
    for (std::int64_t n : {10000, 10, 1000, 100}) {
        pts.push_back(point(n, rule.resolve(n)));
    }
    std::istringstream in(twinfock::sweep_csv(pts));
    std::string line;
    std::getline(in, line);
    const std::vector<std::string> prefixes = {"10,0.9,", "100,0.99,", "1000,0.999,", "10000,0.9999,"};
    for (const auto &want : prefixes) {
        ASSERT_TRUE(std::getline(in, line));
        EXPECT_EQ(line.substr(0, want.size()), want);
    }
}

TEST(SweepCsv, EmptyIsAnErrorAndWritesNothing) {
    const auto path = std::filesystem::temp_directory_path() / "twinfock_empty_sweep.csv";
    std::filesystem::remove(path);
    EXPECT_THROW(
        {
            const auto csv = twinfock::sweep_csv({});
            twinfock::write_output(path.string(), csv, std::cout);
        },
        std::invalid_argument);
    EXPECT_FALSE(std::filesystem::exists(path));
    EXPECT_THROW(twinfock::sweep_json({}), std::invalid_argument);
}

TEST(SweepCsv, EmitWritesToSink) {
    const std::vector<SweepPoint> pts = {point(10, 0.9)};
    std::ostringstream os;
    twinfock::emit_sweep_csv(pts, os);
    EXPECT_EQ(os.str(), twinfock::sweep_csv(pts));
}

TEST(SweepJson, MirrorsCsvColumns) {
    const std::vector<SweepPoint> pts = {point(100, 1.0)};
    const auto j = twinfock::sweep_json(pts);
    ASSERT_EQ(j.size(), 1u);
    EXPECT_EQ(j[0]["N"], 100);
    EXPECT_EQ(j[0]["hl"], 0.01);
    EXPECT_TRUE(j[0].contains("excluded"));
}

TEST(PosteriorCsv, SingleBurstColumnIsCosineSquared) {
    twinfock::BurstRecord b;
    b.detected = {1, 1};
    const std::vector<twinfock::BurstRecord> bursts = {b};
    const auto post = twinfock::accumulate_posterior(bursts, twinfock::PhaseGrid::uniform(0, 1.5, 31));
    const auto csv = twinfock::posterior_csv(post);
    EXPECT_EQ(first_line(csv), golden("posterior_header.csv"));
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    EXPECT_EQ(line, "0,1");
    int rows = 1;
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        const double phi = std::stod(line.substr(0, comma));
        const double w = std::stod(line.substr(comma + 1));
        EXPECT_NEAR(w, std::cos(phi) * std::cos(phi), 1e-12);
        ++rows;
    }
    EXPECT_EQ(rows, 31);
}

TEST(PosteriorCsv, FlatPosteriorIsAllOnes) {
    twinfock::BurstRecord b;
    const std::vector<twinfock::BurstRecord> bursts = {b};
    const auto post = twinfock::accumulate_posterior(bursts, twinfock::PhaseGrid::uniform(0, 1, 5));
    std::istringstream in(twinfock::posterior_csv(post));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        EXPECT_EQ(line.substr(line.find(',') + 1), "1");
    }
}

TEST(PosteriorCsv, TenThousandPhotonPeak) {
    twinfock::RandomSource rng(42, 0);
    const auto bursts = twinfock::simulate_bursts(5000, 1e-4, 1.0, 10, rng);
    const auto est = twinfock::estimate_phase(bursts, 1e-4);
    const auto &post = est.final_window;
    const double peak = post.grid.points[post.argmax()];
    // Resolved to the posterior width around the true phase.
    EXPECT_NEAR(peak, 1e-4, 3 * est.sigma_post + post.grid.step());
    std::ostringstream os;
    twinfock::emit_posterior_csv(post, os);
    EXPECT_NE(os.str().find(twinfock::format_real(peak) + ",1\n"), std::string::npos);
}

TEST(DistributionCsv, GoldenZeroPhase) {
    const auto d = twinfock::build_outcome_distribution(1, 0.0);
    EXPECT_EQ(twinfock::distribution_csv(d), golden("dist_n2_phase0.csv"));
    EXPECT_EQ(first_line(twinfock::distribution_csv(d)), golden("distribution_header.csv"));
    EXPECT_EQ(twinfock::distribution_json(d).size(), 3u);
}

TEST(ScanCsv, HeaderMatchesGolden) {
    twinfock::ScanRow r;
    r.phase_true = 0.01;
    const std::vector<twinfock::ScanRow> rows = {r};
    EXPECT_EQ(first_line(twinfock::scan_csv(rows)), golden("scan_header.csv"));
    EXPECT_THROW(twinfock::scan_csv({}), std::invalid_argument);
    EXPECT_EQ(twinfock::scan_json(rows)[0]["phase_true"], 0.01);
}

TEST(Sha256, KnownVectors) {
    EXPECT_EQ(twinfock::sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(twinfock::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(WriteOutput, FileAndConsole) {
    const auto path = std::filesystem::temp_directory_path() / "twinfock_write_test.txt";
    twinfock::write_output(path.string(), "a,b\n1,2\n", std::cout);
    EXPECT_EQ(twinfock::read_file(path.string()), "a,b\n1,2\n");
    std::filesystem::remove(path);
    std::ostringstream os;
    twinfock::write_output("-", "hello", os);
    EXPECT_EQ(os.str(), "hello");
}

TEST(WriteOutput, FailureNamesPath) {
    try {
        twinfock::write_output("/nonexistent-dir/x.csv", "x", std::cout);
        FAIL() << "expected an exception";
    } catch (const std::runtime_error &e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent-dir/x.csv"), std::string::npos);
    }
}

TEST(Manifest, JsonRoundTrip) {
    twinfock::RunManifest m;
    m.config = {{"subcommand", "sweep"}, {"photons", {10, 100}}};
    m.seed = 18446744073709551615ULL;
    m.timestamp = "2026-01-01T00:00:00Z";
    m.outputs.push_back({"out.csv", twinfock::sha256_hex("x")});
    const auto j = m.to_json();
    for (const char *key : {"version", "config", "seed", "timestamp", "outputs"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
    const auto back = twinfock::RunManifest::from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.seed, m.seed);
    EXPECT_EQ(back.config, m.config);
    ASSERT_EQ(back.outputs.size(), 1u);
    EXPECT_EQ(back.outputs[0].sha256, m.outputs[0].sha256);
}
