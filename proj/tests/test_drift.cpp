#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "odecast/data.hpp"
#include "odecast/drift.hpp"
#include "odecast/rng.hpp"

using namespace odecast;

namespace {

std::vector<double> noise(std::size_t n, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (double& v : out) v = sigma * rng.normal();
    return out;
}

std::vector<double> mean_shift(std::size_t n, std::size_t at, double level, double sigma,
                               std::uint64_t seed) {
    std::vector<double> out = noise(n, sigma, seed);
    for (std::size_t i = at; i < n; ++i) out[i] += level;
    return out;
}

std::vector<std::size_t> run_detector(const std::vector<double>& values, double delta) {
    AdwinDetector det(delta);
    std::vector<std::size_t> flags;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (det.update(values[i])) flags.push_back(i);
    return flags;
}

} // namespace

TEST_CASE("constant stream never flags") {
    AdwinDetector det(0.002);
    for (int i = 0; i < 10000; ++i) CHECK_FALSE(det.update(1.5));
    CHECK(det.window_size() == 5000); // capped
    CHECK(det.window_mean() == doctest::Approx(1.5));
}

TEST_CASE("non-finite input is rejected") {
    AdwinDetector det(0.002);
    CHECK_THROWS_AS(det.update(std::numeric_limits<double>::infinity()), NumericError);
}

TEST_CASE("false alarms on iid noise stay within budget") {
    std::size_t total_alarms = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::vector<std::size_t> flags = run_detector(noise(10000, 0.1, seed), 0.002);
        CHECK(flags.size() <= 5);
        total_alarms += flags.size();
    }
    CHECK(total_alarms <= 20 * 5);
}

TEST_CASE("mean shift is caught within 500 samples in at least 19 of 20 seeds") {
    int caught = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const std::vector<std::size_t> flags =
            run_detector(mean_shift(10000, 5000, 1.0, 0.1, seed), 0.002);
        bool ok = false;
        for (std::size_t f : flags)
            if (f >= 5000 && f < 5500) ok = true;
        if (ok) ++caught;
    }
    CHECK(caught >= 19);
}

TEST_CASE("larger delta never detects later") {
    const std::vector<double> series = mean_shift(4000, 2000, 1.0, 0.1, 3);
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (double delta : {0.0005, 0.002, 0.01, 0.05}) {
        const std::vector<std::size_t> flags = run_detector(series, delta);
        REQUIRE(!flags.empty());
        std::size_t first = flags.front();
        for (std::size_t f : flags)
            if (f >= 2000) {
                first = f;
                break;
            }
        CHECK(first <= previous);
        previous = first;
    }
}

TEST_CASE("post-cut window only holds samples after the cut") {
    // after a strong shift the surviving window mean must sit at the new level
    AdwinDetector det(0.002);
    for (int i = 0; i < 3000; ++i) det.update(0.0);
    bool flagged = false;
    for (int i = 0; i < 600; ++i) flagged = det.update(1.0) || flagged;
    CHECK(flagged);
    CHECK(det.window_mean() == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("fast detector agrees exactly with the brute-force reference") {
    // noise-only (no cuts, window grows)
    {
        const std::vector<double> series = noise(800, 0.1, 5);
        CHECK(run_detector(series, 0.002) == adwin_bruteforce_flags(series, 0.002));
    }
    // two shifts inside 2000 samples
    {
        std::vector<double> series = mean_shift(2000, 700, 1.0, 0.1, 7);
        for (std::size_t i = 1400; i < series.size(); ++i) series[i] -= 2.0;
        CHECK(run_detector(series, 0.002) == adwin_bruteforce_flags(series, 0.002));
        CHECK(run_detector(series, 0.05) == adwin_bruteforce_flags(series, 0.05));
    }
    // small alternating sequence with a sensitive delta
    {
        std::vector<double> series;
        Rng rng(11);
        for (int block = 0; block < 10; ++block)
            for (int i = 0; i < 150; ++i)
                series.push_back((block % 2 ? 0.8 : -0.8) + 0.05 * rng.normal());
        CHECK(run_detector(series, 0.01) == adwin_bruteforce_flags(series, 0.01));
    }
}

TEST_CASE("annotate_report flags valid step indices and is pure") {
    SyntheticParams p;
    p.noise_std = 0.05;
    p.shift_to = 2.0;
    RawSeries series = synthesize(SyntheticKind::MeanShift, 600, p, 13);

    StreamReport report;
    report.steps.resize(series.length());
    for (std::size_t i = 0; i < series.length(); ++i) {
        report.steps[i].index = i;
        report.steps[i].truth = {series.values[i][0]};
    }
    annotate_report(report);
    std::vector<std::size_t> flagged;
    for (std::size_t i = 0; i < report.steps.size(); ++i)
        if (report.steps[i].drift_flag) flagged.push_back(i);
    CHECK(!flagged.empty());
    for (std::size_t f : flagged) CHECK(f >= 300); // only after the shift

    StreamReport again = report;
    for (StreamStep& s : again.steps) s.drift_flag = false;
    annotate_report(again);
    for (std::size_t i = 0; i < report.steps.size(); ++i)
        CHECK(report.steps[i].drift_flag == again.steps[i].drift_flag);

    // constant truth: no flags
    StreamReport flat;
    flat.steps.resize(500);
    for (auto& s : flat.steps) s.truth = {1.0};
    annotate_report(flat);
    for (const auto& s : flat.steps) CHECK_FALSE(s.drift_flag);
}
