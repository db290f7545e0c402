#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "rydcav/detection.hpp"

using namespace rydcav::analysis;

namespace {

double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double gauss(double x, double mu, double s) {
    return std::exp(-0.5 * (x - mu) * (x - mu) / (s * s)) / (s * std::sqrt(2.0 * 3.14159265358979323846));
}

// Minimum misclassification of two weighted Gaussians, by Simpson quadrature
// of min(w0 N0, w1 N1) over a wide window.
double overlap_error(double w0, double m0, double s0, double w1, double m1, double s1) {
    const double a = std::min(m0 - 12 * s0, m1 - 12 * s1), b = std::max(m0 + 12 * s0, m1 + 12 * s1);
    const int n = 200000;
    const double h = (b - a) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = a + i * h;
        const double f = std::min(w0 * gauss(x, m0, s0), w1 * gauss(x, m1, s1));
        acc += f * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
    }
    return acc * h / 3.0;
}

std::vector<ThreeImageRecord> repeat(ThreeImageRecord r, std::size_t n) { return std::vector<ThreeImageRecord>(n, r); }

}  // namespace

TEST_CASE("Wilson interval") {
    const auto p = wilson(30, 100);
    const double z = 1.96, n = 100, ph = 0.3;
    const double c = (ph + z * z / (2 * n)) / (1 + z * z / n);
    const double h = z / (1 + z * z / n) * std::sqrt(ph * (1 - ph) / n + z * z / (4 * n * n));
    CHECK(p.value == doctest::Approx(0.3));
    CHECK(p.lo == doctest::Approx(c - h));
    CHECK(p.hi == doctest::Approx(c + h));
    CHECK(p.sigma == doctest::Approx(h / z));
    // stays inside [0, 1] at the extremes, unlike the normal approximation
    const auto all = wilson(100, 100);
    CHECK(all.hi == doctest::Approx(1.0));
    CHECK(all.lo < 1.0);
    CHECK(all.lo > 0.95);
    CHECK(wilson(0, 0).hi == 1.0);
}

TEST_CASE("three-image trivial cases") {
    const auto full = three_image_stats(repeat({true, true, true}, 50));
    CHECK(full.loading.value == 1.0);
    CHECK(full.survival.value == 1.0);
    CHECK(full.imaging_fidelity.value == 1.0);
    const auto flicker = three_image_stats(repeat({true, false, true}, 50));
    CHECK(flicker.imaging_fidelity.value == 0.0);
    const auto empty = three_image_stats(repeat({false, false, false}, 50));
    CHECK(empty.loading.value == 0.0);
    CHECK(empty.imaging_fidelity.value == 1.0);
    CHECK_THROWS(three_image_stats(std::vector<ThreeImageRecord>{}));
}

TEST_CASE("error events occur at f (1 - f) for a steady occupancy") {
    // exact sum over the 8 flip patterns for each constant history
    const double f = 0.03;
    for (bool occ : {false, true}) {
        double p_err = 0.0;
        for (int flips = 0; flips < 8; ++flips) {
            double pf = 1.0;
            bool o[3];
            for (int k = 0; k < 3; ++k) {
                const bool fl = flips >> k & 1;
                pf *= fl ? f : 1.0 - f;
                o[k] = occ != fl;
            }
            if (o[1] != o[0] && o[1] != o[2]) p_err += pf;
        }
        CHECK(p_err == doctest::Approx(f * (1 - f)).epsilon(1e-12));
    }
    // the generator reproduces the rate
    DetectionParams p;
    p.flip_prob = 0.02;
    p.survival = 1.0;
    const auto d = synth_detection_data(p, 200000, 3);
    const auto s = three_image_stats(d.records);
    CHECK(std::abs((1.0 - s.imaging_fidelity.value) - 0.02 * 0.98) < 4.0 * s.imaging_fidelity.sigma);
    CHECK(s.flip_rate == doctest::Approx(0.02).epsilon(0.05));
}

TEST_CASE("generator trivial limits and determinism") {
    DetectionParams p;
    p.flip_prob = 0.0;
    const auto a = synth_detection_data(p, 10000, 1);
    CHECK(std::none_of(a.records.begin(), a.records.end(), [](const auto& r) { return r.o1 && !r.o2 && r.o3; }));
    p.loading = 0.0;
    const auto b = synth_detection_data(p, 10000, 1);
    CHECK(std::none_of(b.records.begin(), b.records.end(), [](const auto& r) { return r.o1 || r.o2 || r.o3; }));
    const auto c = synth_detection_data(DetectionParams{}, 1000, 5);
    const auto c2 = synth_detection_data(DetectionParams{}, 1000, 5);
    CHECK(c.counts == c2.counts);
    DetectionParams bad;
    bad.loading = 1.5;
    CHECK_THROWS(synth_detection_data(bad, 10, 1));
}

TEST_CASE("generated count moments match the mixture at 1e6 samples") {
    DetectionParams p;
    p.flip_prob = 0.0;
    p.background_mean = 50.0;
    p.atom_mean = 300.0;
    const auto d = synth_detection_data(p, 1'000'000, 12);
    double s = 0, ss = 0;
    for (auto c : d.counts) s += c, ss += double(c) * c;
    const double n = d.counts.size();
    const double mean = s / n, var = ss / n - mean * mean;
    // mixture moments; rounding to integers adds 1/12 to each variance
    const double L = p.loading;
    const double em = L * 300.0 + (1 - L) * 50.0;
    const double ev = L * (300.0 + 1.0 / 12) + (1 - L) * (50.0 + 1.0 / 12) + L * (1 - L) * 250.0 * 250.0;
    CHECK(mean == doctest::Approx(em).epsilon(0.01));
    CHECK(var == doctest::Approx(ev).epsilon(0.01));
}

TEST_CASE("round trip at the reference values over 1e6 records") {
    DetectionParams p;  // 0.52 loading, 0.9988 survival
    const double fidelity = 0.99988;
    p.flip_prob = 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * (1.0 - fidelity)));
    const auto d = synth_detection_data(p, 1'000'000, 2024);
    const auto s = three_image_stats(d.records);
    CHECK(std::abs(s.loading.value - 0.52) < 2.0 * s.loading.sigma + p.flip_prob);
    CHECK(std::abs(s.imaging_fidelity.value - fidelity) < 2.0 * s.imaging_fidelity.sigma);
    CHECK(std::abs(s.survival.value - 0.9988) < 2.0 * s.survival.sigma);
    CHECK(s.survival.value >= s.survival_raw);
}

TEST_CASE("estimator bias shrinks with record count") {
    DetectionParams p;
    p.flip_prob = 0.01;  // large enough for the correction to matter
    double bias_small = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
        bias_small += three_image_stats(synth_detection_data(p, 10'000, seed).records).survival.value - p.survival;
    bias_small /= 20;
    const auto big = three_image_stats(synth_detection_data(p, 1'000'000, 77).records);
    CHECK(std::abs(big.survival.value - p.survival) < 3.0 * big.survival.sigma);
    CHECK(std::abs(big.survival.value - p.survival) < std::abs(bias_small) + 3.0 * big.survival.sigma);
    // uncorrected survival is biased low by the flips; corrected is not
    CHECK(p.survival - big.survival_raw > 5.0 * big.survival.sigma);
}

TEST_CASE("coverage at 100 records") {
    DetectionParams p;
    int covered = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto s = three_image_stats(synth_detection_data(p, 100, seed).records);
        covered += s.loading.lo <= 0.52 && 0.52 <= s.loading.hi;
    }
    CHECK(covered >= 90);
}

TEST_CASE("histogram threshold: separated components") {
    DetectionParams p;
    p.flip_prob = 0.0;
    p.loading = 0.5;
    const auto d = synth_detection_data(p, 20000, 4);
    const auto t = histogram_threshold(d.counts);
    CHECK_FALSE(t.unimodal);
    CHECK(t.fidelity > 0.9999);
    CHECK(t.threshold > 40.0);
    CHECK(t.threshold < 160.0);
    CHECK(t.background.mean == doctest::Approx(20.0).epsilon(0.02));
    CHECK(t.atom.mean == doctest::Approx(200.0).epsilon(0.01));
    const double oracle = 1.0 - overlap_error(0.5, 20, std::sqrt(20.0), 0.5, 200, std::sqrt(200.0));
    CHECK(std::abs(t.fidelity - oracle) < 5e-3);

    std::vector<std::int64_t> deltas(200, 0);
    std::fill(deltas.begin() + 100, deltas.end(), 1000);
    const auto dt = histogram_threshold(deltas);
    CHECK(dt.fidelity == doctest::Approx(1.0));
    CHECK(dt.threshold >= 0.0);
    CHECK(dt.threshold < 1000.0);
}

TEST_CASE("histogram threshold fidelity matches the Gaussian overlap") {
    struct Case { double m0, s0, m1, s1, load; };
    for (const Case& c : {Case{50, 10, 100, 15, 0.5}, Case{40, 8, 70, 12, 0.3}, Case{60, 7, 90, 9, 0.6}}) {
        DetectionParams p;
        p.flip_prob = 0.0;
        p.loading = c.load;
        p.background_mean = c.m0;
        p.background_sigma = c.s0;
        p.atom_mean = c.m1;
        p.atom_sigma = c.s1;
        const auto d = synth_detection_data(p, 200000, 9);
        const auto t = histogram_threshold(d.counts);
        const double oracle = 1.0 - overlap_error(1 - c.load, c.m0, c.s0, c.load, c.m1, c.s1);
        CHECK_FALSE(t.unimodal);
        CHECK(std::abs(t.fidelity - oracle) < 5e-3);
        // threshold error from the closed form agrees with the quadrature
        const double e = (1 - c.load) * (1 - phi((t.threshold + 0.5 - c.m0) / c.s0)) +
                         c.load * phi((t.threshold + 0.5 - c.m1) / c.s1);
        CHECK(e >= 1.0 - oracle - 1e-9);
    }
}

TEST_CASE("histogram threshold: unimodal and too few counts") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(100.0, 10.0);
    std::vector<std::int64_t> one;
    for (int i = 0; i < 5000; ++i) one.push_back(std::llround(g(rng)));
    const auto t = histogram_threshold(one);
    CHECK(t.unimodal);
    CHECK(t.threshold == double(*std::max_element(one.begin(), one.end())));
    CHECK(t.fidelity == doctest::Approx(0.5).epsilon(0.1));
    CHECK_THROWS(histogram_threshold(std::vector<std::int64_t>(99, 5)));
}
