#include "rydcav/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "rydcav/rng.hpp"

namespace rydcav::analysis {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double log_normal_pdf(double x, double mu, double var) {
    return -0.5 * std::log(2.0 * 3.14159265358979323846 * var) - 0.5 * (x - mu) * (x - mu) / var;
}

// Otsu split of integer data: the cut maximising between-class variance.
double otsu_split(std::span<const std::int64_t> counts) {
    const auto [lo_it, hi_it] = std::minmax_element(counts.begin(), counts.end());
    const std::int64_t lo = *lo_it, hi = *hi_it;
    if (lo == hi) return static_cast<double>(lo);
    const std::int64_t range = hi - lo + 1;
    std::vector<double> hist(static_cast<std::size_t>(range), 0.0);
    for (auto c : counts) hist[static_cast<std::size_t>(c - lo)] += 1.0;
    const double total = static_cast<double>(counts.size());
    double sum_all = 0.0;
    for (std::int64_t i = 0; i < range; ++i) sum_all += static_cast<double>(i) * hist[i];
    double w0 = 0.0, sum0 = 0.0, best = -1.0;
    std::int64_t best_cut = 0;
    for (std::int64_t i = 0; i < range - 1; ++i) {
        w0 += hist[i];
        sum0 += static_cast<double>(i) * hist[i];
        const double w1 = total - w0;
        if (w0 == 0.0 || w1 == 0.0) continue;
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            best_cut = i;
        }
    }
    return static_cast<double>(lo + best_cut) + 0.5;
}

double misclassification(double t, const MixtureComponent& bg, const MixtureComponent& at) {
    return bg.weight * (1.0 - normal_cdf((t - bg.mean) / bg.sigma)) +
           at.weight * normal_cdf((t - at.mean) / at.sigma);
}

}  // namespace

Proportion wilson(std::uint64_t successes, std::uint64_t trials, double z) {
    Proportion p;
    p.successes = successes;
    p.trials = trials;
    if (trials == 0) {
        p.lo = 0.0;
        p.hi = 1.0;
        p.sigma = 0.5;
        return p;
    }
    const double n = static_cast<double>(trials);
    const double ph = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (ph + z2 / (2.0 * n)) / denom;
    const double half = z / denom * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n));
    p.value = ph;
    p.lo = std::max(0.0, center - half);
    p.hi = std::min(1.0, center + half);
    p.sigma = half / z;
    return p;
}

DetectionStats three_image_stats(std::span<const ThreeImageRecord> records) {
    if (records.empty()) throw std::invalid_argument("three_image_stats: no records");
    std::uint64_t n1 = 0, n12 = 0, errors = 0;
    for (const auto& r : records) {
        n1 += r.o1;
        n12 += r.o1 && r.o2;
        errors += (r.o2 != r.o1) && (r.o2 != r.o3);
    }
    const std::uint64_t n = records.size();
    DetectionStats s;
    s.loading = wilson(n1, n);
    s.imaging_fidelity = wilson(n - errors, n);

    // error-event rate e = f (1 - f)
    const double e = static_cast<double>(errors) / static_cast<double>(n);
    const double f = e < 0.25 ? 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * e)) : 0.5;
    s.flip_rate = f;

    const Proportion raw = wilson(n12, n1);
    s.survival_raw = raw.value;
    const double p1 = static_cast<double>(n1) / static_cast<double>(n);
    const double load = f < 0.5 ? std::clamp((p1 - f) / (1.0 - 2.0 * f), 0.0, 1.0) : p1;
    // P(o1 o2) = L (1-f) [f + s (1-2f)] + (1-L) f^2, solved for s given r = P(o2|o1)
    auto correct = [&](double r) {
        if (load <= 0.0 || f >= 0.5) return r;
        const double p12 = r * p1;
        const double val = ((p12 - (1.0 - load) * f * f) / (load * (1.0 - f)) - f) / (1.0 - 2.0 * f);
        return std::clamp(val, 0.0, 1.0);
    };
    s.survival = raw;
    s.survival.value = correct(raw.value);
    s.survival.lo = correct(raw.lo);
    s.survival.hi = correct(raw.hi);
    s.survival.sigma = f < 0.5 && load > 0.0 ? raw.sigma / ((1.0 - 2.0 * f) * (1.0 - f) * load / p1) : raw.sigma;
    return s;
}

ThresholdResult histogram_threshold(std::span<const std::int64_t> counts) {
    if (counts.size() < 100) throw std::invalid_argument("histogram_threshold: need at least 100 counts");
    const std::size_t n = counts.size();
    const double split = otsu_split(counts);

    MixtureComponent c[2];
    {
        double s[2] = {0, 0}, ss[2] = {0, 0}, w[2] = {0, 0};
        for (auto v : counts) {
            const int k = static_cast<double>(v) > split ? 1 : 0;
            w[k] += 1.0;
            s[k] += static_cast<double>(v);
            ss[k] += static_cast<double>(v) * static_cast<double>(v);
        }
        for (int k = 0; k < 2; ++k) {
            if (w[k] == 0.0) {
                c[k] = MixtureComponent{0.5, split, 1.0};
                continue;
            }
            const double mu = s[k] / w[k];
            c[k] = MixtureComponent{w[k] / static_cast<double>(n), mu,
                                    std::sqrt(std::max(ss[k] / w[k] - mu * mu, 0.0))};
        }
    }

    constexpr double kVarFloor = 1e-6;
    double prev_ll = -std::numeric_limits<double>::infinity();
    std::vector<double> resp(n);
    for (int it = 0; it < 500; ++it) {
        double var[2];
        for (int k = 0; k < 2; ++k) var[k] = std::max(c[k].sigma * c[k].sigma, kVarFloor);
        double ll = 0.0;
        double w1 = 0.0, s0 = 0.0, s1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = static_cast<double>(counts[i]);
            const double l0 = std::log(std::max(c[0].weight, 1e-300)) + log_normal_pdf(x, c[0].mean, var[0]);
            const double l1 = std::log(std::max(c[1].weight, 1e-300)) + log_normal_pdf(x, c[1].mean, var[1]);
            const double m = std::max(l0, l1);
            const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
            resp[i] = std::exp(l1 - lse);
            ll += lse;
            w1 += resp[i];
            s1 += resp[i] * x;
            s0 += (1.0 - resp[i]) * x;
        }
        const double w0 = static_cast<double>(n) - w1;
        const double mu0 = w0 > 0.0 ? s0 / w0 : c[0].mean;
        const double mu1 = w1 > 0.0 ? s1 / w1 : c[1].mean;
        double v0 = 0.0, v1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = static_cast<double>(counts[i]);
            v0 += (1.0 - resp[i]) * (x - mu0) * (x - mu0);
            v1 += resp[i] * (x - mu1) * (x - mu1);
        }
        c[0] = MixtureComponent{w0 / static_cast<double>(n), mu0,
                                std::sqrt(std::max(w0 > 0.0 ? v0 / w0 : 0.0, kVarFloor))};
        c[1] = MixtureComponent{w1 / static_cast<double>(n), mu1,
                                std::sqrt(std::max(w1 > 0.0 ? v1 / w1 : 0.0, kVarFloor))};
        if (std::abs(ll - prev_ll) <= 1e-10 * std::abs(ll)) break;
        prev_ll = ll;
    }
    if (c[0].mean > c[1].mean) std::swap(c[0], c[1]);

    ThresholdResult res;
    res.background = c[0];
    res.atom = c[1];
    const double ashman =
        std::sqrt(2.0) * std::abs(c[1].mean - c[0].mean) / std::sqrt(c[0].sigma * c[0].sigma + c[1].sigma * c[1].sigma);
    const double max_count = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
    if (ashman < 2.0 || std::min(c[0].weight, c[1].weight) < 1e-4) {
        res.unimodal = true;
        res.threshold = max_count;
        res.fidelity = 1.0 - misclassification(max_count + 0.5, c[0], c[1]);
        return res;
    }

    // integer threshold t: counts <= t are background, so the decision
    // boundary sits at t + 0.5
    const auto t_lo = static_cast<std::int64_t>(std::floor(c[0].mean));
    const auto t_hi = static_cast<std::int64_t>(std::ceil(c[1].mean));
    std::vector<double> err;
    err.reserve(static_cast<std::size_t>(t_hi - t_lo + 1));
    double best = std::numeric_limits<double>::infinity();
    for (std::int64_t t = t_lo; t <= t_hi; ++t) {
        err.push_back(misclassification(static_cast<double>(t) + 0.5, c[0], c[1]));
        best = std::min(best, err.back());
    }
    // centre of the (possibly flat) optimum
    std::int64_t first = -1, last = -1;
    for (std::size_t i = 0; i < err.size(); ++i)
        if (err[i] <= best * (1.0 + 1e-9) + 1e-300) {
            if (first < 0) first = static_cast<std::int64_t>(i);
            last = static_cast<std::int64_t>(i);
        }
    res.threshold = static_cast<double>(t_lo + (first + last) / 2);
    res.fidelity = 1.0 - best;
    return res;
}

void DetectionParams::validate() const {
    for (double p : {loading, survival, flip_prob})
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("detection probabilities must lie in [0, 1]");
    if (background_mean < 0.0 || atom_mean < 0.0) throw std::invalid_argument("count means must be >= 0");
}

SynthDetection synth_detection_data(const DetectionParams& params, std::size_t n_records, std::uint64_t seed) {
    params.validate();
    Rng rng = make_stream(seed, 0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double bg_sigma = params.background_sigma >= 0.0 ? params.background_sigma : std::sqrt(params.background_mean);
    const double at_sigma = params.atom_sigma >= 0.0 ? params.atom_sigma : std::sqrt(params.atom_mean);

    SynthDetection out;
    out.records.reserve(n_records);
    out.counts.reserve(n_records);
    for (std::size_t i = 0; i < n_records; ++i) {
        const bool s1 = uni(rng) < params.loading;
        const bool s2 = s1 && uni(rng) < params.survival;
        const bool s3 = s2 && uni(rng) < params.survival;
        ThreeImageRecord r;
        r.o1 = s1 != (uni(rng) < params.flip_prob);
        r.o2 = s2 != (uni(rng) < params.flip_prob);
        r.o3 = s3 != (uni(rng) < params.flip_prob);
        const double z = gauss(rng);
        const double x = r.o1 ? params.atom_mean + at_sigma * z : params.background_mean + bg_sigma * z;
        out.counts.push_back(std::max<std::int64_t>(0, std::llround(x)));
        out.records.push_back(r);
    }
    return out;
}

std::vector<double> synth_survival_curve(double lifetime_s, int atoms, std::span<const double> times,
                                         std::uint64_t seed) {
    if (!(lifetime_s > 0.0) || atoms < 1) throw std::invalid_argument("synth_survival_curve: bad parameters");
    std::vector<double> out;
    out.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        Rng rng = make_stream(seed, i);
        std::binomial_distribution<int> dist(atoms, std::exp(-times[i] / lifetime_s));
        out.push_back(static_cast<double>(dist(rng)) / atoms);
    }
    return out;
}

}  // namespace rydcav::analysis
