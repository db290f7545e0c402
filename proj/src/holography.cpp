#include "rydcav/holography.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "rydcav/fft.hpp"
#include "rydcav/rng.hpp"
#include "rydcav/units.hpp"

namespace rydcav::holography {

namespace {

double wrap_phase(double phi) {
    double w = std::remainder(phi, kTwoPi);  // (-pi, pi]
    if (w >= kPi) w -= kTwoPi;
    return w;
}

std::vector<fft::Complex> far_field(const PhaseMask& mask) {
    std::vector<fft::Complex> field(mask.phase.size());
    for (std::size_t i = 0; i < field.size(); ++i) field[i] = std::polar(1.0, mask.phase[i]);
    fft::transform_2d(field, mask.n);
    fft::fftshift_2d(field, mask.n);
    return field;
}

}  // namespace

TargetPattern TargetPattern::grid(int rows, int cols, int pitch, int center_row, int center_col) {
    if (rows < 1 || cols < 1 || pitch < 1) throw std::invalid_argument("spot grid needs positive size and pitch");
    TargetPattern t;
    const int r0 = center_row - (rows - 1) * pitch / 2;
    const int c0 = center_col - (cols - 1) * pitch / 2;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) t.spots.push_back(Spot{r0 + r * pitch, c0 + c * pitch, 1.0});
    return t;
}

void TargetPattern::validate(std::size_t n) const {
    if (spots.empty()) throw std::invalid_argument("target pattern has no spots");
    const int ni = static_cast<int>(n);
    for (const auto& s : spots) {
        if (s.row < 0 || s.col < 0 || s.row >= ni || s.col >= ni)
            throw std::out_of_range(fmt::format("spot ({}, {}) outside the {}x{} grid", s.row, s.col, n, n));
        if (!(s.weight > 0.0)) throw std::invalid_argument("spot weights must be > 0");
    }
    for (std::size_t a = 0; a < spots.size(); ++a)
        for (std::size_t b = a + 1; b < spots.size(); ++b) {
            const int d = std::max(std::abs(spots[a].row - spots[b].row), std::abs(spots[a].col - spots[b].col));
            if (d < 2)
                throw std::invalid_argument(
                    fmt::format("spots {} and {} are closer than two bins; layout exceeds grid capacity", a, b));
        }
}

std::vector<double> propagate(const PhaseMask& mask) {
    if (!fft::is_power_of_two(mask.n) || mask.phase.size() != mask.n * mask.n)
        throw std::invalid_argument("phase mask must be a power-of-two square array");
    const auto field = far_field(mask);
    std::vector<double> out(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) out[i] = std::norm(field[i]);
    return out;
}

double uniformity(std::span<const double> intensities) {
    if (intensities.empty()) throw std::invalid_argument("uniformity of an empty spot list");
    const auto [lo, hi] = std::minmax_element(intensities.begin(), intensities.end());
    if (*lo < 0.0) throw std::invalid_argument("spot intensities must be >= 0");
    if (*hi == 0.0) throw std::invalid_argument("uniformity undefined for all-zero intensities");
    return 1.0 - (*hi - *lo) / (*hi + *lo);
}

std::vector<double> spot_intensities(std::span<const double> far, std::size_t n, const TargetPattern& target) {
    std::vector<double> out;
    out.reserve(target.spots.size());
    for (const auto& s : target.spots)
        out.push_back(far[static_cast<std::size_t>(s.row) * n + static_cast<std::size_t>(s.col)]);
    return out;
}

GsResult weighted_gs(const TargetPattern& target, int iterations, std::size_t n, std::uint64_t seed) {
    if (iterations < 1) throw std::invalid_argument("weighted_gs: iterations must be >= 1");
    if (!fft::is_power_of_two(n)) throw std::invalid_argument("weighted_gs: grid size must be a power of two");
    target.validate(n);

    const std::size_t ns = target.spots.size();
    std::vector<std::size_t> bins(ns);
    std::vector<double> target_amp(ns);
    for (std::size_t k = 0; k < ns; ++k) {
        bins[k] = static_cast<std::size_t>(target.spots[k].row) * n + static_cast<std::size_t>(target.spots[k].col);
        target_amp[k] = std::sqrt(target.spots[k].weight);
    }

    GsResult res;
    res.mask.n = n;
    res.mask.phase.resize(n * n);
    Rng rng = make_stream(seed, 0);
    std::uniform_real_distribution<double> uni(-kPi, kPi);
    for (auto& p : res.mask.phase) p = uni(rng);

    std::vector<double> weights(ns, 1.0);
    std::vector<double> rel(ns);
    std::vector<double> spot_i(ns);
    std::vector<fft::Complex> plane(n * n);
    for (int it = 0; it < iterations; ++it) {
        auto field = far_field(res.mask);
        for (std::size_t k = 0; k < ns; ++k) {
            rel[k] = std::abs(field[bins[k]]) / target_amp[k];
            spot_i[k] = std::norm(field[bins[k]]) / target.spots[k].weight;
        }
        res.uniformity_history.push_back(uniformity(spot_i));
        const double mean_rel = std::accumulate(rel.begin(), rel.end(), 0.0) / static_cast<double>(ns);
        for (std::size_t k = 0; k < ns; ++k)
            if (rel[k] > 0.0) weights[k] *= mean_rel / rel[k];

        // keep only the spot bins, with reweighted amplitude and current phase
        std::fill(plane.begin(), plane.end(), fft::Complex{0.0, 0.0});
        for (std::size_t k = 0; k < ns; ++k) {
            const double phase = std::arg(field[bins[k]]);
            plane[bins[k]] = std::polar(weights[k] * target_amp[k], phase);
        }
        fft::ifftshift_2d(plane, n);
        fft::transform_2d(plane, n, true);
        for (std::size_t i = 0; i < plane.size(); ++i) res.mask.phase[i] = wrap_phase(std::arg(plane[i]));
    }

    const auto far = propagate(res.mask);
    res.spot_intensities = spot_intensities(far, n, target);
    std::vector<double> normalized(ns);
    double on_spots = 0.0;
    for (std::size_t k = 0; k < ns; ++k) {
        normalized[k] = res.spot_intensities[k] / target.spots[k].weight;
        on_spots += res.spot_intensities[k];
    }
    res.uniformity = uniformity(normalized);
    res.uniformity_history.push_back(res.uniformity);
    res.efficiency = on_spots / std::accumulate(far.begin(), far.end(), 0.0);
    return res;
}

void write_pgm16(std::ostream& os, const PhaseMask& mask) {
    if (mask.phase.size() != mask.n * mask.n) throw std::invalid_argument("malformed phase mask");
    os << "P5\n" << mask.n << ' ' << mask.n << "\n65535\n";
    for (double p : mask.phase) {
        const double x = (wrap_phase(p) + kPi) / kTwoPi;
        const auto v = static_cast<std::uint16_t>(std::clamp(std::lround(x * 65535.0), 0L, 65535L));
        const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xFF)};
        os.write(bytes, 2);
    }
}

}  // namespace rydcav::holography
