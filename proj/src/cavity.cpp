#include "rydcav/cavity.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <fmt/format.h>

#include "rydcav/rng.hpp"

namespace rydcav::cavity {

bool CavityGeometry::is_stable() const {
    return length.value > 0.0 && mirror_radius.value > 0.0 && std::abs(g_parameter()) < 1.0;
}

ModeFamily ModeFamily::default_family() {
    ModeFamily f;
    const double amps[] = {1.0, 0.45, 0.2, 0.1};
    for (int k = 0; k < 4; ++k)
        f.peaks.push_back(Peak{mhz(3.0 * k), mhz(0.84), amps[k]});
    return f;
}

ModeFamily ModeFamily::single(FrequencyHz linewidth, double amplitude) {
    ModeFamily f;
    f.peaks.push_back(Peak{hz(0.0), linewidth, amplitude});
    return f;
}

void ModeFamily::validate() const {
    if (peaks.empty()) throw std::invalid_argument("mode family needs at least one peak");
    if (!(background >= 0.0)) throw std::invalid_argument("mode family background must be >= 0");
    for (const auto& p : peaks) {
        if (!(p.linewidth.value > 0.0))
            throw std::invalid_argument("mode family linewidths must be > 0");
        if (!(p.amplitude >= 0.0))
            throw std::invalid_argument("mode family amplitudes must be >= 0");
    }
}

FrequencyHz fsr(LengthMeters length) {
    if (!(length.value > 0.0)) throw std::invalid_argument("cavity length must be > 0");
    return FrequencyHz{kSpeedOfLight / (2.0 * length.value)};
}

CavityMode mode_waist(const CavityGeometry& geom, FrequencyHz kappa) {
    if (!(geom.wavelength.value > 0.0)) throw std::invalid_argument("wavelength must be > 0");
    if (!geom.is_stable())
        throw std::domain_error(
            fmt::format("unstable resonator: |1 - L/R| = {} must be < 1", std::abs(geom.g_parameter())));
    const double g = geom.g_parameter();
    const double z_r = 0.5 * geom.length.value * std::sqrt((1.0 + g) / (1.0 - g));
    const double w0 = std::sqrt(geom.wavelength.value * z_r / kPi);
    return measured_mode(geom, kappa, meters(w0), meters(w0));
}

CavityMode measured_mode(const CavityGeometry& geom, FrequencyHz kappa, LengthMeters waist_x,
                         LengthMeters waist_y) {
    if (!(kappa.value > 0.0)) throw std::invalid_argument("kappa must be > 0");
    if (!(waist_x.value > 0.0) || !(waist_y.value > 0.0))
        throw std::invalid_argument("mode waists must be > 0");
    CavityMode m;
    m.waist_x = waist_x;
    m.waist_y = waist_y;
    // geometric-mean waist defines the Rayleigh range of an elliptical mode
    m.rayleigh_range = meters(kPi * waist_x.value * waist_y.value / geom.wavelength.value);
    m.fsr = fsr(geom.length);
    m.kappa = kappa;
    m.finesse = m.fsr / kappa;
    return m;
}

double cooperativity(double finesse, LengthMeters wavelength, LengthMeters waist_x,
                     LengthMeters waist_y) {
    if (!(finesse > 0.0) || !(wavelength.value > 0.0) || !(waist_x.value > 0.0) ||
        !(waist_y.value > 0.0))
        throw std::invalid_argument("cooperativity inputs must be positive");
    const double k = kTwoPi / wavelength.value;
    return 24.0 * finesse / (kPi * k * k * waist_x.value * waist_y.value);
}

FrequencyHz g_from_cooperativity(double c, FrequencyHz kappa, FrequencyHz gamma) {
    if (c < 0.0 || !(kappa.value > 0.0) || !(gamma.value > 0.0))
        throw std::invalid_argument("g_from_cooperativity: C >= 0, kappa > 0, gamma > 0 required");
    return FrequencyHz{0.5 * std::sqrt(c * kappa.value * gamma.value)};
}

double cooperativity_from_g(FrequencyHz g, FrequencyHz kappa, FrequencyHz gamma) {
    if (!(kappa.value > 0.0) || !(gamma.value > 0.0))
        throw std::invalid_argument("cooperativity_from_g: kappa, gamma must be > 0");
    return 4.0 * g.value * g.value / (kappa.value * gamma.value);
}

FrequencyHz dispersive_shift(double n_atoms, double c, FrequencyHz gamma, FrequencyHz kappa,
                             FrequencyHz delta_ac) {
    if (delta_ac.value == 0.0)
        throw std::domain_error("dispersive shift undefined at zero atom-cavity detuning");
    if (n_atoms < 0.0) throw std::invalid_argument("atom number must be >= 0");
    return FrequencyHz{n_atoms * c * gamma.value * kappa.value / (4.0 * delta_ac.value)};
}

FrequencyHz g_from_single_atom_shift(FrequencyHz delta_1, FrequencyHz delta_ac) {
    const double g2 = delta_1.value * delta_ac.value;
    if (g2 < 0.0) throw std::domain_error("single-atom shift and detuning must share a sign");
    return FrequencyHz{std::sqrt(g2)};
}

double coupling_weight(const Vec3& pos, const CavityMode& mode, LengthMeters wavelength) {
    const double wx = mode.waist_x.value;
    const double wy = mode.waist_y.value;
    const double transverse =
        std::exp(-2.0 * pos[0] * pos[0] / (wx * wx) - 2.0 * pos[1] * pos[1] / (wy * wy));
    const double standing = std::cos(kTwoPi / wavelength.value * pos[2]);
    return transverse * standing * standing;
}

double effective_atom_number(std::span<const Vec3> positions, const CavityMode& mode,
                             LengthMeters wavelength) {
    double n = 0.0;
    for (const auto& p : positions) n += coupling_weight(p, mode, wavelength);
    return n;
}

double transmission(FrequencyHz delta_pc, const ModeFamily& family) {
    double t = family.background;
    for (const auto& p : family.peaks) {
        const double x = (delta_pc.value - p.offset.value) / p.linewidth.value;
        t += p.amplitude / (1.0 + 4.0 * x * x);
    }
    return t;
}

std::vector<std::int64_t> simulate_spectrum(const ModeFamily& family, const SpectrumRequest& req,
                                            std::uint64_t seed) {
    if (req.scan.empty()) throw std::invalid_argument("simulate_spectrum: empty scan");
    if (!(req.exposure_s > 0.0)) throw std::invalid_argument("simulate_spectrum: exposure must be > 0");
    if (!(req.peak_rate > 0.0)) throw std::invalid_argument("simulate_spectrum: peak rate must be > 0");
    family.validate();

    const FrequencyHz shift = req.atoms_shift.value_or(hz(0.0));
    std::vector<std::int64_t> counts(req.scan.size());
    const auto n = static_cast<std::ptrdiff_t>(req.scan.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double mean =
            req.exposure_s * req.peak_rate * transmission(req.scan[i] - shift, family);
        if (mean <= 0.0) {
            counts[i] = 0;
            continue;
        }
        Rng rng = make_stream(seed, static_cast<std::uint64_t>(i));
        std::poisson_distribution<std::int64_t> dist(mean);
        counts[i] = dist(rng);
    }
    return counts;
}

std::vector<FrequencyHz> linear_scan(FrequencyHz start, FrequencyHz stop, int points) {
    if (points < 1) throw std::invalid_argument("scan needs at least one point");
    std::vector<FrequencyHz> out;
    out.reserve(points);
    if (points == 1) {
        out.push_back(start);
        return out;
    }
    const double step = (stop.value - start.value) / (points - 1);
    for (int i = 0; i < points; ++i) out.push_back(FrequencyHz{start.value + step * i});
    return out;
}

}  // namespace rydcav::cavity
