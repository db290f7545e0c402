#pragma once

// Near-concentric cavity: geometry, Gaussian mode, cooperativity, dispersive
// atom shift, and transmission spectra of a (phenomenological) mode family.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rydcav/units.hpp"

namespace rydcav::cavity {

struct CavityGeometry {
    LengthMeters mirror_radius = mm(10.0);
    LengthMeters length = mm(19.25);
    LengthMeters wavelength = nm(780.241);

    /// Resonator g-parameter 1 - L/R of each (identical) mirror.
    double g_parameter() const { return 1.0 - length / mirror_radius; }
    bool is_stable() const;
};

struct CavityMode {
    LengthMeters waist_x;
    LengthMeters waist_y;
    LengthMeters rayleigh_range;
    FrequencyHz fsr;
    FrequencyHz kappa;
    double finesse = 0.0;
};

struct Peak {
    FrequencyHz offset;
    FrequencyHz linewidth;  // FWHM
    double amplitude = 0.0;
};

/// Split resonance observed instead of a single Lorentzian. Amplitudes and
/// background are relative to the peak count rate of the simulation.
struct ModeFamily {
    std::vector<Peak> peaks;
    double background = 0.0;

    /// Four lines, 3 MHz apart, equal 0.84 MHz widths, falling amplitudes.
    static ModeFamily default_family();
    static ModeFamily single(FrequencyHz linewidth, double amplitude = 1.0);
    void validate() const;
};

FrequencyHz fsr(LengthMeters length);

/// Symmetric two-mirror resonator TEM00 mode; waist_x == waist_y.
/// kappa is carried into the mode so finesse = fsr / kappa.
CavityMode mode_waist(const CavityGeometry& geom, FrequencyHz kappa = mhz(0.84));

/// Mode with measured (possibly elliptical) waists rather than ideal ones.
CavityMode measured_mode(const CavityGeometry& geom, FrequencyHz kappa, LengthMeters waist_x,
                         LengthMeters waist_y);

/// C = 24 F / (pi k^2 w_x w_y) at an antinode of the standing wave.
double cooperativity(double finesse, LengthMeters wavelength, LengthMeters waist_x,
                     LengthMeters waist_y);

/// Inverse of C = 4 g^2 / (kappa Gamma).
FrequencyHz g_from_cooperativity(double c, FrequencyHz kappa, FrequencyHz gamma);
double cooperativity_from_g(FrequencyHz g, FrequencyHz kappa, FrequencyHz gamma);

/// delta_N = N C Gamma kappa / (4 Delta_ac). Throws on delta_ac == 0.
FrequencyHz dispersive_shift(double n_atoms, double c, FrequencyHz gamma, FrequencyHz kappa,
                             FrequencyHz delta_ac);

/// Single-atom coupling implied by a measured single-atom shift: g^2 = delta_1 * Delta_ac.
FrequencyHz g_from_single_atom_shift(FrequencyHz delta_1, FrequencyHz delta_ac);

/// Relative coupling of an atom at `pos` (cavity axis along z, mode centred
/// at the origin): transverse Gaussian intensity times cos^2(k z).
double coupling_weight(const Vec3& pos, const CavityMode& mode, LengthMeters wavelength);

/// Effective atom number sum_i w(pos_i); equals the site count when all
/// weights are one (homogeneous coupling).
double effective_atom_number(std::span<const Vec3> positions, const CavityMode& mode,
                             LengthMeters wavelength);

/// background + sum_k A_k / (1 + 4 (delta_pc - delta_k)^2 / kappa_k^2)
double transmission(FrequencyHz delta_pc, const ModeFamily& family);

struct SpectrumRequest {
    std::vector<FrequencyHz> scan;
    double exposure_s = 100e-6;
    double peak_rate = 1e7;  // counts/s at unit relative transmission
    std::optional<FrequencyHz> atoms_shift;
};

/// Poisson counts with mean exposure * peak_rate * T(delta_pc - shift).
/// Each scan point draws from its own (seed, index) stream.
std::vector<std::int64_t> simulate_spectrum(const ModeFamily& family, const SpectrumRequest& req,
                                            std::uint64_t seed);

std::vector<FrequencyHz> linear_scan(FrequencyHz start, FrequencyHz stop, int points);

}  // namespace rydcav::cavity
