#pragma once

// Two-photon couplings, two-level Rabi formula, van der Waals blockade scales,
// DC Stark shifts and sideband thermometry. All frequencies in ordinary Hz.

#include <string>

#include "rydcav/units.hpp"

namespace rydcav::atom_light {

struct TwoPhotonDrive {
    FrequencyHz omega_lower;
    FrequencyHz omega_upper;
    FrequencyHz delta_intermediate;
};

/// c6 in Hz m^6 (V(R) = +C6/R^6), polarizability in Hz/(V/m)^2.
struct RydbergParams {
    double c6 = 0.0;
    double polarizability = 0.0;
    std::string state_label = "53S1/2";
};

/// Effective C6 consistent with R_b = 4.8 um at Omega = 2.72 MHz.
inline constexpr double kDefaultC6 = 33.27e9 * 1e-36;  // 33.27 GHz um^6

struct MotionalOccupation {
    double nbar = 0.0;
};

/// Omega_eff = Omega_1 Omega_2 / (2 Delta). Sign follows Delta.
/// Emits a warning on stderr when |Delta| < 10 max(Omega_1, Omega_2).
FrequencyHz effective_rabi(const TwoPhotonDrive& drive);

/// True when the intermediate detuning is at least `ratio` times the larger
/// single-photon Rabi frequency.
bool is_adiabatic(const TwoPhotonDrive& drive, double ratio = 10.0);

/// Excited population of a two-level atom after time t.
double rabi_population(FrequencyHz omega, FrequencyHz delta, double t_seconds);

FrequencyHz vdw_interaction(double c6, LengthMeters distance);

/// Radius at which C6/R^6 equals the (single-atom) Rabi frequency.
LengthMeters blockade_radius(double c6, FrequencyHz omega);

/// Delta nu = -alpha E^2 / 2.
FrequencyHz stark_shift(double polarizability, double e_field_v_per_m);

/// Polarizability that produces `target_shift` magnitude at field `e_field`.
double polarizability_for_shift(FrequencyHz target_shift, double e_field_v_per_m);

/// n = r / (1 - r) from the red/blue sideband amplitude ratio r.
MotionalOccupation nbar_from_sideband_ratio(double r);

}  // namespace rydcav::atom_light
