#include "rydcav/atom_light.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

namespace rydcav::atom_light {

bool is_adiabatic(const TwoPhotonDrive& drive, double ratio) {
    const double larger = std::max(std::abs(drive.omega_lower.value), std::abs(drive.omega_upper.value));
    return std::abs(drive.delta_intermediate.value) >= ratio * larger;
}

FrequencyHz effective_rabi(const TwoPhotonDrive& drive) {
    if (drive.delta_intermediate.value == 0.0)
        throw std::domain_error("effective_rabi: intermediate detuning must be nonzero");
    if (drive.omega_lower.value < 0.0 || drive.omega_upper.value < 0.0)
        throw std::invalid_argument("effective_rabi: single-photon Rabi frequencies must be >= 0");
    if (!is_adiabatic(drive))
        std::cerr << "warning: intermediate detuning is less than 10x the single-photon Rabi "
                     "frequency; adiabatic elimination is inaccurate\n";
    return FrequencyHz{drive.omega_lower.value * drive.omega_upper.value /
                       (2.0 * drive.delta_intermediate.value)};
}

double rabi_population(FrequencyHz omega, FrequencyHz delta, double t_seconds) {
    if (t_seconds < 0.0) throw std::invalid_argument("rabi_population: t must be >= 0");
    const double w2 = omega.value * omega.value;
    const double gen2 = w2 + delta.value * delta.value;
    if (gen2 == 0.0) return 0.0;
    const double s = std::sin(kPi * std::sqrt(gen2) * t_seconds);
    return w2 / gen2 * s * s;
}

FrequencyHz vdw_interaction(double c6, LengthMeters distance) {
    if (!(distance.value > 0.0)) throw std::invalid_argument("vdw_interaction: distance must be > 0");
    const double r3 = distance.value * distance.value * distance.value;
    return FrequencyHz{c6 / (r3 * r3)};
}

LengthMeters blockade_radius(double c6, FrequencyHz omega) {
    if (!(c6 > 0.0) || !(omega.value > 0.0))
        throw std::invalid_argument("blockade_radius: c6 and omega must be > 0");
    return LengthMeters{std::pow(c6 / omega.value, 1.0 / 6.0)};
}

FrequencyHz stark_shift(double polarizability, double e_field_v_per_m) {
    if (polarizability < 0.0) throw std::invalid_argument("stark_shift: polarizability must be >= 0");
    return FrequencyHz{-0.5 * polarizability * e_field_v_per_m * e_field_v_per_m + 0.0};  // no -0 in outputs
}

double polarizability_for_shift(FrequencyHz target_shift, double e_field_v_per_m) {
    if (e_field_v_per_m == 0.0)
        throw std::domain_error("polarizability_for_shift: field must be nonzero");
    return 2.0 * std::abs(target_shift.value) / (e_field_v_per_m * e_field_v_per_m);
}

MotionalOccupation nbar_from_sideband_ratio(double r) {
    if (r < 0.0) throw std::invalid_argument("sideband ratio must be >= 0");
    if (r >= 1.0) throw std::domain_error("sideband ratio >= 1 is unphysical (heating or bad fit)");
    return MotionalOccupation{r / (1.0 - r)};
}

}  // namespace rydcav::atom_light
