#pragma once

// Experiment configuration. One JSON document, field names carry their unit
// (`kappa_mhz`, `length_mm`, ...). Missing fields take defaults, and every
// default that was applied is recorded so it can be surfaced in run metadata.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rydcav/cavity.hpp"
#include "rydcav/units.hpp"

namespace rydcav {

struct AtomSpecies {
    std::string name = "87Rb";
    FrequencyHz gamma_e = mhz(6.065);  // D2 natural linewidth
    LengthMeters d2_wavelength = nm(780.241);
    std::map<std::string, std::string> level_labels = {
        {"g_prime", "5S1/2 F=2 mF=-2"}, {"g", "5S1/2 F=1 mF=-1"}, {"e", "5P3/2 F=3"},
        {"i", "6P3/2 F=3"},             {"r", "53S1/2"}};
    double rydberg_polarizability = 0.0;  // Hz/(V/m)^2; 0 = calibrate from the Stark target
    double c6 = 33.27e9 * 1e-36;          // Hz m^6
};

struct TweezerArray {
    std::vector<Vec3> sites;  // m
    std::vector<bool> occupancy;  // empty, or one flag per site
    double trap_depth_k = 1.2e-3;

    static TweezerArray square_grid(int rows, int cols, LengthMeters spacing);
};

struct CavitySettings {
    cavity::CavityGeometry geometry;
    FrequencyHz kappa = mhz(0.84);
    cavity::ModeFamily family = cavity::ModeFamily::default_family();
    std::optional<LengthMeters> measured_waist_x;
    std::optional<LengthMeters> measured_waist_y;
};

struct SpectrumSettings {
    double n_atoms = 23.3;
    double cooperativity = 0.51;
    FrequencyHz delta_ac = mhz(73.2);
    double exposure_s = 100e-6;
    double peak_rate = 1e7;  // counts/s at unit relative transmission
    FrequencyHz scan_start = mhz(-2.5);
    FrequencyHz scan_stop = mhz(4.5);
    int scan_points = 141;
    int fit_peaks = 2;
};

struct RydbergSettings {
    FrequencyHz omega = mhz(2.72);
    FrequencyHz detuning = hz(0.0);
    LengthMeters group_spacing = um(2.5);
    int max_group_size = 4;
    FrequencyHz sigma_delta = hz(0.0);
    double sigma_omega_rel = 0.0;
    FrequencyHz stark_ramp_shift = hz(0.0);
    double t_max_s = 2e-6;
    int time_points = 201;
    int shots = 200;
    double detection_flip_prob = 0.0;
};

struct ElectrostaticsSettings {
    double extent_m = 40e-3;
    int grid_points = 129;
    double omega = 1.9;
    double tol = 1e-6;
    int max_iters = 20000;
    double piezo_distance_m = 10e-3;
    double piezo_radius_m = 4e-3;
    double piezo_length_m = 4e-3;
    double shield_clearance_m = 1.5e-3;
    double shield_wall_m = 1e-3;
    double aperture_m = 4e-3;
    std::vector<double> voltages_v = {0.0, 25.0, 50.0, 75.0, 100.0, 125.0};
    Vec3 probe_m{0.0, 0.0, 0.0};
    Vec3 stray_field_v_per_m{0.0, 0.0, 0.0};
    FrequencyHz calibration_shift = khz(400.0);  // |shift| of the shielded scene at calibration_voltage
    double calibration_voltage_v = 125.0;
};

struct HolographySettings {
    int grid_size = 256;
    int iterations = 30;
    int spot_rows = 7;
    int spot_cols = 7;
    int spot_pitch = 8;
    int center_row = 160;
    int center_col = 160;
};

struct DetectionSettings {
    double loading = 0.52;
    double fidelity = 0.99988;
    double survival = 0.9988;
    std::uint64_t n_records = 1'000'000;
    double background_mean = 20.0;
    double atom_mean = 200.0;
    double lifetime_s = 322.0;
    int lifetime_atoms = 500;
    int lifetime_points = 8;
    double lifetime_max_s = 600.0;
};

struct ExperimentConfig {
    AtomSpecies species;
    CavitySettings cavity;
    TweezerArray array = TweezerArray::square_grid(7, 7, um(4.0));
    SpectrumSettings spectrum;
    RydbergSettings rydberg;
    ElectrostaticsSettings electrostatics;
    HolographySettings holography;
    DetectionSettings detection;
    std::uint64_t rng_seed = 1;
};

struct ConfigError {
    std::string path;
    std::string message;
};

struct ConfigResult {
    std::optional<ExperimentConfig> config;
    std::vector<ConfigError> errors;
    std::vector<std::string> defaults_applied;  // JSON paths filled from defaults

    bool ok() const { return config.has_value() && errors.empty(); }
};

/// Parses and validates a JSON document, filling defaults.
ConfigResult parse_config(const nlohmann::json& doc);

/// Checks invariants of an already-built config.
std::vector<ConfigError> validate_config(const ExperimentConfig& cfg);

/// Canonical JSON form; parse_config(to_json(c)) reproduces c exactly.
nlohmann::json to_json(const ExperimentConfig& cfg);

}  // namespace rydcav
