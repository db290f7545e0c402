#include "rydcav/config.hpp"

#include <cmath>
#include <set>
#include <utility>

#include <fmt/format.h>

#include "rydcav/fft.hpp"

namespace rydcav {

using nlohmann::json;

TweezerArray TweezerArray::square_grid(int rows, int cols, LengthMeters spacing) {
    TweezerArray a;
    const double x0 = -0.5 * (cols - 1) * spacing.value;
    const double y0 = -0.5 * (rows - 1) * spacing.value;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) a.sites.push_back({x0 + c * spacing.value, y0 + r * spacing.value, 0.0});
    return a;
}

namespace {

using Suffixes = std::vector<std::pair<const char*, double>>;

const Suffixes kFreq = {{"_hz", 1.0}, {"_khz", 1e3}, {"_mhz", 1e6}, {"_ghz", 1e9}};
const Suffixes kLength = {{"_m", 1.0}, {"_mm", 1e-3}, {"_um", 1e-6}, {"_nm", 1e-9}};
const Suffixes kTime = {{"_s", 1.0}, {"_ms", 1e-3}, {"_us", 1e-6}, {"_ns", 1e-9}};
const Suffixes kC6 = {{"_hz_m6", 1.0}, {"_ghz_um6", 1e9 * 1e-36}};
const Suffixes kPolarizability = {{"_hz_m2_per_v2", 1.0}};
const Suffixes kVolt = {{"_v", 1.0}};
const Suffixes kField = {{"_v_per_m", 1.0}};
const Suffixes kNone = {{"", 1.0}};
const Suffixes kTemp = {{"_k", 1.0}, {"_mk", 1e-3}};

// Reads one section, tracking consumed keys so leftovers can be reported.
class Section {
public:
    Section(const json& parent, std::string key, std::string path, ConfigResult& out)
        : path_(std::move(path)), out_(out) {
        if (parent.is_object() && parent.contains(key)) {
            const json& j = parent.at(key);
            if (j.is_object()) {
                obj_ = &j;
            } else {
                error(path_, "expected an object");
            }
        } else {
            out_.defaults_applied.push_back(path_);
        }
    }
    explicit Section(const json& root, ConfigResult& out) : path_(""), out_(out) {
        if (root.is_object()) obj_ = &root;
        else error("", "config must be a JSON object");
    }

    ~Section() {
        if (!obj_) return;
        for (const auto& [k, v] : obj_->items())
            if (!used_.count(k)) error(join(k), "unknown field");
    }

    const json* object() const { return obj_; }
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    void error(const std::string& path, const std::string& msg) { out_.errors.push_back({path, msg}); }

    // Returns the JSON value stored under `base` + one of `suffixes`, scaled to SI.
    double scaled(const std::string& base, const Suffixes& suffixes, double fallback) {
        const json* found = nullptr;
        double scale = 1.0;
        std::string found_key;
        if (obj_) {
            for (const auto& [suffix, s] : suffixes) {
                const std::string key = base + suffix;
                if (!obj_->contains(key)) continue;
                used_.insert(key);
                if (found) {
                    error(join(key), fmt::format("conflicts with {}", join(found_key)));
                    continue;
                }
                found = &obj_->at(key);
                scale = s;
                found_key = key;
            }
        }
        if (!found) {
            out_.defaults_applied.push_back(join(base + suffixes.front().first));
            return fallback;
        }
        if (!found->is_number()) {
            error(join(found_key), "expected a number");
            return fallback;
        }
        const double v = found->get<double>();
        return scale == 1.0 ? v : v * scale;
    }

    double number(const std::string& key, double fallback) { return scaled(key, kNone, fallback); }

    template <typename Int>
    Int integer(const std::string& key, Int fallback) {
        if (!obj_ || !obj_->contains(key)) {
            out_.defaults_applied.push_back(join(key));
            return fallback;
        }
        used_.insert(key);
        const json& v = obj_->at(key);
        if (!v.is_number_integer()) {
            error(join(key), "expected an integer");
            return fallback;
        }
        if constexpr (std::is_unsigned_v<Int>) {
            if (v.is_number_unsigned() || v.get<std::int64_t>() >= 0) return v.get<Int>();
            error(join(key), "expected a non-negative integer");
            return fallback;
        } else {
            return v.get<Int>();
        }
    }

    std::string string(const std::string& key, const std::string& fallback) {
        if (!obj_ || !obj_->contains(key)) {
            out_.defaults_applied.push_back(join(key));
            return fallback;
        }
        used_.insert(key);
        if (!obj_->at(key).is_string()) {
            error(join(key), "expected a string");
            return fallback;
        }
        return obj_->at(key).get<std::string>();
    }

    const json* raw(const std::string& key) {
        if (!obj_ || !obj_->contains(key)) return nullptr;
        used_.insert(key);
        return &obj_->at(key);
    }

    // Finds base+suffix among several suffixes without scaling; returns key and scale.
    std::pair<const json*, double> raw_scaled(const std::string& base, const Suffixes& suffixes,
                                              std::string& key_out) {
        for (const auto& [suffix, s] : suffixes) {
            const std::string key = base + suffix;
            if (obj_ && obj_->contains(key)) {
                used_.insert(key);
                key_out = key;
                return {&obj_->at(key), s};
            }
        }
        return {nullptr, 1.0};
    }

    Vec3 vec3(const std::string& base, const Suffixes& suffixes, const Vec3& fallback) {
        std::string key;
        auto [j, s] = raw_scaled(base, suffixes, key);
        if (!j) {
            out_.defaults_applied.push_back(join(base + suffixes.front().first));
            return fallback;
        }
        if (!j->is_array() || j->size() != 3) {
            error(join(key), "expected an array of 3 numbers");
            return fallback;
        }
        Vec3 v;
        for (int d = 0; d < 3; ++d) {
            if (!(*j)[d].is_number()) {
                error(join(key), "expected an array of 3 numbers");
                return fallback;
            }
            v[d] = s == 1.0 ? (*j)[d].get<double>() : (*j)[d].get<double>() * s;
        }
        return v;
    }

    const std::string& path() const { return path_; }
    ConfigResult& result() { return out_; }

private:
    const json* obj_ = nullptr;
    std::string path_;
    ConfigResult& out_;
    std::set<std::string> used_;
};

Vec3 scale_vec(const json& j, double s) {
    Vec3 v;
    for (int d = 0; d < 3; ++d) v[d] = s == 1.0 ? j[d].get<double>() : j[d].get<double>() * s;
    return v;
}

void parse_species(const json& root, ConfigResult& res, AtomSpecies& sp) {
    Section s(root, "species", "species", res);
    sp.name = s.string("name", sp.name);
    sp.gamma_e = FrequencyHz{s.scaled("gamma_e", kFreq, sp.gamma_e.value)};
    sp.d2_wavelength = LengthMeters{s.scaled("d2_wavelength", kLength, sp.d2_wavelength.value)};
    sp.rydberg_polarizability = s.scaled("rydberg_polarizability", kPolarizability, sp.rydberg_polarizability);
    sp.c6 = s.scaled("c6", kC6, sp.c6);
    if (const json* labels = s.raw("level_labels")) {
        if (!labels->is_object()) {
            s.error(s.join("level_labels"), "expected an object of strings");
        } else {
            sp.level_labels.clear();
            for (const auto& [k, v] : labels->items()) {
                if (!v.is_string()) s.error(s.join("level_labels." + k), "expected a string");
                else sp.level_labels[k] = v.get<std::string>();
            }
        }
    } else {
        res.defaults_applied.push_back("species.level_labels");
    }
}

void parse_cavity(const json& root, ConfigResult& res, CavitySettings& cs) {
    Section s(root, "cavity", "cavity", res);
    auto& g = cs.geometry;
    g.mirror_radius = LengthMeters{s.scaled("mirror_radius", kLength, g.mirror_radius.value)};
    g.length = LengthMeters{s.scaled("length", kLength, g.length.value)};
    g.wavelength = LengthMeters{s.scaled("wavelength", kLength, g.wavelength.value)};
    cs.kappa = FrequencyHz{s.scaled("kappa", kFreq, cs.kappa.value)};
    for (const char* axis : {"x", "y"}) {
        std::string key;
        auto [j, scale] = s.raw_scaled(std::string("measured_waist_") + axis, kLength, key);
        auto& slot = axis[0] == 'x' ? cs.measured_waist_x : cs.measured_waist_y;
        if (!j) continue;
        if (!j->is_number()) s.error(s.join(key), "expected a number");
        else slot = LengthMeters{scale == 1.0 ? j->get<double>() : j->get<double>() * scale};
    }
    if (s.object() && s.object()->contains("mode_family")) {
        Section f(*s.object(), "mode_family", s.join("mode_family"), res);
        s.raw("mode_family");
        cs.family.background = f.number("background", 0.0);
        if (const json* peaks = f.raw("peaks")) {
            if (!peaks->is_array()) {
                f.error(f.join("peaks"), "expected an array");
            } else {
                cs.family.peaks.clear();
                for (std::size_t i = 0; i < peaks->size(); ++i) {
                    ConfigResult scratch;
                    json wrapper = {{"p", (*peaks)[i]}};
                    Section p(wrapper, "p", f.join(fmt::format("peaks[{}]", i)), res);
                    cavity::Peak pk;
                    pk.offset = FrequencyHz{p.scaled("offset", kFreq, 0.0)};
                    pk.linewidth = FrequencyHz{p.scaled("linewidth", kFreq, cs.kappa.value)};
                    pk.amplitude = p.number("amplitude", 1.0);
                    cs.family.peaks.push_back(pk);
                }
            }
        } else {
            res.defaults_applied.push_back(f.join("peaks"));
        }
    } else {
        res.defaults_applied.push_back("cavity.mode_family");
    }
}

void parse_array(const json& root, ConfigResult& res, TweezerArray& arr) {
    Section s(root, "array", "array", res);
    arr.trap_depth_k = s.scaled("trap_depth", kTemp, arr.trap_depth_k);
    std::string key;
    auto [sites, scale] = s.raw_scaled("sites", kLength, key);
    const json* grid = s.raw("grid");
    if (sites && grid) s.error(s.join("grid"), fmt::format("conflicts with {}", s.join(key)));
    if (sites) {
        if (!sites->is_array()) {
            s.error(s.join(key), "expected an array of [x, y, z]");
        } else {
            arr.sites.clear();
            for (std::size_t i = 0; i < sites->size(); ++i) {
                const json& p = (*sites)[i];
                if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() || !p[2].is_number()) {
                    s.error(s.join(fmt::format("{}[{}]", key, i)), "expected [x, y, z]");
                    continue;
                }
                arr.sites.push_back(scale_vec(p, scale));
            }
        }
    } else if (grid) {
        json wrapper = {{"grid", *grid}};
        Section g(wrapper, "grid", s.join("grid"), res);
        const int rows = g.integer<int>("rows", 7);
        const int cols = g.integer<int>("cols", 7);
        const double spacing = g.scaled("spacing", kLength, 4e-6);
        if (rows < 1 || cols < 1) g.error(g.join("rows"), "grid needs at least one row and column");
        else arr = TweezerArray{TweezerArray::square_grid(rows, cols, meters(spacing)).sites, {}, arr.trap_depth_k};
    } else {
        res.defaults_applied.push_back("array.sites_m");
    }
    if (const json* occ = s.raw("occupancy")) {
        if (!occ->is_array()) {
            s.error(s.join("occupancy"), "expected an array of booleans");
        } else {
            arr.occupancy.clear();
            for (const auto& b : *occ) {
                if (!b.is_boolean()) {
                    s.error(s.join("occupancy"), "expected an array of booleans");
                    break;
                }
                arr.occupancy.push_back(b.get<bool>());
            }
        }
    }
}

void parse_spectrum(const json& root, ConfigResult& res, SpectrumSettings& sp) {
    Section s(root, "spectrum", "spectrum", res);
    sp.n_atoms = s.number("n_atoms", sp.n_atoms);
    sp.cooperativity = s.number("cooperativity", sp.cooperativity);
    sp.delta_ac = FrequencyHz{s.scaled("delta_ac", kFreq, sp.delta_ac.value)};
    sp.exposure_s = s.scaled("exposure", kTime, sp.exposure_s);
    sp.peak_rate = s.number("peak_rate_per_s", sp.peak_rate);
    sp.scan_start = FrequencyHz{s.scaled("scan_start", kFreq, sp.scan_start.value)};
    sp.scan_stop = FrequencyHz{s.scaled("scan_stop", kFreq, sp.scan_stop.value)};
    sp.scan_points = s.integer<int>("scan_points", sp.scan_points);
    sp.fit_peaks = s.integer<int>("fit_peaks", sp.fit_peaks);
}

void parse_rydberg(const json& root, ConfigResult& res, RydbergSettings& r) {
    Section s(root, "rydberg", "rydberg", res);
    r.omega = FrequencyHz{s.scaled("omega", kFreq, r.omega.value)};
    r.detuning = FrequencyHz{s.scaled("detuning", kFreq, r.detuning.value)};
    r.group_spacing = LengthMeters{s.scaled("group_spacing", kLength, r.group_spacing.value)};
    r.max_group_size = s.integer<int>("max_group_size", r.max_group_size);
    r.sigma_delta = FrequencyHz{s.scaled("sigma_delta", kFreq, r.sigma_delta.value)};
    r.sigma_omega_rel = s.number("sigma_omega_rel", r.sigma_omega_rel);
    r.stark_ramp_shift = FrequencyHz{s.scaled("stark_ramp_shift", kFreq, r.stark_ramp_shift.value)};
    r.t_max_s = s.scaled("t_max", kTime, r.t_max_s);
    r.time_points = s.integer<int>("time_points", r.time_points);
    r.shots = s.integer<int>("shots", r.shots);
    r.detection_flip_prob = s.number("detection_flip_prob", r.detection_flip_prob);
}

void parse_electrostatics(const json& root, ConfigResult& res, ElectrostaticsSettings& e) {
    Section s(root, "electrostatics", "electrostatics", res);
    e.extent_m = s.scaled("extent", kLength, e.extent_m);
    e.grid_points = s.integer<int>("grid_points", e.grid_points);
    e.omega = s.number("sor_omega", e.omega);
    e.tol = s.number("tol", e.tol);
    e.max_iters = s.integer<int>("max_iters", e.max_iters);
    e.piezo_distance_m = s.scaled("piezo_distance", kLength, e.piezo_distance_m);
    e.piezo_radius_m = s.scaled("piezo_radius", kLength, e.piezo_radius_m);
    e.piezo_length_m = s.scaled("piezo_length", kLength, e.piezo_length_m);
    e.shield_clearance_m = s.scaled("shield_clearance", kLength, e.shield_clearance_m);
    e.shield_wall_m = s.scaled("shield_wall", kLength, e.shield_wall_m);
    e.aperture_m = s.scaled("aperture", kLength, e.aperture_m);
    std::string key;
    auto [volts, scale] = s.raw_scaled("voltages", kVolt, key);
    if (volts) {
        if (!volts->is_array()) {
            s.error(s.join(key), "expected an array of numbers");
        } else {
            e.voltages_v.clear();
            for (const auto& v : *volts) {
                if (!v.is_number()) {
                    s.error(s.join(key), "expected an array of numbers");
                    break;
                }
                e.voltages_v.push_back(v.get<double>());
            }
        }
    } else {
        res.defaults_applied.push_back(s.join("voltages_v"));
    }
    e.probe_m = s.vec3("probe", kLength, e.probe_m);
    e.stray_field_v_per_m = s.vec3("stray_field", kField, e.stray_field_v_per_m);
    e.calibration_shift = FrequencyHz{s.scaled("calibration_shift", kFreq, e.calibration_shift.value)};
    e.calibration_voltage_v = s.scaled("calibration_voltage", kVolt, e.calibration_voltage_v);
}

void parse_holography(const json& root, ConfigResult& res, HolographySettings& h) {
    Section s(root, "holography", "holography", res);
    h.grid_size = s.integer<int>("grid_size", h.grid_size);
    h.iterations = s.integer<int>("iterations", h.iterations);
    h.spot_rows = s.integer<int>("spot_rows", h.spot_rows);
    h.spot_cols = s.integer<int>("spot_cols", h.spot_cols);
    h.spot_pitch = s.integer<int>("spot_pitch", h.spot_pitch);
    h.center_row = s.integer<int>("center_row", h.center_row);
    h.center_col = s.integer<int>("center_col", h.center_col);
}

void parse_detection(const json& root, ConfigResult& res, DetectionSettings& d) {
    Section s(root, "detection", "detection", res);
    d.loading = s.number("loading", d.loading);
    d.fidelity = s.number("fidelity", d.fidelity);
    d.survival = s.number("survival", d.survival);
    d.n_records = s.integer<std::uint64_t>("n_records", d.n_records);
    d.background_mean = s.number("background_mean_counts", d.background_mean);
    d.atom_mean = s.number("atom_mean_counts", d.atom_mean);
    d.lifetime_s = s.scaled("lifetime", kTime, d.lifetime_s);
    d.lifetime_atoms = s.integer<int>("lifetime_atoms", d.lifetime_atoms);
    d.lifetime_points = s.integer<int>("lifetime_points", d.lifetime_points);
    d.lifetime_max_s = s.scaled("lifetime_max", kTime, d.lifetime_max_s);
}

void require(std::vector<ConfigError>& errs, bool ok, const std::string& path, const std::string& msg) {
    if (!ok) errs.push_back({path, msg});
}

}  // namespace

ConfigResult parse_config(const json& doc) {
    ConfigResult res;
    ExperimentConfig cfg;
    {
        Section root(doc, res);
        if (root.object()) {
            parse_species(doc, res, cfg.species);
            parse_cavity(doc, res, cfg.cavity);
            parse_array(doc, res, cfg.array);
            parse_spectrum(doc, res, cfg.spectrum);
            parse_rydberg(doc, res, cfg.rydberg);
            parse_electrostatics(doc, res, cfg.electrostatics);
            parse_holography(doc, res, cfg.holography);
            parse_detection(doc, res, cfg.detection);
            for (const char* k : {"species", "cavity", "array", "spectrum", "rydberg", "electrostatics",
                                  "holography", "detection"})
                root.raw(k);
            cfg.rng_seed = root.integer<std::uint64_t>("rng_seed", cfg.rng_seed);
        }
    }
    if (!res.errors.empty()) return res;
    res.errors = validate_config(cfg);
    if (res.errors.empty()) res.config = std::move(cfg);
    return res;
}

std::vector<ConfigError> validate_config(const ExperimentConfig& c) {
    std::vector<ConfigError> e;
    const auto& sp = c.species;
    require(e, std::isfinite(sp.gamma_e.value) && sp.gamma_e.value > 0.0, "species.gamma_e_hz", "gamma_e must be > 0");
    require(e, sp.d2_wavelength.value > 0.0, "species.d2_wavelength_m", "wavelength must be > 0");
    require(e, sp.rydberg_polarizability >= 0.0, "species.rydberg_polarizability_hz_m2_per_v2",
            "polarizability must be >= 0");
    require(e, sp.c6 > 0.0, "species.c6_hz_m6", "C6 must be > 0 (repulsive S-state convention)");

    const auto& g = c.cavity.geometry;
    require(e, g.length.value > 0.0, "cavity.length_m", "L must be > 0");
    require(e, g.mirror_radius.value > 0.0, "cavity.mirror_radius_m", "R must be > 0");
    require(e, g.wavelength.value > 0.0, "cavity.wavelength_m", "wavelength must be > 0");
    if (g.length.value > 0.0 && g.mirror_radius.value > 0.0)
        require(e, g.is_stable(), "cavity.length_m", "unstable resonator: need 0 < L < 2R");
    require(e, c.cavity.kappa.value > 0.0, "cavity.kappa_hz", "kappa must be > 0");
    if (c.cavity.measured_waist_x)
        require(e, c.cavity.measured_waist_x->value > 0.0, "cavity.measured_waist_x_m", "waist must be > 0");
    if (c.cavity.measured_waist_y)
        require(e, c.cavity.measured_waist_y->value > 0.0, "cavity.measured_waist_y_m", "waist must be > 0");
    require(e, !c.cavity.family.peaks.empty(), "cavity.mode_family.peaks", "mode family needs at least one peak");
    require(e, c.cavity.family.background >= 0.0, "cavity.mode_family.background", "background must be >= 0");
    for (std::size_t i = 0; i < c.cavity.family.peaks.size(); ++i) {
        const auto& p = c.cavity.family.peaks[i];
        const std::string path = fmt::format("cavity.mode_family.peaks[{}]", i);
        require(e, p.linewidth.value > 0.0, path + ".linewidth_hz", "linewidth must be > 0");
        require(e, p.amplitude >= 0.0, path + ".amplitude", "amplitude must be >= 0");
        if (i > 0) require(e, p.offset > c.cavity.family.peaks[i - 1].offset, path + ".offset_hz",
                           "peaks must be ordered by offset");
    }

    const auto& a = c.array;
    for (std::size_t i = 0; i < a.sites.size(); ++i)
        for (std::size_t j = i + 1; j < a.sites.size(); ++j)
            if (a.sites[i] == a.sites[j])
                e.push_back({fmt::format("array.sites_m[{}]", j), fmt::format("duplicate site (same as {})", i)});
    require(e, a.occupancy.empty() || a.occupancy.size() == a.sites.size(), "array.occupancy",
            "occupancy length must equal the site count");
    require(e, a.trap_depth_k >= 0.0, "array.trap_depth_k", "trap depth must be >= 0");

    const auto& s = c.spectrum;
    require(e, s.n_atoms >= 0.0, "spectrum.n_atoms", "atom number must be >= 0");
    require(e, s.cooperativity >= 0.0, "spectrum.cooperativity", "cooperativity must be >= 0");
    require(e, s.delta_ac.value != 0.0, "spectrum.delta_ac_hz", "atom-cavity detuning must be nonzero");
    require(e, s.exposure_s > 0.0, "spectrum.exposure_s", "exposure must be > 0");
    require(e, s.peak_rate > 0.0, "spectrum.peak_rate_per_s", "peak rate must be > 0");
    require(e, s.scan_points >= 1, "spectrum.scan_points", "scan needs at least one point");
    require(e, s.fit_peaks >= 1 && static_cast<std::size_t>(s.fit_peaks) <= c.cavity.family.peaks.size(),
            "spectrum.fit_peaks", "fit_peaks must be between 1 and the mode family size");

    const auto& r = c.rydberg;
    require(e, r.omega.value > 0.0, "rydberg.omega_hz", "Rabi frequency must be > 0");
    require(e, r.group_spacing.value > 0.0, "rydberg.group_spacing_m", "group spacing must be > 0");
    require(e, r.max_group_size >= 1 && r.max_group_size <= 4, "rydberg.max_group_size",
            "group size must be 1..4 (2x2 group)");
    require(e, r.sigma_delta.value >= 0.0, "rydberg.sigma_delta_hz", "sigma_delta must be >= 0");
    require(e, r.sigma_omega_rel >= 0.0, "rydberg.sigma_omega_rel", "sigma_omega_rel must be >= 0");
    require(e, r.t_max_s > 0.0, "rydberg.t_max_s", "t_max must be > 0");
    require(e, r.time_points >= 6, "rydberg.time_points", "need at least 6 time points");
    require(e, r.shots >= 1, "rydberg.shots", "shots must be >= 1");
    require(e, r.detection_flip_prob >= 0.0 && r.detection_flip_prob <= 1.0, "rydberg.detection_flip_prob",
            "flip probability must lie in [0, 1]");

    const auto& es = c.electrostatics;
    require(e, es.extent_m > 0.0, "electrostatics.extent_m", "extent must be > 0");
    require(e, es.grid_points >= 3, "electrostatics.grid_points", "need at least 3 grid points");
    require(e, es.omega > 0.0 && es.omega < 2.0, "electrostatics.sor_omega", "SOR omega must lie in (0, 2)");
    require(e, es.tol > 0.0, "electrostatics.tol", "tolerance must be > 0");
    require(e, es.max_iters >= 1, "electrostatics.max_iters", "max_iters must be >= 1");
    for (const auto& [v, name] : {std::pair{es.piezo_distance_m, "piezo_distance_m"},
                                  std::pair{es.piezo_radius_m, "piezo_radius_m"},
                                  std::pair{es.piezo_length_m, "piezo_length_m"},
                                  std::pair{es.shield_wall_m, "shield_wall_m"}})
        require(e, v > 0.0, fmt::format("electrostatics.{}", name), "length must be > 0");
    require(e, es.shield_clearance_m >= 0.0, "electrostatics.shield_clearance_m", "clearance must be >= 0");
    require(e, es.aperture_m >= 0.0, "electrostatics.aperture_m", "aperture must be >= 0");
    for (double v : es.voltages_v)
        require(e, std::abs(v) <= 1000.0, "electrostatics.voltages_v", "voltages beyond the 1 kV sanity bound");
    require(e, es.calibration_voltage_v != 0.0, "electrostatics.calibration_voltage_v",
            "calibration voltage must be nonzero");

    const auto& h = c.holography;
    require(e, h.grid_size >= 2 && fft::is_power_of_two(static_cast<std::size_t>(h.grid_size)),
            "holography.grid_size", "grid size must be a power of two");
    require(e, h.iterations >= 1, "holography.iterations", "iterations must be >= 1");
    require(e, h.spot_rows >= 1 && h.spot_cols >= 1, "holography.spot_rows", "need at least one spot");
    require(e, h.spot_pitch >= 2, "holography.spot_pitch", "spots must be at least 2 bins apart");

    const auto& d = c.detection;
    for (const auto& [v, name] : {std::pair{d.loading, "loading"}, std::pair{d.fidelity, "fidelity"},
                                  std::pair{d.survival, "survival"}})
        require(e, v >= 0.0 && v <= 1.0, fmt::format("detection.{}", name), "probability must lie in [0, 1]");
    require(e, d.n_records >= 1, "detection.n_records", "need at least one record");
    require(e, d.lifetime_s > 0.0, "detection.lifetime_s", "lifetime must be > 0");
    require(e, d.lifetime_atoms >= 1, "detection.lifetime_atoms", "need at least one atom");
    require(e, d.lifetime_points >= 3, "detection.lifetime_points", "need at least 3 lifetime points");
    require(e, d.lifetime_max_s > 0.0, "detection.lifetime_max_s", "lifetime_max must be > 0");
    return e;
}

json to_json(const ExperimentConfig& c) {
    auto vec = [](const Vec3& v) { return json::array({v[0], v[1], v[2]}); };
    json j;
    j["rng_seed"] = c.rng_seed;
    j["species"] = {{"name", c.species.name},
                    {"gamma_e_hz", c.species.gamma_e.value},
                    {"d2_wavelength_m", c.species.d2_wavelength.value},
                    {"rydberg_polarizability_hz_m2_per_v2", c.species.rydberg_polarizability},
                    {"c6_hz_m6", c.species.c6},
                    {"level_labels", c.species.level_labels}};
    json peaks = json::array();
    for (const auto& p : c.cavity.family.peaks)
        peaks.push_back({{"offset_hz", p.offset.value}, {"linewidth_hz", p.linewidth.value}, {"amplitude", p.amplitude}});
    j["cavity"] = {{"mirror_radius_m", c.cavity.geometry.mirror_radius.value},
                   {"length_m", c.cavity.geometry.length.value},
                   {"wavelength_m", c.cavity.geometry.wavelength.value},
                   {"kappa_hz", c.cavity.kappa.value},
                   {"mode_family", {{"background", c.cavity.family.background}, {"peaks", peaks}}}};
    if (c.cavity.measured_waist_x) j["cavity"]["measured_waist_x_m"] = c.cavity.measured_waist_x->value;
    if (c.cavity.measured_waist_y) j["cavity"]["measured_waist_y_m"] = c.cavity.measured_waist_y->value;
    json sites = json::array();
    for (const auto& s : c.array.sites) sites.push_back(vec(s));
    j["array"] = {{"sites_m", sites}, {"trap_depth_k", c.array.trap_depth_k}};
    if (!c.array.occupancy.empty()) j["array"]["occupancy"] = c.array.occupancy;
    const auto& s = c.spectrum;
    j["spectrum"] = {{"n_atoms", s.n_atoms},
                     {"cooperativity", s.cooperativity},
                     {"delta_ac_hz", s.delta_ac.value},
                     {"exposure_s", s.exposure_s},
                     {"peak_rate_per_s", s.peak_rate},
                     {"scan_start_hz", s.scan_start.value},
                     {"scan_stop_hz", s.scan_stop.value},
                     {"scan_points", s.scan_points},
                     {"fit_peaks", s.fit_peaks}};
    const auto& r = c.rydberg;
    j["rydberg"] = {{"omega_hz", r.omega.value},
                    {"detuning_hz", r.detuning.value},
                    {"group_spacing_m", r.group_spacing.value},
                    {"max_group_size", r.max_group_size},
                    {"sigma_delta_hz", r.sigma_delta.value},
                    {"sigma_omega_rel", r.sigma_omega_rel},
                    {"stark_ramp_shift_hz", r.stark_ramp_shift.value},
                    {"t_max_s", r.t_max_s},
                    {"time_points", r.time_points},
                    {"shots", r.shots},
                    {"detection_flip_prob", r.detection_flip_prob}};
    const auto& e = c.electrostatics;
    j["electrostatics"] = {{"extent_m", e.extent_m},
                           {"grid_points", e.grid_points},
                           {"sor_omega", e.omega},
                           {"tol", e.tol},
                           {"max_iters", e.max_iters},
                           {"piezo_distance_m", e.piezo_distance_m},
                           {"piezo_radius_m", e.piezo_radius_m},
                           {"piezo_length_m", e.piezo_length_m},
                           {"shield_clearance_m", e.shield_clearance_m},
                           {"shield_wall_m", e.shield_wall_m},
                           {"aperture_m", e.aperture_m},
                           {"voltages_v", e.voltages_v},
                           {"probe_m", vec(e.probe_m)},
                           {"stray_field_v_per_m", vec(e.stray_field_v_per_m)},
                           {"calibration_shift_hz", e.calibration_shift.value},
                           {"calibration_voltage_v", e.calibration_voltage_v}};
    const auto& h = c.holography;
    j["holography"] = {{"grid_size", h.grid_size},   {"iterations", h.iterations}, {"spot_rows", h.spot_rows},
                       {"spot_cols", h.spot_cols},   {"spot_pitch", h.spot_pitch}, {"center_row", h.center_row},
                       {"center_col", h.center_col}};
    const auto& d = c.detection;
    j["detection"] = {{"loading", d.loading},
                      {"fidelity", d.fidelity},
                      {"survival", d.survival},
                      {"n_records", d.n_records},
                      {"background_mean_counts", d.background_mean},
                      {"atom_mean_counts", d.atom_mean},
                      {"lifetime_s", d.lifetime_s},
                      {"lifetime_atoms", d.lifetime_atoms},
                      {"lifetime_points", d.lifetime_points},
                      {"lifetime_max_s", d.lifetime_max_s}};
    return j;
}

}  // namespace rydcav
