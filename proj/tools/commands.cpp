#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "rydcav/atom_light.hpp"
#include "rydcav/cavity.hpp"
#include "rydcav/csv.hpp"
#include "rydcav/detection.hpp"
#include "rydcav/dynamics.hpp"
#include "rydcav/electrostatics.hpp"
#include "rydcav/fit.hpp"
#include "rydcav/holography.hpp"
#include "rydcav/rng.hpp"

namespace rydcav::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Distinct sub-seeds per command so commands never share random streams.
std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t tag) { return splitmix64(seed ^ splitmix64(tag)); }

void write_json(const fs::path& p, const json& j) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << j.dump(2) << '\n';
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

struct SpectrumRun {
    std::vector<double> x;
    std::vector<std::int64_t> counts;
    analysis::LorentzianSumFit fit;
};

SpectrumRun spectrum_run(const ExperimentConfig& cfg, std::optional<FrequencyHz> shift, std::uint64_t seed) {
    const auto& s = cfg.spectrum;
    cavity::SpectrumRequest req;
    req.scan = cavity::linear_scan(s.scan_start, s.scan_stop, s.scan_points);
    req.exposure_s = s.exposure_s;
    req.peak_rate = s.peak_rate;
    req.atoms_shift = shift;
    SpectrumRun run;
    run.counts = cavity::simulate_spectrum(cfg.cavity.family, req, seed);
    std::vector<double> y(run.counts.begin(), run.counts.end());
    for (const auto& f : req.scan) run.x.push_back(f.value);
    // Poisson variance, floored at one count
    std::vector<double> w(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) w[i] = 1.0 / std::max(y[i], 1.0);
    run.fit = analysis::fit_lorentzian_sum(run.x, y, s.fit_peaks, cfg.cavity.family, w);
    return run;
}

json peaks_json(const analysis::LorentzianSumFit& f) {
    json peaks = json::array();
    for (const auto& p : f.peaks)
        peaks.push_back({{"center_hz", p.center.value},
                         {"center_sigma_hz", finite_or_null(p.center_sigma.value)},
                         {"linewidth_hz", p.width.value},
                         {"linewidth_sigma_hz", finite_or_null(p.width_sigma.value)},
                         {"amplitude_counts", p.amplitude},
                         {"amplitude_sigma_counts", finite_or_null(p.amplitude_sigma)}});
    return {{"background_counts", f.background},
            {"peaks", peaks},
            {"converged", f.raw.converged},
            {"singular", f.raw.singular},
            {"iterations", f.raw.iterations},
            {"rss", f.raw.rss},
            {"message", f.raw.message}};
}

void flag_unless(CommandOutcome& out, bool good, const std::string& why) {
    if (!good) {
        out.ok = false;
        out.flags.push_back(why);
    }
}

std::string timestamp_label() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

}  // namespace

// --- cavity spectrum --------------------------------------------------------

CommandOutcome cmd_cavity_spectrum(const ExperimentConfig& cfg, const fs::path& dir) {
    CommandOutcome out;
    const auto& s = cfg.spectrum;
    const FrequencyHz gamma = cfg.species.gamma_e;
    const FrequencyHz kappa = cfg.cavity.kappa;
    const FrequencyHz injected = cavity::dispersive_shift(s.n_atoms, s.cooperativity, gamma, kappa, s.delta_ac);

    const SpectrumRun empty = spectrum_run(cfg, std::nullopt, sub_seed(cfg.rng_seed, 11));
    const SpectrumRun atoms = spectrum_run(cfg, injected, sub_seed(cfg.rng_seed, 12));

    for (const auto& [name, run] : {std::pair{"spectrum_empty.csv", &empty}, std::pair{"spectrum_atoms.csv", &atoms}}) {
        csv::Writer w(dir / name, {"delta_pc_hz", "counts", "exposure_s"});
        for (std::size_t i = 0; i < run->x.size(); ++i)
            w.row({run->x[i], static_cast<double>(run->counts[i]), s.exposure_s});
        out.files.push_back(name);
    }

    // Inverse-variance mean of the per-peak centre displacements.
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < empty.fit.peaks.size(); ++k) {
        const double d = atoms.fit.peaks[k].center.value - empty.fit.peaks[k].center.value;
        const double var = std::pow(atoms.fit.peaks[k].center_sigma.value, 2) +
                           std::pow(empty.fit.peaks[k].center_sigma.value, 2);
        if (!(var > 0.0) || !std::isfinite(var)) continue;
        num += d / var;
        den += 1.0 / var;
    }
    const double shift = den > 0.0 ? num / den : atoms.fit.peaks[0].center.value - empty.fit.peaks[0].center.value;
    const double shift_sigma = den > 0.0 ? 1.0 / std::sqrt(den) : INFINITY;
    // C = 4 delta_N Delta_ac / (N Gamma kappa)
    const double c_per_hz = s.n_atoms > 0.0 ? 4.0 * s.delta_ac.value / (s.n_atoms * gamma.value * kappa.value) : NAN;
    const double c_inferred = shift * c_per_hz;
    const double c_sigma = shift_sigma * std::abs(c_per_hz);

    json summary = {{"injected_shift_hz", injected.value},
                    {"measured_shift_hz", shift},
                    {"measured_shift_sigma_hz", finite_or_null(shift_sigma)},
                    {"cooperativity_inferred", finite_or_null(c_inferred)},
                    {"cooperativity_sigma", finite_or_null(c_sigma)},
                    {"n_atoms", s.n_atoms},
                    {"delta_ac_hz", s.delta_ac.value},
                    {"gamma_e_hz", gamma.value},
                    {"kappa_hz", kappa.value},
                    {"fsr_hz", cavity::fsr(cfg.cavity.geometry.length).value},
                    {"fit_empty", peaks_json(empty.fit)},
                    {"fit_atoms", peaks_json(atoms.fit)}};
    const auto mode = cavity::mode_waist(cfg.cavity.geometry, kappa);
    summary["ideal_mode"] = {{"waist_m", mode.waist_x.value},
                             {"rayleigh_range_m", mode.rayleigh_range.value},
                             {"finesse", mode.finesse},
                             {"cooperativity", cavity::cooperativity(mode.finesse, cfg.cavity.geometry.wavelength,
                                                                     mode.waist_x, mode.waist_y)}};
    write_json(dir / "fit.json", summary);
    out.files.push_back("fit.json");
    flag_unless(out, empty.fit.raw.authoritative(), "empty-cavity fit did not converge");
    flag_unless(out, atoms.fit.raw.authoritative(), "with-atoms fit did not converge");
    out.summary = std::move(summary);
    return out;
}

// --- collective Rabi ----------------------------------------------------------

CommandOutcome cmd_blockade_rabi(const ExperimentConfig& cfg, const fs::path& dir) {
    CommandOutcome out;
    const auto& r = cfg.rydberg;
    const auto group = dynamics::square_group(r.group_spacing);
    const auto times = linspace(0.0, r.t_max_s, r.time_points);

    csv::Writer traj(dir / "trajectories.csv", {"time_s", "p0", "p1", "p2plus", "p_le1", "n_group"});
    out.files.push_back("trajectories.csv");

    json groups = json::array();
    double omega1 = 0.0;
    for (int n = 1; n <= r.max_group_size; ++n) {
        dynamics::ScanRequest req;
        req.positions.assign(group.begin(), group.begin() + n);
        req.c6 = cfg.species.c6;
        req.drive = {r.omega, r.detuning};
        req.noise = {r.sigma_delta, r.sigma_omega_rel, r.stark_ramp_shift};
        req.times = times;
        req.shots = r.shots;
        req.detection_flip_prob = r.detection_flip_prob;
        const auto res = dynamics::collective_rabi_scan(req, sub_seed(cfg.rng_seed, 100 + n));
        for (const auto& rec : res.records) {
            const auto& p = rec.excitation_counts;
            double p2 = 0.0;
            for (std::size_t k = 2; k < p.size(); ++k) p2 += p[k];
            traj.row({rec.time, p[0], p.size() > 1 ? p[1] : 0.0, p2, rec.p_le1, static_cast<double>(n)});
        }
        if (n == 1) omega1 = res.omega_fit.value;
        const double ratio = omega1 > 0.0 ? res.omega_fit.value / omega1 : NAN;
        groups.push_back({{"n", n},
                          {"omega_fit_hz", res.omega_fit.value},
                          {"omega_sigma_hz", finite_or_null(res.fit.sigmas.omega.value)},
                          {"omega_ratio", finite_or_null(ratio)},
                          {"sqrt_n", std::sqrt(static_cast<double>(n))},
                          {"tau_s", finite_or_null(res.tau_fit)},
                          {"tau_sigma_s", finite_or_null(res.fit.sigmas.tau)},
                          {"tau_is_lower_bound", res.fit.tau_is_lower_bound},
                          {"quality_factor", finite_or_null(res.quality_factor)},
                          {"max_double_excitation", dynamics::double_excitation_fraction(res)},
                          {"fit_converged", res.fit_ok}});
        flag_unless(out, res.fit_ok, fmt::format("damped-cosine fit failed for N = {}", n));
    }
    const auto vmat = dynamics::interaction_matrix(group, cfg.species.c6);
    json summary = {{"groups", groups},
                    {"omega_hz", r.omega.value},
                    {"c6_hz_m6", cfg.species.c6},
                    {"group_spacing_m", r.group_spacing.value},
                    {"blockade_radius_m", atom_light::blockade_radius(cfg.species.c6, r.omega).value},
                    {"v_nearest_hz", vmat(0, 1)},
                    {"v_diagonal_hz", vmat(0, 3)}};
    write_json(dir / "summary.json", summary);
    out.files.push_back("summary.json");
    out.summary = std::move(summary);
    return out;
}

// --- Stark sweep ----------------------------------------------------------------

CommandOutcome cmd_stark_sweep(const ExperimentConfig& cfg, const fs::path& dir) {
    CommandOutcome out;
    const auto& e = cfg.electrostatics;
    electrostatics::AssemblyGeometry geom;
    geom.extent = e.extent_m;
    geom.points = e.grid_points;
    geom.piezo_distance = e.piezo_distance_m;
    geom.piezo_radius = e.piezo_radius_m;
    geom.piezo_length = e.piezo_length_m;
    geom.shield_clearance = e.shield_clearance_m;
    geom.shield_wall = e.shield_wall_m;
    geom.aperture = e.aperture_m;
    electrostatics::SolverOptions opts;
    opts.tol = e.tol;
    opts.max_iters = e.max_iters;
    opts.omega = e.omega;

    // One piezo driven, the other grounded: a symmetric pair cancels at the centre.
    auto builder = [&](bool shielded) {
        return [&, shielded](double v) {
            auto scene = electrostatics::build_shield_scene(shielded, v, 0.0, geom);
            scene.stray_field = e.stray_field_v_per_m;
            return scene;
        };
    };

    const auto cal_unshielded = electrostatics::solve(builder(false)(e.calibration_voltage_v), opts);
    const auto cal_shielded = electrostatics::solve(builder(true)(e.calibration_voltage_v), opts);
    flag_unless(out, cal_unshielded.converged && cal_shielded.converged, "calibration solve did not converge");
    const auto shielding = electrostatics::shielding_factor(cal_unshielded, cal_shielded, e.probe_m);

    double alpha = cfg.species.rydberg_polarizability;
    const bool calibrated = alpha == 0.0;
    if (calibrated) {
        const double e_cal = electrostatics::field_at(cal_shielded, e.probe_m).magnitude;
        alpha = e_cal > 0.0 ? atom_light::polarizability_for_shift(e.calibration_shift, e_cal) : 0.0;
        flag_unless(out, e_cal > 0.0, "shielded calibration field is zero; polarizability undetermined");
    }

    // Calibration-voltage solves are reused; only the other voltages are solved afresh.
    auto sweep = [&](bool shielded, const electrostatics::PotentialGrid& cached) {
        std::vector<double> todo;
        for (double v : e.voltages_v)
            if (v != e.calibration_voltage_v) todo.push_back(v);
        auto pts = electrostatics::stark_sweep(builder(shielded), todo, alpha, e.probe_m, opts);
        std::vector<electrostatics::StarkPoint> all;
        std::size_t j = 0;
        for (double v : e.voltages_v) {
            if (v == e.calibration_voltage_v) {
                const double mag = electrostatics::field_at(cached, e.probe_m).magnitude;
                all.push_back({v, mag, atom_light::stark_shift(alpha, mag), cached.residual, cached.converged});
            } else {
                all.push_back(pts[j++]);
            }
        }
        return all;
    };
    const auto unshielded = sweep(false, cal_unshielded);
    const auto shielded = sweep(true, cal_shielded);

    csv::Writer w(dir / "stark_sweep.csv", {"voltage_v", "e_unshielded_v_per_m", "shift_unshielded_hz",
                                             "e_shielded_v_per_m", "shift_shielded_hz"});
    out.files.push_back("stark_sweep.csv");
    json points = json::array();
    for (std::size_t i = 0; i < unshielded.size(); ++i) {
        w.row({unshielded[i].voltage, unshielded[i].e_field, unshielded[i].shift.value, shielded[i].e_field,
               shielded[i].shift.value});
        flag_unless(out, unshielded[i].converged && shielded[i].converged,
                    fmt::format("solver did not converge at {} V", unshielded[i].voltage));
    }

    const double suppression = shielding.ratio * shielding.ratio;  // shift goes as E^2
    for (const auto& [name, grid] : {std::pair{"slice_unshielded.csv", &cal_unshielded},
                                     std::pair{"slice_shielded.csv", &cal_shielded}}) {
        std::ofstream os(dir / name);
        electrostatics::write_slice_csv(os, *grid, 1, grid->n / 2);
        out.files.push_back(name);
    }
    json summary = {{"shielding_factor", shielding.ratio},
                    {"shielding_is_lower_bound", shielding.lower_bound},
                    {"shift_suppression", suppression},
                    {"e_unshielded_v_per_m", shielding.e_unshielded},
                    {"e_shielded_v_per_m", shielding.e_shielded},
                    {"calibration_voltage_v", e.calibration_voltage_v},
                    {"polarizability_hz_m2_per_v2", alpha},
                    {"polarizability_calibrated", calibrated},
                    {"residual_unshielded", cal_unshielded.residual},
                    {"residual_shielded", cal_shielded.residual},
                    {"iterations_unshielded", cal_unshielded.iterations},
                    {"iterations_shielded", cal_shielded.iterations},
                    {"grid_points", e.grid_points}};
    write_json(dir / "summary.json", summary);
    out.files.push_back("summary.json");
    out.summary = std::move(summary);
    return out;
}

// --- holography -------------------------------------------------------------

CommandOutcome cmd_holography(const ExperimentConfig& cfg, const fs::path& dir) {
    CommandOutcome out;
    const auto& h = cfg.holography;
    const auto target =
        holography::TargetPattern::grid(h.spot_rows, h.spot_cols, h.spot_pitch, h.center_row, h.center_col);
    const auto n = static_cast<std::size_t>(h.grid_size);
    const auto res = holography::weighted_gs(target, h.iterations, n, sub_seed(cfg.rng_seed, 31));

    {
        std::ofstream os(dir / "mask.pgm", std::ios::binary);
        holography::write_pgm16(os, res.mask);
        out.files.push_back("mask.pgm");
    }
    double mean = 0.0;
    for (double v : res.spot_intensities) mean += v;
    mean /= static_cast<double>(res.spot_intensities.size());
    csv::Writer w(dir / "spots.csv", {"row", "col", "target_weight", "intensity", "relative_intensity"});
    for (std::size_t i = 0; i < target.spots.size(); ++i)
        w.row({static_cast<double>(target.spots[i].row), static_cast<double>(target.spots[i].col),
               target.spots[i].weight, res.spot_intensities[i], res.spot_intensities[i] / mean});
    out.files.push_back("spots.csv");

    json summary = {{"uniformity", res.uniformity},
                    {"efficiency", res.efficiency},
                    {"spots", target.spots.size()},
                    {"grid_size", h.grid_size},
                    {"iterations", h.iterations},
                    {"uniformity_history", res.uniformity_history}};
    write_json(dir / "summary.json", summary);
    out.files.push_back("summary.json");
    out.summary = std::move(summary);
    return out;
}

// --- detection statistics -----------------------------------------------------

CommandOutcome cmd_detection_stats(const ExperimentConfig& cfg, const fs::path& dir) {
    CommandOutcome out;
    const auto& d = cfg.detection;
    analysis::DetectionParams params;
    params.loading = d.loading;
    params.survival = d.survival;
    // imaging fidelity 1 - f (1 - f) solved for the per-image flip probability
    params.flip_prob = 0.5 * (1.0 - std::sqrt(std::max(0.0, 1.0 - 4.0 * (1.0 - d.fidelity))));
    params.background_mean = d.background_mean;
    params.atom_mean = d.atom_mean;
    const auto data = analysis::synth_detection_data(params, d.n_records, sub_seed(cfg.rng_seed, 41));
    const auto stats = analysis::three_image_stats(data.records);

    json thr = nullptr;
    bool unimodal = false;
    if (data.counts.size() >= 100) {
        const auto t = analysis::histogram_threshold(data.counts);
        unimodal = t.unimodal;
        thr = {{"threshold_counts", t.threshold},
               {"fidelity_estimate", t.fidelity},
               {"unimodal", t.unimodal},
               {"background", {{"weight", t.background.weight}, {"mean", t.background.mean}, {"sigma", t.background.sigma}}},
               {"atom", {{"weight", t.atom.weight}, {"mean", t.atom.mean}, {"sigma", t.atom.sigma}}}};
    }

    const auto times = linspace(0.0, d.lifetime_max_s, d.lifetime_points);
    const auto surv = analysis::synth_survival_curve(d.lifetime_s, d.lifetime_atoms, times, sub_seed(cfg.rng_seed, 42));
    json lifetime = nullptr;
    bool lifetime_ok = false;
    try {
        const auto fit = analysis::fit_exponential(times, surv);
        lifetime_ok = fit.raw.authoritative();
        const double z = (fit.lifetime - d.lifetime_s) / fit.lifetime_sigma;
        lifetime = {{"lifetime_s", finite_or_null(fit.lifetime)},
                    {"lifetime_sigma_s", finite_or_null(fit.lifetime_sigma)},
                    {"amplitude", fit.amplitude},
                    {"unbounded", fit.unbounded},
                    {"truth_s", d.lifetime_s},
                    {"z", finite_or_null(z)},
                    {"converged", fit.raw.converged}};
    } catch (const std::invalid_argument& ex) {
        lifetime = {{"error", ex.what()}};
    }

    auto estimate = [](const analysis::Proportion& p, double truth) {
        const double z = p.sigma > 0.0 ? (p.value - truth) / p.sigma : (p.value == truth ? 0.0 : INFINITY);
        return json{{"estimate", p.value}, {"sigma", p.sigma}, {"ci_lo", p.lo}, {"ci_hi", p.hi},
                    {"truth", truth},      {"z", finite_or_null(z)}, {"within_2sigma", std::abs(z) <= 2.0}};
    };
    json summary = {{"n_records", d.n_records},
                    {"loading", estimate(stats.loading, d.loading)},
                    {"imaging_fidelity", estimate(stats.imaging_fidelity, d.fidelity)},
                    {"survival", estimate(stats.survival, d.survival)},
                    {"survival_uncorrected", stats.survival_raw},
                    {"flip_rate", stats.flip_rate},
                    {"threshold", thr},
                    {"lifetime", lifetime}};
    write_json(dir / "detection_stats.json", summary);
    out.files.push_back("detection_stats.json");
    flag_unless(out, lifetime_ok, "lifetime fit did not converge");
    flag_unless(out, !unimodal, "count histogram is unimodal");
    out.summary = std::move(summary);
    return out;
}

// --- dispatch -------------------------------------------------------------------

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"cavity-spectrum", "blockade-rabi", "stark-sweep", "holography",
                                                   "detection-stats"};
    return names;
}

namespace {

CommandOutcome dispatch(const std::string& name, const ExperimentConfig& cfg, const fs::path& dir) {
    if (name == "cavity-spectrum") return cmd_cavity_spectrum(cfg, dir);
    if (name == "blockade-rabi") return cmd_blockade_rabi(cfg, dir);
    if (name == "stark-sweep") return cmd_stark_sweep(cfg, dir);
    if (name == "holography") return cmd_holography(cfg, dir);
    if (name == "detection-stats") return cmd_detection_stats(cfg, dir);
    throw std::invalid_argument("unknown command: " + name);
}

json metadata(const RunRequest& req) {
    // Species constants that the experiment never states explicitly.
    return {{"species_profile", req.config.species.name},
            {"gamma_e_hz", req.config.species.gamma_e.value},
            {"d2_wavelength_m", req.config.species.d2_wavelength.value},
            {"defaults_applied", req.defaults_applied}};
}

}  // namespace

RunReport run_command(const RunRequest& req) {
#ifdef _OPENMP
    if (req.threads > 0) omp_set_num_threads(req.threads);
#endif
    const std::string label = req.label.empty() ? timestamp_label() : req.label;
    std::vector<std::string> names = req.command == "all" ? command_names() : std::vector<std::string>{req.command};
    RunReport report;
    for (const auto& name : names) {
        const fs::path dir = req.out_root / name / label;
        fs::create_directories(dir);
        const auto t0 = std::chrono::steady_clock::now();
        CommandOutcome outcome;
        try {
            outcome = dispatch(name, req.config, dir);
        } catch (const std::exception& ex) {
            outcome.ok = false;
            outcome.flags.push_back(ex.what());
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        json manifest = {{"command", name},
                         {"toolkit_version", kToolkitVersion},
                         {"seed", req.config.rng_seed},
                         {"label", label},
                         {"config", to_json(req.config)},
                         {"metadata", metadata(req)},
                         {"outputs", outcome.files},
                         {"ok", outcome.ok},
                         {"flags", outcome.flags},
                         {"wall_time_s", wall}};
        write_json(dir / "manifest.json", manifest);
        for (const auto& f : outcome.flags) fmt::print(stderr, "{}: {}\n", name, f);
        fmt::print("{}: {} ({:.2f} s) -> {}\n", name, outcome.ok ? "ok" : "FLAGGED", wall, dir.string());
        if (!outcome.ok) report.exit_code = 1;
        report.run_dirs.push_back(dir);
    }
    return report;
}

RunRequest request_from_manifest(const json& manifest) {
    RunRequest req;
    req.command = manifest.at("command").get<std::string>();
    auto parsed = parse_config(manifest.at("config"));
    if (!parsed.ok()) {
        std::string msg = "manifest config is invalid:";
        for (const auto& e : parsed.errors) msg += fmt::format(" {}: {};", e.path, e.message);
        throw std::invalid_argument(msg);
    }
    req.config = *parsed.config;
    req.config.rng_seed = manifest.at("seed").get<std::uint64_t>();
    if (manifest.contains("metadata") && manifest["metadata"].contains("defaults_applied"))
        req.defaults_applied = manifest["metadata"]["defaults_applied"].get<std::vector<std::string>>();
    return req;
}

}  // namespace rydcav::cli
